# Hop-by-hop allocation
#
# Node n picks its power from the budget left, the hop count, and a message
# from node n-1 holding the product of the per-hop factors fixed so far.

# %%
import numpy as np

from relaycf import Scenario, cfopa, cfsopa

chain = Scenario(hops=5, protocol="AF").chain()
alloc, trace = cfsopa(chain, 1.0)
for n, msg in enumerate(trace):
    print(f"node {n}: power {alloc.powers[n]:.6f}, cumulative {msg.cumulative_power:.6f}, "
          f"first factors {np.round(msg.t_values[:3], 6)}")

# %% compared with the centralized optimum
print("cfsopa CF", alloc.objective, " cfopa CF", cfopa(chain, 1.0).objective)
