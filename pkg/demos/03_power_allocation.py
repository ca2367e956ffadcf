# Power allocation strategies and the critical budget
#
# Default setup: two equal hops over a unit distance, pathloss exponent 4,
# noise 0.2, amplifier efficiency 0.35.

# %%
import numpy as np

from relaycf import STRATEGIES, HopProfile, RelayChain, Scenario, allocate, average_cf

chain = Scenario(hops=2, protocol="DF").chain()
for db in (-10, -5, 0, 10, 20):
    p_tot = 10 ** (db / 10)
    line = []
    for s in STRATEGIES:
        a = allocate(s, chain, p_tot)
        line.append(f"{s}={average_cf(chain, a.powers).cf:.4f}")
    print(f"{db:4d} dB  " + "  ".join(line))

# %% beyond the critical budget the CF-optimal allocation stops spending
for db in (-8, -6, -4, 0, 20):
    a = allocate("cfopa", chain, 10 ** (db / 10))
    print(f"{db:4d} dB  used {a.budget_used:.5f} of {a.p_tot:.5f} W, KKT residual {a.kkt_residual:.1e}")

# %% an asymmetric chain: the long hop receives the larger share
chain = RelayChain((HopProfile(1, 0.3), HopProfile(1, 0.7)), "AF", n0=0.2)
for s in ("cfopa", "cfso_upa", "upa"):
    a = allocate(s, chain, 1.0)
    print(s, np.round(a.powers, 5), round(a.objective, 5))
