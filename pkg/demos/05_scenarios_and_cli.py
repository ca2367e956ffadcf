# Scenario files and the command-line tool
#
# The same computations are available from the shell as
#   relaycf sweep-hops --scenario hops.ini --strategies cfopa,upa

# %%
import io

from relaycf import parse_scenario
from relaycf.cli import COMMANDS, render

text = """
[chain]
protocol = DF
m = 1
n0 = 0.2

[power]
budget = 0db

[strategies]
use = cfopa, upa

[sweep]
protocols = DF
hop_range = 1:6
"""
sc = parse_scenario(text)
print(sc.to_ini())

# %%
table = COMMANDS["sweep-hops"](sc)
print(render(table))
print("\n".join(table.notes))
