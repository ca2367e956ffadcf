# Closed-form average CF against a Monte-Carlo estimate
#
# A two-hop chain with unit per-watt SNR on each hop, so the transmit powers
# equal the average SNRs.

# %%
import math

from relaycf import HopProfile, McConfig, RelayChain, cf_af, cf_df, estimate_cf

pt = [1.0, 1.0]
for protocol in ("AF", "DF"):
    for m in (1, 2):
        chain = RelayChain((HopProfile(m, 1.0), HopProfile(m, 1.0)), protocol)
        closed = (cf_af if protocol == "AF" else cf_df)(chain, pt).cf
        mc = estimate_cf(chain, pt, McConfig(samples=10**6, seed=1))
        print(f"{protocol} m={m}: closed {closed:.6f}  MC {mc.mean:.6f} +- {mc.std_error:.1e}  z={mc.z_score(closed):.2f}")

# %% the Rayleigh DF chain reduces to e^L E1(L) with L = sum 1/gbar
chain = RelayChain((HopProfile(1, 1.0), HopProfile(1, 1.0)), "DF")
r = cf_df(chain, pt)
print("capacity", r.ergodic_capacity, "bits; total power", r.total_power, "W; CF", r.cf)

# %% the m! normalization of the AF series is off by a factor of m per hop
chain = RelayChain((HopProfile(2, 1.0), HopProfile(2, 1.0)), "AF")
good = cf_af(chain, pt).cf
bad = cf_af(chain, pt, coefficient="factorial").cf
print("Gamma(m):", good, " m!:", bad, " ratio", bad / good, "(1/m^2 =", 1 / 4, ")")
