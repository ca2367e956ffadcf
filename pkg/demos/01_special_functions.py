# Special functions behind the closed forms
#
# The AF series needs Tricomi's U at large first argument, the DF integral
# needs Gamma survival functions, and both run on hand-built quadrature.

# %%
import numpy as np
from scipy import special

from relaycf.specfun import exp_scaled_e1, gauss_laguerre, log_tricomi_u, reg_upper_gamma, tricomi_u

# %% U(1, 1, z) = e^z E1(z); the scaled exponential integral avoids overflow
for z in (0.01, 1.0, 50.0):
    print(f"z={z:6g}  U(1,1,z)={tricomi_u(1.0, 1.0, z):.15g}  e^z E1(z)={exp_scaled_e1(z):.15g}")

# %% log U stays finite where U itself underflows
print("log U(400, 3, 0.01) =", log_tricomi_u(400.0, 3.0, 0.01))

# %% integer-order Gamma survival function against scipy
x = np.linspace(0, 10, 6)
print(np.max(np.abs(reg_upper_gamma(3, x) - special.gammaincc(3, x))))

# %% Gauss-Laguerre rule: exact for polynomials of degree < 2K
rule = gauss_laguerre(30)
print("int x^5 e^-x =", rule.integrate(lambda v: v**5), "(exact 120)")
