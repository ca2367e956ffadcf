"""Special functions used by the closed-form metrics.

Gamma family, the Tricomi confluent hypergeometric function U, the
exponentially scaled exponential integral and Gauss-Laguerre rules.  Every
function that takes a continuous argument also accepts a
:class:`~relaycf.autodiff.Dual`, so gradients flow through them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .autodiff import Dual, elementwise, value
from .errors import ConfigError, DomainError

__all__ = [
    "QuadratureRule",
    "ln_gamma",
    "reg_lower_gamma",
    "reg_upper_gamma",
    "tricomi_u",
    "log_tricomi_u",
    "log_gamma_tricomi_u",
    "exp_scaled_e1",
    "gauss_laguerre",
]

MAX_LAGUERRE_ORDER = 200


@dataclass(frozen=True)
class QuadratureRule:
    """K-point Gauss-Laguerre rule for integrals against ``exp(-x)`` on [0, inf).

    ``log_weights`` is kept alongside ``weights`` because the weights of the
    outermost nodes underflow double precision for large orders.
    """

    order: int
    nodes: np.ndarray
    weights: np.ndarray
    log_weights: np.ndarray

    def integrate(self, f) -> float:
        """Approximate ``int_0^inf exp(-x) f(x) dx``."""
        return float(np.sum(self.weights * f(self.nodes)))


def ln_gamma(v):
    """Natural log of the Gamma function for ``v > 0``."""
    if np.any(np.asarray(value(v)) <= 0):
        raise DomainError(f"ln_gamma requires v > 0, got {value(v)}")
    return elementwise(v, special.gammaln, special.digamma)


def _check_gamma_args(a, x):
    if np.any(np.asarray(a) <= 0):
        raise DomainError(f"shape parameter must be positive, got {a}")
    if np.any(np.asarray(value(x)) < 0):
        raise DomainError(f"argument must be non-negative, got {value(x)}")


def _gamma_density(a):
    # d/dx P(a, x) = x^(a-1) e^-x / Gamma(a), in log space
    def d(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.exp((a - 1.0) * np.log(x) - x - special.gammaln(a))
        return np.where(x > 0, out, 1.0 if np.all(np.asarray(a) == 1) else 0.0)

    return d


def reg_lower_gamma(a, x):
    """Regularized lower incomplete gamma ``gamma(a, x) / Gamma(a)``."""
    _check_gamma_args(a, x)
    dens = _gamma_density(a)
    return elementwise(x, lambda v: special.gammainc(a, v), dens)


def reg_upper_gamma(a, x):
    """Survival function ``1 - reg_lower_gamma(a, x)``, without cancellation."""
    _check_gamma_args(a, x)
    dens = _gamma_density(a)
    return elementwise(x, lambda v: special.gammaincc(a, v), lambda v: -dens(v))


# ---------------------------------------------------------------------------
# Tricomi U through its integral representation
#
#   Gamma(a) U(a, b, z) = int_0^inf exp(-z t) t^(a-1) (1+t)^(b-a-1) dt
#
# With s = z t and y = log s the integrand becomes exp(phi(y)) with
#   phi(y) = a y - e^y + c log1p(e^y / z),  c = b - a - 1,
# which is log-concave for c <= 0 and decays exponentially on the left and
# double-exponentially on the right.  The trapezoidal rule on a grid sized
# from the peak curvature is then spectrally accurate.

_DROP = 80.0  # log-units below the peak at which the tails are cut


def _phi(y, a, c, z):
    ey = np.exp(y)
    return a * y - ey + c * np.log1p(ey / z)


def _peak(a, c, z):
    """Root of phi'(y) = a - e^y + c e^y/(z+e^y) by vectorized bisection."""
    lo = np.log(a / (2.0 * (1.0 + np.abs(c) / z)))
    hi = np.log(a + 1.0)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        em = np.exp(mid)
        dphi = a - em + c * em / (z + em)
        pos = dphi > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
        if np.all(hi - lo < 1e-13 * (1.0 + np.abs(mid))):
            break
    return 0.5 * (lo + hi)


def _extent(ystar, phistar, step, direction, a, c, z):
    """Distance from the peak at which phi has dropped by _DROP."""
    ext = step.copy()
    for _ in range(200):
        low = _phi(ystar + direction * ext, a, c, z) < phistar - _DROP
        if np.all(low):
            break
        ext = np.where(low, ext, ext * 1.5)
    return ext


def _log_integral_grid(a, c, z):
    a = np.atleast_1d(np.asarray(a, dtype=float))
    c = np.broadcast_to(np.asarray(c, dtype=float), a.shape)
    ystar = _peak(a, c, z)
    ey = np.exp(ystar)
    q = ey / (z + ey)
    curv = ey - c * q * (1.0 - q)
    sigma = 1.0 / np.sqrt(curv)
    phistar = _phi(ystar, a, c, z)
    left = _extent(ystar, phistar, 8.0 * sigma, -1.0, a, c, z)
    right = _extent(ystar, phistar, 8.0 * sigma, 1.0, a, c, z)
    h_target = np.minimum(0.25, 0.6 * sigma)
    npts = int(np.max(np.ceil((left + right) / h_target))) + 1
    frac = np.linspace(0.0, 1.0, npts)
    y = (ystar - left)[:, None] + (left + right)[:, None] * frac[None, :]
    h = (left + right) / (npts - 1)
    return a, c, y, h


def _log_integral(a, c, z, with_dz=False):
    """log of int exp(phi(y)) dy and optionally its z-derivative."""
    a, c, y, h = _log_integral_grid(a, c, z)
    ph = _phi(y, a[:, None], c[:, None], z)
    mx = np.max(ph, axis=1, keepdims=True)
    w = np.exp(ph - mx)
    tot = np.sum(w, axis=1)
    logint = np.log(tot) + mx[:, 0] + np.log(h)
    if not with_dz:
        return logint, None
    # d/dz phi = -c e^y / (z (z + e^y))
    ey = np.exp(y)
    dphi = -c[:, None] * ey / (z * (z + ey))
    return logint, np.sum(w * dphi, axis=1) / tot


def _log_gamma_u_quad(a, b, z):
    # fallback for b > a + 1, where the integrand need not be log-concave
    def f(t):
        return math.exp(-z * t + (a - 1) * math.log(t) + (b - a - 1) * math.log1p(t)) if t > 0 else 0.0

    val, _ = integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-13, limit=500)
    return math.log(val)


def log_gamma_tricomi_u(a, b, z):
    """``log(Gamma(a) U(a, b, z))`` for ``a > 0`` (array) and ``z > 0``.

    ``z`` may be a :class:`Dual`; the derivative uses
    ``d/dz Gamma(a)U(a,b,z) = -Gamma(a+1) U(a+1, b+1, z)`` evaluated on the
    same quadrature grid.
    """
    zv = float(value(z))
    a_arr = np.atleast_1d(np.asarray(a, dtype=float))
    if np.any(a_arr <= 0):
        raise DomainError(f"tricomi_u requires a > 0, got {a}")
    if not zv > 0:
        raise DomainError(f"tricomi_u requires z > 0, got {zv}")
    c = np.asarray(b, dtype=float) - a_arr - 1.0
    c = np.broadcast_to(c, a_arr.shape)
    if np.any(c > 0):
        if isinstance(z, Dual):
            raise DomainError("derivatives are only supported for b <= a + 1")
        out = np.array([_log_gamma_u_quad(ai, ci + ai + 1.0, zv) for ai, ci in zip(a_arr, c)])
        return out if np.ndim(a) else float(out[0])
    logint, dz = _log_integral(a_arr, c, zv, with_dz=isinstance(z, Dual))
    val = -a_arr * np.log(zv) + logint
    if isinstance(z, Dual):
        dval = -a_arr / zv + dz
        out = Dual(val, dval[:, None] * np.asarray(z.grad)[None, :])
        return out if np.ndim(a) else out[0]
    return val if np.ndim(a) else float(val[0])


def log_tricomi_u(a, b, z):
    """``log U(a, b, z)``; see :func:`log_gamma_tricomi_u`."""
    return log_gamma_tricomi_u(a, b, z) - special.gammaln(np.asarray(a, dtype=float))


def tricomi_u(a, b, z):
    """Tricomi confluent hypergeometric function U(a, b, z), z > 0."""
    lu = log_tricomi_u(a, b, z)
    if isinstance(lu, Dual):
        e = np.exp(lu.val)
        return Dual(e, np.asarray(e)[..., None] * lu.grad)
    return np.exp(lu)


# ---------------------------------------------------------------------------


def _e1_scaled_value(x):
    x = np.asarray(x, dtype=float)
    small = np.minimum(x, 50.0)
    direct = np.exp(small) * special.exp1(small)
    # e^x E1(x) = int_0^inf e^-v / (x + v) dv, smooth for large x
    rule = gauss_laguerre(30)
    big = np.maximum(x, 50.0)
    lag = np.sum(rule.weights / (big[..., None] + rule.nodes), axis=-1)
    return np.where(x <= 50.0, direct, lag)


def exp_scaled_e1(x):
    """``exp(x) * E1(x)`` for ``x > 0``; finite for arbitrarily large x."""
    if np.any(np.asarray(value(x)) <= 0):
        raise DomainError(f"exp_scaled_e1 requires x > 0, got {value(x)}")
    out = elementwise(x, _e1_scaled_value, lambda v: _e1_scaled_value(v) - 1.0 / v)
    if not isinstance(out, Dual) and np.ndim(out) == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------


def _laguerre_eval(n, x):
    """L_n(x) and L_{n-1}(x) by the three-term recurrence (vectorized in x)."""
    p1 = np.ones_like(x)
    p2 = np.zeros_like(x)
    for j in range(1, n + 1):
        p3 = p2
        p2 = p1
        p1 = ((2 * j - 1 - x) * p2 - (j - 1) * p3) / j
    return p1, p2


@lru_cache(maxsize=None)
def gauss_laguerre(order: int) -> QuadratureRule:
    """Nodes and weights of the ``order``-point Gauss-Laguerre rule.

    Initial guesses are the eigenvalues of the Laguerre Jacobi matrix; each
    root of L_K is then polished by Newton's method to a 1e-14 step (relative above 1).
    """
    if not isinstance(order, (int, np.integer)) or not 1 <= order <= MAX_LAGUERRE_ORDER:
        raise ConfigError(f"Gauss-Laguerre order must be in [1, {MAX_LAGUERRE_ORDER}], got {order}")
    n = int(order)
    i = np.arange(1, n, dtype=float)
    jacobi = np.diag(2.0 * np.arange(n) + 1.0) - np.diag(i, 1) - np.diag(i, -1)
    x, vecs = np.linalg.eigh(jacobi)
    w_eig = vecs[0] ** 2
    for _ in range(50):
        p1, p2 = _laguerre_eval(n, x)
        dp = n * (p1 - p2) / x
        step = p1 / dp
        x = x - step
        if np.all(np.abs(step) <= 1e-14 * np.maximum(x, 1.0)):
            break
    else:
        raise ConfigError(f"Laguerre roots of order {n} did not converge")
    p1, p2 = _laguerre_eval(n, x)
    dp = n * (p1 - p2) / x
    logw = -math.log(n) - np.log(np.abs(dp)) - np.log(np.abs(p2))
    # eigenvector weights are accurate in absolute terms, the derivative
    # formula in relative terms; use each where it is the better of the two
    big = w_eig > 1e-5
    logw[big] = np.log(w_eig[big])
    weights = np.exp(logw)
    for arr in (x, logw, weights):
        arr.setflags(write=False)
    return QuadratureRule(order=n, nodes=x, weights=weights, log_weights=logw)
