"""Average consumption factor (CF) and ergodic capacity of AF/DF chains.

All capacities are in bits (per unit of normalized bandwidth) and the CF is
``capacity / total consumed power``.  The internal ``*_nats`` kernels accept
dual-number powers so that the optimizers get exact gradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from . import autodiff as ad
from .channel import Protocol, RelayChain, avg_snrs, e2e_snr_af, e2e_snr_df, total_power
from .errors import ConfigError, DomainError, NumericalError
from .specfun import QuadratureRule, exp_scaled_e1, gauss_laguerre, log_gamma_tricomi_u, reg_upper_gamma

__all__ = [
    "SeriesControl",
    "CfResult",
    "instantaneous_cf",
    "cf_af",
    "cf_df",
    "cf_df_rayleigh",
    "capacity_af",
    "capacity_df",
    "average_cf",
    "ergodic_capacity",
    "af_series_plan",
    "af_hop_factors",
    "df_hop_survivals",
]

LN2 = math.log(2.0)
DEFAULT_QUADRATURE_ORDER = 30


@dataclass(frozen=True)
class SeriesControl:
    """Truncation controls for the AF series.

    Terms are summed up to ``max_terms``; the sum stops early once a term
    falls below ``rel_tol`` times the partial sum.  When the series has not
    converged by then, the remainder is added through an Euler-Maclaurin
    integral if ``tail`` is set, otherwise :class:`NumericalError` is raised.
    """

    max_terms: int = 200
    rel_tol: float = 1e-12
    tail: bool = True

    def __post_init__(self):
        if int(self.max_terms) != self.max_terms or self.max_terms < 10:
            raise ConfigError(f"max_terms must be an integer >= 10, got {self.max_terms}")
        if not self.rel_tol > 0:
            raise ConfigError(f"rel_tol must be positive, got {self.rel_tol}")


@dataclass(frozen=True)
class CfResult:
    cf: float
    ergodic_capacity: float
    total_power: float
    terms_used: int = 0


def instantaneous_cf(chain: RelayChain, pt, gammas):
    """``B log2(1 + gamma_e2e) / P_tot`` for instantaneous hop SNRs.

    ``gammas`` may be a 2-D array of draws (one row per realisation).
    """
    g = np.asarray(gammas, dtype=float)
    if g.shape[-1] != chain.n:
        raise ConfigError(f"expected {chain.n} hop SNRs, got {g.shape[-1]}")
    if np.any(g < 0):
        raise DomainError("instantaneous SNRs must be non-negative")
    ptot = float(total_power(chain, np.asarray(pt, dtype=float)))
    dead = np.any(g == 0, axis=-1)
    safe = np.where(g == 0, 1.0, g)
    if chain.protocol is Protocol.AF:
        e2e = e2e_snr_af(safe)
    else:
        e2e = e2e_snr_df(safe)
    e2e = np.where(dead, 0.0, e2e)
    out = chain.bandwidth * np.log1p(e2e) / LN2 / ptot
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# AF: sum_j (1/j) prod_i M_i(j), with M_i(s) = E[(g/(1+g))^s] for a Gamma
# distributed hop SNR g, i.e.
#   M_i(s) = (m/gbar)^m Gamma(s+m)/Gamma(m) U(s+m, 1+m, m/gbar).
# The index set holds the integers 1..J+1 followed by the nodes of the
# remainder integral over s in [J+1/2, inf), substituted as s = (J+1/2) e^r.

_TAIL_SPAN = 30.0
_TAIL_NODES = 100


@dataclass(frozen=True)
class SeriesPlan:
    index: np.ndarray  # series indices s (integers first, then tail nodes)
    weights: np.ndarray  # sum ~ sum_q weights[q] prod_i M_i(index[q])
    n_terms: int  # J


@lru_cache(maxsize=32)
def af_series_plan(max_terms: int = 200) -> SeriesPlan:
    J = int(max_terms)
    j = np.arange(1, J + 2, dtype=float)
    w = 1.0 / j
    w[J] = 0.0
    # Euler-Maclaurin: sum_{j>J} t(j) = int_{J+1/2} t + t'(J+1/2)/24 + ...
    w[J] += 1.0 / (24.0 * (J + 1))
    w[J - 1] -= 1.0 / (24.0 * J)
    r, wr = np.polynomial.legendre.leggauss(_TAIL_NODES)
    r = 0.5 * _TAIL_SPAN * (r + 1.0)
    wr = 0.5 * _TAIL_SPAN * wr
    s = (J + 0.5) * np.exp(r)
    return SeriesPlan(np.concatenate([j, s]), np.concatenate([w, wr]), J)


def af_hop_factors(m: int, gbar, index, coefficient: str = "gamma"):
    """log M(s) for one hop at average SNR ``gbar`` (float or Dual).

    ``coefficient="factorial"`` replaces Gamma(m) by m!, the alternative
    normalization printed in some statements of the series; it is kept only
    as a negative control.
    """
    z = m / gbar
    lz = ad.log(z)
    out = log_gamma_tricomi_u(np.asarray(index, dtype=float) + m, 1.0 + m, z) + m * lz - special.gammaln(m)
    if coefficient == "factorial":
        out = out - math.log(m)
    elif coefficient != "gamma":
        raise ConfigError(f"unknown coefficient form {coefficient!r}")
    return out


def _af_series(ms, gbars, ctrl: SeriesControl, coefficient="gamma"):
    """Returns (sum in nats, terms used); dual-aware in ``gbars``."""
    plan = af_series_plan(ctrl.max_terms)
    J = plan.n_terms
    head = min(32, J)

    def logprod(idx):
        tot = 0.0
        for i, m in enumerate(ms):
            tot = tot + af_hop_factors(int(m), gbars[i], idx, coefficient)
        return tot

    def first_small(tv):
        # stop once the remainder, estimated from the local term ratio r as
        # t r / (1 - r), is negligible; terms decay sub-geometrically, so
        # the last term alone understates the remainder
        r = tv[1:] / np.maximum(tv[:-1], 1e-300)
        with np.errstate(divide="ignore"):
            rest = np.where(r < 1, tv[1:] * r / (1 - r), np.inf)
        hit = np.nonzero((rest <= ctrl.rel_tol * np.cumsum(tv)[1:]) | (tv[1:] == 0))[0]
        return int(hit[0]) + 2 if hit.size else None

    # cheap pass over the leading terms; most moderate-SNR sums stop here
    first = ad.exp(logprod(plan.index[:head])) * plan.weights[:head]
    k = first_small(ad.value(first))
    if k is not None:
        return ad.dsum(first[:k]), k
    rest = ad.exp(logprod(plan.index[head:])) * plan.weights[head:]
    body = rest[: J - head]  # plain 1/j terms up to j = J
    tv = np.concatenate([ad.value(first), ad.value(body)])
    k = first_small(tv)
    if k is not None:
        return ad.dsum(first) + ad.dsum(body[: k - head]), k
    if not ctrl.tail:
        raise NumericalError(f"AF series not converged within {J} terms", partial=float(np.sum(tv)))
    return ad.dsum(first) + ad.dsum(rest), J


def _positive_or_dead(pt):
    return not np.any(np.asarray(ad.value(pt)) <= 0)


def _capacity_af_nats(chain: RelayChain, pt, ctrl: SeriesControl, coefficient="gamma"):
    if not _positive_or_dead(pt):
        return 0.0, 0
    return _af_series(chain.ms, avg_snrs(chain, pt), ctrl, coefficient)


# ---------------------------------------------------------------------------
# DF: E[ln(1 + min g_i)] = int_0^inf S(u)/(1+u) du with S the product of hop
# survival functions.  For integer m, S(u) = exp(-L u) P(u) with
# L = sum m_i/gbar_i and P a polynomial, so v = L u turns the integral into
# a Gauss-Laguerre integral of P(v/L)/(L+v).  When the pole at v = -L comes
# close to the origin it is subtracted and integrated exactly:
#   int e^-v (P(u)-P(-1))/(L+v) dv  +  P(-1) e^L E1(L).

_POLE_SWITCH = 4.0


def _poly_factor(m: int, x):
    """sum_{k<m} x^k / k!  (x may be a Dual)."""
    term = 1.0
    tot = 1.0
    for k in range(1, m):
        term = term * x / k
        tot = tot + term
    return tot


def _capacity_df_nats(chain: RelayChain, pt, rule: QuadratureRule | None = None):
    if not _positive_or_dead(pt):
        return 0.0
    rule = rule or gauss_laguerre(DEFAULT_QUADRATURE_ORDER)
    gbars = avg_snrs(chain, pt)
    zs = [int(m) / gbars[i] for i, m in enumerate(chain.ms)]
    lam = zs[0]
    for z in zs[1:]:
        lam = lam + z
    v = rule.nodes
    u = v / lam
    poly = 1.0
    pole = 1.0
    for z, m in zip(zs, chain.ms):
        poly = poly * _poly_factor(int(m), z * u)
        pole = pole * _poly_factor(int(m), -z)
    if ad.value(lam) >= _POLE_SWITCH:
        return ad.dsum(poly * rule.weights / (lam + v))
    quot = (poly - pole) * rule.weights / (lam + v)
    return ad.dsum(quot) + pole * exp_scaled_e1(lam)


def df_hop_survivals(m: int, gbar, u):
    """Survival ``1 - P(m, m u / gbar)`` of one hop at SNR thresholds ``u``."""
    return reg_upper_gamma(m, (m / gbar) * np.asarray(u, dtype=float))


def _capacity_df_log_nats(chain: RelayChain, pt, rule: QuadratureRule):
    """Gauss-Laguerre applied directly in x = ln(1+u) (slowly converging)."""
    if not _positive_or_dead(pt):
        return 0.0
    gbars = avg_snrs(chain, pt)
    x = rule.nodes
    u = np.expm1(np.minimum(x, 700.0))
    prod = 1.0
    for i, m in enumerate(chain.ms):
        prod = prod * df_hop_survivals(int(m), gbars[i], u)
    with np.errstate(over="ignore"):
        scale = np.exp(rule.log_weights + x)
    scale = np.where(np.isfinite(scale), scale, 0.0)
    return ad.dsum(prod * scale)


# ---------------------------------------------------------------------------


def _result(chain, pt, nats, terms=0) -> CfResult:
    cap = chain.bandwidth * float(ad.value(nats)) / LN2
    ptot = float(total_power(chain, np.asarray(pt, dtype=float)))
    return CfResult(cf=cap / ptot, ergodic_capacity=cap, total_power=ptot, terms_used=terms)


def _as_powers(chain, pt):
    pt = np.asarray(pt, dtype=float)
    total_power(chain, pt)  # validates shape and sign
    return pt


def cf_af(chain: RelayChain, pt, ctrl: SeriesControl | None = None, *, coefficient: str = "gamma") -> CfResult:
    """Average CF of an AF chain from the series in the Tricomi U function."""
    pt = _as_powers(chain, pt)
    nats, terms = _capacity_af_nats(chain, pt, ctrl or SeriesControl(), coefficient)
    return _result(chain, pt, nats, terms)


def cf_df(chain: RelayChain, pt, rule: QuadratureRule | None = None, *, substitution: str = "snr") -> CfResult:
    """Average CF of a DF chain by Gauss-Laguerre quadrature.

    ``substitution="snr"`` (default) integrates in the SNR domain with the
    exponential rate matched to the hop statistics; ``"log"`` applies the
    rule in ``x = ln(1 + snr)``, which needs far more nodes for the same
    accuracy.
    """
    pt = _as_powers(chain, pt)
    rule = rule or gauss_laguerre(DEFAULT_QUADRATURE_ORDER)
    if substitution == "snr":
        nats = _capacity_df_nats(chain, pt, rule)
    elif substitution == "log":
        nats = _capacity_df_log_nats(chain, pt, rule)
    else:
        raise ConfigError(f"unknown substitution {substitution!r}")
    return _result(chain, pt, nats, rule.order)


def cf_df_rayleigh(chain: RelayChain, pt) -> CfResult:
    """DF chain with all m_i = 1: capacity ``e^lam E1(lam)`` with
    ``lam = sum 1/gbar_i``."""
    if np.any(chain.ms != 1):
        raise DomainError("cf_df_rayleigh requires m = 1 on every hop")
    pt = _as_powers(chain, pt)
    if np.any(pt == 0):
        return _result(chain, pt, 0.0)
    lam = float(np.sum(1.0 / avg_snrs(chain, pt)))
    return _result(chain, pt, exp_scaled_e1(lam))


def capacity_af(chain: RelayChain, pt, ctrl: SeriesControl | None = None) -> float:
    return cf_af(chain, pt, ctrl).ergodic_capacity


def capacity_df(chain: RelayChain, pt, rule: QuadratureRule | None = None) -> float:
    return cf_df(chain, pt, rule).ergodic_capacity


def average_cf(chain: RelayChain, pt, ctrl: SeriesControl | None = None, rule: QuadratureRule | None = None) -> CfResult:
    """Dispatch on the chain's protocol."""
    if chain.protocol is Protocol.AF:
        return cf_af(chain, pt, ctrl)
    return cf_df(chain, pt, rule)


def ergodic_capacity(chain: RelayChain, pt, ctrl=None, rule=None) -> float:
    return average_cf(chain, pt, ctrl, rule).ergodic_capacity


def capacity_nats(chain: RelayChain, pt, ctrl: SeriesControl | None = None, rule: QuadratureRule | None = None):
    """E[ln(1 + gamma_e2e)]; returns a Dual when ``pt`` is one."""
    if chain.protocol is Protocol.AF:
        return _capacity_af_nats(chain, pt, ctrl or SeriesControl())[0]
    return _capacity_df_nats(chain, pt, rule)
