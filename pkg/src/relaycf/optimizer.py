"""Transmit-power allocation under a total budget.

Strategies: CF-optimal (``cfopa``), decentralized hop-by-hop (``cfsopa``),
CF-optimal common power (``cfso_upa``), capacity-optimal (``copa``) and the
plain equal split (``upa``).  The full-vector problems are solved by a
spectral projected-gradient ascent with exact forward-mode gradients.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from . import autodiff as ad
from .channel import Protocol, RelayChain, total_power
from .errors import ConfigError, NumericalError
from .metrics import (
    LN2,
    SeriesControl,
    af_hop_factors,
    af_series_plan,
    capacity_nats,
    df_hop_survivals,
)
from .specfun import QuadratureRule

__all__ = [
    "Allocation",
    "NodeMessage",
    "SolverOptions",
    "objective_function",
    "upa",
    "cfso_upa",
    "cfopa",
    "copa",
    "cfsopa",
    "kkt_residual",
    "df_message_rule",
    "STRATEGIES",
]

ACTIVE_FLOOR = 1e-9  # powers below this fraction of the budget count as switched off
# DF messages: composite Gauss-Legendre in x = ln(1 + u) on [0, 40]; a fixed
# rule is needed because node n cannot know the final chain's decay rate
MESSAGE_PANELS = 200
MESSAGE_NODES = 12
_MESSAGE_SPAN = 40.0
_NOISE = 1e-11  # relative objective noise tolerated by the line search


@dataclass(frozen=True)
class SolverOptions:
    grad_check: bool = False
    tol: float = 1e-8
    max_iter: int = 500
    starts: int = 5
    floor: float = 1e-12  # lower bound on each power, relative to the budget
    series: SeriesControl = field(default_factory=SeriesControl)
    rule: QuadratureRule | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ConfigError(f"max_iter must be a positive integer, got {self.max_iter}")
        if int(self.starts) != self.starts or self.starts < 1:
            raise ConfigError(f"starts must be a positive integer, got {self.starts}")
        if not 0 < self.floor < 1e-3:
            raise ConfigError(f"floor must lie in (0, 1e-3), got {self.floor}")


@dataclass(frozen=True)
class Allocation:
    powers: np.ndarray
    objective: float
    strategy: str
    kkt_residual: float
    iterations: int
    budget_used: float
    p_tot: float
    converged: bool = True

    def __post_init__(self):
        p = np.asarray(self.powers, dtype=float)
        if np.any(p < 0) or p.sum() > self.p_tot * (1 + 1e-12) + 1e-9:
            raise NumericalError(f"{self.strategy}: infeasible allocation {p} for budget {self.p_tot}")


@dataclass(frozen=True)
class NodeMessage:
    """State handed from node n to node n+1 in the decentralized scheme.

    ``t_values`` holds the product over the hops fixed so far of the per-hop
    factors at every series index (AF) or quadrature node (DF).
    ``log_t_values`` keeps the same numbers where they underflow.
    """

    cumulative_power: float
    log_t_values: np.ndarray

    @property
    def t_values(self) -> np.ndarray:
        return np.exp(self.log_t_values)


# ---------------------------------------------------------------------------
# objective


def objective_function(chain: RelayChain, kind: str = "cf", opts: SolverOptions | None = None) -> Callable:
    """``f(P, grad=False)`` for ``kind`` in {"cf", "capacity"}; with
    ``grad=True`` returns ``(value, gradient)`` by forward-mode AD."""
    opts = opts or SolverOptions()
    if kind not in ("cf", "capacity"):
        raise ConfigError(f"unknown objective {kind!r}")
    scale = chain.bandwidth / LN2

    def f(p, grad=False):
        x = ad.seed(p) if grad else np.asarray(p, dtype=float)
        out = scale * capacity_nats(chain, x, opts.series, opts.rule)
        if kind == "cf":
            out = out / total_power(chain, x)
        if not grad:
            return float(ad.value(out))
        if not ad.is_dual(out):  # dead chain, constant zero capacity
            return float(out), np.zeros(len(p))
        return float(out.val), np.asarray(out.grad, dtype=float)

    return f


def _fd_gradient(f, p, rel=1e-5):
    g = np.empty(len(p))
    for i in range(len(p)):
        h = rel * max(p[i], 1e-300)
        e = np.zeros(len(p))
        e[i] = h
        g[i] = (f(p + e) - f(p - e)) / (2 * h)
    return g


def kkt_residual(chain: RelayChain, alloc: Allocation, objective: str = "cf", opts: SolverOptions | None = None) -> float:
    """First-order stationarity of an allocation.

    When the budget binds, the multiplier is the mean gradient over active
    components and the residual is ``max |g_i - mu| / |mu|`` (plus any
    positive ``g_i - mu`` on switched-off components).  Otherwise mu = 0 and
    the gradient is measured against ``objective / sum(P)``, which scales
    the same way.
    """
    p = np.asarray(alloc.powers, dtype=float)
    val, g = objective_function(chain, objective, opts)(p, grad=True)
    return _kkt(p, val, g, alloc.p_tot)


def _kkt(p, val, g, p_tot):
    active = p > ACTIVE_FLOOR * p_tot
    if not np.any(active):
        return math.inf
    binding = p.sum() >= p_tot * (1 - 1e-9)
    if binding:
        mu = float(np.mean(g[active]))
        ref = abs(mu)
    else:
        mu = 0.0
        ref = abs(val) / p.sum()
    if ref == 0:
        return math.inf
    res = np.abs(g[active] - mu)
    off = np.maximum(g[~active] - mu, 0.0)
    return float(max(res.max(initial=0.0), off.max(initial=0.0)) / ref)


# ---------------------------------------------------------------------------
# projected gradient


def _project(x, lo, p_tot):
    """Euclidean projection onto {x >= lo, sum(x) <= p_tot}."""
    y = np.maximum(x, lo)
    if y.sum() <= p_tot:
        return y
    # shift to the standard simplex {y >= 0, sum = budget}
    budget = p_tot - lo * len(x)
    v = x - lo
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - budget
    k = np.arange(1, len(u) + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    tau = css[rho] / (rho + 1)
    return np.maximum(v - tau, 0.0) + lo


def _stationarity(x, g, fx, lo, p_tot):
    # step scaled so that unit * g has the units of power
    unit = p_tot * p_tot / max(abs(fx), 1e-300)
    return float(np.max(np.abs(_project(x + unit * g, lo, p_tot) - x))) / p_tot


def _spg(f, x0, p_tot, opts: SolverOptions):
    """Maximize f over the budget set; returns (x, value, grad, iterations, converged).

    Objective values carry ~1e-12 relative noise (series truncation), so a
    step whose value change is within that noise is accepted when it lowers
    the projected-gradient stationarity instead.
    """
    lo = opts.floor * p_tot
    x = _project(np.asarray(x0, dtype=float), lo, p_tot)
    fx, g = f(x, grad=True)
    stat = _stationarity(x, g, fx, lo, p_tot)
    alpha = p_tot * p_tot / max(abs(fx), 1e-300)
    for it in range(1, opts.max_iter + 1):
        if stat <= opts.tol:
            return x, fx, g, it - 1, True
        unit = p_tot * p_tot / max(abs(fx), 1e-300)
        d = _project(x + alpha * g, lo, p_tot) - x
        slope = float(g @ d)
        lam = 1.0
        while lam >= 1e-14:
            xn = x + lam * d
            fn, gn = f(xn, grad=True)
            if fn >= fx + 1e-4 * lam * slope:
                break
            if fn >= fx - _NOISE * abs(fx):
                statn = _stationarity(xn, gn, fn, lo, p_tot)
                if statn < stat:
                    break
            lam *= 0.5
        else:
            return x, fx, g, it, stat <= 100 * opts.tol
        s = xn - x
        sy = -float(s @ (gn - g))
        alpha = float(s @ s) / sy if sy > 0 else 1e3 * unit
        alpha = min(max(alpha, 1e-10 * unit), 1e10 * unit)
        x, fx, g = xn, fn, gn
        stat = _stationarity(x, g, fx, lo, p_tot)
    return x, fx, g, opts.max_iter, stat <= opts.tol


def _starts(chain: RelayChain, p_tot, opts: SolverOptions):
    n = chain.n
    base = [np.full(n, 0.9 * p_tot / n)]
    if n > 2 and opts.starts > 1:
        gains = chain.gains
        for w in (1.0 / gains, 1.0 / np.sqrt(gains), np.sqrt(gains)):
            base.append(0.9 * p_tot * w / w.sum())
        base.append(np.full(n, 0.5 * p_tot / n))
    out = []
    for x in base:
        if not any(np.allclose(x, y, rtol=1e-12, atol=0) for y in out):
            out.append(x)
    return out[: opts.starts]


def _optimize(chain: RelayChain, p_tot: float, kind: str, strategy: str, opts: SolverOptions) -> Allocation:
    _check_budget(p_tot)
    f = objective_function(chain, kind, opts)
    best = None
    iters = 0
    for x0 in _starts(chain, p_tot, opts):
        if opts.grad_check:
            _grad_check(f, x0)
        x, fx, g, it, conv = _spg(f, x0, p_tot, opts)
        iters += it
        if best is None or fx > best[1]:
            best = (x, fx, g, conv)
    x, fx, g, conv = best
    return Allocation(
        powers=x,
        objective=fx,
        strategy=strategy,
        kkt_residual=_kkt(x, fx, g, p_tot),
        iterations=iters,
        budget_used=float(x.sum()),
        p_tot=float(p_tot),
        converged=bool(conv),
    )


def _grad_check(f, x):
    _, g = f(x, grad=True)
    fd = _fd_gradient(f, x)
    err = np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), 1e-300)
    if err > 1e-5:
        raise NumericalError(f"gradient check failed: relative error {err:.3g}")


def _check_budget(p_tot):
    if not (np.isfinite(p_tot) and p_tot > 0):
        raise ConfigError(f"power budget must be positive, got {p_tot}")


def cfopa(chain: RelayChain, p_tot: float, opts: SolverOptions | None = None) -> Allocation:
    """CF-optimal allocation over {P >= 0, sum(P) <= p_tot}."""
    return _optimize(chain, p_tot, "cf", "cfopa", opts or SolverOptions())


def copa(chain: RelayChain, p_tot: float, opts: SolverOptions | None = None) -> Allocation:
    """Capacity-optimal allocation; spends the whole budget."""
    return _optimize(chain, p_tot, "capacity", "copa", opts or SolverOptions())


def upa(p_tot: float, n: int, chain: RelayChain | None = None, opts: SolverOptions | None = None) -> Allocation:
    """Equal split ``p_tot / n``; objective and KKT residual need ``chain``."""
    _check_budget(p_tot)
    if int(n) != n or n < 1:
        raise ConfigError(f"number of hops must be a positive integer, got {n}")
    p = np.full(int(n), p_tot / n)
    if chain is None:
        return Allocation(p, math.nan, "upa", math.nan, 0, float(p_tot), float(p_tot))
    if chain.n != n:
        raise ConfigError(f"chain has {chain.n} hops, not {n}")
    val, g = objective_function(chain, "cf", opts)(p, grad=True)
    return Allocation(p, val, "upa", _kkt(p, val, g, p_tot), 0, float(p.sum()), float(p_tot))


# ---------------------------------------------------------------------------
# one-dimensional problems


def _maximize_1d(h, upper, xtol=1e-10):
    """Maximize h on (0, upper]: 64-point log-spaced scan, Brent on the
    bracketing cell, then an explicit comparison with the boundary."""
    xs = upper * np.logspace(-8, 0, 64)
    vals = np.array([h(x) for x in xs])
    k = int(np.argmax(vals))
    evals = len(xs)
    best_x, best_v = xs[k], vals[k]
    a = xs[k - 1] if k > 0 else 0.0
    b = xs[min(k + 1, len(xs) - 1)]
    res = optimize.minimize_scalar(
        lambda x: -h(x), bounds=(a, b), method="bounded", options={"xatol": xtol * upper, "maxiter": 500}
    )
    evals += res.nfev
    if -res.fun > best_v:
        best_x, best_v = float(res.x), float(-res.fun)
    vb = h(upper)
    if vb >= best_v:
        best_x, best_v = upper, vb
    return best_x, best_v, evals


def cfso_upa(chain: RelayChain, p_tot: float, opts: SolverOptions | None = None) -> Allocation:
    """Common transmit power ``x`` on every node, chosen to maximize CF."""
    _check_budget(p_tot)
    opts = opts or SolverOptions()
    f = objective_function(chain, "cf", opts)
    n = chain.n
    x, val, evals = _maximize_1d(lambda x: f(np.full(n, x)), p_tot / n)
    p = np.full(n, x)
    _, g = f(p, grad=True)
    return Allocation(p, val, "cfso_upa", _kkt(p, val, g, p_tot), evals, float(p.sum()), float(p_tot))


# ---------------------------------------------------------------------------
# decentralized scheme
#
# Node n fixes its own power x knowing only P_tot, N, the powers already
# spent and the message from node n-1.  It assumes the remaining hops are
# clones of its own hop at the same power, so its objective is
#   c(x) * sum_q W_q T_{n-1}(q) F_n(q; x)^(N-n+1)
# with F the per-hop factor at series index / quadrature node q.


def _hop_log_factors(chain: RelayChain, n: int, x: float, grid, opts: SolverOptions):
    hop = chain.hops[n]
    gbar = x * chain.gains[n]
    if chain.protocol is Protocol.AF:
        return af_hop_factors(hop.m, gbar, grid)
    with np.errstate(divide="ignore"):
        return np.log(df_hop_survivals(hop.m, gbar, grid))


def _message_grid(chain: RelayChain, opts: SolverOptions):
    """(evaluation points, log weights) shared by every node."""
    if chain.protocol is Protocol.AF:
        plan = af_series_plan(opts.series.max_terms)
        return plan.index, np.log(plan.weights)
    x, w = df_message_rule()
    return np.expm1(x), np.log(w)


def df_message_rule():
    """Nodes and weights for int_0^inf g(x) dx; the DF capacity in nats is
    the integral of S(e^x - 1), S the product of hop survival functions."""
    edges = np.linspace(0.0, _MESSAGE_SPAN, MESSAGE_PANELS + 1)
    t, wt = np.polynomial.legendre.leggauss(MESSAGE_NODES)
    mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * np.diff(edges)
    return (mid[:, None] + half[:, None] * t).ravel(), (half[:, None] * wt).ravel()


def cfsopa(chain: RelayChain, p_tot: float, opts: SolverOptions | None = None):
    """Hop-by-hop allocation; returns ``(Allocation, [NodeMessage, ...])``."""
    _check_budget(p_tot)
    opts = opts or SolverOptions()
    n_hops = chain.n
    grid, logw = _message_grid(chain, opts)
    scale = chain.bandwidth / LN2
    eps = chain.power.epsilon
    fixed = chain.fixed_power
    log_t = np.zeros(len(grid))
    spent = 0.0
    powers = np.zeros(n_hops)
    trace = []
    evals = 0
    for n in range(n_hops):
        left = n_hops - n
        remaining = p_tot - spent
        if remaining <= 0:
            warnings.warn(f"cfsopa: no budget left at node {n}; assigning zero power", RuntimeWarning, stacklevel=2)
            trace.append(NodeMessage(spent, np.full(len(grid), -np.inf)))
            continue

        def h(x, n=n, left=left, base=log_t + logw):
            lf = _hop_log_factors(chain, n, x, grid, opts)
            with np.errstate(invalid="ignore"):
                terms = np.exp(base + left * lf)
            s = float(np.sum(np.where(np.isfinite(terms), terms, 0.0)))
            return scale * s / ((spent + left * x) / eps + fixed)

        x, _, k = _maximize_1d(h, remaining / left)
        evals += k
        powers[n] = x
        spent += x
        log_t = log_t + _hop_log_factors(chain, n, x, grid, opts)
        trace.append(NodeMessage(spent, log_t.copy()))
    f = objective_function(chain, "cf", opts)
    val, g = f(powers, grad=True)
    alloc = Allocation(powers, val, "cfsopa", _kkt(powers, val, g, p_tot), evals, float(powers.sum()), float(p_tot))
    return alloc, trace


STRATEGIES = ("cfopa", "cfsopa", "cfso_upa", "copa", "upa")


def allocate(strategy: str, chain: RelayChain, p_tot: float, opts: SolverOptions | None = None) -> Allocation:
    """Dispatch by strategy name."""
    if strategy == "cfopa":
        return cfopa(chain, p_tot, opts)
    if strategy == "copa":
        return copa(chain, p_tot, opts)
    if strategy == "cfso_upa":
        return cfso_upa(chain, p_tot, opts)
    if strategy == "cfsopa":
        return cfsopa(chain, p_tot, opts)[0]
    if strategy == "upa":
        return upa(p_tot, chain.n, chain, opts)
    raise ConfigError(f"unknown strategy {strategy!r}; choose from {', '.join(STRATEGIES)}")
