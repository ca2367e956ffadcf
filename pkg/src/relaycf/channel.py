"""Physical model of an N-hop relay chain over Nakagami-m fading."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .autodiff import dsum, is_dual, value
from .errors import ConfigError, DomainError
from .specfun import reg_lower_gamma, reg_upper_gamma

__all__ = [
    "Protocol",
    "HopProfile",
    "PowerModel",
    "RelayChain",
    "unit_power_gain",
    "avg_snrs",
    "e2e_snr_af",
    "e2e_snr_df",
    "total_power",
    "df_e2e_cdf",
    "df_outage",
    "uniform_chain",
]


class Protocol(str, enum.Enum):
    AF = "AF"
    DF = "DF"


@dataclass(frozen=True)
class HopProfile:
    """One hop: Nakagami ``m``, length ``d``, pathloss exponent ``nu`` and
    mean channel power gain ``omega``."""

    m: int
    d: float
    nu: float = 4.0
    omega: float = 1.0

    def __post_init__(self):
        if isinstance(self.m, bool) or int(self.m) != self.m or self.m < 1:
            raise ConfigError(f"fading parameter m must be a positive integer, got {self.m}")
        object.__setattr__(self, "m", int(self.m))
        for name in ("d", "nu", "omega"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")


def _per_node(v, n, what):
    if np.ndim(v) == 0:
        return np.full(n, float(v))
    arr = np.asarray(v, dtype=float)
    if arr.shape != (n,):
        raise ConfigError(f"{what} needs {n} per-node values, got {arr.size}")
    return arr


@dataclass(frozen=True)
class PowerModel:
    """Amplifier efficiency and circuit/processing powers (linear watts).

    ``p_ct`` and ``p_ci`` apply to the transmitting nodes R_0..R_{N-1},
    ``p_cr`` to the receiving nodes R_1..R_N.  Each may be a scalar (same for
    every node) or a length-N sequence.  ``p_proc_af`` / ``p_proc_df`` are
    charged once per receiving node.
    """

    epsilon: float = 0.35
    p_ct: float | Sequence[float] = 0.1
    p_cr: float | Sequence[float] = 0.1
    p_ci: float | Sequence[float] = 0.05
    p_proc_af: float = 0.05
    p_proc_df: float = 0.15

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise ConfigError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        for name in ("p_ct", "p_cr", "p_ci", "p_proc_af", "p_proc_df"):
            v = getattr(self, name)
            if np.any(np.asarray(v, dtype=float) < 0):
                raise ConfigError(f"{name} must be non-negative")
            if np.ndim(v):
                object.__setattr__(self, name, tuple(float(x) for x in v))

    def circuit(self, n: int) -> float:
        """Aggregate circuit power P_c of an n-hop chain."""
        return float(
            _per_node(self.p_ct, n, "p_ct").sum()
            + _per_node(self.p_cr, n, "p_cr").sum()
            + _per_node(self.p_ci, n, "p_ci").sum()
        )

    def processing(self, n: int, protocol: Protocol) -> float:
        per = self.p_proc_af if Protocol(protocol) is Protocol.AF else self.p_proc_df
        return n * per

    def fixed(self, n: int, protocol: Protocol) -> float:
        """Transmit-independent part ``P_c + P_c^{AF|DF}``."""
        return self.circuit(n) + self.processing(n, protocol)


@dataclass(frozen=True)
class RelayChain:
    hops: tuple[HopProfile, ...]
    protocol: Protocol = Protocol.DF
    bandwidth: float = 1.0
    n0: float = 1.0
    power: PowerModel = field(default_factory=PowerModel)

    def __post_init__(self):
        object.__setattr__(self, "hops", tuple(self.hops))
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        if not self.hops:
            raise ConfigError("a relay chain needs at least one hop")
        if not self.bandwidth > 0 or not self.n0 > 0:
            raise ConfigError("bandwidth and n0 must be positive")
        self.power.circuit(len(self.hops))  # validates per-node lengths

    @property
    def n(self) -> int:
        return len(self.hops)

    @property
    def ms(self) -> np.ndarray:
        return np.array([h.m for h in self.hops])

    @property
    def gains(self) -> np.ndarray:
        """Per-hop average SNR per watt of transmit power."""
        return np.array([unit_power_gain(h, self.n0) for h in self.hops])

    @property
    def fixed_power(self) -> float:
        return self.power.fixed(self.n, self.protocol)

    def with_protocol(self, protocol) -> "RelayChain":
        return RelayChain(self.hops, Protocol(protocol), self.bandwidth, self.n0, self.power)

    def permuted(self, order) -> "RelayChain":
        return RelayChain(tuple(self.hops[i] for i in order), self.protocol, self.bandwidth, self.n0, self.power)


def uniform_chain(
    n: int,
    protocol=Protocol.DF,
    m: int | Sequence[int] = 1,
    *,
    distance: float = 1.0,
    nu: float = 4.0,
    n0: float = 1.0,
    bandwidth: float = 1.0,
    power: PowerModel | None = None,
) -> RelayChain:
    """Relays equally spaced over ``distance`` (the default evaluation setup)."""
    ms = [m] * n if np.ndim(m) == 0 else list(m)
    if len(ms) != n:
        raise ConfigError(f"expected {n} fading parameters, got {len(ms)}")
    hops = tuple(HopProfile(m=mi, d=distance / n, nu=nu) for mi in ms)
    return RelayChain(hops, Protocol(protocol), bandwidth, n0, power or PowerModel())


def unit_power_gain(hop: HopProfile, n0: float) -> float:
    """Average SNR obtained per watt: ``omega / (n0 d^nu)``."""
    if not n0 > 0:
        raise DomainError(f"noise variance must be positive, got {n0}")
    return hop.omega / (n0 * hop.d**hop.nu)


def _check_powers(chain: RelayChain, pt):
    n = np.shape(value(pt))
    if n != (chain.n,):
        raise ConfigError(f"expected {chain.n} transmit powers, got shape {n}")
    if np.any(np.asarray(value(pt)) < 0):
        raise DomainError("transmit powers must be non-negative")


def avg_snrs(chain: RelayChain, pt):
    """Average per-hop SNRs for transmit powers ``pt`` (dual-aware)."""
    _check_powers(chain, pt)
    if not is_dual(pt):
        pt = np.asarray(pt, dtype=float)
    return pt * chain.gains


def e2e_snr_af(gammas) -> float:
    """End-to-end SNR of an AF chain, ``[prod(1 + 1/g) - 1]^-1``."""
    g = np.asarray(gammas, dtype=float)
    if g.size == 0 or np.any(g <= 0):
        raise DomainError("AF end-to-end SNR needs positive per-hop SNRs")
    # prod(1+1/g) - 1 = expm1(sum log1p(1/g)), exact for large g
    return 1.0 / np.expm1(np.sum(np.log1p(1.0 / g), axis=-1))


def e2e_snr_df(gammas) -> float:
    g = np.asarray(gammas, dtype=float)
    if g.size == 0:
        raise DomainError("DF end-to-end SNR of an empty chain")
    return np.min(g, axis=-1)


def total_power(chain: RelayChain, pt):
    """Consumed power ``sum(pt)/epsilon + P_c + P_c^{AF|DF}``."""
    _check_powers(chain, pt)
    if not is_dual(pt):
        pt = np.asarray(pt, dtype=float)
    return dsum(pt) / chain.power.epsilon + chain.fixed_power


def df_e2e_cdf(x, avg_snr, ms):
    """CDF of the minimum of independent Gamma-distributed hop SNRs."""
    ms = np.asarray(ms)
    g = np.asarray(avg_snr, dtype=float)
    if ms.shape != g.shape:
        raise ConfigError("avg_snr and ms must have matching lengths")
    if np.any(g <= 0):
        raise DomainError("average SNRs must be positive")
    if np.any(np.asarray(x) < 0):
        raise DomainError("CDF argument must be non-negative")
    surv = 1.0
    for mi, gi in zip(ms, g):
        surv = surv * reg_upper_gamma(mi, mi * np.asarray(x, dtype=float) / gi)
    return 1.0 - surv


def hop_cdf(x, avg_snr, m):
    """Per-hop SNR CDF ``P(m, m x / avg_snr)``."""
    return reg_lower_gamma(m, m * np.asarray(x, dtype=float) / avg_snr)


def df_outage(chain: RelayChain, pt, gamma_th: float) -> float:
    """Probability that the DF end-to-end SNR falls below ``gamma_th``."""
    if not gamma_th > 0:
        raise DomainError(f"outage threshold must be positive, got {gamma_th}")
    pt = np.asarray(pt, dtype=float)
    _check_powers(chain, pt)
    if np.any(pt == 0):
        return 1.0
    return float(df_e2e_cdf(gamma_th, avg_snrs(chain, pt), chain.ms))
