"""Monte-Carlo oracle for CF, capacity and outage of relay chains.

Samples are split over a fixed number of streams.  Stream ``s`` draws from
its own Philox generator keyed by ``(seed, s)`` and streams are merged in
index order, so results depend only on ``(seed, streams, samples)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import Protocol, RelayChain, avg_snrs, e2e_snr_af, e2e_snr_df, total_power
from .errors import ConfigError, DomainError

__all__ = ["McConfig", "McEstimate", "stream_generator", "sample_hop_snr", "estimate_cf", "estimate_capacity", "estimate_outage"]

_CHUNK = 1 << 18
_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class McConfig:
    samples: int = 1_000_000
    seed: int = 0
    streams: int = 8

    def __post_init__(self):
        if int(self.samples) != self.samples or self.samples < 1000:
            raise ConfigError(f"samples must be an integer >= 1000, got {self.samples}")
        if int(self.seed) != self.seed or not 0 <= self.seed <= _U64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if int(self.streams) != self.streams or self.streams < 1:
            raise ConfigError(f"streams must be a positive integer, got {self.streams}")

    def split(self):
        base, extra = divmod(int(self.samples), int(self.streams))
        return [base + (s < extra) for s in range(int(self.streams))]


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    samples: int

    def z_score(self, reference: float) -> float:
        """|reference - mean| in units of the standard error."""
        if self.std_error == 0:
            return 0.0 if reference == self.mean else math.inf
        return abs(reference - self.mean) / self.std_error


def stream_generator(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


def sample_hop_snr(m: int, avg_snr: float, rng: np.random.Generator, size=None):
    """Gamma(shape m, scale avg_snr/m) draws: the SNR of a Nakagami-m hop."""
    if int(m) != m or m < 1:
        raise DomainError(f"m must be a positive integer, got {m}")
    if not avg_snr > 0:
        raise DomainError(f"average SNR must be positive, got {avg_snr}")
    return rng.gamma(float(m), avg_snr / m, size)


def _merge(stats):
    """Chan's pairwise update over (n, mean, M2) in fixed order."""
    n, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in stats:
        if nb == 0:
            continue
        tot = n + nb
        delta = mb - mean
        mean = mean + delta * nb / tot
        m2 = m2 + m2b + delta * delta * n * nb / tot
        n = tot
    return n, mean, m2


def _simulate(chain: RelayChain, pt, cfg: McConfig, statistic):
    """Run ``statistic(hop_snr_matrix)`` over every stream and chunk."""
    gbar = avg_snrs(chain, np.asarray(pt, dtype=float))
    ms = chain.ms
    parts = []
    for s, count in enumerate(cfg.split()):
        rng = stream_generator(cfg.seed, s)
        done = 0
        while done < count:
            k = min(_CHUNK, count - done)
            g = np.empty((k, chain.n))
            for i in range(chain.n):
                g[:, i] = sample_hop_snr(ms[i], gbar[i], rng, k)
            x = statistic(g)
            parts.append((k, float(np.mean(x)), float(np.sum((x - np.mean(x)) ** 2))))
            done += k
    n, mean, m2 = _merge(parts)
    return McEstimate(mean, math.sqrt(m2 / (n - 1)) / math.sqrt(n), n)


def _e2e(chain: RelayChain):
    return e2e_snr_af if chain.protocol is Protocol.AF else e2e_snr_df


def estimate_capacity(chain: RelayChain, pt, cfg: McConfig) -> McEstimate:
    """Empirical ``B E[log2(1 + gamma_e2e)]``."""
    pt = np.asarray(pt, dtype=float)
    total_power(chain, pt)
    if np.any(pt == 0):
        return McEstimate(0.0, 0.0, int(cfg.samples))
    e2e = _e2e(chain)
    return _simulate(chain, pt, cfg, lambda g: chain.bandwidth * np.log1p(e2e(g)) / math.log(2.0))


def estimate_cf(chain: RelayChain, pt, cfg: McConfig) -> McEstimate:
    """Empirical mean of the instantaneous CF over fading draws."""
    cap = estimate_capacity(chain, pt, cfg)
    ptot = float(total_power(chain, np.asarray(pt, dtype=float)))
    return McEstimate(cap.mean / ptot, cap.std_error / ptot, cap.samples)


def estimate_outage(chain: RelayChain, pt, gamma_th: float, cfg: McConfig) -> McEstimate:
    """Empirical probability that the end-to-end SNR is below ``gamma_th``."""
    if not gamma_th > 0:
        raise DomainError(f"outage threshold must be positive, got {gamma_th}")
    pt = np.asarray(pt, dtype=float)
    total_power(chain, pt)
    if np.any(pt == 0):
        return McEstimate(1.0, 0.0, int(cfg.samples))
    e2e = _e2e(chain)
    est = _simulate(chain, pt, cfg, lambda g: (e2e(g) < gamma_th).astype(float))
    p = est.mean
    return McEstimate(p, math.sqrt(p * (1.0 - p) / est.samples), est.samples)
