import math

import numpy as np
import pytest
from scipy import special, stats

from relaycf.channel import HopProfile, RelayChain, df_outage
from relaycf.errors import ConfigError, DomainError
from relaycf.montecarlo import (
    McConfig,
    McEstimate,
    estimate_capacity,
    estimate_cf,
    estimate_outage,
    sample_hop_snr,
    stream_generator,
)
from relaycf.specfun import reg_lower_gamma

LN2 = math.log(2)


def chain_at(ms, protocol="DF"):
    return RelayChain(tuple(HopProfile(int(m), 1.0) for m in ms), protocol)


@pytest.mark.parametrize("kwargs", [{"samples": 999}, {"samples": 1e3 + 0.5}, {"seed": -1}, {"seed": 1 << 64}, {"streams": 0}])
def test_config_rejects_bad_values(kwargs):
    with pytest.raises(ConfigError):
        McConfig(**kwargs)


def test_split_covers_all_samples():
    cfg = McConfig(samples=1003, streams=4)
    assert cfg.split() == [251, 251, 251, 250]
    assert sum(McConfig(samples=10**6, streams=7).split()) == 10**6


@pytest.mark.parametrize("m,gbar", [(1, 1.0), (2, 2.0), (3, 0.5), (4, 10.0)])
def test_hop_snr_matches_gamma_cdf(m, gbar):
    x = sample_hop_snr(m, gbar, stream_generator(7, m), 20_000)
    res = stats.kstest(x, lambda v: reg_lower_gamma(m, m * v / gbar))
    assert res.pvalue > 0.01


@pytest.mark.parametrize("m,gbar", [(1, 1.0), (2, 2.0)])
def test_hop_snr_moments(m, gbar):
    n = 10**6
    x = sample_hop_snr(m, gbar, stream_generator(1, 0), n)
    var = gbar**2 / m
    assert abs(x.mean() - gbar) <= 3 * math.sqrt(var / n)
    # variance of the sample variance of a Gamma(m) variable: var^2 (2 + 6/m) / n
    assert abs(x.var() - var) <= 3 * var * math.sqrt((2 + 6 / m) / n)


def test_hop_snr_rejects_bad_inputs():
    rng = stream_generator(0, 0)
    with pytest.raises(DomainError):
        sample_hop_snr(1.5, 1.0, rng)
    with pytest.raises(DomainError):
        sample_hop_snr(1, 0.0, rng)


def test_same_seed_same_sequence():
    a = sample_hop_snr(2, 1.0, stream_generator(42, 3), 100)
    b = sample_hop_snr(2, 1.0, stream_generator(42, 3), 100)
    assert np.array_equal(a, b)
    c = sample_hop_snr(2, 1.0, stream_generator(42, 4), 100)
    assert not np.array_equal(a, c)


def test_estimates_are_deterministic():
    ch = chain_at([1, 2], "AF")
    cfg = McConfig(samples=50_000, seed=9, streams=3)
    assert estimate_cf(ch, [1.0, 2.0], cfg) == estimate_cf(ch, [1.0, 2.0], cfg)
    other = estimate_cf(ch, [1.0, 2.0], McConfig(samples=50_000, seed=10, streams=3))
    assert other.mean != estimate_cf(ch, [1.0, 2.0], cfg).mean


def test_std_error_scales_as_inverse_sqrt_samples():
    ch = chain_at([1])
    errs = [estimate_capacity(ch, [1.0], McConfig(samples=n, seed=3)).std_error for n in (10**4, 10**5, 10**6)]
    for a, b in zip(errs, errs[1:]):
        assert a / b == pytest.approx(math.sqrt(10), rel=0.05)


def test_single_hop_rayleigh_capacity():
    est = estimate_capacity(chain_at([1]), [1.0], McConfig(seed=11))
    assert est.z_score(math.e * special.exp1(1.0) / LN2) <= 3
    assert est.mean == pytest.approx(0.8603, abs=5 * est.std_error + 5e-5)


def test_two_hop_df_rayleigh_capacity():
    est = estimate_capacity(chain_at([1, 1]), [1.0, 1.0], McConfig(seed=12))
    assert est.z_score(math.exp(2) * special.exp1(2.0) / LN2) <= 3


def test_cf_is_capacity_over_power():
    ch = chain_at([2, 1], "AF")
    cfg = McConfig(samples=20_000, seed=5)
    cap = estimate_capacity(ch, [1.0, 3.0], cfg)
    cf = estimate_cf(ch, [1.0, 3.0], cfg)
    ptot = 4.0 / 0.35 + 0.6
    assert cf.mean == pytest.approx(cap.mean / ptot, rel=1e-15)
    assert cf.std_error == pytest.approx(cap.std_error / ptot, rel=1e-15)


def test_zero_power_gives_zero_cf():
    est = estimate_cf(chain_at([1, 1]), [0.0, 1.0], McConfig(samples=1000))
    assert est.mean == 0.0 and est.std_error == 0.0


def test_df_outage_matches_closed_form():
    ch = chain_at([1, 1])
    est = estimate_outage(ch, [1.0, 1.0], 1.0, McConfig(seed=4))
    assert est.z_score(1 - math.exp(-2)) <= 3
    assert est.mean == pytest.approx(0.8647, abs=0.002)
    ch = chain_at([2, 3])
    est = estimate_outage(ch, [2.0, 5.0], 0.7, McConfig(samples=200_000, seed=4))
    assert est.z_score(df_outage(ch, [2.0, 5.0], 0.7)) <= 3
    assert est.std_error == pytest.approx(math.sqrt(est.mean * (1 - est.mean) / est.samples))


def test_outage_limits_and_ordering():
    cfg = McConfig(samples=100_000, seed=8)
    assert estimate_outage(chain_at([1, 1]), [1.0, 1.0], 1e-12, cfg).mean == 0.0
    assert estimate_outage(chain_at([1, 1]), [0.0, 1.0], 1.0, cfg).mean == 1.0
    for th in (0.1, 1.0, 5.0):
        af = estimate_outage(chain_at([1, 2], "AF"), [1.0, 2.0], th, cfg).mean
        df = estimate_outage(chain_at([1, 2], "DF"), [1.0, 2.0], th, cfg).mean
        assert af >= df  # same draws, pointwise SNR dominance
    with pytest.raises(DomainError):
        estimate_outage(chain_at([1]), [1.0], 0.0, cfg)


def test_z_score_edge_cases():
    assert McEstimate(1.0, 0.0, 1000).z_score(1.0) == 0.0
    assert McEstimate(1.0, 0.0, 1000).z_score(2.0) == math.inf
    assert McEstimate(1.0, 0.5, 1000).z_score(2.0) == 2.0
