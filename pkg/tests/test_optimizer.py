import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relaycf.channel import HopProfile, RelayChain
from relaycf.errors import ConfigError, NumericalError
from relaycf.metrics import af_hop_factors, af_series_plan, average_cf, df_hop_survivals
from relaycf.optimizer import (
    STRATEGIES,
    Allocation,
    SolverOptions,
    _grad_check,
    allocate,
    cfopa,
    cfso_upa,
    cfsopa,
    copa,
    df_message_rule,
    kkt_residual,
    objective_function,
    upa,
)
from relaycf.scenario import Scenario, with_gains


def scenario_chain(n=2, protocol="DF", **kw):
    return Scenario(hops=n, protocol=protocol, **kw).chain()


def asymmetric(protocol="DF"):
    return RelayChain((HopProfile(1, 0.3), HopProfile(1, 0.7)), protocol, n0=0.2)


def capacity(chain, p):
    return objective_function(chain, "capacity")(p)


def test_upa_examples():
    assert np.array_equal(upa(2.0, 2).powers, [1.0, 1.0])
    assert np.array_equal(upa(1.0, 4).powers, [0.25] * 4)
    ch = scenario_chain(3)
    a = upa(1.0, 3, ch)
    assert a.objective == pytest.approx(average_cf(ch, a.powers).cf, rel=1e-12)
    assert a.budget_used == pytest.approx(1.0)
    with pytest.raises(ConfigError):
        upa(0.0, 2)
    with pytest.raises(ConfigError):
        upa(1.0, 2, ch)


def test_allocation_feasibility_is_enforced():
    with pytest.raises(NumericalError):
        Allocation(np.array([0.6, 0.6]), 0.0, "x", 0.0, 0, 1.2, 1.0)
    with pytest.raises(NumericalError):
        Allocation(np.array([-0.1, 0.6]), 0.0, "x", 0.0, 0, 0.5, 1.0)


def grid_best_common_power(chain, p_tot, steps=1000):
    f = objective_function(chain, "cf")
    xs = p_tot / chain.n * np.arange(1, steps + 1) / steps
    vals = [f(np.full(chain.n, x)) for x in xs]
    return xs[int(np.argmax(vals))], max(vals)


@pytest.mark.parametrize("protocol", ["AF", "DF"])
def test_cfso_upa_binding_at_low_budget(protocol):
    ch = scenario_chain(2, protocol)
    a = cfso_upa(ch, 0.1)
    assert np.allclose(a.powers, 0.05, rtol=1e-12)
    x, v = grid_best_common_power(ch, 0.1)
    assert x == pytest.approx(0.05) and a.objective >= v


@pytest.mark.parametrize("protocol", ["AF", "DF"])
def test_cfso_upa_interior_at_high_budget(protocol):
    ch = scenario_chain(2, protocol)
    a = cfso_upa(ch, 1e4)
    assert a.budget_used < 1e-3 * a.p_tot
    # finer scan near the optimum found by a coarse one
    f = objective_function(ch, "cf")
    xs = np.linspace(0.5, 1.5, 1001) * a.powers[0]
    assert a.objective >= max(f(np.full(2, x)) for x in xs) - 1e-12
    assert a.kkt_residual < 1e-6


def test_single_hop_cfso_upa_matches_cfopa():
    ch = scenario_chain(1)
    for p in (0.01, 1.0, 100.0):
        a, b = cfso_upa(ch, p), cfopa(ch, p)
        assert a.powers[0] == pytest.approx(b.powers[0], rel=1e-6)
        assert a.objective == pytest.approx(b.objective, rel=1e-10)


@pytest.mark.parametrize("protocol", ["AF", "DF"])
def test_cfopa_symmetric_chain_gives_equal_powers(protocol):
    a = cfopa(scenario_chain(2, protocol), 1.0)
    assert a.powers[0] == pytest.approx(a.powers[1], rel=1e-6)
    assert a.converged and a.kkt_residual <= 1e-6


@pytest.mark.parametrize("protocol", ["AF", "DF"])
def test_cfopa_asymmetric_chain(protocol):
    ch = asymmetric(protocol)
    a = cfopa(ch, 1.0)
    u = upa(1.0, 2, ch)
    s = cfso_upa(ch, 1.0)
    # uniform split gives both hops an equal share; the long hop gets more
    assert a.powers[1] / a.powers.sum() > u.powers[1] / u.powers.sum()
    assert a.objective >= u.objective and a.objective >= s.objective
    assert a.kkt_residual <= 1e-6
    b = cfopa(ch.permuted([1, 0]), 1.0)
    assert b.powers[::-1] == pytest.approx(a.powers, rel=1e-6)
    assert b.objective == pytest.approx(a.objective, rel=1e-12)


@pytest.mark.parametrize("protocol", ["AF", "DF"])
def test_copa_spends_budget_and_dominates(protocol):
    for ch in (scenario_chain(3, protocol), asymmetric(protocol)):
        for p in (0.1, 1.0, 30.0):
            c, f = copa(ch, p), cfopa(ch, p)
            assert c.budget_used == pytest.approx(p, rel=1e-6)
            assert capacity(ch, c.powers) >= capacity(ch, f.powers) * (1 - 1e-10)
            assert f.objective >= average_cf(ch, c.powers).cf * (1 - 1e-10)


def test_copa_symmetric_equals_upa():
    ch = scenario_chain(2, "AF")
    c = copa(ch, 3.0)
    assert capacity(ch, c.powers) == pytest.approx(capacity(ch, upa(3.0, 2).powers), rel=1e-6)


def test_kkt_residual_flags_non_stationary_points():
    ch = asymmetric()
    u = upa(1.0, 2, ch)
    assert u.kkt_residual > 1e-3
    assert kkt_residual(ch, u) == pytest.approx(u.kkt_residual, rel=1e-12)
    assert kkt_residual(ch, cfopa(ch, 1.0)) <= 1e-6
    wide = RelayChain(ch.hops, ch.protocol, bandwidth=10.0, n0=ch.n0)
    assert kkt_residual(wide, u) == pytest.approx(u.kkt_residual, rel=1e-12)


def test_kkt_residual_for_capacity_objective():
    ch = asymmetric()
    assert kkt_residual(ch, copa(ch, 1.0), "capacity") <= 1e-6
    assert kkt_residual(ch, upa(1.0, 2, ch), "capacity") > 1e-3


def test_grad_check_option_and_failure():
    ch = scenario_chain(3, "AF")
    assert cfopa(ch, 1.0, SolverOptions(grad_check=True)).converged

    def wrong(p, grad=False):
        v = float(np.sum(np.log(p)))
        return (v, 2.0 / np.asarray(p)) if grad else v

    with pytest.raises(NumericalError):
        _grad_check(wrong, np.array([0.3, 0.5]))


def test_solver_options_validation():
    for kw in ({"tol": 0}, {"max_iter": 0}, {"starts": 0}, {"floor": 0.0}):
        with pytest.raises(ConfigError):
            SolverOptions(**kw)
    with pytest.raises(ConfigError):
        cfopa(scenario_chain(), -1.0)
    with pytest.raises(ConfigError):
        allocate("greedy", scenario_chain(), 1.0)


def test_iteration_cap_reports_non_convergence():
    a = cfopa(asymmetric(), 1.0, SolverOptions(max_iter=1, tol=1e-14))
    assert not a.converged
    assert a.powers.sum() <= 1.0


def _from_scratch(chain, powers, n):
    if chain.protocol.value == "AF":
        grid = af_series_plan(200).index
        return sum(af_hop_factors(chain.hops[i].m, powers[i] * chain.gains[i], grid) for i in range(n + 1))
    u = np.expm1(df_message_rule()[0])
    with np.errstate(divide="ignore"):
        return sum(np.log(df_hop_survivals(chain.hops[i].m, powers[i] * chain.gains[i], u)) for i in range(n + 1))


@pytest.mark.parametrize("protocol", ["AF", "DF"])
def test_cfsopa_messages(protocol):
    ch = RelayChain(tuple(HopProfile(m, d) for m, d in [(1, 0.2), (2, 0.3), (1, 0.5)]), protocol, n0=0.2)
    alloc, trace = cfsopa(ch, 1.0)
    assert len(trace) == 3
    cum = [msg.cumulative_power for msg in trace]
    assert cum == pytest.approx(np.cumsum(alloc.powers), rel=1e-15)
    assert np.all(np.diff(cum) >= 0)
    for n, msg in enumerate(trace):
        ref = _from_scratch(ch, alloc.powers, n)
        finite = np.isfinite(ref)
        assert np.array_equal(finite, np.isfinite(msg.log_t_values))
        assert np.allclose(msg.log_t_values[finite], ref[finite], rtol=1e-12, atol=1e-12)
        t = msg.t_values
        assert np.all(t >= 0)
        if protocol == "DF":
            assert np.all(t <= 1.0)
        else:
            assert np.all(t[:200] > 0)
    assert alloc.budget_used <= 1.0


def test_df_message_rule_reproduces_capacity():
    x, w = df_message_rule()
    u = np.expm1(x)
    for ms, g in (([1, 1], [1.0, 1.0]), ([2, 2, 2, 2, 2, 2], [270.0] * 6), ([4, 1], [1e4, 3.0])):
        ch = RelayChain(tuple(HopProfile(m, 1.0) for m in ms), "DF")
        s = np.prod([df_hop_survivals(m, gi, u) for m, gi in zip(ms, g)], axis=0)
        assert float(w @ s) / math.log(2) == pytest.approx(average_cf(ch, g).ergodic_capacity, rel=1e-12)


@pytest.mark.parametrize("protocol", ["AF", "DF"])
def test_dominance_on_iid_chains(protocol):
    for n in (2, 3, 4):
        ch = scenario_chain(n, protocol)
        o = cfopa(ch, 1.0).objective
        s = cfsopa(ch, 1.0)[0].objective
        u = cfso_upa(ch, 1.0).objective
        assert o >= s * (1 - 1e-9) and s >= u - 1e-9 and o >= upa(1.0, n, ch).objective


@pytest.mark.parametrize("protocol", ["AF", "DF"])
def test_cfsopa_between_uniform_and_optimal_on_dissimilar_links(protocol):
    sc = Scenario()
    ch = with_gains(sc, (9.0, 1.0), protocol)
    o, s, u = cfopa(ch, 1.0).objective, cfsopa(ch, 1.0)[0].objective, cfso_upa(ch, 1.0).objective
    assert u - 1e-9 <= s <= o * (1 + 1e-9)
    assert o > u * (1 + 1e-3)


def test_cfopa_budget_monotone_and_saturating():
    ch = scenario_chain(2)
    budgets = 10 ** (np.arange(-10, 21, 2) / 10)
    runs = [cfopa(ch, p) for p in budgets]
    vals = [r.objective for r in runs]
    assert all(b >= a * (1 - 1e-10) for a, b in zip(vals, vals[1:]))
    used = [r.budget_used for r in runs]
    assert used[-1] == pytest.approx(used[-2], rel=1e-5)
    assert [c.budget_used for c in (copa(ch, budgets[-1]),)] == pytest.approx([budgets[-1]])


def test_cfsopa_tiny_budget_stays_feasible():
    ch = scenario_chain(4)
    alloc, trace = cfsopa(ch, 1e-6)
    assert alloc.budget_used <= 1e-6 * (1 + 1e-12)
    assert len(trace) == 4


@settings(max_examples=12)
@given(
    ms=st.lists(st.integers(1, 3), min_size=1, max_size=3),
    ds=st.lists(st.floats(0.1, 1.0), min_size=3, max_size=3),
    protocol=st.sampled_from(["AF", "DF"]),
    budget_db=st.floats(-10, 30),
    strategy=st.sampled_from(STRATEGIES),
)
def test_every_strategy_returns_feasible_allocation(ms, ds, protocol, budget_db, strategy):
    ch = RelayChain(tuple(HopProfile(m, d) for m, d in zip(ms, ds)), protocol, n0=0.2)
    p = 10 ** (budget_db / 10)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        a = allocate(strategy, ch, p)
    assert np.all(a.powers >= 0)
    assert a.powers.sum() <= p + 1e-9
    assert a.objective == pytest.approx(average_cf(ch, a.powers).cf, rel=1e-9) or strategy == "copa"


def test_ad_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    for k in range(20):
        n = int(rng.integers(1, 4))
        ch = RelayChain(tuple(HopProfile(int(rng.integers(1, 4)), float(rng.uniform(0.2, 1))) for _ in range(n)),
                        "AF" if k % 2 else "DF", n0=0.2)
        p = rng.dirichlet(np.ones(n)) * 10 ** rng.uniform(-1, 1)
        f = objective_function(ch, "cf")
        _, g = f(p, grad=True)
        fd = np.array([(f(p + h * e) - f(p - h * e)) / (2 * h) for e, h in zip(np.eye(n), 1e-5 * p)])
        assert np.max(np.abs(g - fd)) <= 1e-5 * np.max(np.abs(fd))
