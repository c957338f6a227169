import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from radarbandit.bandit import (
    ContextVector,
    DegenerateContextError,
    Exp3Policy,
    Exp3State,
    HistoryStore,
    RegretLedger,
    ThompsonSamplingPolicy,
    TsState,
    baseline_fixed,
    baseline_reactive,
    build_context,
    exp3_defaults,
    exp3_distribution,
    exp3_estimates,
    exp3_update,
    regret_ledger_update,
    ts_select,
    ts_update,
)
from radarbandit.spectrum import InterferenceState
from radarbandit.waveforms import Waveform, grid_catalog

import oracles

CAT = grid_catalog()


def state(text):
    return InterferenceState.from_string(text, 10e6)


# -- contexts ----------------------------------------------------------------


def test_context_unseen_pair_is_cold_start():
    h = HistoryStore(len(CAT))
    assert build_context(h, CAT[0], state("0" * 10)) == ContextVector(0, 0, 0)


def test_context_two_observations():
    h = HistoryStore(len(CAT))
    s_ = state("1100000000")
    h.observe(4, s_.key, 0.2)
    h.observe(4, s_.key, 0.4)
    x = build_context(h, CAT[4], s_)
    assert x.xi1 == pytest.approx(0.3)
    assert x.xi2 == pytest.approx(0.02)
    assert x.xi3 == 0.4


def test_context_single_observation():
    h = HistoryStore(len(CAT))
    h.observe(2, 7, 0.7)
    assert build_context(h, CAT[2], 7) == ContextVector(0.7, 0.0, 0.7)


def test_context_keys_are_independent():
    h = HistoryStore(len(CAT), cold_start=(0.1, 0.2, 0.3))
    h.observe(2, 7, 0.7)
    assert build_context(h, CAT[2], 8) == ContextVector(0.1, 0.2, 0.3)
    assert build_context(h, CAT[3], 7) == ContextVector(0.1, 0.2, 0.3)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=200))
def test_welford_matches_batch(costs):
    h = HistoryStore(3)
    for c in costs:
        h.observe(1, 0, c)
    x = h.contexts(0, np.array([1]))[0]
    assert x[0] == pytest.approx(np.mean(costs), rel=1e-12, abs=1e-15)
    assert x[1] == pytest.approx(np.var(costs, ddof=1), rel=1e-9, abs=1e-15)
    assert x[2] == costs[-1]


# -- Thompson sampling -------------------------------------------------------


def test_ts_update_hand_example():
    s1 = ts_update(TsState.initial(), (1, 0, 0), 0.5)
    assert np.array_equal(s1.B, np.diag([2.0, 1, 1]))
    assert np.array_equal(s1.f, [0.5, 0, 0])
    assert np.allclose(s1.theta_hat, [0.25, 0, 0])


def test_ts_update_zero_context_is_noop():
    s0 = TsState.initial()
    s1 = ts_update(s0, (0, 0, 0), 0.9)
    assert np.array_equal(s1.B, s0.B) and np.array_equal(s1.f, s0.f)


def test_ts_matches_batch_ridge():
    rng = np.random.default_rng(3)
    X = rng.random((1000, 3))
    y = rng.random(1000)
    s_ = TsState.initial()
    for x, c in zip(X, y):
        s_ = ts_update(s_, x, c)
    assert np.allclose(s_.theta_hat, oracles.batch_ridge(X, y), rtol=1e-9, atol=0)
    assert np.trace(s_.B) == pytest.approx(3 + np.sum(X**2))
    assert np.linalg.eigvalsh(s_.B).min() >= 1 - 1e-12


def test_ts_single_candidate():
    rng = np.random.default_rng(0)
    assert ts_select(TsState.initial(), [(CAT[9], (5, 5, 5))], rng) == CAT[9]


def test_ts_small_v_picks_low_mean():
    rng = np.random.default_rng(0)
    st_ = TsState(np.eye(3), np.zeros(3), np.array([1.0, 0, 0]), v=1e-6)
    picks = [ts_select(st_, [(CAT[1], (0.9, 0, 0)), (CAT[2], (0.1, 0, 0))], rng).id for _ in range(10_000)]
    assert all(p == 2 for p in picks)


def test_ts_identical_contexts_lowest_id():
    rng = np.random.default_rng(0)
    ctx = [(CAT[7], (0.3, 0.1, 0.2)), (CAT[4], (0.3, 0.1, 0.2))]
    assert all(ts_select(TsState.initial(), ctx, rng).id == 4 for _ in range(200))


def test_ts_policy_update_uses_selected_context():
    pol = ThompsonSamplingPolicy()
    X = np.array([[0.0, 0, 0], [1.0, 0, 0]])
    k = pol.select(np.array([3, 4]), X, np.random.default_rng(5))
    pol.update(0.5)
    assert np.allclose(pol.state.B, np.eye(3) + np.outer(X[k], X[k]))


# -- EXP3 ----------------------------------------------------------------------


def test_exp3_equal_estimates_uniform():
    st_ = Exp3State(np.full(5, 3.0), 0.5, 0.1)
    assert np.allclose(exp3_distribution(st_, [0, 2, 4]), 1 / 3)


def test_exp3_gamma_one_uniform():
    st_ = Exp3State(np.array([0.0, 10.0, 50.0]), 1.0, 1.0)
    assert np.allclose(exp3_distribution(st_, [0, 1, 2]), 1 / 3)


def test_exp3_two_arm_example():
    st_ = Exp3State(np.array([0.0, 1.0]), 1.0, 0.0)
    p = exp3_distribution(st_, [0, 1])
    assert np.allclose(p, [0.7311, 0.2689], atol=1e-4)
    assert p[0] == pytest.approx(1 / (1 + math.exp(-1)), rel=1e-12)


def test_exp3_one_hot_recovers_classical():
    W = 6
    X = np.eye(W)
    p = np.full(W, 1 / W)
    est = exp3_estimates(X, 2, 0.4, p, 0.0)
    assert np.allclose(est, oracles.classical_exp3_estimate(W, 2, 0.4, 1 / W))
    assert est[2] == pytest.approx(W * 0.4)


def test_exp3_zero_cost_no_change():
    st_ = Exp3State(np.arange(4.0), 0.1, 0.2)
    ctx = [(CAT[i], (0.1 * i, 0.01, 0.2)) for i in range(4)]
    out = exp3_update(st_, ctx, CAT[1], 0.0, exp3_distribution(st_, [0, 1, 2, 3]))
    assert np.array_equal(out.cum_cost_estimates, st_.cum_cost_estimates)


def test_exp3_scalar_context():
    X = np.full((4, 1), 0.7)
    p = np.array([0.1, 0.2, 0.3, 0.4])
    est = exp3_estimates(X, 1, 0.35, p, 0.0)
    assert np.allclose(est, 0.35)


def test_exp3_degenerate_context():
    X = np.zeros((3, 3))
    with pytest.raises(DegenerateContextError):
        exp3_estimates(X, 0, 0.5, np.full(3, 1 / 3), 0.0)


def test_exp3_cold_start_regularized():
    X = np.zeros((3, 3))
    est = exp3_estimates(X, 0, 0.5, np.full(3, 1 / 3), 1e-8)
    assert np.all(est == 0)


def test_exp3_defaults_formula():
    eps, gam = exp3_defaults(55, 20000)
    assert eps == pytest.approx(math.log(55) / (9 * math.sqrt(20000)))
    assert gam == pytest.approx(math.sqrt(55 * math.log(55) / 20000))
    assert exp3_defaults(55, 10)[1] == 1.0


def test_exp3_policy_round():
    pol = Exp3Policy(Exp3State.initial(4, 100))
    ids = np.array([0, 1, 2, 3])
    X = np.eye(4)[:, :3]
    k = pol.select(ids, X, np.random.default_rng(0))
    pol.update(0.5)
    assert pol.state.cum_cost_estimates.sum() != 0 or k == 3


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(-50, 50), min_size=2, max_size=12),
    st.floats(0.0, 1.0),
    st.floats(1e-3, 5.0),
    st.floats(-100, 100),
)
def test_exp3_distribution_properties(cum, gamma, eps, shift):
    cum = np.array(cum)
    ids = list(range(len(cum)))
    p = exp3_distribution(Exp3State(cum, eps, gamma), ids)
    q = exp3_distribution(Exp3State(cum + shift, eps, gamma), ids)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(p >= gamma / len(ids) - 1e-12)
    assert np.allclose(p, q, atol=1e-9)


# -- baselines and regret ------------------------------------------------------


def test_baseline_fixed():
    for text in ("0" * 10, "1" * 10, "1010101010"):
        assert baseline_fixed(state(text), CAT) == CAT.widest()


def test_baseline_reactive_examples():
    assert baseline_reactive(state("0" * 10), CAT) == CAT.widest()
    w = baseline_reactive(state("1100000000"), CAT)
    assert (w.bandwidth, w.center_freq) == (80e6, 60e6)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=10, max_size=10))
def test_baseline_reactive_against_run_scan(bits):
    w = baseline_reactive(np.array(bits), CAT)
    lo, hi = oracles.longest_zero_run(bits)
    if hi == lo:
        assert w.bandwidth == CAT.bandwidths.min()
        return
    assert w.bandwidth == (hi - lo) * 10e6
    assert w.center_freq == pytest.approx((lo + hi) / 2 * 10e6)


def test_regret_ledger():
    led = RegretLedger()
    assert led.record(0.4, 0.4) == 0
    regret_ledger_update(led, 0.5, 0.2)
    assert led.cumulative_regret == pytest.approx(0.3)
    led = RegretLedger()
    for _ in range(50):
        led.record(0.3, 0.1)
    assert led.cumulative_regret == pytest.approx(50 * 0.2)
    assert led.average_cost == pytest.approx(0.3)
