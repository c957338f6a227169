import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize

from radarbandit.tracker import (
    DegenerateCovarianceError,
    TrackState,
    clamp_params,
    kalman_predict,
    kalman_step,
    kalman_update,
    measurement_noise,
    optimal_waveform_params,
    rmse,
    select_tracked_waveform,
    white_acceleration_q,
    write_track_log,
    TRACK_COLUMNS,
)
from radarbandit.waveforms import Waveform

import oracles

C = 299_792_458.0
FC = 3e9


def test_noise_zero_chirp_is_diagonal():
    N = measurement_noise(1e-6, 0.0, 50.0, FC)
    assert N[0, 1] == 0 and N[1, 0] == 0
    assert N[0, 0] == pytest.approx(C**2 * 1e-12 / 100.0, rel=1e-15)
    assert N[1, 1] == pytest.approx(C**2 / (2 * 1e-6 * FC * 50.0), rel=1e-15)


def test_noise_substitution_example():
    got = measurement_noise(10e-6, 1e12, 100.0, FC)
    want = oracles.measurement_noise_reference(10e-6, 1e12, 100.0, FC)
    assert np.allclose(got, want, rtol=1e-14, atol=0)
    # hand values: c^2 T^2/(2 eta) with T = 1e-5 is c^2 * 5e-13
    assert got[0, 0] == pytest.approx(C**2 * 5e-13, rel=1e-14)
    assert got[0, 1] == pytest.approx(-(C**2) * 1e12 * 1e-10 / (FC * 100.0), rel=1e-14)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-7, 1e-4), st.floats(-1e14, 1e14, allow_subnormal=False), st.floats(1e-2, 1e6), st.integers(1, 64))
def test_noise_eta_scaling_and_symmetry(T, alpha, eta, k):
    N = measurement_noise(T, alpha, eta, FC)
    Nk = measurement_noise(T, alpha, k * eta, FC)
    assert np.allclose(Nk * k, N, rtol=1e-12, atol=0)
    assert N[0, 1] == N[1, 0]


def test_noise_positive_definite_for_small_chirp():
    N = measurement_noise(1e-6, 1e9, 10.0, FC)
    assert np.all(np.linalg.eigvalsh(N) > 0)


def test_noise_domain_errors():
    for args in ((0, 1, 1, FC), (1e-6, 1, 0, FC), (1e-6, 1, 1, 0)):
        with pytest.raises(ValueError):
            measurement_noise(*args)


def test_huge_noise_ignores_measurement():
    tr = TrackState.initial(100.0, 2.0, 4.0, 1.0)
    pred = kalman_predict(tr, 0.1)
    post = kalman_update(pred, [500.0, -50.0], np.eye(2) * 1e12)
    assert np.allclose(post.x, pred.x, atol=1e-6)
    assert np.allclose(post.P, pred.P, rtol=1e-6)


def test_tiny_noise_trusts_measurement():
    tr = TrackState.initial(100.0, 2.0, 4.0, 1.0)
    post = kalman_step(tr, [130.0, -3.0], np.eye(2) * 1e-12, 0.1, Q=np.zeros((2, 2)))
    assert np.allclose(post.x, [130.0, -3.0], atol=1e-6)


def test_predict_only_step():
    tr = TrackState.initial(100.0, 2.0, 4.0, 1.0)
    out = kalman_step(tr, None, None, 0.5)
    assert np.allclose(out.x, [101.0, 2.0])
    assert math.isnan(out.nis)
    with pytest.raises(ValueError):
        kalman_predict(tr, 0.0)


def test_white_acceleration_q():
    Q = white_acceleration_q(2.0, 3.0)
    assert np.allclose(Q, 9 * np.array([[4, 4], [4, 4]]))


def simulate_nis(seed, steps=500, dt=0.1, sigma_a=1.0):
    rng = np.random.default_rng(seed)
    Q = white_acceleration_q(dt, sigma_a)
    F = np.array([[1, dt], [0, 1]])
    N = np.array([[4.0, 0.5], [0.5, 1.0]])
    x = np.array([1000.0, 10.0])
    tr = TrackState(x + rng.multivariate_normal([0, 0], np.diag([25.0, 4.0])), np.diag([25.0, 4.0]), sigma_a)
    nis = []
    for _ in range(steps):
        x = F @ x + rng.multivariate_normal([0, 0], Q)
        z = x + rng.multivariate_normal([0, 0], N)
        tr = kalman_step(tr, z, N, dt)
        nis.append(tr.nis)
    return np.array(nis)


def test_nis_consistency_single_track():
    nis = simulate_nis(0)
    # chi-square(2): mean 2, variance 4
    assert abs(nis.mean() - 2.0) < 3 * math.sqrt(4.0 / len(nis))


def test_covariance_stays_psd_over_random_steps(caplog):
    rng = np.random.default_rng(1)
    tr = TrackState.initial(0.0, 0.0, 10.0, 10.0)
    with caplog.at_level("WARNING"):
        for _ in range(10_000):
            A = rng.standard_normal((2, 2))
            N = A @ A.T + 0.1 * np.eye(2)
            tr = kalman_step(tr, rng.standard_normal(2) * 10, N, 0.05)
            assert np.allclose(tr.P, tr.P.T)
            assert np.linalg.eigvalsh(tr.P).min() >= -1e-12
    assert "clamping" not in caplog.text


def test_clamp_on_indefinite_input(caplog):
    tr = TrackState(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))
    with caplog.at_level("WARNING"):
        out = kalman_predict(tr, 1e-3, Q=np.zeros((2, 2)))
    assert np.linalg.eigvalsh(out.P).min() >= -1e-12
    assert "clamping" in caplog.text


# -- optimal parameters ---------------------------------------------------------


def test_optimal_zero_cross_term():
    a, _ = optimal_waveform_params(np.diag([3.0, 2.0]), FC)
    assert a == 0


def test_optimal_unit_substitution():
    _, T = optimal_waveform_params(np.eye(2), 1 / (2 * math.pi))
    assert T == pytest.approx(1.0, rel=1e-14)


def test_optimal_degenerate():
    with pytest.raises(DegenerateCovarianceError):
        optimal_waveform_params(np.array([[1.0, 1.0], [1.0, 1.0]]), FC)


def information_objective(P, T, alpha, wc):
    """tr(P J) with J the second-order (Fisher-like) information of a
    Gaussian-envelope chirp in delay and Doppler, up to constant factors."""
    J = np.array([[1 / T**2 + 4 * alpha**2 * T**2, 2 * wc * alpha * T**2], [2 * wc * alpha * T**2, wc**2 * T**2]])
    return float(np.trace(P @ J))


@pytest.mark.parametrize("seed", range(8))
def test_optimal_matches_numerical_minimum(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((2, 2))
    P = A @ A.T + 0.2 * np.eye(2)
    fc = 1 / (2 * math.pi)
    wc = 1.0
    a_star, T_star = optimal_waveform_params(P, fc)

    def obj(v):
        return information_objective(P, math.exp(v[0]), v[1], wc)

    grid = optimize.brute(obj, ((-4, 4), (-10, 10)), Ns=81, finish=None)
    res = optimize.minimize(obj, grid, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14})
    T_num, a_num = math.exp(res.x[0]), res.x[1]
    assert T_num == pytest.approx(T_star, rel=0.05)
    assert a_num == pytest.approx(a_star, rel=0.05, abs=1e-3)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 10), st.floats(-0.9, 0.9), st.floats(0.1, 10), st.floats(1e-3, 1e3))
def test_optimal_scaling(p11, rho, p22, k):
    p12 = rho * math.sqrt(p11 * p22)
    P = np.array([[p11, p12], [p12, p22]])
    a1, T1 = optimal_waveform_params(P, FC)
    a2, T2 = optimal_waveform_params(k * P, FC)
    assert a2 == pytest.approx(a1, rel=1e-12, abs=1e-300)
    # p11^2 and det both scale by k^2, so T* is scale-free too
    assert T2 == pytest.approx(T1, rel=1e-12)


# -- waveform selection ---------------------------------------------------------


WAVES = [
    Waveform(0, 10e6, 20e6, 1e-6),
    Waveform(1, 50e6, 40e6, 1e-6),
    Waveform(2, 50e6, 40e6, 2e-6),
    Waveform(3, 50e6, 100e6, 1e-6),
]


def test_direct_exact_match():
    w = WAVES[2]
    assert select_tracked_waveform((w.chirp_rate, w.pulse_duration), WAVES, "direct") == w


def test_direct_tie_lowest_id():
    twins = [Waveform(4, 30e6, 20e6, 1e-6), Waveform(0, 10e6, 20e6, 1e-6)]
    out = select_tracked_waveform((twins[0].chirp_rate, 1e-6), twins, "direct")
    assert out.id == 0


def test_penalty_zero_weight():
    pen = select_tracked_waveform((0.0, 1e-6), WAVES, "penalty", weight=0.0)
    assert np.all(pen == 0) and len(pen) == len(WAVES)


def test_penalty_orders_by_alpha_distance():
    target = WAVES[1].chirp_rate
    pen = select_tracked_waveform((target, 1e-6), WAVES, "penalty", weight=1.0)
    assert pen[1] == 0 and np.all((pen >= 0) & (pen <= 1))
    assert pen[3] > pen[0]


def test_unknown_mode():
    with pytest.raises(ValueError):
        select_tracked_waveform((0.0, 1e-6), WAVES, "bogus")


def test_clamp_params():
    a, T = clamp_params(1e20, 1.0, WAVES)
    assert a == max(w.chirp_rate for w in WAVES)
    assert T == 2e-6


# -- rmse and logs -------------------------------------------------------------


def test_rmse_examples():
    truth = np.linspace(500, 600, 100)
    assert rmse(truth, truth) == 0
    assert rmse(truth + 5.0, truth) == pytest.approx(5.0)
    rng = np.random.default_rng(0)
    assert rmse(truth[0] + 3 * rng.standard_normal(10_000), np.full(10_000, truth[0])) == pytest.approx(3.0, rel=0.05)
    with pytest.raises(ValueError):
        rmse([1.0], [1.0, 2.0])


def test_track_log_columns(tmp_path):
    row = {c: 1.5 for c in TRACK_COLUMNS}
    row["cpi_index"] = 0
    write_track_log(tmp_path / "t.csv", [row])
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0].split(",") == list(TRACK_COLUMNS)
    assert lines[1].startswith("0,1.5")
