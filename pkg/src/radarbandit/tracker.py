"""Constant-velocity Kalman tracking of per-CPI range/range-rate measurements,
the chirp-parameter measurement noise model and the tracking-optimal waveform."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .rdproc import SPEED_OF_LIGHT
from .waveforms import Waveform

log = logging.getLogger(__name__)


class DegenerateCovarianceError(ValueError):
    pass


def white_acceleration_q(dt: float, sigma_a: float = 1.0) -> np.ndarray:
    return sigma_a**2 * np.array([[dt**4 / 4, dt**3 / 2], [dt**3 / 2, dt**2]])


@dataclass
class TrackState:
    x: np.ndarray  # (range m, range-rate m/s)
    P: np.ndarray
    sigma_a: float = 1.0
    innovation: np.ndarray | None = None
    innovation_cov: np.ndarray | None = None
    gain: np.ndarray | None = None

    @classmethod
    def initial(cls, range_m: float, rate: float = 0.0, range_var: float = 100.0,
                rate_var: float = 100.0, sigma_a: float = 1.0) -> "TrackState":
        return cls(np.array([range_m, rate], dtype=float), np.diag([range_var, rate_var]).astype(float), sigma_a)

    @property
    def nis(self) -> float:
        """Normalized innovation squared of the last update, nan after a predict-only step."""
        if self.innovation is None:
            return float("nan")
        return float(self.innovation @ np.linalg.solve(self.innovation_cov, self.innovation))


def measurement_noise(T: float, alpha: float, eta: float, f_c: float) -> np.ndarray:
    """Range/range-rate error covariance of a Gaussian-envelope LFM at SNR ``eta``."""
    if T <= 0 or eta <= 0 or f_c <= 0:
        raise ValueError("T, eta and f_c must be positive")
    c2 = SPEED_OF_LIGHT**2
    n11 = c2 * T * T / (2 * eta)
    n12 = -c2 * alpha * T * T / (f_c * eta)
    n22 = c2 / (f_c * eta) * (1 / (2 * T) + 2 * alpha * alpha * T * T)
    return np.array([[n11, n12], [n12, n22]])


def _symmetrize_clamp(P: np.ndarray) -> np.ndarray:
    P = 0.5 * (P + P.T)
    vals, vecs = np.linalg.eigh(P)
    if vals.min() < 0:
        log.warning("covariance lost positive semi-definiteness (min eigenvalue %.3g); clamping", vals.min())
        P = (vecs * np.maximum(vals, 0.0)) @ vecs.T
        P = 0.5 * (P + P.T)
    return P


def kalman_predict(track: TrackState, dt: float, Q: np.ndarray | None = None) -> TrackState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    F = np.array([[1.0, dt], [0.0, 1.0]])
    Q = white_acceleration_q(dt, track.sigma_a) if Q is None else Q
    return TrackState(F @ track.x, _symmetrize_clamp(F @ track.P @ F.T + Q), track.sigma_a)


def kalman_update(pred: TrackState, z, N: np.ndarray) -> TrackState:
    z = np.asarray(z, dtype=float)
    S = pred.P + N
    K = np.linalg.solve(S.T, pred.P.T).T  # P S^-1
    y = z - pred.x
    I_K = np.eye(2) - K
    # Joseph form keeps P PSD when N is badly scaled
    P = I_K @ pred.P @ I_K.T + K @ N @ K.T
    return TrackState(pred.x + K @ y, _symmetrize_clamp(P), pred.sigma_a, y, S, K)


def kalman_step(track: TrackState, z, N: np.ndarray | None, dt: float, Q: np.ndarray | None = None) -> TrackState:
    """Constant-velocity predict then update; ``z = None`` gives a predict-only step."""
    pred = kalman_predict(track, dt, Q)
    if z is None:
        return pred
    return kalman_update(pred, z, N)


def optimal_waveform_params(P: np.ndarray, f_c: float) -> tuple[float, float]:
    """(alpha*, T*) minimizing the predicted error from the covariance entries."""
    p11, p12, p22 = P[0, 0], P[0, 1], P[1, 1]
    det = p11 * p22 - p12 * p12
    if det <= 0 or p11 <= 0:
        raise DegenerateCovarianceError("covariance is not positive definite")
    wc = 2 * math.pi * f_c
    alpha = -wc * p12 / (2 * p11)
    T = (p11 * p11 / (wc * wc * det)) ** 0.25
    return alpha, T


def clamp_params(alpha: float, T: float, allowed: Sequence[Waveform]) -> tuple[float, float]:
    a = np.array([w.chirp_rate for w in allowed])
    t = np.array([w.pulse_duration for w in allowed])
    return float(np.clip(alpha, a.min(), a.max())), float(np.clip(T, t.min(), t.max()))


def _axis_scale(values: np.ndarray) -> float:
    span = float(values.max() - values.min())
    return span if span > 0 else max(abs(float(values.max())), 1.0)


def select_tracked_waveform(
    params: tuple[float, float],
    allowed: Sequence[Waveform],
    mode: str = "direct",
    weight: float = 1.0,
):
    """``direct``: nearest allowed waveform in normalized (T, alpha).

    ``penalty``: per-candidate additive cost weight * ((alpha - alpha*)/span)^2,
    clipped to [0, 1], aligned with ``allowed``.
    """
    alpha_star, T_star = params
    a = np.array([w.chirp_rate for w in allowed])
    t = np.array([w.pulse_duration for w in allowed])
    sa, st = _axis_scale(a), _axis_scale(t)
    if mode == "direct":
        d = ((t - T_star) / st) ** 2 + ((a - alpha_star) / sa) ** 2
        best = min(range(len(allowed)), key=lambda i: (d[i], allowed[i].id))
        return allowed[best]
    if mode == "penalty":
        return np.clip(weight * ((a - alpha_star) / sa) ** 2, 0.0, 1.0)
    raise ValueError(f"unknown selection mode {mode!r}")


def rmse(track_log: Sequence[float], truth_log: Sequence[float]) -> float:
    est = np.asarray(track_log, dtype=float)
    tru = np.asarray(truth_log, dtype=float)
    if est.shape != tru.shape:
        raise ValueError("track and truth logs differ in length")
    if est.size == 0:
        return float("nan")
    return float(np.sqrt(np.mean((est - tru) ** 2)))


TRACK_COLUMNS = ("cpi_index", "truth_range", "est_range", "est_rate", "p11", "p12", "p22", "chosen_T", "chosen_alpha")


def write_track_log(path, rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(TRACK_COLUMNS)
        for r in rows:
            wr.writerow([r[c] if isinstance(r[c], int) else format(r[c], ".17g") for c in TRACK_COLUMNS])
