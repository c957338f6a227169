"""Context assembly, the constrained TS and EXP3 learners, baselines and regret."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .waveforms import Waveform, WaveformCatalog

CONTEXT_DIM = 3


class DegenerateContextError(RuntimeError):
    """The EXP3 design matrix could not be inverted even after regularization."""

    def __init__(self, message: str, pri: int | None = None):
        super().__init__(message if pri is None else f"PRI {pri}: {message}")
        self.pri = pri


class ContextVector(NamedTuple):
    xi1: float  # running mean cost of the (waveform, sensed state) pair
    xi2: float  # sample variance, N_c - 1 denominator
    xi3: float  # most recent cost

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)


class HistoryStore:
    """Running cost statistics per (waveform id, sensed state).

    Each sensed state owns a (4, W) block holding count, mean, M2 and last
    cost for every waveform, updated with Welford's recurrence.
    """

    def __init__(self, num_waveforms: int, cold_start: Sequence[float] = (0.0, 0.0, 0.0)):
        self.num_waveforms = num_waveforms
        self.cold_start = np.asarray(cold_start, dtype=float)
        self._blocks: dict[int, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._blocks)

    def _block(self, key: int) -> np.ndarray:
        blk = self._blocks.get(key)
        if blk is None:
            blk = np.zeros((4, self.num_waveforms))
            self._blocks[key] = blk
        return blk

    def observe(self, waveform_id: int, key: int, cost: float) -> None:
        blk = self._block(key)
        n = blk[0, waveform_id] + 1.0
        delta = cost - blk[1, waveform_id]
        blk[0, waveform_id] = n
        blk[1, waveform_id] += delta / n
        blk[2, waveform_id] += delta * (cost - blk[1, waveform_id])
        blk[3, waveform_id] = cost

    def count(self, waveform_id: int, key: int) -> int:
        blk = self._blocks.get(key)
        return 0 if blk is None else int(blk[0, waveform_id])

    def contexts(self, key: int, ids: np.ndarray) -> np.ndarray:
        """(len(ids), 3) context matrix for the given waveforms under state ``key``."""
        blk = self._blocks.get(key)
        X = np.empty((len(ids), CONTEXT_DIM))
        if blk is None:
            X[:] = self.cold_start
            return X
        n = blk[0, ids]
        X[:, 0] = blk[1, ids]
        X[:, 1] = np.where(n > 1, blk[2, ids] / np.maximum(n - 1, 1), 0.0)
        X[:, 2] = blk[3, ids]
        unseen = n == 0
        if unseen.any():
            X[unseen] = self.cold_start
        return X


def build_context(history: HistoryStore, w: Waveform, sensed) -> ContextVector:
    key = sensed if isinstance(sensed, int) else sensed.key
    row = history.contexts(key, np.array([w.id]))[0]
    return ContextVector(*row.tolist())


def _as_matrix(contexts) -> tuple[list[Waveform], np.ndarray]:
    waves = [w for w, _ in contexts]
    X = np.array([np.asarray(x, dtype=float) for _, x in contexts])
    return waves, X


# -- Thompson sampling -------------------------------------------------------


@dataclass
class TsState:
    B: np.ndarray = field(default_factory=lambda: np.eye(CONTEXT_DIM))
    f: np.ndarray = field(default_factory=lambda: np.zeros(CONTEXT_DIM))
    theta_hat: np.ndarray = field(default_factory=lambda: np.zeros(CONTEXT_DIM))
    v: float = 1.0

    @classmethod
    def initial(cls, dim: int = CONTEXT_DIM, v: float = 1.0) -> "TsState":
        return cls(np.eye(dim), np.zeros(dim), np.zeros(dim), v)


def ts_sample(state: TsState, rng: np.random.Generator) -> np.ndarray:
    """Draw theta ~ N(theta_hat, v^2 B^-1)."""
    cov_chol = np.linalg.cholesky(np.linalg.inv(state.B))
    z = rng.standard_normal(len(state.theta_hat))
    return state.theta_hat + state.v * (cov_chol @ z)


def ts_pick(state: TsState, X: np.ndarray, rng: np.random.Generator) -> int:
    """Row index of the minimum sampled score; the first row wins ties."""
    theta = ts_sample(state, rng)
    return int(np.argmin(X @ theta))


def ts_select(state: TsState, contexts, rng: np.random.Generator) -> Waveform:
    waves, X = _as_matrix(sorted(contexts, key=lambda p: p[0].id))
    if len(waves) == 1:
        return waves[0]
    return waves[ts_pick(state, X, rng)]


def ts_update(state: TsState, x, observed_cost: float) -> TsState:
    x = np.asarray(x, dtype=float)
    B = state.B + np.outer(x, x)
    f = state.f + x * observed_cost
    return TsState(B, f, np.linalg.solve(B, f), state.v)


# -- EXP3 -----------------------------------------------------------------


@dataclass
class Exp3State:
    cum_cost_estimates: np.ndarray
    epsilon: float
    gamma: float
    regularization: float = 1e-8

    @classmethod
    def initial(
        cls,
        num_waveforms: int,
        horizon: int,
        epsilon: float | None = None,
        gamma: float | None = None,
        dim: int = CONTEXT_DIM,
        regularization: float = 1e-8,
    ) -> "Exp3State":
        eps, gam = exp3_defaults(num_waveforms, horizon, dim)
        return cls(
            np.zeros(num_waveforms),
            eps if epsilon is None else epsilon,
            gam if gamma is None else gamma,
            regularization,
        )


def exp3_defaults(num_waveforms: int, horizon: int, dim: int = CONTEXT_DIM) -> tuple[float, float]:
    """Learning rate ln(W)/(3 d sqrt(n)) and mixing min(1, sqrt(W ln W / n))."""
    log_w = math.log(num_waveforms)
    epsilon = log_w / (3 * dim * math.sqrt(horizon))
    gamma = min(1.0, math.sqrt(num_waveforms * log_w / horizon))
    return epsilon, gamma


def _ids(allowed) -> np.ndarray:
    if isinstance(allowed, np.ndarray):
        return allowed.astype(np.int64)
    return np.array([w.id if isinstance(w, Waveform) else int(w) for w in allowed], dtype=np.int64)


def exp3_distribution(state: Exp3State, allowed) -> np.ndarray:
    """Selection probabilities over ``allowed`` (uniform exploration mixed in)."""
    ids = _ids(allowed)
    logits = -state.epsilon * state.cum_cost_estimates[ids]
    logits -= logits.max()
    weights = np.exp(logits)
    p = (1.0 - state.gamma) * weights / weights.sum() + state.gamma / len(ids)
    return p / p.sum()


def exp3_estimates(
    X: np.ndarray, played_index: int, observed_cost: float, dist: np.ndarray, regularization: float
) -> np.ndarray:
    """Least-squares cost estimate <x_w, Q^-1 x_played C> for every row of ``X``."""
    Q = (X * dist[:, None]).T @ X + regularization * np.eye(X.shape[1])
    try:
        theta = np.linalg.solve(Q, X[played_index] * observed_cost)
    except np.linalg.LinAlgError as exc:
        raise DegenerateContextError("singular context design matrix") from exc
    if not np.all(np.isfinite(theta)):
        raise DegenerateContextError("non-finite least-squares estimate")
    return X @ theta


def exp3_update(
    state: Exp3State,
    contexts,
    played: Waveform,
    observed_cost: float,
    dist: np.ndarray,
) -> Exp3State:
    waves, X = _as_matrix(contexts)
    ids = _ids(waves)
    played_index = int(np.flatnonzero(ids == played.id)[0])
    est = exp3_estimates(X, played_index, observed_cost, np.asarray(dist, float), state.regularization)
    cum = state.cum_cost_estimates.copy()
    cum[ids] += est
    return Exp3State(cum, state.epsilon, state.gamma, state.regularization)


# -- policies used by the episode loop --------------------------------------


class ThompsonSamplingPolicy:
    name = "ts"

    def __init__(self, v: float = 1.0, dim: int = CONTEXT_DIM):
        self.state = TsState.initial(dim, v)
        self._x = None

    def select(self, ids: np.ndarray, X: np.ndarray, rng: np.random.Generator) -> int:
        k = ts_pick(self.state, X, rng) if len(ids) > 1 else 0
        self._x = X[k]
        return k

    def update(self, cost: float) -> None:
        self.state = ts_update(self.state, self._x, cost)


class Exp3Policy:
    name = "exp3"

    def __init__(self, state: Exp3State):
        self.state = state
        self._pending = None

    def select(self, ids: np.ndarray, X: np.ndarray, rng: np.random.Generator) -> int:
        p = exp3_distribution(self.state, ids)
        k = int(rng.choice(len(ids), p=p))
        self._pending = (ids, X, k, p)
        return k

    def update(self, cost: float) -> None:
        ids, X, k, p = self._pending
        est = exp3_estimates(X, k, cost, p, self.state.regularization)
        self.state.cum_cost_estimates[ids] += est


# -- baselines -------------------------------------------------------------


def baseline_fixed(sensed, catalog: WaveformCatalog, previous: Waveform | None = None) -> Waveform:
    """Static radar: always the full-band (widest) waveform."""
    return catalog.widest()


def _longest_zero_run(bits: np.ndarray) -> tuple[int, int] | None:
    best, start = None, None
    for i, b in enumerate(list(bits) + [1]):
        if b == 0 and start is None:
            start = i
        elif b != 0 and start is not None:
            if best is None or i - start > best[1] - best[0]:
                best = (start, i)
            start = None
    return best


def baseline_reactive(sensed, catalog: WaveformCatalog, previous: Waveform | None = None) -> Waveform:
    """Sense-and-avoid: widest waveform inside the largest gap of the sensed state.

    The first of equally long gaps is used. When every sub-channel is
    occupied the narrowest waveform is returned.
    """
    bits = sensed.bits if hasattr(sensed, "bits") else np.asarray(sensed)
    run = _longest_zero_run(bits)
    if run is None:
        return catalog[int(np.argmin(catalog.bandwidths))]
    lo = run[0] * catalog.subchannel_width
    hi = run[1] * catalog.subchannel_width
    tol = 1e-9 * catalog.channel_bandwidth
    best = None
    for w in catalog:
        a, b = w.band(catalog.literal_occupancy)
        if a >= lo - tol and b <= hi + tol and (best is None or w.bandwidth > best.bandwidth):
            best = w
    if best is None:
        return catalog[int(np.argmin(catalog.bandwidths))]
    return best


# -- regret --------------------------------------------------------------


@dataclass
class RegretLedger:
    cumulative_regret: float = 0.0
    cumulative_cost: float = 0.0
    steps: int = 0

    @property
    def average_cost(self) -> float:
        return self.cumulative_cost / self.steps if self.steps else 0.0

    def record(self, chosen_cost: float, oracle_cost: float) -> float:
        inc = chosen_cost - oracle_cost
        self.cumulative_regret += inc
        self.cumulative_cost += chosen_cost
        self.steps += 1
        return inc


def regret_ledger_update(ledger: RegretLedger, chosen_cost: float, oracle_cost: float) -> RegretLedger:
    ledger.record(chosen_cost, oracle_cost)
    return ledger
