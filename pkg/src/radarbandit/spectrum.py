"""Binary interference states, spectrum sensing and the waveform cost."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .waveforms import Waveform, WaveformCatalog


@dataclass(frozen=True, eq=False)
class InterferenceState:
    """Length-S occupancy vector; bit l is 1 when sub-channel l is above threshold."""

    bits: np.ndarray
    subchannel_width: float = 1.0

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=np.uint8)
        if b.ndim != 1 or np.any(b > 1):
            raise ValueError("interference state must be a 1-D binary vector")
        b = b.copy()
        b.flags.writeable = False
        object.__setattr__(self, "bits", b)

    def __len__(self) -> int:
        return len(self.bits)

    def __eq__(self, other):
        if not isinstance(other, InterferenceState):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(self.key)

    @property
    def key(self) -> int:
        return state_key(self.bits)

    def to_string(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    @classmethod
    def from_string(cls, text: str, subchannel_width: float = 1.0) -> "InterferenceState":
        return cls(np.array([int(ch) for ch in text], dtype=np.uint8), subchannel_width)

    @classmethod
    def zeros(cls, num_subchannels: int, subchannel_width: float = 1.0) -> "InterferenceState":
        return cls(np.zeros(num_subchannels, dtype=np.uint8), subchannel_width)


StateLike = Union[InterferenceState, Sequence[int], np.ndarray]

_POW2_CACHE: dict[int, np.ndarray] = {}


def _bits(s: StateLike) -> np.ndarray:
    if isinstance(s, InterferenceState):
        return s.bits
    return np.asarray(s, dtype=np.uint8)


def state_key(bits: np.ndarray) -> int:
    """Integer encoding of a bit vector, first sub-channel as the most significant bit."""
    n = len(bits)
    w = _POW2_CACHE.get(n)
    if w is None:
        w = 1 << np.arange(n - 1, -1, -1, dtype=np.int64)
        _POW2_CACHE[n] = w
    return int(np.dot(np.asarray(bits, dtype=np.int64), w))


def bits_to_string(bits: np.ndarray) -> str:
    return "".join("1" if b else "0" for b in bits)


@dataclass(frozen=True)
class CostParams:
    beta1: float
    beta2: float

    def __post_init__(self):
        if self.beta1 < 0 or self.beta2 < 0:
            raise ValueError("cost weights must be non-negative")

    @classmethod
    def default(cls, channel_bandwidth: float) -> "CostParams":
        b = 1.0 / (2.0 * channel_bandwidth)
        return cls(b, b)

    def check(self, channel_bandwidth: float) -> None:
        """Weights must keep the cost inside [0, 1] for this channel."""
        if (self.beta1 + self.beta2) * channel_bandwidth > 1.0 + 1e-12:
            raise ValueError(
                f"beta1 + beta2 = {self.beta1 + self.beta2:g} exceeds 1/B = {1 / channel_bandwidth:g}"
            )


# -- vectorized core -------------------------------------------------------


def collision_vector(s: StateLike, catalog: WaveformCatalog) -> np.ndarray:
    """Collision bandwidth (Hz) of every catalog waveform against ``s``."""
    b = _bits(s).astype(np.int64)
    return catalog.subchannel_width * (catalog.occupancy.astype(np.int64) @ b)


def _terms(s: StateLike, catalog: WaveformCatalog, allow_negative: bool):
    coll = collision_vector(s, catalog)
    clean = coll == 0
    if not clean.any():
        return coll, np.zeros(len(catalog))
    missed = catalog.bandwidths[clean].max() - catalog.bandwidths
    if not allow_negative:
        missed = np.maximum(missed, 0.0)
    return coll, missed


def missed_vector(
    s: StateLike, catalog: WaveformCatalog, allow_negative: bool = False
) -> np.ndarray:
    return _terms(s, catalog, allow_negative)[1]


def cost_vector(
    s: StateLike,
    params: CostParams,
    catalog: WaveformCatalog,
    allow_negative: bool = False,
) -> np.ndarray:
    coll, missed = _terms(s, catalog, allow_negative)
    return params.beta1 * coll + params.beta2 * missed


class CostTable:
    """Memoized per-state cost vectors for one catalog and weighting."""

    def __init__(
        self,
        catalog: WaveformCatalog,
        params: CostParams,
        allow_negative_missed: bool = False,
    ):
        params.check(catalog.channel_bandwidth)
        self.catalog = catalog
        self.params = params
        self.allow_negative_missed = allow_negative_missed
        self._table: dict[int, np.ndarray] = {}

    def __call__(self, bits: np.ndarray, key: int | None = None) -> np.ndarray:
        if key is None:
            key = state_key(bits)
        vec = self._table.get(key)
        if vec is None:
            vec = cost_vector(bits, self.params, self.catalog, self.allow_negative_missed)
            vec.flags.writeable = False
            self._table[key] = vec
        return vec


# -- scalar operations -----------------------------------------------------


def collision_bandwidth(w: Waveform, s: StateLike, catalog: WaveformCatalog) -> float:
    return float(collision_vector(s, catalog)[w.id])


def missed_bandwidth(
    w: Waveform, s: StateLike, catalog: WaveformCatalog, allow_negative: bool = False
) -> float:
    return float(missed_vector(s, catalog, allow_negative)[w.id])


def cost(
    w: Waveform,
    s: StateLike,
    params: CostParams,
    catalog: WaveformCatalog,
    allow_negative: bool = False,
) -> float:
    return float(cost_vector(s, params, catalog, allow_negative)[w.id])


def sense(true_state: StateLike, flip_prob: float, rng: np.random.Generator) -> InterferenceState:
    """Imperfect sensing: each bit flips independently with ``flip_prob``."""
    if not 0.0 <= flip_prob < 0.5:
        raise ValueError("flip_prob must lie in [0, 0.5)")
    bits = _bits(true_state)
    width = true_state.subchannel_width if isinstance(true_state, InterferenceState) else 1.0
    if flip_prob == 0.0:
        return InterferenceState(bits, width)
    flips = rng.random(len(bits)) < flip_prob
    return InterferenceState(bits ^ flips.astype(np.uint8), width)


def oracle_waveform(
    s: StateLike,
    params: CostParams,
    allowed: Sequence[Waveform],
    catalog: WaveformCatalog,
    allow_negative: bool = False,
) -> Waveform:
    """Allowed waveform of least cost against the true state (lowest id on ties)."""
    if not allowed:
        raise ValueError("allowed set is empty")
    costs = cost_vector(s, params, catalog, allow_negative)
    ordered = sorted(allowed, key=lambda w: w.id)
    best = min(ordered, key=lambda w: costs[w.id])
    return best
