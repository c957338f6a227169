"""LFM waveform catalog, inter-waveform distortion and the per-PRI constrained set."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np


class CatalogError(ValueError):
    """Raised when a waveform catalog violates its construction rules."""


@dataclass(frozen=True)
class Waveform:
    """One LFM chirp.

    ``center_freq`` is the offset of the band center inside the shared
    channel (0..B), ``bandwidth`` the sweep extent T*alpha.
    """

    id: int
    center_freq: float
    bandwidth: float
    pulse_duration: float
    amplitude: float = 1.0

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise CatalogError(f"waveform {self.id}: bandwidth must be positive")
        if self.pulse_duration <= 0:
            raise CatalogError(f"waveform {self.id}: pulse_duration must be positive")

    @property
    def chirp_rate(self) -> float:
        return self.bandwidth / self.pulse_duration

    def band(self, literal: bool = False) -> tuple[float, float]:
        """Occupied frequency interval.

        The default half-width is ``bandwidth/2``. ``literal=True`` uses a
        half-width of the full ``bandwidth``.
        """
        half = self.bandwidth if literal else self.bandwidth / 2
        return self.center_freq - half, self.center_freq + half


@dataclass(frozen=True)
class WaveformCatalog:
    waveforms: tuple[Waveform, ...]
    channel_bandwidth: float
    num_subchannels: int
    carrier_freq: float = 3e9
    literal_occupancy: bool = False
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "waveforms", tuple(self.waveforms))
        if not self.waveforms:
            raise CatalogError("catalog needs at least one waveform")
        ids = [w.id for w in self.waveforms]
        if ids != list(range(len(ids))):
            raise CatalogError("waveform ids must be contiguous from 0 in catalog order")
        if self.num_subchannels < 1 or self.channel_bandwidth <= 0:
            raise CatalogError("channel must have positive bandwidth and sub-channels")
        lowest = self.carrier_freq - self.channel_bandwidth / 2
        for w in self.waveforms:
            if not w.bandwidth < lowest + w.center_freq:
                raise CatalogError(f"waveform {w.id} violates the narrowband condition")
            if not self.literal_occupancy:
                lo, hi = w.band()
                tol = 1e-9 * self.channel_bandwidth
                if lo < -tol or hi > self.channel_bandwidth + tol:
                    raise CatalogError(f"waveform {w.id} occupies [{lo}, {hi}] outside [0, B]")

    def __len__(self) -> int:
        return len(self.waveforms)

    def __getitem__(self, idx: int) -> Waveform:
        return self.waveforms[idx]

    def __iter__(self):
        return iter(self.waveforms)

    @property
    def subchannel_width(self) -> float:
        return self.channel_bandwidth / self.num_subchannels

    @cached_property
    def bandwidths(self) -> np.ndarray:
        return np.array([w.bandwidth for w in self.waveforms])

    @cached_property
    def centers(self) -> np.ndarray:
        return np.array([w.center_freq for w in self.waveforms])

    @cached_property
    def subchannel_centers(self) -> np.ndarray:
        ell = np.arange(1, self.num_subchannels + 1)
        return ell * self.subchannel_width - self.subchannel_width / 2

    @cached_property
    def occupancy(self) -> np.ndarray:
        """(W, S) boolean matrix: sub-channel center inside the waveform's band."""
        half = self.bandwidths if self.literal_occupancy else self.bandwidths / 2
        lo = (self.centers - half)[:, None]
        hi = (self.centers + half)[:, None]
        sc = self.subchannel_centers[None, :]
        return (sc >= lo) & (sc <= hi)

    def default_gammas(self) -> tuple[float, float]:
        g = 1.0 / (2.0 * self.channel_bandwidth**2)
        return g, g

    def distortion_matrix(self, gamma1: float | None = None, gamma2: float | None = None) -> np.ndarray:
        d1, d2 = self.default_gammas()
        g1 = d1 if gamma1 is None else gamma1
        g2 = d2 if gamma2 is None else gamma2
        key = ("D", g1, g2)
        if key not in self._cache:
            df = self.centers[:, None] - self.centers[None, :]
            db = self.bandwidths[:, None] - self.bandwidths[None, :]
            self._cache[key] = g1 * df**2 + g2 * db**2
        return self._cache[key]

    def widest(self) -> Waveform:
        """Widest waveform, lowest id on ties."""
        return self.waveforms[int(np.argmax(self.bandwidths))]

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "channel_bandwidth_hz": self.channel_bandwidth,
            "num_subchannels": self.num_subchannels,
            "carrier_freq_hz": self.carrier_freq,
            "literal_occupancy": self.literal_occupancy,
            "waveforms": [
                {
                    "id": w.id,
                    "center_freq_hz": w.center_freq,
                    "bandwidth_hz": w.bandwidth,
                    "pulse_duration_s": w.pulse_duration,
                }
                for w in self.waveforms
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "WaveformCatalog":
        waveforms = [
            Waveform(
                id=int(w["id"]),
                center_freq=float(w["center_freq_hz"]),
                bandwidth=float(w["bandwidth_hz"]),
                pulse_duration=float(w["pulse_duration_s"]),
                amplitude=float(w.get("amplitude", 1.0)),
            )
            for w in doc["waveforms"]
        ]
        waveforms.sort(key=lambda w: w.id)
        return cls(
            waveforms=tuple(waveforms),
            channel_bandwidth=float(doc["channel_bandwidth_hz"]),
            num_subchannels=int(doc["num_subchannels"]),
            carrier_freq=float(doc.get("carrier_freq_hz", 3e9)),
            literal_occupancy=bool(doc.get("literal_occupancy", False)),
        )

    @classmethod
    def from_json(cls, text: str) -> "WaveformCatalog":
        return cls.from_dict(json.loads(text))


def grid_catalog(
    channel_bandwidth: float = 100e6,
    num_subchannels: int = 10,
    bandwidths: Iterable[float] | None = None,
    pulse_duration: float = 0.5e-6,
    carrier_freq: float = 3e9,
    literal_occupancy: bool = False,
) -> WaveformCatalog:
    """Every (center, bandwidth) pair whose band sits on the sub-channel grid.

    Bandwidths default to every multiple of the sub-channel width. For each
    bandwidth the band start steps across the channel one sub-channel at a
    time. Ordering is by bandwidth, then center frequency.
    """
    step = channel_bandwidth / num_subchannels
    if bandwidths is None:
        bandwidths = [k * step for k in range(1, num_subchannels + 1)]
    waveforms = []
    for bw in sorted(bandwidths):
        k = int(round(bw / step))
        for start in range(num_subchannels - k + 1):
            waveforms.append(
                Waveform(
                    id=len(waveforms),
                    center_freq=start * step + bw / 2,
                    bandwidth=float(bw),
                    pulse_duration=pulse_duration,
                )
            )
    return WaveformCatalog(
        waveforms=tuple(waveforms),
        channel_bandwidth=channel_bandwidth,
        num_subchannels=num_subchannels,
        carrier_freq=carrier_freq,
        literal_occupancy=literal_occupancy,
    )


def distortion(w_a: Waveform, w_b: Waveform, gamma1: float, gamma2: float) -> float:
    df = w_a.center_freq - w_b.center_freq
    dbw = w_a.bandwidth - w_b.bandwidth
    return gamma1 * df * df + gamma2 * dbw * dbw


def constrained_catalog(
    catalog: WaveformCatalog,
    previous: Waveform,
    d_hat: float,
    gamma1: float | None = None,
    gamma2: float | None = None,
) -> list[Waveform]:
    """Catalog members within distortion ``d_hat`` of ``previous``, in catalog order."""
    mask = allowed_mask(catalog, previous.id, d_hat, gamma1, gamma2)
    return [w for w, ok in zip(catalog.waveforms, mask) if ok]


def allowed_mask(
    catalog: WaveformCatalog,
    previous_id: int | None,
    d_hat: float | None,
    gamma1: float | None = None,
    gamma2: float | None = None,
) -> np.ndarray:
    """Boolean mask form of :func:`constrained_catalog`.

    ``previous_id=None`` (first PRI) or ``d_hat=None`` (constraint disabled)
    allows the whole catalog.
    """
    if previous_id is None or d_hat is None:
        return np.ones(len(catalog), dtype=bool)
    D = catalog.distortion_matrix(gamma1, gamma2)
    return D[previous_id] < d_hat


def ids_of(waveforms: Sequence[Waveform]) -> np.ndarray:
    return np.fromiter((w.id for w in waveforms), dtype=np.int64, count=len(waveforms))
