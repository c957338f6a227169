"""Pulse synthesis, CPI reception, range-Doppler imaging, CA-CFAR and image metrics.

Everything runs at complex baseband with the shared channel centered on DC.
The fast-time window of a CPI is treated as circular: targets, replicas and
interference live on the same ``num_fast``-sample grid, which keeps each
pulse's matched filter a single FFT multiply.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy import ndimage, signal

from .waveforms import Waveform, WaveformCatalog

SPEED_OF_LIGHT = 299_792_458.0
MAX_SINR_DB = 100.0


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class PointTarget:
    gain: complex
    delay: float
    velocity: float = 0.0

    def __post_init__(self):
        if self.delay < 0:
            raise ValueError("target delay must be non-negative")

    @classmethod
    def at_range(cls, range_m: float, velocity: float = 0.0, gain: complex = 1.0) -> "PointTarget":
        return cls(gain, 2.0 * range_m / SPEED_OF_LIGHT, velocity)

    @property
    def range_m(self) -> float:
        return self.delay * SPEED_OF_LIGHT / 2.0


@dataclass(frozen=True)
class RadarParams:
    sample_rate: float = 200e6
    pri: float = 409.6e-6
    num_fast: int = 1024
    range_start: float = 400.0
    carrier_freq: float = 3e9
    channel_bandwidth: float = 100e6
    num_subchannels: int = 10
    pulse_span: float = 3.0  # replica half-length in envelope widths

    @property
    def range_bin(self) -> float:
        return SPEED_OF_LIGHT / (2.0 * self.sample_rate)

    @property
    def window_delay(self) -> float:
        return 2.0 * self.range_start / SPEED_OF_LIGHT

    def range_axis(self) -> np.ndarray:
        return self.range_start + self.range_bin * np.arange(self.num_fast)

    def doppler_axis(self, num_pulses: int) -> np.ndarray:
        return np.fft.fftshift(np.fft.fftfreq(num_pulses, self.pri))

    def velocity_of(self, doppler_hz):
        # echo phase exp(-j 2 pi (2 v / c) f_c t): receding targets map to negative Doppler
        return -np.asarray(doppler_hz) * SPEED_OF_LIGHT / (2.0 * self.carrier_freq)


def synthesize_pulse(
    w: Waveform,
    sample_rate: float,
    pri: float,
    band_center: float = 0.0,
    span: float = 3.0,
) -> np.ndarray:
    """Gaussian-enveloped complex LFM sampled on [-span*T, span*T].

    ``band_center`` is subtracted from the waveform's center frequency to
    give its baseband offset. Sample 0 of the pulse is element ``len//2``.
    """
    offset = w.center_freq - band_center
    edge = max(abs(offset - w.bandwidth / 2), abs(offset + w.bandwidth / 2))
    if sample_rate < 2 * edge:
        raise ConfigurationError(
            f"sample rate {sample_rate:g} Hz cannot represent band edge at {edge:g} Hz"
        )
    half = int(math.ceil(span * w.pulse_duration * sample_rate))
    if 2 * half + 1 > pri * sample_rate:
        raise ConfigurationError("pulse does not fit inside the PRI")
    t = np.arange(-half, half + 1) / sample_rate
    T = w.pulse_duration
    phase = 2 * np.pi * offset * t + np.pi * w.chirp_rate * t * t
    return w.amplitude * np.exp(-(t * t) / (T * T)) * np.exp(1j * phase)


def gaussian_pulse_energy(amplitude: float, pulse_duration: float) -> float:
    """Integral of |A exp(-t^2/T^2)|^2 over the real line."""
    return amplitude**2 * pulse_duration * math.sqrt(math.pi / 2.0)


class ReplicaBank:
    """Circular-layout replicas and their spectra for every catalog waveform."""

    def __init__(self, catalog: WaveformCatalog, params: RadarParams):
        self.catalog = catalog
        self.params = params
        N = params.num_fast
        fs = params.sample_rate
        spectra = np.empty((len(catalog), N), dtype=complex)
        energy = np.empty(len(catalog))
        for w in catalog:
            pulse = synthesize_pulse(w, fs, params.pri, catalog.channel_bandwidth / 2, params.pulse_span)
            half = len(pulse) // 2
            if len(pulse) > N:
                raise ConfigurationError("fast-time window shorter than the pulse")
            circ = np.zeros(N, dtype=complex)
            circ[np.arange(-half, half + 1) % N] = pulse
            spectra[w.id] = np.fft.fft(circ)
            energy[w.id] = np.vdot(pulse, pulse).real
        self.spectra = spectra
        self.energy = energy
        self.unit_spectra = spectra / np.sqrt(energy)[:, None]
        self.freqs = np.fft.fftfreq(N, 1.0 / fs)
        # sub-channel index of every FFT bin, -1 outside the shared channel
        chan = self.freqs + catalog.channel_bandwidth / 2
        sub = np.floor(chan / catalog.subchannel_width).astype(int)
        sub[(chan < 0) | (chan >= catalog.channel_bandwidth)] = -1
        self.bin_subchannel = sub


@dataclass
class CpiBuffer:
    data: np.ndarray  # (num_fast, num_pulses)
    waveform_ids: np.ndarray
    params: RadarParams

    @property
    def num_pulses(self) -> int:
        return self.data.shape[1]


@dataclass
class RangeDopplerMap:
    data: np.ndarray  # complex, (range bins, Doppler bins)
    range_m: np.ndarray
    doppler_hz: np.ndarray
    velocity_mps: np.ndarray

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.data)

    @property
    def power(self) -> np.ndarray:
        return self.data.real**2 + self.data.imag**2

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def to_csv(self, path) -> None:
        np.savetxt(path, self.magnitude, delimiter=",", fmt="%.9g")

    def to_binary(self, path) -> None:
        """Raw little-endian float32 magnitudes plus a JSON sidecar."""
        path = Path(path)
        self.magnitude.astype("<f4").tofile(path)
        meta = {
            "dtype": "float32",
            "byte_order": "little",
            "shape": list(self.shape),
            "order": "C (range-major)",
            "range_start_m": float(self.range_m[0]),
            "range_bin_m": float(self.range_m[1] - self.range_m[0]) if len(self.range_m) > 1 else 0.0,
            "doppler_hz": self.doppler_hz.tolist(),
            "velocity_mps": self.velocity_mps.tolist(),
        }
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, indent=2))


def receive(
    pulses: Sequence[Waveform],
    targets: Sequence[PointTarget],
    interference: np.ndarray | None,
    noise_power: float,
    rng: np.random.Generator | None,
    bank: ReplicaBank,
    pulse_index0: int = 0,
) -> CpiBuffer:
    """Fast-time samples of one CPI.

    ``interference`` is an (M, S) array of per-sub-channel interference power
    spectral density, in units of a unit-power white-noise PSD, or None.
    Doppler enters as a stop-and-hop phase progression over pulses.
    """
    p = bank.params
    M = len(pulses)
    N = p.num_fast
    ids = np.fromiter((w.id for w in pulses), dtype=np.int64, count=M)
    Y = np.zeros((M, N), dtype=complex)
    pulse_idx = pulse_index0 + np.arange(M)
    window_span = N / p.sample_rate
    for tgt in targets:
        rel = tgt.delay - p.window_delay
        if not 0 <= rel < window_span:
            raise ValueError(f"target at {tgt.range_m:.1f} m lies outside the fast-time window")
        ramp = np.exp(-2j * np.pi * bank.freqs * rel)
        slow = np.exp(-2j * np.pi * (2 * tgt.velocity / SPEED_OF_LIGHT) * p.carrier_freq * p.pri * pulse_idx)
        carrier = np.exp(-2j * np.pi * p.carrier_freq * tgt.delay)
        Y += (tgt.gain * carrier) * slow[:, None] * bank.spectra[ids] * ramp[None, :]
    var = np.full((M, N), float(noise_power))
    if interference is not None:
        interference = np.asarray(interference, dtype=float)
        inside = bank.bin_subchannel >= 0
        var[:, inside] += interference[:, bank.bin_subchannel[inside]]
    if np.any(var > 0):
        if rng is None:
            raise ValueError("a random generator is required for noise or interference")
        z = rng.standard_normal((M, N, 2)).view(complex)[..., 0]
        Y += np.sqrt(N * var / 2.0) * z
    data = np.fft.ifft(Y, axis=1)
    return CpiBuffer(data.T.copy(), ids, p)


def slow_time_window(name: str | None, num_pulses: int) -> np.ndarray:
    if name in (None, "none", "rect"):
        return np.ones(num_pulses)
    return signal.get_window(name, num_pulses)


def matched_filter(buffer: CpiBuffer, bank: ReplicaBank) -> np.ndarray:
    """Per-pulse pulse compression with each pulse's own unit-energy replica; (N, M)."""
    X = np.fft.fft(buffer.data.T, axis=1)
    Z = np.fft.ifft(X * np.conj(bank.unit_spectra[buffer.waveform_ids]), axis=1)
    return Z.T


def range_doppler(buffer: CpiBuffer, bank: ReplicaBank, window: str | None = "hann") -> RangeDopplerMap:
    p = buffer.params
    Z = matched_filter(buffer, bank)
    taper = slow_time_window(window, buffer.num_pulses)
    D = np.fft.fftshift(np.fft.fft(Z * taper[None, :], axis=1), axes=1)
    dop = p.doppler_axis(buffer.num_pulses)
    return RangeDopplerMap(D, p.range_axis(), dop, p.velocity_of(dop))


# -- detection -------------------------------------------------------------


class Detection(NamedTuple):
    range_bin: int
    doppler_bin: int
    power: float
    noise_level: float

    @property
    def magnitude(self) -> float:
        return math.sqrt(self.power)

    @property
    def snr(self) -> float:
        return self.power / self.noise_level if self.noise_level > 0 else math.inf


def cfar_threshold_factor(num_training: int, pfa: float) -> float:
    """Square-law CA-CFAR multiplier N (pfa^(-1/N) - 1)."""
    return num_training * (pfa ** (-1.0 / num_training) - 1.0)


def cfar_2d(
    rd_map,
    guard: tuple[int, int] = (12, 2),
    training: tuple[int, int] = (8, 4),
    pfa: float = 1e-3,
) -> list[Detection]:
    """Two-dimensional cell-averaging CFAR on the square-law map.

    The Doppler axis wraps; range cells whose window would leave the map
    are not tested.
    """
    P = rd_map.power if isinstance(rd_map, RangeDopplerMap) else np.asarray(rd_map, dtype=float)
    gr, gd = guard
    tr, td = training
    nr, nd = P.shape
    outer = (2 * (gr + tr) + 1, 2 * (gd + td) + 1)
    inner = (2 * gr + 1, 2 * gd + 1)
    n_train = outer[0] * outer[1] - inner[0] * inner[1]
    if min(gr, gd, tr, td) < 0 or n_train < 1 or outer[0] > nr or outer[1] > nd:
        raise ConfigurationError(f"CFAR window {outer} does not fit the {P.shape} map")
    if not 0 < pfa < 1:
        raise ConfigurationError("pfa must lie in (0, 1)")
    mode = ["constant", "wrap"]
    s_out = ndimage.uniform_filter(P, size=outer, mode=mode) * (outer[0] * outer[1])
    s_in = ndimage.uniform_filter(P, size=inner, mode=mode) * (inner[0] * inner[1])
    noise = np.maximum(s_out - s_in, 0.0) / n_train
    alpha = cfar_threshold_factor(n_train, pfa)
    edge = gr + tr
    valid = np.zeros_like(P, dtype=bool)
    valid[edge : nr - edge, :] = True
    hits = valid & (P > alpha * noise) & (P > 0)
    r, d = np.nonzero(hits)
    return [Detection(int(i), int(j), float(P[i, j]), float(noise[i, j])) for i, j in zip(r, d)]


def cfar_cells_tested(shape: tuple[int, int], guard=(12, 2), training=(8, 4)) -> int:
    edge = guard[0] + training[0]
    return max(shape[0] - 2 * edge, 0) * shape[1]


# -- metrics ---------------------------------------------------------------


def truth_cell(target: PointTarget, params: RadarParams, num_pulses: int) -> tuple[int, int]:
    r = int(round((target.range_m - params.range_start) / params.range_bin))
    fd = -2.0 * target.velocity * params.carrier_freq / SPEED_OF_LIGHT
    prf = 1.0 / params.pri
    k = int(round(fd / (prf / num_pulses))) % num_pulses
    # fftshift puts Doppler bin 0 at column M//2
    return r, (k + num_pulses // 2) % num_pulses


def _near(det_r, det_d, r, d, nd, tol_r=1, tol_d=1) -> bool:
    dd = abs(det_d - d) % nd
    return abs(det_r - r) <= tol_r and min(dd, nd - dd) <= tol_d


def metrics(
    rd_map: RangeDopplerMap,
    truth: Sequence[tuple[int, int]],
    detections: Sequence[Detection],
    mainlobe: int = 2,
    cells_tested: int | None = None,
    exclusion: tuple[int, int] = (1, 1),
) -> dict:
    """Detection and image-quality figures of one CPI against known target cells.

    A truth cell counts as detected when a detection lands within one cell
    of it; detections farther than ``exclusion`` (range, Doppler) cells from
    every truth cell are false alarms.
    """
    P = rd_map.power
    nr, nd = P.shape
    er, ed = exclusion
    hit = [any(_near(x.range_bin, x.doppler_bin, r, d, nd) for x in detections) for r, d in truth]
    false = [x for x in detections
             if not any(_near(x.range_bin, x.doppler_bin, r, d, nd, er, ed) for r, d in truth)]
    tested = cells_tested if cells_tested is not None else P.size
    out = {
        "pd": float(np.mean(hit)) if truth else float("nan"),
        "false_alarms": len(false),
        "pfa_hat": len(false) / tested if tested else 0.0,
    }
    if not truth:
        return out
    r, d = truth[0]
    peak = P[r, d]
    mask = np.ones_like(P, dtype=bool)
    for tr_, td_ in truth:
        cols = (td_ + np.arange(-mainlobe, mainlobe + 1)) % nd
        mask[max(tr_ - 1, 0) : tr_ + 2][:, cols] = False
    rest = P[mask].mean() if mask.any() else 0.0
    if rest > 0 and peak > 0:
        sinr = min(10 * math.log10(peak / rest), MAX_SINR_DB)
    else:
        sinr = MAX_SINR_DB if peak > 0 else -MAX_SINR_DB
    profile = P[r, :]
    dist = np.abs(np.arange(nd) - d)
    dist = np.minimum(dist, nd - dist)
    side = profile[dist > mainlobe]
    if peak > 0:
        with np.errstate(divide="ignore"):
            prof_db = 10 * np.log10(profile / peak)
        psl = 10 * math.log10(side.max() / peak) if side.size and side.max() > 0 else -MAX_SINR_DB
        isl = 10 * math.log10(side.sum() / peak) if side.size and side.sum() > 0 else -MAX_SINR_DB
    else:
        prof_db = np.full(nd, np.nan)
        psl = isl = float("nan")
    out.update(
        image_sinr_db=sinr,
        doppler_profile_db=prof_db,
        peak_sidelobe_db=psl,
        integrated_sidelobe_db=isl,
    )
    return out
