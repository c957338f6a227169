"""Interference-channel generators: cellular coexistence, reactive jammer, and a
synthetic linear environment for regret studies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectrum import InterferenceState, state_key
from .waveforms import Waveform, WaveformCatalog

BOLTZMANN_DBM_PER_HZ = -174.0


@dataclass(frozen=True)
class CoexistenceConfig:
    num_bs: int = 90
    bs_power_dbm: tuple[float, float] = (40.0, 46.5)
    bs_distance_km: tuple[float, float] = (5.0, 6.0)
    path_loss_exp: float = 3.5
    intf_bandwidth_hz: float = 20e6
    radar_rx_gain: float = 1.0
    shadow_mean: float = 0.0
    shadow_std: float = 1.0
    shadow_ar: float = 0.0
    p_on: float = 0.1
    p_off: float = 0.3
    threshold_dbm: float | None = None
    target_occupancy: float = 0.4
    calibration_steps: int = 2000
    noise_figure_db: float = 5.0

    def validate(self) -> None:
        lo, hi = self.bs_power_dbm
        if lo > hi:
            raise ValueError("bs_power_dbm range is inverted")
        dlo, dhi = self.bs_distance_km
        if not 0 < dlo <= dhi:
            raise ValueError("bs_distance_km must be a positive, ordered range")
        if self.num_bs < 0 or self.path_loss_exp <= 0 or self.intf_bandwidth_hz <= 0:
            raise ValueError("num_bs, path_loss_exp and intf_bandwidth_hz must be positive")
        if not (0 <= self.p_on <= 1 and 0 <= self.p_off <= 1):
            raise ValueError("activity probabilities must lie in [0, 1]")
        if self.shadow_std < 0 or not -1 < self.shadow_ar < 1:
            raise ValueError("shadow_std must be >= 0 and |shadow_ar| < 1")
        if not 0 < self.target_occupancy < 1:
            raise ValueError("target_occupancy must lie in (0, 1)")


@dataclass(frozen=True)
class JammerConfig:
    jnr_db: float = 20.0

    def validate(self) -> None:
        if not np.isfinite(self.jnr_db):
            raise ValueError("jnr_db must be finite")


def received_power_mw(power_dbm, distance_m, path_loss_exp, rx_gain, shadow):
    """P * G_r * d^-psi * exp(X), in milliwatts."""
    return 10.0 ** (np.asarray(power_dbm) / 10.0) * rx_gain * np.asarray(distance_m) ** (-path_loss_exp) * np.exp(shadow)


class CoexistenceChannel:
    """Base stations sharing the radar's channel.

    Every BS sits on a fixed block of contiguous sub-channels drawn at
    construction and switches on and off as a two-state Markov chain.
    Shadowing is redrawn each PRI (optionally AR(1) in time). The channel
    never looks at the radar's waveform.
    """

    def __init__(self, config: CoexistenceConfig, catalog: WaveformCatalog, rng: np.random.Generator,
                 calibration_rng: np.random.Generator | None = None):
        config.validate()
        self.config = config
        self.num_subchannels = catalog.num_subchannels
        self.subchannel_width = catalog.subchannel_width
        n = config.num_bs
        S = self.num_subchannels
        span = max(1, min(S, int(round(config.intf_bandwidth_hz / catalog.subchannel_width))))
        self.power_dbm = rng.uniform(*config.bs_power_dbm, size=n)
        self.distance_m = 1e3 * rng.uniform(*config.bs_distance_km, size=n)
        starts = rng.integers(0, S - span + 1, size=n)
        assign = np.zeros((n, S), dtype=bool)
        for j, s0 in enumerate(starts):
            assign[j, s0 : s0 + span] = True
        self.assignment = assign
        self.mean_power_mw = received_power_mw(
            self.power_dbm, self.distance_m, config.path_loss_exp, config.radar_rx_gain, 0.0
        )
        pi_on = self.stationary_on_probability
        self.active = rng.random(n) < pi_on
        self.shadow = config.shadow_mean + config.shadow_std * rng.standard_normal(n)
        noise_dbm = BOLTZMANN_DBM_PER_HZ + 10 * np.log10(catalog.subchannel_width) + config.noise_figure_db
        self.noise_mw = 10.0 ** (noise_dbm / 10.0)
        if config.threshold_dbm is None:
            cal = calibration_rng if calibration_rng is not None else np.random.default_rng(0)
            self.threshold_mw = self._calibrate(cal)
        else:
            self.threshold_mw = 10.0 ** (config.threshold_dbm / 10.0)
        self.last_power_mw = np.zeros(S)

    @property
    def stationary_on_probability(self) -> float:
        c = self.config
        total = c.p_on + c.p_off
        return 0.5 if total == 0 else c.p_on / total

    @property
    def threshold_dbm(self) -> float:
        return float(10 * np.log10(self.threshold_mw))

    def _advance(self, rng, active, shadow):
        c = self.config
        u = rng.random(len(active))
        active = np.where(active, u >= c.p_off, u < c.p_on)
        fresh = c.shadow_mean + c.shadow_std * rng.standard_normal(len(active))
        if c.shadow_ar:
            shadow = c.shadow_mean + c.shadow_ar * (shadow - c.shadow_mean) + np.sqrt(1 - c.shadow_ar**2) * (fresh - c.shadow_mean)
        else:
            shadow = fresh
        return active, shadow

    def _aggregate(self, active, shadow) -> np.ndarray:
        contrib = np.where(active, self.mean_power_mw * np.exp(shadow), 0.0)
        return contrib @ self.assignment

    def _calibrate(self, rng) -> float:
        """Threshold giving the target mean occupancy over a private simulated run."""
        active, shadow = self.active.copy(), self.shadow.copy()
        samples = np.empty((self.config.calibration_steps, self.num_subchannels))
        for k in range(len(samples)):
            active, shadow = self._advance(rng, active, shadow)
            samples[k] = self._aggregate(active, shadow)
        return float(np.quantile(samples, 1.0 - self.config.target_occupancy))

    def step(self, rng: np.random.Generator) -> np.ndarray:
        """Advance one PRI and return the occupancy bits."""
        self.active, self.shadow = self._advance(rng, self.active, self.shadow)
        self.last_power_mw = self._aggregate(self.active, self.shadow)
        return (self.last_power_mw > self.threshold_mw).astype(np.uint8)

    def inr(self) -> np.ndarray:
        """Per-sub-channel interference-to-noise ratio (linear) of the last step."""
        return self.last_power_mw / self.noise_mw


def coexistence_step(channel: CoexistenceChannel, rng: np.random.Generator) -> InterferenceState:
    return InterferenceState(channel.step(rng), channel.subchannel_width)


def jammed_band(waveform: Waveform, catalog: WaveformCatalog) -> np.ndarray:
    return catalog.occupancy[waveform.id].astype(np.uint8)


def jammer_step(
    previous_radar_waveform: Waveform | None,
    waveform_before_that: Waveform | None,
    previous_jammed_band,
    catalog: WaveformCatalog,
) -> InterferenceState:
    """Reactive jammer.

    A repeated waveform is jammed over its own band on the following PRI;
    otherwise the jammer keeps its previous band. Without two PRIs of radar
    history nothing is jammed.
    """
    if previous_radar_waveform is None or waveform_before_that is None:
        bits = np.zeros(catalog.num_subchannels, dtype=np.uint8)
    elif previous_radar_waveform.id == waveform_before_that.id:
        bits = jammed_band(previous_radar_waveform, catalog)
    else:
        prev = previous_jammed_band
        bits = prev.bits if isinstance(prev, InterferenceState) else np.asarray(prev, dtype=np.uint8)
    return InterferenceState(bits, catalog.subchannel_width)


class JammerChannel:
    def __init__(self, config: JammerConfig, catalog: WaveformCatalog):
        config.validate()
        self.config = config
        self.catalog = catalog
        self.jnr = 10.0 ** (config.jnr_db / 10.0)
        self.bits = np.zeros(catalog.num_subchannels, dtype=np.uint8)

    def step(self, previous_id: int | None, before_id: int | None) -> np.ndarray:
        if previous_id is None or before_id is None:
            self.bits = np.zeros(self.catalog.num_subchannels, dtype=np.uint8)
        elif previous_id == before_id:
            self.bits = self.catalog.occupancy[previous_id].astype(np.uint8)
        return self.bits

    def inr(self) -> np.ndarray:
        return self.jnr * self.bits


@dataclass(frozen=True)
class SyntheticLinearConfig:
    num_arms: int = 16
    dim: int = 3
    noise_std: float = 1.0

    def validate(self) -> None:
        if self.num_arms < 2 or self.dim < 1 or not 0 <= self.noise_std <= 1:
            raise ValueError("need >= 2 arms, dim >= 1, noise_std in [0, 1] (1-subgaussian)")


class SyntheticLinearEnv:
    """Stationary linear-cost environment: C = <theta, x> + Gaussian noise.

    Contexts are fresh uniform draws in [0, 1]^d per arm and step; theta is
    drawn once with non-negative entries summing to one, so mean costs lie in [0, 1].
    """

    def __init__(self, config: SyntheticLinearConfig, rng: np.random.Generator):
        config.validate()
        self.config = config
        self.theta = rng.dirichlet(np.ones(config.dim))
        self._X = None

    def contexts(self, rng: np.random.Generator) -> np.ndarray:
        self._X = rng.random((self.config.num_arms, self.config.dim))
        return self._X

    def mean_costs(self) -> np.ndarray:
        return self._X @ self.theta

    def cost(self, arm: int, rng: np.random.Generator) -> float:
        return float(self._X[arm] @ self.theta + self.config.noise_std * rng.standard_normal())


__all__ = [
    "CoexistenceConfig",
    "CoexistenceChannel",
    "JammerConfig",
    "JammerChannel",
    "SyntheticLinearConfig",
    "SyntheticLinearEnv",
    "coexistence_step",
    "jammer_step",
    "jammed_band",
    "received_power_mw",
    "state_key",
]
