"""Experiment configuration: nested dataclasses with JSON round-trip and
validation errors that name the offending field path."""

from __future__ import annotations

import dataclasses
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

from .scene import CoexistenceConfig, JammerConfig, SyntheticLinearConfig

SCENARIOS = ("coexistence", "jammer", "synthetic-linear")
POLICIES = ("ts", "exp3", "reactive", "fixed")
TRACKER_MODES = ("none", "penalty", "direct")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
        self.message = message

    def to_dict(self) -> dict:
        return {"error": "config", "field": self.path, "message": self.message}


@dataclass(frozen=True)
class CatalogConfig:
    channel_bandwidth_hz: float = 100e6
    num_subchannels: int = 10
    bandwidths_hz: tuple[float, ...] | None = None
    pulse_duration_s: float = 0.5e-6
    carrier_freq_hz: float = 3e9
    literal_occupancy: bool = False
    gamma1: float | None = None
    gamma2: float | None = None


@dataclass(frozen=True)
class CostConfig:
    beta1: float | None = None
    beta2: float | None = None
    allow_negative_missed: bool = False


@dataclass(frozen=True)
class SensingConfig:
    flip_prob: float = 0.0
    lag: int = 0  # 0: sense the current PRI's state; k: state of PRI t-k


@dataclass(frozen=True)
class LearnerConfig:
    ts_v: float = 1.0
    exp3_epsilon: float | None = None
    exp3_gamma: float | None = None
    exp3_regularization: float = 1e-8
    cold_start: tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class SceneConfig:
    coexistence: CoexistenceConfig = field(default_factory=CoexistenceConfig)
    jammer: JammerConfig = field(default_factory=JammerConfig)
    synthetic: SyntheticLinearConfig = field(default_factory=SyntheticLinearConfig)


@dataclass(frozen=True)
class RdprocConfig:
    enabled: bool = True
    num_pulses: int = 64
    sample_rate_hz: float = 200e6
    pri_s: float = 409.6e-6
    num_fast: int = 1024
    range_start_m: float = 400.0
    window: str = "hann"
    noise_power: float = 1.0
    target_range_m: float = 530.0
    target_velocity_mps: float = 15.0
    target_snr_db: float = 15.0  # per pulse, after pulse compression
    cfar_guard: tuple[int, int] = (12, 2)
    cfar_training: tuple[int, int] = (8, 4)
    cfar_pfa: float = 1e-3


@dataclass(frozen=True)
class TrackerConfig:
    enabled: bool = True
    sigma_a: float = 1.0
    mode: str = "none"
    penalty_weight: float = 0.0
    gate_sigma: float = 4.0
    gate_min_m: float = 5.0
    initial_range_std_m: float = 3.0
    initial_rate_std_mps: float = 5.0


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "coexistence"
    policy: str = "ts"
    horizon: int = 20000
    d_hat: float | None = 0.2
    seeds: tuple[int, ...] = (0,)
    output_dir: str = "runs"
    workers: int = 1
    catalog: CatalogConfig = field(default_factory=CatalogConfig)
    cost: CostConfig = field(default_factory=CostConfig)
    sensing: SensingConfig = field(default_factory=SensingConfig)
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    scene: SceneConfig = field(default_factory=SceneConfig)
    rdproc: RdprocConfig = field(default_factory=RdprocConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)

    @property
    def label(self) -> str:
        """Directory name of the policy variant."""
        if self.policy in ("ts", "exp3") and self.d_hat is not None:
            return f"{self.policy}-dhat{self.d_hat:g}"
        return self.policy

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return _to_plain(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        cfg = _build(cls, doc, "")
        validate(cfg)
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("", f"invalid JSON: {exc}") from exc
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [_to_plain(v) for v in obj]
    return obj


def _strip_optional(tp):
    origin = typing.get_origin(tp)
    if origin in (Union, types.UnionType):
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        return (args[0] if len(args) == 1 else tp), True
    return tp, False


def _coerce(tp, value, path: str):
    tp, optional = _strip_optional(tp)
    if value is None:
        if optional:
            return None
        raise ConfigError(path, "must not be null")
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(path, "expected an object")
        return _build(tp, value, path)
    origin = typing.get_origin(tp)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(path, "expected a list")
        args = typing.get_args(tp)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(args[0], v, f"{path}[{i}]") for i, v in enumerate(value))
        if len(value) != len(args):
            raise ConfigError(path, f"expected {len(args)} entries")
        return tuple(_coerce(a, v, f"{path}[{i}]") for i, (a, v) in enumerate(zip(args, value)))
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, "expected true or false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, "expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, "expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(path, "expected a string")
        return value
    return value


def _build(cls, doc: dict, prefix: str):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in doc:
        if key not in names:
            raise ConfigError(_join(prefix, key), "unknown field")
    kwargs = {k: _coerce(hints[k], v, _join(prefix, k)) for k, v in doc.items()}
    return cls(**kwargs)


def _join(prefix: str, key: str) -> str:
    return f"{prefix}.{key}" if prefix else key


def _check(ok: bool, path: str, message: str) -> None:
    if not ok:
        raise ConfigError(path, message)


def validate(cfg: ExperimentConfig) -> None:
    """Raise ConfigError naming the first invalid field."""
    _check(cfg.scenario in SCENARIOS, "scenario", f"must be one of {SCENARIOS}")
    _check(cfg.policy in POLICIES, "policy", f"must be one of {POLICIES}")
    if cfg.scenario == "synthetic-linear":
        _check(cfg.policy in ("ts", "exp3"), "policy", "synthetic-linear supports only ts and exp3")
    _check(cfg.horizon >= 1, "horizon", "must be at least 1")
    _check(cfg.d_hat is None or cfg.d_hat > 0, "d_hat", "must be positive or null")
    _check(len(cfg.seeds) > 0, "seeds", "must be non-empty")
    _check(all(s >= 0 for s in cfg.seeds), "seeds", "must be non-negative")
    _check(cfg.workers >= 1, "workers", "must be at least 1")

    c = cfg.catalog
    _check(c.channel_bandwidth_hz > 0, "catalog.channel_bandwidth_hz", "must be positive")
    _check(c.num_subchannels >= 1, "catalog.num_subchannels", "must be at least 1")
    _check(c.pulse_duration_s > 0, "catalog.pulse_duration_s", "must be positive")
    _check(c.carrier_freq_hz > c.channel_bandwidth_hz, "catalog.carrier_freq_hz", "must exceed the channel bandwidth")
    for name in ("gamma1", "gamma2"):
        v = getattr(c, name)
        _check(v is None or v >= 0, f"catalog.{name}", "must be non-negative")
    if c.bandwidths_hz is not None:
        step = c.channel_bandwidth_hz / c.num_subchannels
        for i, bw in enumerate(c.bandwidths_hz):
            k = bw / step
            _check(0 < bw <= c.channel_bandwidth_hz and abs(k - round(k)) < 1e-9,
                   f"catalog.bandwidths_hz[{i}]", "must be a positive multiple of the sub-channel width within the channel")

    B = c.channel_bandwidth_hz
    for name in ("beta1", "beta2"):
        v = getattr(cfg.cost, name)
        _check(v is None or v >= 0, f"cost.{name}", "must be non-negative")
    b1 = cfg.cost.beta1 if cfg.cost.beta1 is not None else 1 / (2 * B)
    b2 = cfg.cost.beta2 if cfg.cost.beta2 is not None else 1 / (2 * B)
    _check((b1 + b2) * B <= 1 + 1e-12, "cost", "beta1 + beta2 must not exceed 1/channel_bandwidth_hz")

    _check(0 <= cfg.sensing.flip_prob < 0.5, "sensing.flip_prob", "must lie in [0, 0.5)")
    _check(cfg.sensing.lag >= 0, "sensing.lag", "must be non-negative")

    lr = cfg.learner
    _check(lr.ts_v > 0, "learner.ts_v", "must be positive")
    _check(lr.exp3_epsilon is None or lr.exp3_epsilon > 0, "learner.exp3_epsilon", "must be positive")
    _check(lr.exp3_gamma is None or 0 <= lr.exp3_gamma <= 1, "learner.exp3_gamma", "must lie in [0, 1]")
    _check(lr.exp3_regularization >= 0, "learner.exp3_regularization", "must be non-negative")

    for name, sub in (("coexistence", cfg.scene.coexistence), ("jammer", cfg.scene.jammer),
                      ("synthetic", cfg.scene.synthetic)):
        try:
            sub.validate()
        except ValueError as exc:
            raise ConfigError(f"scene.{name}", str(exc)) from exc

    r = cfg.rdproc
    _check(r.num_pulses >= 2, "rdproc.num_pulses", "must be at least 2")
    _check(r.num_fast >= 8, "rdproc.num_fast", "must be at least 8")
    _check(r.sample_rate_hz >= B, "rdproc.sample_rate_hz", "must cover the shared channel at complex baseband")
    _check(r.num_fast / r.sample_rate_hz <= r.pri_s, "rdproc.num_fast", "fast-time window exceeds the PRI")
    _check(r.noise_power > 0, "rdproc.noise_power", "must be positive")
    _check(r.range_start_m >= 0, "rdproc.range_start_m", "must be non-negative")
    _check(0 < r.cfar_pfa < 1, "rdproc.cfar_pfa", "must lie in (0, 1)")
    _check(min(r.cfar_guard) >= 0 and min(r.cfar_training) >= 0, "rdproc.cfar_training", "must be non-negative")

    t = cfg.tracker
    _check(t.mode in TRACKER_MODES, "tracker.mode", f"must be one of {TRACKER_MODES}")
    _check(t.sigma_a >= 0, "tracker.sigma_a", "must be non-negative")
    _check(t.penalty_weight >= 0, "tracker.penalty_weight", "must be non-negative")
    _check(t.gate_sigma > 0, "tracker.gate_sigma", "must be positive")
    _check(not (t.enabled and not r.enabled), "tracker.enabled", "needs rdproc.enabled")
