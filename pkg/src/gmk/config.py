"""Run configuration. One JSON file; every report echoes the resolved config."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

from gmk import errors
from gmk.metrics import DEFAULT_BC_SIGMA
from gmk.patterns import DEFAULT_TIER_CUTS, OSCILLATION_REVERSALS, Thresholds
from gmk.tokenizer import LAMBDA_SEM, LAMBDA_VQ, TrainConfig


@dataclass
class ThresholdConfig:
    angle_eps_static: float = 0.02
    position_eps_static: float = 0.01
    eps_ratio: float = 0.5
    slow_ratio: float = 5.0
    tier_cuts: list[float] = field(default_factory=lambda: list(DEFAULT_TIER_CUTS))
    oscillation_reversals: int = OSCILLATION_REVERSALS

    def angle(self) -> Thresholds:
        e = self.angle_eps_static
        return Thresholds(e, self.eps_ratio * e, self.slow_ratio * e)

    def position(self) -> Thresholds:
        e = self.position_eps_static
        return Thresholds(e, self.eps_ratio * e, self.slow_ratio * e)


@dataclass
class WindowConfig:
    min_len: float = 1.0
    max_len: float = 2.0
    smooth_window: int | None = None  # None: derived from fps
    root_joint: str = "pelvis"


@dataclass
class TokenizerConfig:
    n: int = 8
    d: int = 32
    K: int = 8192
    iters: int = 50
    ema_decay: float = 0.99
    dead_threshold: float = 1e-3
    batch_size: int | None = None
    lambda_vq: float = LAMBDA_VQ
    lambda_sem: float = LAMBDA_SEM

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(self.n, self.d, self.K, self.iters, self.ema_decay,
                           self.dead_threshold, seed, self.batch_size)


@dataclass
class MetricsConfig:
    bc_sigma: float = DEFAULT_BC_SIGMA
    batch_size: int = 128
    k_list: list[int] = field(default_factory=lambda: [1, 10])
    upper_body_regions: list[str] = field(default_factory=lambda: ["head", "arms_shoulders", "hands_fingers"])
    beat_smooth_window: int = 1
    remove_translation: bool = True


@dataclass
class RunConfig:
    seed: int = 0
    thresholds: ThresholdConfig = field(default_factory=ThresholdConfig)
    windows: WindowConfig = field(default_factory=WindowConfig)
    tokenizer: TokenizerConfig = field(default_factory=TokenizerConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2 ** 64):
            raise errors.ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        return _build(cls, obj, "config")


def _build(cls, obj, where):
    if not isinstance(obj, dict):
        raise errors.ConfigError(f"{where}: expected an object")
    known = {f.name: f for f in fields(cls)}
    unknown = set(obj) - set(known)
    if unknown:
        raise errors.ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    defaults = cls()
    for name, value in obj.items():
        current = getattr(defaults, name)
        if is_dataclass(current):
            kwargs[name] = _build(type(current), value, f"{where}.{name}")
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise errors.ConfigError(f"{where}: {exc}") from exc


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise errors.ConfigError(f"config file not found: {path}")
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise errors.ConfigError(f"{path}: {exc}") from exc
    return RunConfig.from_dict(obj)
