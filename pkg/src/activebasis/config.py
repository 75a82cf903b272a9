"""Run configuration: defaults, JSON loading, and canonical hashing.

Every output artifact embeds the fully resolved configuration and its hash,
so two artifacts with equal hashes were produced from equal settings.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .errors import ConfigurationError
from .gabor import GaborParams

__all__ = ["RunConfig", "ModelConfig", "PursuitConfig", "DetectConfig", "EmConfig", "load_config"]

DEFAULT_FACTORS = tuple(2.0 ** (k / 4.0) for k in range(4, -5, -1))


@dataclass(frozen=True)
class ModelConfig:
    xi: float = 6.0
    bins: int = 1000
    lambda_max: float = 10.0
    lambda_steps: int = 401


@dataclass(frozen=True)
class PursuitConfig:
    n: int = 50
    b1: int = 6
    b2: float = math.pi / 15
    epsilon: float = 0.1
    inhibition: str = "zero"


@dataclass(frozen=True)
class DetectConfig:
    factors: tuple[float, ...] = DEFAULT_FACTORS


@dataclass(frozen=True)
class EmConfig:
    iters_flip: int = 3
    iters_rotate: int = 5
    iters_locate: int = 3
    rotations: tuple[float, ...] = (-math.pi / 6, 0.0, math.pi / 6)
    template_width: int | None = None
    template_height: int | None = None
    allow_flip: bool = False


@dataclass(frozen=True)
class RunConfig:
    gabor: GaborParams = field(default_factory=GaborParams)
    model: ModelConfig = field(default_factory=ModelConfig)
    pursuit: PursuitConfig = field(default_factory=PursuitConfig)
    detect: DetectConfig = field(default_factory=DetectConfig)
    em: EmConfig = field(default_factory=EmConfig)
    seed: int = 0
    resize: float = 1.0
    luma: tuple[float, float, float] = (0.299, 0.587, 0.114)

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def with_overrides(self, **overrides) -> "RunConfig":
        """Top-level field overrides (None values are ignored)."""
        clean = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **clean) if clean else self


_SECTIONS = {
    "gabor": GaborParams,
    "model": ModelConfig,
    "pursuit": PursuitConfig,
    "detect": DetectConfig,
    "em": EmConfig,
}
_TUPLE_FIELDS = {"factors", "rotations", "luma"}


def _build_section(cls, data: dict):
    clean = {
        k: tuple(v) if k in _TUPLE_FIELDS and v is not None else v
        for k, v in data.items()
    }
    try:
        return cls(**clean)
    except TypeError as exc:
        raise ConfigurationError(f"bad config section for {cls.__name__}: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS:
            kwargs[key] = _build_section(_SECTIONS[key], value)
        elif key in ("seed", "resize"):
            kwargs[key] = value
        elif key == "luma":
            kwargs[key] = tuple(value)
        else:
            raise ConfigurationError(f"unknown config key {key!r}")
    return RunConfig(**kwargs)


def load_config(path: str | Path | None) -> RunConfig:
    """Defaults, overlaid with a JSON config file when given."""
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(data)
