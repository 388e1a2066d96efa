"""Top-level pipeline configuration (TOML or JSON in, JSON out)."""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .diffusion.model import DenoiserConfig
from .diffusion.train import TrainConfig
from .stream.replay import DEFAULT_PORT, FaultConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DENOMINATORS = ("squared", "paper_literal")
ORIENTATIONS = ("orthonormal", "paper_literal")
HEAD_COMP = ("literal", "inverse")
STYLES = ("expression", "speech", "neutral")


class ConfigError(ValueError):
    pass


@dataclass
class SimConfig:
    rig: str | None = None  # rig JSON; None selects the built-in rig
    sensors: int = 12  # 11 facial + auxiliary
    fps: float = 60.0
    smoothing_n: int = 2
    denominator: str = "squared"
    orientation: str = "orthonormal"
    acc_head_comp: str = "literal"
    frames: int = 2000
    style: str = "expression"
    head_motion_deg: float = 20.0
    acc_noise_std: float = 0.0
    ori_noise_deg: float = 0.0
    tap_frame: int | None = None


@dataclass
class StreamConfig:
    host: str = "127.0.0.1"
    port: int = DEFAULT_PORT
    jitter_us: float = 0.0
    drop_pct: float = 0.0
    offsets_us: dict[int, float] = field(default_factory=dict)
    drifts_ppm: dict[int, float] = field(default_factory=dict)
    sync_every: int = 30
    realtime: bool = False
    duration: float = 120.0
    idle_timeout: float = 2.0

    def faults(self, seed: int) -> FaultConfig:
        return FaultConfig(self.jitter_us, self.drop_pct, dict(self.offsets_us), dict(self.drifts_ppm), seed, self.sync_every)


def _toy_train() -> TrainConfig:
    return TrainConfig(epochs=30, batch_size=64, lr=2e-4, T_noise=50)


@dataclass
class PipelineConfig:
    seed: int = 0
    sim: SimConfig = field(default_factory=SimConfig)
    stream: StreamConfig = field(default_factory=StreamConfig)
    denoiser: DenoiserConfig = field(default_factory=DenoiserConfig.toy)
    train: TrainConfig = field(default_factory=_toy_train)
    overlap: int | None = None  # inference overlap; None = half the window

    def validate(self) -> "PipelineConfig":
        s = self.sim
        if s.fps <= 0:
            raise ConfigError(f"sim.fps must be > 0, got {s.fps}")
        for name, val, allowed in (
            ("denominator", s.denominator, DENOMINATORS),
            ("orientation", s.orientation, ORIENTATIONS),
            ("acc_head_comp", s.acc_head_comp, HEAD_COMP),
            ("style", s.style, STYLES),
        ):
            if val not in allowed:
                raise ConfigError(f"sim.{name} must be one of {allowed}, got {val!r}")
        if s.smoothing_n < 1 or s.frames < 1 or s.sensors < 2:
            raise ConfigError("sim.smoothing_n and sim.frames must be >= 1, sim.sensors >= 2")
        if s.rig is not None and not Path(s.rig).is_file():
            raise FileNotFoundError(f"rig file not found: {s.rig}")
        if self.denoiser.n_sensors != s.sensors - 1:
            raise ConfigError(f"denoiser.n_sensors ({self.denoiser.n_sensors}) must equal sim.sensors - 1 ({s.sensors - 1})")
        if not 0 < self.stream.port < 65536:
            raise ConfigError(f"stream.port out of range: {self.stream.port}")
        if not 0.0 <= self.stream.drop_pct < 100.0:
            raise ConfigError(f"stream.drop_pct must be in [0, 100), got {self.stream.drop_pct}")
        if self.overlap is not None and not 0 <= self.overlap < self.denoiser.window:
            raise ConfigError(f"overlap must be in [0, window), got {self.overlap}")
        if self.train.epochs < 0 or self.train.batch_size < 1 or self.train.lr <= 0:
            raise ConfigError("train: epochs >= 0, batch_size >= 1 and lr > 0 required")
        return self

    def paper_literal(self) -> None:
        self.sim.denominator = "paper_literal"
        self.sim.orientation = "paper_literal"

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("offsets_us", "drifts_ppm"):
            d["stream"][key] = {str(k): v for k, v in d["stream"][key].items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        sections = {"sim": SimConfig, "stream": StreamConfig, "denoiser": DenoiserConfig, "train": TrainConfig}
        kw = {}
        for key, value in d.items():
            if key in sections:
                if not isinstance(value, dict):
                    raise ConfigError(f"section {key!r} must be a table")
                kw[key] = _build(sections[key], value, key)
            elif key in ("seed", "overlap"):
                kw[key] = value
            else:
                raise ConfigError(f"unknown config key {key!r}")
        if "train" not in kw:
            kw["train"] = _toy_train()
        return cls(**kw).validate()

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _build(cls, values: dict, section: str):
    names = {f.name for f in fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    values = dict(values)
    for key in ("offsets_us", "drifts_ppm"):
        if key in values:
            try:
                values[key] = {int(k): float(v) for k, v in values[key].items()}
            except (AttributeError, ValueError) as exc:
                raise ConfigError(f"[{section}].{key} must map sensor ids to numbers: {exc}") from None
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from None


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    text = path.read_text()
    try:
        data = tomllib.loads(text) if path.suffix.lower() == ".toml" else json.loads(text)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a table/object")
    return PipelineConfig.from_dict(data)


def dump_config(cfg: PipelineConfig, path: str | Path) -> None:
    Path(path).write_text(cfg.dumps())
