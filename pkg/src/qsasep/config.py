"""JSON experiment configuration.

A config is one JSON object with a required ``model`` section and
optional ``run`` and per-verb sections.  Unknown keys are rejected at
every level, and ``to_dict(from_dict(d))`` reproduces the normalised
document exactly.

Schedules are either a number (a constant) or
``{"segments": [{"t0": 0, "t1": 1, "shape": "linear", "v0": 0.3, "v1": 0.7}]}``
with ``shape`` one of ``constant``, ``linear``, ``cosine``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Optional, Union

from .rates import (
    Constant,
    CosineRamp,
    LinearRamp,
    Liggett,
    ModelSpec,
    Reversible,
    Schedule,
    Segment,
    default_speedups,
)

__all__ = [
    "ConfigError",
    "ModelConfig",
    "RunConfig",
    "SweepConfig",
    "BurgersConfig",
    "CoupleConfig",
    "EntropyConfig",
    "OracleConfig",
    "ExperimentConfig",
    "schedule_from_json",
    "schedule_to_json",
    "load_config",
    "config_hash",
]

ScheduleJSON = Union[float, dict]

_SHAPES = {"constant": Constant, "linear": LinearRamp, "cosine": CosineRamp}


class ConfigError(ValueError):
    """Malformed or missing configuration."""


def _normalise_schedule(value: Any, where: str) -> ScheduleJSON:
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number or a segments object")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, dict) or set(value) != {"segments"}:
        raise ConfigError(f"{where}: expected a number or {{'segments': [...]}}")
    segs = []
    for k, seg in enumerate(value["segments"]):
        if not isinstance(seg, dict):
            raise ConfigError(f"{where}.segments[{k}]: expected an object")
        allowed = {"t0", "t1", "shape", "v0", "v1"}
        extra = set(seg) - allowed
        if extra:
            raise ConfigError(f"{where}.segments[{k}]: unknown keys {sorted(extra)}")
        shape = seg.get("shape", "constant")
        if shape not in _SHAPES:
            raise ConfigError(f"{where}.segments[{k}]: unknown shape {shape!r}")
        try:
            v0 = float(seg["v0"])
            v1 = float(seg.get("v1", v0))
            t0, t1 = float(seg["t0"]), float(seg["t1"])
        except KeyError as exc:
            raise ConfigError(f"{where}.segments[{k}]: missing {exc.args[0]}") from None
        if shape == "constant" and v1 != v0:
            raise ConfigError(f"{where}.segments[{k}]: constant segment needs v0 == v1")
        segs.append({"t0": t0, "t1": t1, "shape": shape, "v0": v0, "v1": v1})
    return {"segments": segs}


def schedule_from_json(value: ScheduleJSON, T: float = 1.0) -> Schedule:
    value = _normalise_schedule(value, "schedule")
    if isinstance(value, float):
        return Schedule.constant(value, T)
    segs = []
    for s in value["segments"]:
        cls = _SHAPES[s["shape"]]
        shape = cls(s["v0"]) if cls is Constant else cls(s["v0"], s["v1"])
        segs.append(Segment(s["t0"], s["t1"], shape))
    return Schedule(tuple(segs))


def schedule_to_json(schedule: Schedule) -> ScheduleJSON:
    if schedule.is_constant and len(schedule.segments) == 1 and schedule.t_start == 0.0:
        return float(schedule.segments[0].shape.endpoints[0])
    names = {0: "constant", 1: "linear", 2: "cosine"}
    return {
        "segments": [
            {
                "t0": s.t_start,
                "t1": s.t_end,
                "shape": names[s.shape.kind],
                "v0": s.shape.endpoints[0],
                "v1": s.shape.endpoints[1],
            }
            for s in schedule.segments
        ]
    }


def _strict(cls, data: Any, where: str) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name for f in fields(cls)}
    extra = set(data) - names
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
    return dict(data)


@dataclass
class ModelConfig:
    N: int = 64
    a: float = 1.0
    p_bar: float = 1.0
    T: float = 1.0
    family: str = "liggett"
    rho_minus: ScheduleJSON = 0.5
    rho_plus: ScheduleJSON = 0.5
    lambda_bar_minus: ScheduleJSON = 1.0
    lambda_bar_plus: ScheduleJSON = 1.0
    sigma: Optional[float] = None
    sigma_tilde: Optional[float] = None

    @classmethod
    def from_dict(cls, data: Any, where: str = "model") -> "ModelConfig":
        d = _strict(cls, data, where)
        cfg = cls(**d)
        cfg.normalise(where)
        return cfg

    def normalise(self, where: str = "model") -> None:
        if self.family not in ("liggett", "reversible"):
            raise ConfigError(f"{where}.family must be 'liggett' or 'reversible'")
        try:
            self.N = int(self.N)
            self.a, self.p_bar, self.T = float(self.a), float(self.p_bar), float(self.T)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: {exc}") from None
        for name in ("rho_minus", "rho_plus", "lambda_bar_minus", "lambda_bar_plus"):
            setattr(self, name, _normalise_schedule(getattr(self, name), f"{where}.{name}"))
        for name in ("sigma", "sigma_tilde"):
            v = getattr(self, name)
            if v is not None:
                setattr(self, name, float(v))

    def to_spec(self) -> ModelSpec:
        T = self.T
        sched = lambda v: schedule_from_json(v, T if T > 0 else 1.0)
        try:
            if self.family == "liggett":
                boundary = Liggett(sched(self.rho_minus), sched(self.rho_plus))
            else:
                s_def, st_def = default_speedups(self.N)
                boundary = Reversible(
                    sched(self.rho_minus),
                    sched(self.rho_plus),
                    sched(self.lambda_bar_minus),
                    sched(self.lambda_bar_plus),
                    self.sigma if self.sigma is not None else s_def,
                    self.sigma_tilde if self.sigma_tilde is not None else st_def,
                )
            return ModelSpec(self.N, self.a, self.p_bar, boundary, self.T)
        except ValueError as exc:
            raise ConfigError(f"model: {exc}") from None


@dataclass
class RunConfig:
    replicas: int = 1
    seed: int = 0
    cadence: Optional[float] = None
    initial: Union[None, float, str] = None
    output: str = "qsasep_out"
    confidence_z: float = 3.0
    x_cells: int = 20
    young_bins: int = 20
    young_time_cells: int = 20

    @classmethod
    def from_dict(cls, data: Any, where: str = "run") -> "RunConfig":
        cfg = cls(**_strict(cls, data, where))
        cfg.replicas, cfg.seed = int(cfg.replicas), int(cfg.seed)
        if cfg.cadence is not None:
            cfg.cadence = float(cfg.cadence)
        if isinstance(cfg.initial, (int, float)) and not isinstance(cfg.initial, bool):
            cfg.initial = float(cfg.initial)
        cfg.confidence_z = float(cfg.confidence_z)
        if cfg.replicas < 1:
            raise ConfigError(f"{where}.replicas must be at least 1")
        return cfg


@dataclass
class SweepConfig:
    rho_minus: list = field(default_factory=lambda: [0.1, 0.25, 0.6, 0.8, 0.95])
    rho_plus: list = field(default_factory=lambda: [0.1, 0.25, 0.6, 0.8, 0.95])
    theta_margin: float = 0.02
    burn_in: float = 0.5
    density_tol: float = 0.03
    flux_tol: float = 0.02
    pass_rate: float = 0.95

    @classmethod
    def from_dict(cls, data: Any, where: str = "sweep") -> "SweepConfig":
        cfg = cls(**_strict(cls, data, where))
        cfg.rho_minus = [float(v) for v in cfg.rho_minus]
        cfg.rho_plus = [float(v) for v in cfg.rho_plus]
        return cfg


@dataclass
class BurgersConfig:
    epsilons: list = field(default_factory=lambda: [0.3, 0.1, 0.03, 0.01])
    M: int = 200
    records: int = 50
    initial: str = "oracle"
    interior: float = 0.1
    settle: float = 0.0

    @classmethod
    def from_dict(cls, data: Any, where: str = "burgers") -> "BurgersConfig":
        cfg = cls(**_strict(cls, data, where))
        cfg.epsilons = [float(e) for e in cfg.epsilons]
        cfg.M = int(cfg.M)
        return cfg


@dataclass
class CoupleConfig:
    upper: Optional[ModelConfig] = None
    initial: Optional[str] = None

    @classmethod
    def from_dict(cls, data: Any, where: str = "couple") -> "CoupleConfig":
        d = _strict(cls, data, where)
        if d.get("upper") is not None:
            d["upper"] = ModelConfig.from_dict(d["upper"], f"{where}.upper")
        return cls(**d)


@dataclass
class EntropyConfig:
    N_values: list = field(default_factory=lambda: [64, 128, 256])
    pair: str = "kruzkov"
    psi: str = "bump"
    w: Optional[ScheduleJSON] = None

    @classmethod
    def from_dict(cls, data: Any, where: str = "entropy") -> "EntropyConfig":
        cfg = cls(**_strict(cls, data, where))
        cfg.N_values = [int(n) for n in cfg.N_values]
        if cfg.pair not in ("kruzkov", "lower", "upper"):
            raise ConfigError(f"{where}.pair must be kruzkov, lower or upper")
        if cfg.psi not in ("bump", "plateau"):
            raise ConfigError(f"{where}.psi must be bump or plateau")
        if cfg.w is not None:
            cfg.w = _normalise_schedule(cfg.w, f"{where}.w")
        return cfg


@dataclass
class OracleConfig:
    t: Optional[float] = None
    initial: Union[None, float, str] = None

    @classmethod
    def from_dict(cls, data: Any, where: str = "oracle") -> "OracleConfig":
        return cls(**_strict(cls, data, where))


_SECTIONS = {
    "sweep": SweepConfig,
    "burgers": BurgersConfig,
    "couple": CoupleConfig,
    "entropy": EntropyConfig,
    "oracle": OracleConfig,
}


@dataclass
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    run: RunConfig = field(default_factory=RunConfig)
    sweep: Optional[SweepConfig] = None
    burgers: Optional[BurgersConfig] = None
    couple: Optional[CoupleConfig] = None
    entropy: Optional[EntropyConfig] = None
    oracle: Optional[OracleConfig] = None

    @classmethod
    def from_dict(cls, data: Any) -> "ExperimentConfig":
        d = _strict(cls, data, "config")
        out = cls(
            model=ModelConfig.from_dict(d.get("model", {})),
            run=RunConfig.from_dict(d.get("run", {})),
        )
        for name, sect in _SECTIONS.items():
            if d.get(name) is not None:
                setattr(out, name, sect.from_dict(d[name], name))
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: v for k, v in d.items() if v is not None}

    def section(self, name: str):
        """Per-verb section, created with defaults when absent."""
        if getattr(self, name) is None:
            setattr(self, name, _SECTIONS[name]())
        return getattr(self, name)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return ExperimentConfig.from_dict(data)


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(json.dumps(cfg.to_dict(), sort_keys=True).encode()).hexdigest()
