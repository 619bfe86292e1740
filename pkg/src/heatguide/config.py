"""Versioned JSON run configurations: one schema and one dataclass per command."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import jsonschema

SCHEMA_VERSION = 1

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_point = {"type": "array", "items": _num, "minItems": 3, "maxItems": 3}
_posint = {"type": "integer", "minimum": 1}

SOURCE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "center": _point,
        "radius": _pos,
        "amplitude": _num,
        "profile": {"enum": ["indicator", "bump"]},
    },
}

BOX_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {"lo": _point, "hi": _point},
}

TARGET_SCHEMA = {
    "oneOf": [
        {"enum": ["default", "baseline"]},
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["nus", "alphas"],
            "properties": {
                "nus": {"type": "array", "items": _nonneg},
                "alphas": {"type": "array", "items": _pos},
            },
        },
    ]
}

_medium = {
    "domain": BOX_SCHEMA,
    "density": _nonneg,
    "impedance": {"oneOf": [_nonneg, {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}]},
    "kappa": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
    "c_S": _pos,
}

PARAM_SCHEMAS = {
    "simulate-manybody": {
        **_medium,
        "a": _pos,
        "lam": _pos,
        "source": SOURCE_SCHEMA,
        "reduced_b": {"oneOf": [_pos, {"type": "null"}]},
        "own_cube": {"type": "boolean"},
        "full_cap": _posint,
    },
    "homogenize": {
        **_medium,
        "grid": {"type": "integer", "minimum": 2, "maximum": 27},
        "lams": {"type": "array", "items": _pos},
        "source": SOURCE_SCHEMA,
        "stationary": {"type": "boolean"},
        "average_check": {"type": "boolean"},
        "lam0": _pos,
    },
    "tauberian": {
        "pairs": {"type": "array", "items": {"enum": ["constant", "exp_decay", "one_minus_exp"]}},
        "times": {"type": "array", "items": _pos, "minItems": 1},
        "order": {"type": "integer", "minimum": 2, "maximum": 18, "multipleOf": 2},
        "lam0": _pos,
        "levels": {"type": "integer", "minimum": 2, "maximum": 8},
    },
    "design-potential": {
        "target": TARGET_SCHEMA,
        "grid": {"type": "integer", "minimum": 512},
        "method": {"enum": ["analytic", "fd"]},
    },
    "eigencheck": {
        "target": TARGET_SCHEMA,
        "potential_csv": {"type": ["string", "null"]},
        "design_grid": {"type": "integer", "minimum": 512},
        "grid_n": {"type": "integer", "minimum": 64},
        "count": _posint,
        "radial": {"type": "boolean"},
        "tolerance": _pos,
        "asymptotics_j_max": {"type": "integer", "minimum": 0},
    },
    "waveguide-demo": {
        "target": TARGET_SCHEMA,
        "design_grid": {"type": "integer", "minimum": 512},
        "grid_n": {"type": "integer", "minimum": 64},
        "radial_modes": _posint,
        "axial_modes": _posint,
        "modes": _posint,
        "bump": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"s0": _nonneg, "sigma": _pos, "amplitude": _num},
        },
        "fit_window": {"type": "array", "items": _nonneg, "minItems": 2, "maxItems": 2},
        "probe_s": {"type": "array", "items": _nonneg},
        "off_axis_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "times": {"type": "array", "items": _nonneg, "minItems": 1},
    },
    "convergence-study": {
        "a_values": {"type": "array", "items": _pos, "minItems": 2},
        "lam": _pos,
        "source": SOURCE_SCHEMA,
        "ie_grid": {"type": "integer", "minimum": 2, "maximum": 27},
        "own_cube": {"type": "boolean"},
        "probe_levels": {"type": "array", "items": _num, "minItems": 1},
        "full_cap": _posint,
        "b_exponent": _pos,
    },
}

COMMANDS = tuple(PARAM_SCHEMAS)
STOCHASTIC = {"simulate-manybody", "convergence-study"}


def schema_for(command: str) -> dict:
    return {
        "type": "object",
        "additionalProperties": False,
        "required": ["version"],
        "properties": {
            "version": {"const": SCHEMA_VERSION},
            "command": {"const": command},
            "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
            "params": {"type": "object", "additionalProperties": False, "properties": PARAM_SCHEMAS[command]},
        },
    }


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


def validate(document: dict, command: str) -> None:
    validator = jsonschema.Draft202012Validator(schema_for(command))
    errors = sorted(validator.iter_errors(document), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for err in errors:
            where = "/".join(str(p) for p in err.absolute_path) or "<root>"
            lines.append(f"{where}: {err.message}")
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(lines))


@dataclass
class SourceConfig:
    center: list = field(default_factory=lambda: [0.5, 0.5, 0.5])
    radius: float = 0.4
    amplitude: float = 1.0
    profile: str = "bump"


@dataclass
class MediumConfig:
    domain: dict = field(default_factory=lambda: {"lo": [0.0, 0.0, 0.0], "hi": [1.0, 1.0, 1.0]})
    density: float = 1.0
    impedance: float | list = 1.0
    kappa: float = 0.0
    c_S: float = 4.0 * 3.141592653589793


@dataclass
class ManybodyConfig(MediumConfig):
    a: float = 0.04
    lam: float = 0.5
    source: SourceConfig = field(default_factory=SourceConfig)
    reduced_b: float | None = None
    own_cube: bool = False
    full_cap: int = 4000


@dataclass
class HomogenizeConfig(MediumConfig):
    grid: int = 12
    lams: list = field(default_factory=lambda: [0.5])
    source: SourceConfig = field(default_factory=SourceConfig)
    stationary: bool = True
    average_check: bool = False
    lam0: float = 0.01


@dataclass
class TauberianConfig:
    pairs: list = field(default_factory=lambda: ["constant", "exp_decay", "one_minus_exp"])
    times: list = field(default_factory=lambda: [0.5, 1.0, 2.0])
    order: int = 12
    lam0: float = 0.01
    levels: int = 4


@dataclass
class DesignConfig:
    target: str | dict = "default"
    grid: int = 4096
    method: str = "analytic"


@dataclass
class EigencheckConfig:
    target: str | dict = "default"
    potential_csv: str | None = None
    design_grid: int = 4096
    grid_n: int = 2048
    count: int = 10
    radial: bool = True
    tolerance: float = 0.05
    asymptotics_j_max: int = 20


@dataclass
class WaveguideConfig:
    target: str | dict = "default"
    design_grid: int = 4096
    grid_n: int = 1024
    radial_modes: int = 40
    axial_modes: int = 40
    modes: int = 400
    bump: dict = field(default_factory=lambda: {"s0": 1.5707963267948966, "sigma": 1.0, "amplitude": 1.0})
    fit_window: list = field(default_factory=lambda: [0.1, 0.5])
    probe_s: list = field(default_factory=lambda: [0.5, 1.0, 1.5707963267948966, 2.0, 2.5])
    off_axis_fraction: float = 0.9
    times: list = field(default_factory=lambda: [0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0])


@dataclass
class ConvergenceConfig:
    a_values: list = field(default_factory=lambda: [0.04, 0.02, 0.01])
    lam: float = 0.5
    source: SourceConfig = field(default_factory=SourceConfig)
    ie_grid: int = 16
    own_cube: bool = True
    probe_levels: list = field(default_factory=lambda: [0.25, 0.5, 0.75])
    full_cap: int = 4000
    b_exponent: float = 1.0 / 3.0


CONFIG_TYPES = {
    "simulate-manybody": ManybodyConfig,
    "homogenize": HomogenizeConfig,
    "tauberian": TauberianConfig,
    "design-potential": DesignConfig,
    "eigencheck": EigencheckConfig,
    "waveguide-demo": WaveguideConfig,
    "convergence-study": ConvergenceConfig,
}


@dataclass
class RunConfig:
    command: str
    params: object
    seed: int | None = None
    base_dir: Path = field(default_factory=Path.cwd)

    def to_dict(self) -> dict:
        return {"version": SCHEMA_VERSION, "command": self.command, "seed": self.seed,
                "params": asdict(self.params)}


def _build(cls, params: dict):
    kwargs = dict(params)
    for f in fields(cls):
        if f.name == "source" and f.name in kwargs:
            kwargs["source"] = SourceConfig(**kwargs["source"])
        if f.name == "bump" and f.name in kwargs:
            kwargs["bump"] = {**cls().bump, **kwargs["bump"]}
    return cls(**kwargs)


def load_config(command: str, path: str | Path | None = None, seed: int | None = None) -> RunConfig:
    """Read, validate and type a configuration; ``seed`` overrides the file's seed."""
    if command not in CONFIG_TYPES:
        raise ConfigError(f"command: unknown command {command!r}")
    document = {"version": SCHEMA_VERSION}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        try:
            document = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: cannot read {path}: {exc}") from exc
        if not isinstance(document, dict):
            raise ConfigError("<root>: configuration must be a JSON object")
        base = path.parent
    validate(document, command)
    if seed is not None:
        if not 0 <= seed < 2 ** 64:
            raise ConfigError("seed: must be an unsigned 64-bit integer")
        document["seed"] = seed
    if command in STOCHASTIC and document.get("seed") is None:
        raise ConfigError(f"seed: required for the stochastic command {command}")
    params = _build(CONFIG_TYPES[command], document.get("params", {}))
    return RunConfig(command, params, document.get("seed"), base)
