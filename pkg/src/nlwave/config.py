"""Run configuration: a flat ``key = value`` format with dotted sections.

A config file looks like::

    command = converge
    kernel.name = exp
    grid.h = 0.125
    integrator.rel_tol = 1e-10
    study.h_list = 2, 1, 0.5, 0.25, 0.125

Blank lines and ``#`` comments are ignored. Defaults depend on the command
and on the initial-data preset; values from the file override them and
command-line flags override the file.
"""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .grid_ops import Grid
from .integrator import IntegratorConfig
from .kernels import BUILTIN_KERNELS

COMMANDS = ("run", "converge", "domain-study", "blowup", "blowup-refine", "decay", "kernel-info", "lemma-check")
PRESETS = ("solitary", "blowup-gaussian")
NONLINEARITIES = ("quadratic", "power", "linear")
FORMATS = ("csv", "json")

# shorthand keys accepted on input
ALIASES = {
    "kernel": "kernel.name",
    "nonlinearity": "nonlinearity.name",
    "initial_data": "initial_data.preset",
    "output": "output.path",
    "format": "output.format",
}


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending field."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _kind(kind: str, default: Any = None):
    return field(default=default, metadata={"kind": kind})


@dataclass(frozen=True)
class KernelSpec:
    name: str = _kind("str", "exp")
    tv_mass: float | None = _kind("opt_float")


@dataclass(frozen=True)
class NonlinearitySpec:
    name: str = _kind("str", "quadratic")
    power: int = _kind("int", 3)


@dataclass(frozen=True)
class GridSpec:
    h: float = _kind("float", 0.125)
    x_left: float = _kind("float", -30.0)
    x_right: float = _kind("float", 30.0)


@dataclass(frozen=True)
class InitialDataSpec:
    preset: str = _kind("str", "solitary")
    c: float = _kind("float", 1.5)
    x0: float = _kind("float", -15.0)


@dataclass(frozen=True)
class OutputSpec:
    path: str = _kind("str", "")
    format: str = _kind("str", "csv")


@dataclass(frozen=True)
class StudySpec:
    h_list: tuple[float, ...] = _kind("floats", ())
    N_list: tuple[int, ...] = _kind("ints", ())
    t_list: tuple[float, ...] = _kind("floats", ())
    thresholds: tuple[float, ...] = _kind("floats", (1e8,))
    kernels: tuple[str, ...] = _kind("strs", ())
    half_width: float = _kind("float", 10.0)
    r: float | None = _kind("opt_float")
    sample_band: tuple[float, ...] = _kind("floats", (0.5, 0.9))
    on_diverge: str = _kind("str", "record")


# integrator fields reuse IntegratorConfig directly
_INTEGRATOR_KINDS = {
    "method": "str", "dt": "opt_float", "rel_tol": "float", "abs_tol": "float", "t_end": "float",
    "blowup_threshold": "float", "min_step": "float", "trace_samples": "int", "max_steps": "int",
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    kernel: KernelSpec = KernelSpec()
    nonlinearity: NonlinearitySpec = NonlinearitySpec()
    grid: GridSpec = GridSpec()
    integrator: IntegratorConfig = IntegratorConfig()
    initial_data: InitialDataSpec = InitialDataSpec()
    output: OutputSpec = OutputSpec()
    study: StudySpec = StudySpec()

    def domain(self) -> tuple[float, float]:
        return (self.grid.x_left, self.grid.x_right)

    def build_grid(self) -> Grid:
        return Grid.from_interval(self.grid.h, self.grid.x_left, self.grid.x_right)


SECTIONS = ("kernel", "nonlinearity", "grid", "integrator", "initial_data", "output", "study")


def _section_kinds(name: str) -> dict[str, str]:
    if name == "integrator":
        return dict(_INTEGRATOR_KINDS)
    cls = {f.name: f.type for f in dataclasses.fields(RunConfig)}[name]
    cls = globals()[cls] if isinstance(cls, str) else cls
    return {f.name: f.metadata["kind"] for f in dataclasses.fields(cls)}


KEYS: dict[str, str] = {"command": "str"}
for _s in SECTIONS:
    for _k, _v in _section_kinds(_s).items():
        KEYS[f"{_s}.{_k}"] = _v


# -- per-command and per-preset defaults ----------------------------------------------

_SOLITARY_GRID = {"grid.h": 0.125, "grid.x_left": -30.0, "grid.x_right": 30.0, "integrator.t_end": 20.0}
_BLOWUP_GRID = {"grid.h": 0.1, "grid.x_left": -10.0, "grid.x_right": 10.0, "integrator.t_end": 10.0}

PRESET_DEFAULTS: dict[str, dict[str, Any]] = {
    "solitary": _SOLITARY_GRID,
    "blowup-gaussian": _BLOWUP_GRID,
}

COMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "run": {"initial_data.preset": "solitary"},
    "converge": {"initial_data.preset": "solitary", "study.h_list": (2.0, 1.0, 0.5, 0.25, 0.125)},
    "domain-study": {
        "initial_data.preset": "solitary", "grid.h": 0.1, "grid.x_left": -20.0, "grid.x_right": 20.0,
        "study.N_list": (160, 180, 200, 220, 240, 260, 280), "study.t_list": (5.0, 10.0, 15.0, 20.0),
    },
    "blowup": {"initial_data.preset": "blowup-gaussian"},
    "blowup-refine": {
        "initial_data.preset": "blowup-gaussian",
        "study.N_list": (2, 5, 10, 20, 40, 60, 80, 100), "study.half_width": 10.0,
    },
    "decay": {
        "initial_data.preset": "solitary", "integrator.t_end": 10.0,
        "study.t_list": tuple(float(t) for t in range(11)),
    },
    "kernel-info": {"grid.h": 0.1, "study.h_list": (0.4, 0.2, 0.1, 0.05)},
    "lemma-check": {"study.h_list": (0.4, 0.2, 0.1, 0.05)},
}


# -- text conversion ----------------------------------------------------------------------

def _fmt_float(x: float) -> str:
    return repr(float(x))


def format_value(kind: str, value: Any) -> str:
    if value is None:
        return "none"
    if kind == "float" or kind == "opt_float":
        return _fmt_float(value)
    if kind == "floats":
        return ", ".join(_fmt_float(v) for v in value)
    if kind == "ints":
        return ", ".join(str(int(v)) for v in value)
    if kind == "strs":
        return ", ".join(value)
    return str(value)


def parse_value(key: str, kind: str, text: str) -> Any:
    text = text.strip()
    try:
        if kind == "str":
            return text
        if kind == "opt_float":
            return None if text.lower() in ("none", "auto", "") else float(text)
        if kind == "float":
            return float(text)
        if kind == "int":
            return int(text)
        items = [t.strip() for t in text.replace(";", ",").split(",") if t.strip()]
        if kind == "floats":
            return tuple(float(t) for t in items)
        if kind == "ints":
            return tuple(int(t) for t in items)
        if kind == "strs":
            return tuple(items)
    except ValueError:
        raise ConfigError(key, f"cannot parse {text!r} as {kind}") from None
    raise AssertionError(kind)


def canonical_key(key: str) -> str:
    key = key.strip().lstrip("-").replace("-", "_")
    key = ALIASES.get(key, key)
    if key not in KEYS:
        raise ConfigError(key, "unknown configuration key")
    return key


def read_pairs(text: str, source: str = "<config>") -> dict[str, str]:
    """Raw ``key -> text`` pairs from config text; later duplicates win."""
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}", f"expected 'key = value', got {raw.strip()!r}")
        key, value = line.split("=", 1)
        pairs[canonical_key(key)] = value.strip()
    return pairs


def flag_pairs(tokens: list[str]) -> dict[str, str]:
    """``--key value`` and ``--key=value`` tokens to raw pairs."""
    pairs: dict[str, str] = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise ConfigError(tok, "expected a --key flag")
        if "=" in tok:
            key, value = tok.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(tok.lstrip("-"), "flag is missing its value")
            key, value = tok, tokens[i + 1]
            i += 2
        pairs[canonical_key(key)] = value
    return pairs


# -- building and validating --------------------------------------------------------------

def resolve(raw: Mapping[str, str]) -> RunConfig:
    """Apply command and preset defaults under the raw pairs and validate."""
    if "command" not in raw or not raw["command"].strip():
        raise ConfigError("command", "missing required field")
    command = raw["command"].strip()
    if command not in COMMANDS:
        raise ConfigError("command", f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")

    defaults = COMMAND_DEFAULTS[command]
    preset = raw.get("initial_data.preset", defaults.get("initial_data.preset", "solitary")).strip()
    # command-specific values win over the preset's grid
    values: dict[str, Any] = {**PRESET_DEFAULTS.get(preset, {}), **defaults}
    values.update({k: parse_value(k, KEYS[k], v) for k, v in raw.items()})
    values["command"] = command
    return build(values)


def build(values: Mapping[str, Any]) -> RunConfig:
    sections: dict[str, dict[str, Any]] = {s: {} for s in SECTIONS}
    for key, value in values.items():
        if key == "command":
            continue
        sec, name = key.split(".", 1)
        sections[sec][name] = value
    try:
        integrator = IntegratorConfig(**sections["integrator"])
    except ValueError as exc:
        msg = str(exc)
        hits = [(m.start(), n) for n in _INTEGRATOR_KINDS if (m := re.search(rf"\b{n}\b", msg))]
        name = min(hits)[1] if hits else "method"
        raise ConfigError(f"integrator.{name}", msg) from None
    config = RunConfig(
        command=values["command"],
        kernel=KernelSpec(**sections["kernel"]),
        nonlinearity=NonlinearitySpec(**sections["nonlinearity"]),
        grid=GridSpec(**sections["grid"]),
        integrator=integrator,
        initial_data=InitialDataSpec(**sections["initial_data"]),
        output=OutputSpec(**sections["output"]),
        study=StudySpec(**sections["study"]),
    )
    validate(config)
    return config


def validate(config: RunConfig) -> None:
    """Raise :class:`ConfigError` naming the first invalid field."""
    k = config.kernel.name
    if k not in BUILTIN_KERNELS and not Path(k).is_file():
        raise ConfigError("kernel.name", f"unknown kernel {k!r}; use one of {', '.join(BUILTIN_KERNELS)} "
                                         "or a path to a two-column table")
    for name in config.study.kernels:
        if name not in BUILTIN_KERNELS and not Path(name).is_file():
            raise ConfigError("study.kernels", f"unknown kernel {name!r}")
    if config.nonlinearity.name not in NONLINEARITIES:
        raise ConfigError("nonlinearity.name", f"unknown nonlinearity {config.nonlinearity.name!r}")
    if config.nonlinearity.power < 2:
        raise ConfigError("nonlinearity.power", "must be an integer >= 2")

    g = config.grid
    if not (math.isfinite(g.h) and g.h > 0):
        raise ConfigError("grid.h", f"mesh size must be positive, got {g.h}")
    if not g.x_left < g.x_right:
        raise ConfigError("grid.x_left", f"x_left ({g.x_left}) must be less than x_right ({g.x_right})")
    try:
        Grid.from_interval(g.h, g.x_left, g.x_right)
    except ValueError as exc:
        raise ConfigError("grid.h", f"grid misaligned: {exc}") from None

    p = config.initial_data.preset
    if p not in PRESETS and not Path(p).is_file():
        raise ConfigError("initial_data.preset", f"unknown preset {p!r}; use one of {', '.join(PRESETS)} "
                                                 "or a path to a data file")
    if p == "solitary" and not abs(config.initial_data.c) > 1:
        raise ConfigError("initial_data.c", "solitary waves need |c| > 1")

    if config.output.format not in FORMATS:
        raise ConfigError("output.format", f"must be one of {', '.join(FORMATS)}")

    s = config.study
    if any(not h > 0 for h in s.h_list):
        raise ConfigError("study.h_list", "mesh sizes must be positive")
    if any(n < 1 for n in s.N_list):
        raise ConfigError("study.N_list", "point counts must be positive")
    if any(not t >= 0 for t in s.t_list):
        raise ConfigError("study.t_list", "times must be non-negative")
    if any(not t > 0 for t in s.thresholds):
        raise ConfigError("study.thresholds", "thresholds must be positive")
    if s.r is not None and not s.r > 0:
        raise ConfigError("study.r", "decay rate must be positive")
    if len(s.sample_band) != 2 or not 0 <= s.sample_band[0] < s.sample_band[1] <= 1:
        raise ConfigError("study.sample_band", "expected two fractions 0 <= lo < hi <= 1")
    if s.on_diverge not in ("raise", "record"):
        raise ConfigError("study.on_diverge", "must be 'raise' or 'record'")

    needs = {"converge": ("h_list", "study.h_list"), "domain-study": ("N_list", "study.N_list"),
             "blowup-refine": ("N_list", "study.N_list"), "lemma-check": ("h_list", "study.h_list")}
    if config.command in needs:
        attr, key = needs[config.command]
        if not getattr(s, attr):
            raise ConfigError(key, "missing required field")
    if config.command in ("domain-study", "decay") and not s.t_list:
        raise ConfigError("study.t_list", "missing required field")
    if config.command == "decay" and s.r is None and p != "solitary":
        raise ConfigError("study.r", "missing required field (no automatic rate for this initial data)")


def to_pairs(config: RunConfig) -> list[tuple[str, str]]:
    """Every key with its text value, in schema order."""
    out = [("command", config.command)]
    for sec in SECTIONS:
        obj = getattr(config, sec)
        for name, kind in _section_kinds(sec).items():
            out.append((f"{sec}.{name}", format_value(kind, getattr(obj, name))))
    return out


def emit(config: RunConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in to_pairs(config))


def parse(text: str, overrides: list[str] | None = None, source: str = "<config>") -> RunConfig:
    """Config text plus optional ``--key value`` overrides to a resolved config."""
    raw = read_pairs(text, source)
    raw.update(flag_pairs(overrides or []))
    return resolve(raw)


def load(path: str | Path | None, overrides: list[str] | None = None,
         command: str | None = None) -> RunConfig:
    """Read ``path`` (if given), apply flag overrides and an explicit command."""
    text = ""
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    raw = read_pairs(text, str(path or "<config>"))
    if command is not None:
        raw["command"] = command
    raw.update(flag_pairs(overrides or []))
    return resolve(raw)
