"""Sectioned ``key = value`` run configuration: parsing, validation and emission."""

from __future__ import annotations

import configparser
import difflib
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .grid import GridError, SpatialGrid, VelocityGrid
from .mixture import MixtureParams, validate_params
from .scenarios import SCENARIOS
from .solver import SolverConfig


class ConfigError(ValueError):
    """Invalid configuration document; ``problems`` lists every finding."""

    def __init__(self, problems: list[str]):
        super().__init__("\n".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "random-smooth"
    epsilon: float = 1e-3
    seed: int = 0


@dataclass(frozen=True)
class VerifyConfig:
    """Settings of the verification suite (grid sizes, sample counts)."""

    n_per_axis: int = 24
    v_max: float = 0.0  # 0 means 7 / sqrt(m2)
    dissipation_n_per_axis: int = 16
    draws: int = 1000
    step: float = 1e-5
    seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    mixture: MixtureParams = field(default_factory=MixtureParams)
    space: SpatialGrid = field(default_factory=SpatialGrid)
    velocity: VelocityGrid = field(default_factory=lambda: VelocityGrid(6.0, 16))
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(dt=0.1, t_max=20.0))
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    output: Path = Path("out")


# key -> (type, default); a default of None means "derived"
SCHEMA: dict[str, dict[str, tuple[type, object]]] = {
    "mixture": {f.name: (float, f.default) for f in fields(MixtureParams)},
    "grid": {
        "n_cells": (int, 1),
        "length": (float, 1.0),
        "dim": (int, 0),
        "v_max": (float, None),
        "n_per_axis": (int, 16),
    },
    "solver": {
        "dt": (float, 0.1),
        "t_max": (float, 20.0),
        "splitting": (str, "strang"),
        "equilibrium_mode": (str, "matched"),
        "record_every": (int, 1),
        "rate_multiplier": (float, 1.0),
    },
    "scenario": {
        "name": (str, "random-smooth"),
        "epsilon": (float, 1e-3),
        "seed": (int, 0),
    },
    "verify": {f.name: (type(f.default), f.default) for f in fields(VerifyConfig)},
    "output": {"directory": (str, "out")},
}


def _convert(section: str, key: str, raw: str, kind: type, problems: list[str]):
    try:
        if kind is int:
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        if kind is float:
            value = float(raw)
            if not np.isfinite(value):
                raise ValueError
            return value
        return raw.strip()
    except ValueError:
        problems.append(f"[{section}] {key} = {raw!r}: expected {kind.__name__}")
        return None


def _nearest(word: str, options) -> str:
    match = difflib.get_close_matches(word, list(options), n=1, cutoff=0.0)
    return f"; did you mean '{match[0]}'?" if match else ""


def parse_config(text: str, allow_degenerate: bool = False) -> RunConfig:
    """Parse and validate a configuration document.

    Missing keys take their defaults. Every problem is collected before a
    single :class:`ConfigError` is raised. ``allow_degenerate`` admits
    ``delta = 1`` or ``omega = 1`` (used by kernel-only verification).
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"malformed document: {exc}"]) from exc

    problems: list[str] = []
    values: dict[str, dict[str, object]] = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
    for section in parser.sections():
        if section not in SCHEMA:
            problems.append(f"unknown section [{section}]{_nearest(section, SCHEMA)}")
            continue
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                problems.append(f"unknown key '{key}' in [{section}]{_nearest(key, SCHEMA[section])}")
                continue
            kind = SCHEMA[section][key][0]
            value = _convert(section, key, raw, kind, problems)
            if value is not None:
                values[section][key] = value
    if problems:
        raise ConfigError(problems)
    return _build(values, allow_degenerate)


def _build(values, allow_degenerate: bool) -> RunConfig:
    problems: list[str] = []
    mixture = MixtureParams(**values["mixture"])
    verdict = validate_params(mixture, allow_degenerate)
    problems += [f"[mixture] {v}" for v in verdict.violations]

    g = values["grid"]
    space = velocity = None
    try:
        space = SpatialGrid(g["n_cells"], g["length"], g["dim"])
    except GridError as exc:
        problems.append(f"[grid] {exc}")
    v_max = g["v_max"]
    if v_max is None:
        v_max = 6.0 / np.sqrt(mixture.m2) if mixture.m2 > 0 else 6.0
    try:
        velocity = VelocityGrid(float(v_max), g["n_per_axis"])
    except GridError as exc:
        problems.append(f"[grid] {exc}")

    solver = None
    try:
        solver = SolverConfig(**values["solver"])
    except ValueError as exc:
        problems.append(f"[solver] {exc}")

    sc = values["scenario"]
    if sc["name"] not in SCENARIOS:
        problems.append(f"[scenario] name = {sc['name']!r} is not one of {', '.join(SCENARIOS)}{_nearest(sc['name'], SCENARIOS)}")
    if not sc["epsilon"] > 0:
        problems.append(f"[scenario] epsilon must be positive, got {sc['epsilon']}")
    scenario = ScenarioConfig(sc["name"], sc["epsilon"], sc["seed"])

    vf = values["verify"]
    if vf["n_per_axis"] < 2 or vf["n_per_axis"] % 2 or vf["dissipation_n_per_axis"] < 2 or vf["dissipation_n_per_axis"] % 2:
        problems.append("[verify] grid sizes must be even and >= 2")
    if vf["v_max"] < 0:
        problems.append("[verify] v_max must be positive (or 0 for the default 7/sqrt(m2))")
    if vf["draws"] < 1:
        problems.append("[verify] draws must be >= 1")
    if not 1e-7 <= vf["step"] <= 1e-3:
        problems.append(f"[verify] step must lie in [1e-7, 1e-3], got {vf['step']}")
    verify = VerifyConfig(**vf)

    if problems:
        raise ConfigError(problems)
    return RunConfig(mixture, space, velocity, solver, scenario, verify, Path(values["output"]["directory"]))


def load_config(path, allow_degenerate: bool = False) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), allow_degenerate)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_config(cfg: RunConfig) -> str:
    """Write ``cfg`` in the format :func:`parse_config` reads; the round trip is exact."""
    sections = {
        "mixture": {f.name: getattr(cfg.mixture, f.name) for f in fields(MixtureParams)},
        "grid": {
            "n_cells": cfg.space.n_cells,
            "length": cfg.space.length,
            "dim": cfg.space.dim,
            "v_max": cfg.velocity.v_max,
            "n_per_axis": cfg.velocity.n_per_axis,
        },
        "solver": {f.name: getattr(cfg.solver, f.name) for f in fields(SolverConfig)},
        "scenario": {"name": cfg.scenario.name, "epsilon": cfg.scenario.epsilon, "seed": cfg.scenario.seed},
        "verify": {f.name: getattr(cfg.verify, f.name) for f in fields(VerifyConfig)},
        "output": {"directory": str(cfg.output)},
    }
    lines = []
    for name, items in sections.items():
        lines.append(f"[{name}]")
        lines += [f"{k} = {_fmt(v)}" for k, v in items.items()]
        lines.append("")
    return "\n".join(lines)
