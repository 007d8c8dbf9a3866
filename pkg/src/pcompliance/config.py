"""Experiment configuration: one INI-style file, strictly validated.

Sections mirror the CLI subcommands plus shared [problem], [solver], and
[output] blocks.  Unknown sections or keys are rejected, values are
re-validated through the owning dataclasses at parse time, and parser
errors surface with their line numbers.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Optional

from .errors import ConfigError
from .geometry import ProblemSpec
from .solver import SolverConfig


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.replace(",", " ").split())


def _optional(parser: Callable):
    def parse(text: str):
        return None if text.strip() == "" else parser(text)
    return parse


@dataclass(frozen=True)
class SolveJob:
    nodes_per_side: int = 129
    source: str = "one"
    cracks_file: Optional[str] = None
    heatmap: bool = False

    def __post_init__(self):
        if self.nodes_per_side < 3:
            raise ValueError(f"nodes_per_side must be >= 3, got {self.nodes_per_side}")


@dataclass(frozen=True)
class CapacitySweepJob:
    lengths: tuple[float, ...] = (0.02, 0.04, 0.08, 0.16, 0.32)
    resolution: int = 4
    box_half_width: Optional[float] = None
    slope_tolerance: float = 0.15

    def __post_init__(self):
        if len(self.lengths) < 3:
            raise ValueError("need at least 3 sweep lengths")
        if any(not (0 < t <= 1) for t in self.lengths):
            raise ValueError("sweep lengths must lie in (0, 1]")
        if self.slope_tolerance <= 0:
            raise ValueError("slope_tolerance must be positive")


@dataclass(frozen=True)
class VanishingJob:
    n_list: tuple[int, ...] = (1, 2, 4, 8)
    epsilon: float = 0.25
    length_penalty: float = 1.0
    local_nodes: Optional[int] = None
    span_cells: float = 2.0
    capacity_resolution: int = 4
    divergence_samples: int = 0
    bound_safety: float = 1.5
    compare_baseline: bool = True
    baseline_nodes: int = 257

    def __post_init__(self):
        if not (0 < self.epsilon < 1):
            raise ValueError("epsilon must lie in (0, 1)")
        if not self.n_list or any(n < 1 for n in self.n_list):
            raise ValueError("n_list must be a nonempty list of integers >= 1")
        if self.bound_safety < 1:
            raise ValueError("bound_safety must be >= 1")


@dataclass(frozen=True)
class PoincareJob:
    deltas: tuple[float, ...] = (0.5, 1.0, 2.0)
    relative_lengths: tuple[float, ...] = (0.25,)
    nodes_per_side: int = 65
    with_capacity: bool = True
    capacity_resolution: int = 8
    doubling_tolerance: float = 0.05

    def __post_init__(self):
        if any(d <= 0 for d in self.deltas):
            raise ValueError("deltas must be positive")
        if any(not (0 < a < 1) for a in self.relative_lengths):
            raise ValueError("relative_lengths must lie in (0, 1)")


@dataclass(frozen=True)
class StabilityJob:
    pairs: int = 10
    calibration: int = 5
    nodes_per_side: int = 65
    calibration_safety: float = 1.3
    truncation_levels: tuple[float, ...] = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0)

    def __post_init__(self):
        # pairs = 0 makes the whole command a no-op
        if self.pairs and not (0 < self.calibration < self.pairs):
            raise ValueError("need 0 < calibration < pairs")


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemSpec = field(default_factory=lambda: ProblemSpec(p=2.0))
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 0
    out_dir: str = "out"
    solve: SolveJob = field(default_factory=SolveJob)
    capacity_sweep: CapacitySweepJob = field(default_factory=CapacitySweepJob)
    sweep_vanishing: VanishingJob = field(default_factory=VanishingJob)
    poincare: PoincareJob = field(default_factory=PoincareJob)
    stability: StabilityJob = field(default_factory=StabilityJob)


_SECTION_TYPES = {
    "problem": ProblemSpec,
    "solver": SolverConfig,
    "solve": SolveJob,
    "capacity-sweep": CapacitySweepJob,
    "sweep-vanishing": VanishingJob,
    "poincare": PoincareJob,
    "stability": StabilityJob,
}

_KEY_PARSERS = {
    ("problem", "p"): float,
    ("problem", "dim"): int,
    ("problem", "half_width"): float,
    ("problem", "length_penalty"): float,
    ("problem", "length_budget"): _optional(float),
    ("problem", "source_exponent"): _optional(float),
    ("solver", "grad_tolerance"): float,
    ("solver", "max_iterations"): int,
    ("solver", "regularization_eps"): _optional(float),
    ("solver", "method"): str,
    ("solver", "memory"): int,
    ("solver", "armijo_factor"): float,
    ("solver", "armijo_c1"): float,
    ("solver", "prefer_direct"): _optional(_parse_bool),
    ("solve", "nodes_per_side"): int,
    ("solve", "source"): str,
    ("solve", "cracks_file"): _optional(str),
    ("solve", "heatmap"): _parse_bool,
    ("capacity-sweep", "lengths"): _parse_floats,
    ("capacity-sweep", "resolution"): int,
    ("capacity-sweep", "box_half_width"): _optional(float),
    ("capacity-sweep", "slope_tolerance"): float,
    ("sweep-vanishing", "n_list"): _parse_ints,
    ("sweep-vanishing", "epsilon"): float,
    ("sweep-vanishing", "length_penalty"): float,
    ("sweep-vanishing", "local_nodes"): _optional(int),
    ("sweep-vanishing", "span_cells"): float,
    ("sweep-vanishing", "capacity_resolution"): int,
    ("sweep-vanishing", "divergence_samples"): int,
    ("sweep-vanishing", "bound_safety"): float,
    ("sweep-vanishing", "compare_baseline"): _parse_bool,
    ("sweep-vanishing", "baseline_nodes"): int,
    ("poincare", "deltas"): _parse_floats,
    ("poincare", "relative_lengths"): _parse_floats,
    ("poincare", "nodes_per_side"): int,
    ("poincare", "with_capacity"): _parse_bool,
    ("poincare", "capacity_resolution"): int,
    ("poincare", "doubling_tolerance"): float,
    ("stability", "pairs"): int,
    ("stability", "calibration"): int,
    ("stability", "nodes_per_side"): int,
    ("stability", "calibration_safety"): float,
    ("stability", "truncation_levels"): _parse_floats,
    ("output", "seed"): int,
    ("output", "directory"): str,
}


def _build_section(section: str, raw: dict[str, str]):
    cls = _SECTION_TYPES[section]
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, text in raw.items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in section [{section}]")
        parser = _KEY_PARSERS[(section, key)]
        try:
            kwargs[key] = parser(text)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r} in [{section}]: {exc}") from exc
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"invalid [{section}] settings: {exc}") from exc


def config_from_text(text: str, origin: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=origin)
    except configparser.Error as exc:
        # configparser messages already cite line numbers
        raise ConfigError(f"could not parse {origin}: {exc}") from exc

    values = {}
    seed = 0
    out_dir = "out"
    for section in parser.sections():
        raw = dict(parser.items(section))
        if section == "output":
            for key, text_value in raw.items():
                if ("output", key) not in _KEY_PARSERS:
                    raise ConfigError(f"unknown key {key!r} in section [output]")
            if "seed" in raw:
                try:
                    seed = int(raw["seed"])
                except ValueError as exc:
                    raise ConfigError(f"bad value for 'seed' in [output]: {exc}") from exc
            if "directory" in raw:
                out_dir = raw["directory"]
            continue
        if section not in _SECTION_TYPES:
            known = ", ".join(sorted(_SECTION_TYPES) + ["output"])
            raise ConfigError(f"unknown section [{section}]; expected one of: {known}")
        values[section] = _build_section(section, raw)

    return ExperimentConfig(
        problem=values.get("problem", ProblemSpec(p=2.0)),
        solver=values.get("solver", SolverConfig()),
        seed=seed,
        out_dir=out_dir,
        solve=values.get("solve", SolveJob()),
        capacity_sweep=values.get("capacity-sweep", CapacitySweepJob()),
        sweep_vanishing=values.get("sweep-vanishing", VanishingJob()),
        poincare=values.get("poincare", PoincareJob()),
        stability=values.get("stability", StabilityJob()))


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_text(text, origin=str(path))
