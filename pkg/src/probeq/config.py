"""Experiment configuration: a flat INI dialect, documented in the README.

Two sections.  [scenario] describes the approach (arrival rate, turn
ratios, signal timing, saturation rate, master seed, optionally a custom
topology); [experiment] describes the sweep (p grid, replications,
horizon, estimator subset).  Unknown keys are rejected so typos fail
loudly.  Example files s1.cfg and s2.cfg ship inside the package.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass
from importlib import resources

from .assignment import InvalidRatios, JunctionTopology, TurnRatios
from .sim import ScenarioConfig, SignalTiming

__all__ = [
    "ParseError",
    "ValidationError",
    "ESTIMATOR_NAMES",
    "ExperimentSpec",
    "load_config",
    "bundled_config_path",
]

ESTIMATOR_NAMES = (
    "m-baseline", "prop1", "prop2", "prop3", "E0", "E1", "p-hat", "lambda-hat",
)

_DEFAULTS = {"red_s": 60.0, "green_s": 40.0, "q_sat": 0.5}

_SCENARIO_KEYS = {"name", "lambda", "rho", "red_s", "green_s", "q_sat", "seed",
                  "forbidden", "n_lanes", "n_roads"}
_EXPERIMENT_KEYS = {"p_grid", "replications", "horizon_s", "estimators"}


class ParseError(ValueError):
    """The config file could not be read as key=value sections."""


class ValidationError(ValueError):
    """The config parsed but violates an invariant; the message names it."""


@dataclass(frozen=True)
class ExperimentSpec:
    """A full sweep: scenario template plus the grid to run it over."""

    scenario: ScenarioConfig
    p_grid: tuple[float, ...]
    replications: int
    horizon_s: float
    estimators: tuple[str, ...]
    name: str = "experiment"

    def __post_init__(self):
        if not self.p_grid:
            raise ValidationError("p_grid must not be empty")
        for p in self.p_grid:
            if not 0.0 < p <= 1.0:
                raise ValidationError(f"p_grid value {p} outside (0, 1]")
        if self.replications < 1:
            raise ValidationError(f"replications={self.replications} must be >= 1")
        for est in self.estimators:
            if est not in ESTIMATOR_NAMES:
                raise ValidationError(f"unknown estimator {est!r}")
        if not self.estimators:
            raise ValidationError("estimators must not be empty")


def _floats(raw: str, field: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in raw.replace(",", " ").split())
    except ValueError as exc:
        raise ParseError(f"field {field}: {exc}") from None


def _forbidden_pairs(raw: str) -> frozenset:
    pairs = set()
    for tok in raw.replace(",", " ").split():
        lane, _, road = tok.partition(":")
        try:
            pairs.add((int(lane), int(road)))
        except ValueError:
            raise ParseError(f"field forbidden: bad pair {tok!r} (want lane:road)") from None
    return frozenset(pairs)


def load_config(path) -> ExperimentSpec:
    """Parse and validate one experiment file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    except configparser.Error as exc:
        raise ParseError(str(exc)) from None

    for section in parser.sections():
        if section not in ("scenario", "experiment"):
            raise ParseError(f"unknown section [{section}]")
    scen = parser["scenario"] if parser.has_section("scenario") else {}
    expt = parser["experiment"] if parser.has_section("experiment") else {}
    for key in scen:
        if key not in _SCENARIO_KEYS:
            raise ParseError(f"unknown key {key!r} in [scenario]")
    for key in expt:
        if key not in _EXPERIMENT_KEYS:
            raise ParseError(f"unknown key {key!r} in [experiment]")

    name = scen.get("name", "experiment")
    try:
        lam = float(scen.get("lambda", 0.5))
        red_s = float(scen.get("red_s", _DEFAULTS["red_s"]))
        green_s = float(scen.get("green_s", _DEFAULTS["green_s"]))
        q_sat = float(scen.get("q_sat", _DEFAULTS["q_sat"]))
        seed = int(scen.get("seed", 0))
        n_lanes = int(scen.get("n_lanes", 3))
        n_roads = int(scen.get("n_roads", 3))
        replications = int(expt.get("replications", 1))
        horizon_s = float(expt.get("horizon_s", 9000.0))
    except ValueError as exc:
        raise ParseError(f"bad numeric field: {exc}") from None

    rho_raw = scen.get("rho", None)
    rho_vals = _floats(rho_raw, "rho") if rho_raw is not None else (1.0 / n_roads,) * n_roads
    if "forbidden" in scen:
        topology = JunctionTopology(n_lanes, n_roads, _forbidden_pairs(scen["forbidden"]))
    elif (n_lanes, n_roads) == (3, 3):
        topology = JunctionTopology.standard3()
    else:
        topology = JunctionTopology(n_lanes, n_roads)

    p_grid = _floats(expt.get("p_grid", "0.5"), "p_grid")
    if not p_grid:
        raise ValidationError("p_grid must not be empty")
    est_raw = expt.get("estimators", ", ".join(ESTIMATOR_NAMES))
    estimators = tuple(tok.strip() for tok in est_raw.split(",") if tok.strip())

    try:
        ratios = TurnRatios(rho_vals)
        timing = SignalTiming(red_s=red_s, green_s=green_s)
        scenario = ScenarioConfig(
            topology=topology, rho=ratios, lam=lam, p=p_grid[0], q_sat=q_sat,
            timing=timing, horizon_s=horizon_s, seed=seed,
        )
    except (InvalidRatios, ValueError) as exc:
        raise ValidationError(str(exc)) from None

    return ExperimentSpec(
        scenario=scenario, p_grid=p_grid, replications=replications,
        horizon_s=horizon_s, estimators=estimators, name=name,
    )


def bundled_config_path(name: str):
    """Filesystem path of a packaged example config (e.g. 's1', 's2', 'fig3')."""
    fname = name if name.endswith(".cfg") else f"{name}.cfg"
    ref = resources.files("probeq.data").joinpath(fname)
    if not ref.is_file():
        raise FileNotFoundError(f"no bundled config named {fname!r}")
    return ref
