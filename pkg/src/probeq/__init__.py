"""Queue-length estimation at a signalized junction from probe vehicles.

The package couples a discrete-event simulator of one 3-lane approach with
the estimation stack that consumes its traces: penetration-ratio, arrival-
rate and turn-ratio estimators, a QP-based lane-assignment fit, Bayesian
queue-length posteriors, per-lane probe-count splitters, an n-lane
windowing extension, and an experiment harness with a CLI.
"""
from ._backend import backend_name
from .assignment import (
    AssignmentMatrix,
    InfeasibleTopology,
    InvalidRatios,
    JunctionTopology,
    NegativeRate,
    TurnRatios,
    lane_arrival_rates,
    lane_weights,
    solve_assignment,
)
from .config import (
    ESTIMATOR_NAMES,
    ExperimentSpec,
    ParseError,
    ValidationError,
    bundled_config_path,
    load_config,
)
from .estimators import (
    NoProbeExits,
    PrimaryEstimates,
    ProbeCountEstimate,
    ZeroColumn,
    ZeroPenetration,
    estimate_lambda,
    estimate_p,
    estimate_primary,
    estimate_turn_ratios,
    probe_counts_E0,
    probe_counts_E1,
)
from .harness import (
    Empty,
    ExperimentResult,
    LengthMismatch,
    MaeRow,
    MaeTable,
    baseline_m,
    mae,
    run_experiment,
    write_exits_csv,
    write_trace_csv,
)
from .nlane import (
    MissingWindow,
    TooFewLanes,
    enumerate_windows,
    estimate_nlane,
    nlane_pipeline,
    window_observation,
)
from .queuedist import (
    DegenerateObservation,
    InconsistentObservation,
    JointQueuePmf,
    QueuePmf,
    S_term,
    StockParams,
    binom,
    default_n_max,
    prop1_pmf,
    prop2_expectations,
    prop2_joint,
    prop2_means,
    prop3_expectation,
    prop3_pmf,
)
from .sim import (
    CycleObservation,
    ProbeExit,
    ScenarioConfig,
    SignalTiming,
    SimTrace,
    discharge,
    run_simulation,
    sample_vehicle,
)

__version__ = "0.1.0"

__all__ = [
    "AssignmentMatrix", "InfeasibleTopology", "InvalidRatios", "JunctionTopology",
    "NegativeRate", "TurnRatios", "lane_arrival_rates", "lane_weights",
    "solve_assignment",
    "SignalTiming", "ScenarioConfig", "CycleObservation", "ProbeExit", "SimTrace",
    "sample_vehicle", "discharge", "run_simulation",
    "NoProbeExits", "ZeroPenetration", "ZeroColumn", "ProbeCountEstimate",
    "PrimaryEstimates", "estimate_p", "estimate_lambda", "estimate_turn_ratios",
    "probe_counts_E0", "probe_counts_E1", "estimate_primary",
    "QueuePmf", "JointQueuePmf", "StockParams", "DegenerateObservation",
    "InconsistentObservation", "binom", "default_n_max", "prop1_pmf", "prop2_joint",
    "prop2_expectations", "prop2_means", "S_term", "prop3_pmf", "prop3_expectation",
    "TooFewLanes", "MissingWindow", "enumerate_windows", "window_observation",
    "estimate_nlane", "nlane_pipeline",
    "ParseError", "ValidationError", "ESTIMATOR_NAMES", "ExperimentSpec",
    "load_config", "bundled_config_path",
    "LengthMismatch", "Empty", "MaeRow", "MaeTable", "ExperimentResult",
    "mae", "baseline_m", "run_experiment", "write_trace_csv", "write_exits_csv",
    "backend_name",
    "__version__",
]
