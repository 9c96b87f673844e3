"""Experiment harness: sweep p, replicate, score estimators, emit CSVs.

One experiment = one scenario template swept over a p grid with several
replications per grid point.  Each (p, replication) cell runs its own
simulation, re-estimates the primary parameters from the trace (unless
oracle_params is set), evaluates the requested queue and probe-count
estimators cycle by cycle, and reduces to mean absolute errors.  Cells are
independent, so they fan out to a process pool and are merged back in a
fixed (p, replication) order; output files are byte-identical across runs
with the same seed.

Cycles flagged as overflowed, and cycles that start with a carried-in
residual queue, are excluded from every MAE; the exclusion count is
reported per cell in primary.csv rather than silently dropped.
"""
from __future__ import annotations

import csv
import dataclasses
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .assignment import solve_assignment
from .config import ExperimentSpec
from .estimators import (
    NoProbeExits,
    ZeroColumn,
    estimate_lambda,
    estimate_p,
    estimate_turn_ratios,
    probe_counts_E0,
    probe_counts_E1,
)
from .queuedist import (
    DegenerateObservation,
    InconsistentObservation,
    StockParams,
    default_n_max,
    prop1_pmf,
    prop2_means,
    prop3_expectation,
    prop3_pmf,
)
from .sim import CycleObservation, SimTrace, run_simulation

__all__ = [
    "LengthMismatch",
    "Empty",
    "ExperimentError",
    "MaeRow",
    "MaeTable",
    "ReplicationResult",
    "ExperimentResult",
    "mae",
    "baseline_m",
    "run_experiment",
    "write_trace_csv",
    "write_exits_csv",
]

log = logging.getLogger("probeq.harness")

QUEUE_ESTIMATORS = ("m-baseline", "prop1", "prop2", "prop3")
COUNT_ESTIMATORS = ("E0", "E1")
FLOW_ESTIMATORS = ("p-hat", "lambda-hat")


class LengthMismatch(ValueError):
    """mae() was given series of different lengths."""


class Empty(ValueError):
    """mae() was given empty series."""


class ExperimentError(RuntimeError):
    """A cell failed; the message carries (p, replication)."""


def mae(estimates, truths) -> float:
    """Mean absolute error between two equal-length series."""
    est = list(estimates)
    tru = list(truths)
    if len(est) != len(tru):
        raise LengthMismatch(f"{len(est)} estimates vs {len(tru)} truths")
    if not est:
        raise Empty("mae of empty series")
    return float(np.mean(np.abs(np.asarray(est, float) - np.asarray(tru, float))))


def baseline_m(cycle: CycleObservation) -> tuple[int, ...]:
    """The crudest queue estimate: every lane is as deep as the last probe."""
    return (cycle.m,) * len(cycle.true_queues)


def _lane_label(i: int) -> str:
    return chr(ord("a") + i)


@dataclass(frozen=True)
class MaeRow:
    estimator: str
    lane: str
    p: float
    mae: float
    replications: int
    horizon_s: float


@dataclass(frozen=True)
class MaeTable:
    rows: tuple[MaeRow, ...]

    def lookup(self, estimator: str, lane: str, p: float, tol: float = 1e-9) -> float:
        for row in self.rows:
            if row.estimator == estimator and row.lane == lane and abs(row.p - p) <= tol:
                return row.mae
        raise KeyError(f"no MAE row for ({estimator}, {lane}, p={p})")


@dataclass(frozen=True)
class ReplicationResult:
    """One (p, replication) cell, reduced to per-cell MAEs for merging."""

    p_idx: int
    replication: int
    p_true: float
    p_hat: float
    lambda_hat: float
    rho_hat: tuple[float, ...]
    queue_maes: dict
    used_cycles: int
    excluded_cycles: int
    flow_errs: dict
    count_maes: dict
    warnings: tuple[str, ...]


@dataclass(frozen=True)
class ExperimentResult:
    spec: ExperimentSpec
    oracle_params: bool
    mae_table: MaeTable
    cells: tuple[ReplicationResult, ...]

    def write_csvs(self, out_dir) -> list[Path]:
        return _write_all(self, Path(out_dir))


def _thinned_mean(mu: float, p_use: float, n_max: int) -> float:
    return prop1_pmf((1.0 - p_use) * mu, n_max).mean()


def _run_cell(spec: ExperimentSpec, p_idx: int, rep: int, oracle_params: bool) -> ReplicationResult:
    p = spec.p_grid[p_idx]
    scen = spec.scenario
    config = dataclasses.replace(
        scen, p=p, horizon_s=spec.horizon_s, seed=(int(scen.seed), p_idx, rep)
    )
    w_true = config.solve_w()
    trace = run_simulation(config, w=w_true)
    wanted = set(spec.estimators)
    warnings = []
    n_lanes = scen.topology.n_in_lanes
    d = scen.topology.n_out_roads
    red_s = scen.timing.red_s

    try:
        p_hat = estimate_p(trace, scen.q_sat)
    except NoProbeExits:
        p_hat = 0.0
        warnings.append(f"p={p} rep={rep}: no probe exits, recording p_hat=0")
    lambda_hat = estimate_lambda(trace, p_hat) if p_hat > 0 else 0.0
    try:
        rho_hat = tuple(float(r) for r in estimate_turn_ratios(trace, d))
    except NoProbeExits:
        rho_hat = (float("nan"),) * d

    if oracle_params:
        p_use = p
        w_use = w_true
        lam_lanes = scen.lam * w_true.row_sums
    else:
        p_use = p_hat
        if p_hat > 0 and not any(np.isnan(rho_hat)):
            w_use = solve_assignment(scen.topology, rho_hat)
            lam_lanes = lambda_hat * w_use.row_sums
        else:
            w_use = w_true  # degenerate trace; rates below are all zero
            lam_lanes = np.zeros(n_lanes)

    mu_lanes = lam_lanes * red_s
    mu_max = float(np.max(mu_lanes)) if len(mu_lanes) else 0.0

    need_props = wanted & {"prop1", "prop2", "prop3"}
    if need_props:
        n_max0 = default_n_max(mu_max)
        prop1_means = tuple(prop1_pmf(mu, n_max0).mean() for mu in mu_lanes)
        thinned_means = tuple(_thinned_mean(mu, p_use, n_max0) for mu in mu_lanes)
    prop2_cache: dict = {}
    prop3_cache: dict = {}

    err_sums = {(est, i): 0.0 for est in wanted & set(QUEUE_ESTIMATORS) for i in range(n_lanes)}
    count_sums = {(est, i): 0.0 for est in wanted & set(COUNT_ESTIMATORS) for i in range(n_lanes)}
    used = 0
    excluded = 0
    inconsistent = 0
    zero_col = 0

    for cyc in trace.cycles:
        if cyc.overflow or cyc.carry_in > 0:
            excluded += 1
            continue
        used += 1
        truths = cyc.true_queues

        if "m-baseline" in wanted:
            for i, est in enumerate(baseline_m(cyc)):
                err_sums[("m-baseline", i)] += abs(est - truths[i])
        if "prop1" in wanted:
            for i in range(n_lanes):
                err_sums[("prop1", i)] += abs(prop1_means[i] - truths[i])
        if "prop2" in wanted:
            key = (cyc.m, cyc.x_p)
            if key not in prop2_cache:
                if cyc.m == 0 or cyc.x_p == 0:
                    prop2_cache[key] = prop1_means
                else:
                    params = StockParams(
                        lambdas=tuple(lam_lanes), r=red_s, p=p_use, m=cyc.m, x_p=cyc.x_p
                    )
                    try:
                        prop2_cache[key] = prop2_means(params)
                    except (DegenerateObservation, InconsistentObservation):
                        prop2_cache[key] = prop1_means
            for i, est in enumerate(prop2_cache[key]):
                err_sums[("prop2", i)] += abs(est - truths[i])
        if "prop3" in wanted or wanted & set(COUNT_ESTIMATORS):
            if oracle_params:
                counts = cyc.probe_queues
            elif p_use > 0:
                try:
                    counts = probe_counts_E1(cyc, w_use).counts
                except ZeroColumn:
                    counts = probe_counts_E0(cyc, n_lanes).counts
                    zero_col += 1
            else:
                counts = (0,) * n_lanes
        if "prop3" in wanted:
            for i in range(n_lanes):
                key3 = (i, cyc.m, counts[i])
                if key3 not in prop3_cache:
                    params = StockParams(
                        lambdas=tuple(lam_lanes), r=red_s, p=p_use, m=cyc.m,
                        x_p=cyc.x_p, probe_counts=tuple(counts),
                    )
                    try:
                        prop3_cache[key3] = prop3_expectation(prop3_pmf(i, params))
                    except InconsistentObservation:
                        prop3_cache[key3] = thinned_means[i]
                        inconsistent += 1
                err_sums[("prop3", i)] += abs(prop3_cache[key3] - truths[i])
        if "E0" in wanted:
            e0 = probe_counts_E0(cyc, n_lanes).counts
            for i in range(n_lanes):
                count_sums[("E0", i)] += abs(e0[i] - cyc.probe_queues[i])
        if "E1" in wanted:
            e1 = counts if not oracle_params else (
                probe_counts_E1(cyc, w_use).counts if p_use > 0 else (0,) * n_lanes
            )
            for i in range(n_lanes):
                count_sums[("E1", i)] += abs(e1[i] - cyc.probe_queues[i])

    if inconsistent:
        warnings.append(
            f"p={p} rep={rep}: {inconsistent} lane-cycles had m below the estimated "
            "probe count; used the thinned prior"
        )
    if zero_col:
        warnings.append(
            f"p={p} rep={rep}: {zero_col} cycles had a queued probe bound for a road "
            "with rho_hat=0; fell back to nominal-lane counts"
        )

    flow_errs = {}
    if "p-hat" in wanted:
        flow_errs["p-hat"] = (p_hat, abs(p_hat - p))
    if "lambda-hat" in wanted:
        flow_errs["lambda-hat"] = (lambda_hat, abs(lambda_hat - scen.lam))

    denom = max(used, 1)
    count_maes = {key: val / denom for key, val in count_sums.items()}
    queue_maes = {key: val / denom for key, val in err_sums.items()}
    return ReplicationResult(
        p_idx=p_idx,
        replication=rep,
        p_true=p,
        p_hat=p_hat,
        lambda_hat=lambda_hat,
        rho_hat=rho_hat,
        queue_maes=queue_maes,
        used_cycles=used,
        excluded_cycles=excluded,
        flow_errs=flow_errs,
        count_maes=count_maes,
        warnings=tuple(warnings),
    )


def _run_cell_args(args):
    spec, p_idx, rep, oracle = args
    try:
        return _run_cell(spec, p_idx, rep, oracle)
    except Exception as exc:
        raise ExperimentError(
            f"cell failed at p={spec.p_grid[p_idx]} replication={rep}: {exc}"
        ) from exc


def run_experiment(spec: ExperimentSpec, out_dir=None, oracle_params: bool = False,
                   n_workers: int | None = None) -> ExperimentResult:
    """Run the sweep; optionally write the CSV outputs into out_dir."""
    jobs = [(spec, p_idx, rep, oracle_params)
            for p_idx in range(len(spec.p_grid))
            for rep in range(spec.replications)]
    if n_workers is None:
        n_workers = min(len(jobs), os.cpu_count() or 1, 16)
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            cells = list(pool.map(_run_cell_args, jobs))
    else:
        cells = [_run_cell_args(job) for job in jobs]
    cells.sort(key=lambda c: (c.p_idx, c.replication))
    for cell in cells:
        for msg in cell.warnings:
            log.warning(msg)

    n_lanes = spec.scenario.topology.n_in_lanes
    rows = []
    for est in spec.estimators:
        if est in QUEUE_ESTIMATORS or est in COUNT_ESTIMATORS:
            source = "queue_maes" if est in QUEUE_ESTIMATORS else "count_maes"
            for i in range(n_lanes):
                for p_idx, p in enumerate(spec.p_grid):
                    vals = [getattr(c, source)[(est, i)]
                            for c in cells if c.p_idx == p_idx]
                    rows.append(MaeRow(est, _lane_label(i), p, float(np.mean(vals)),
                                       spec.replications, spec.horizon_s))
        elif est in FLOW_ESTIMATORS:
            for p_idx, p in enumerate(spec.p_grid):
                errs = [c.flow_errs[est][1] for c in cells if c.p_idx == p_idx]
                rows.append(MaeRow(est, "link", p, float(np.mean(errs)),
                                   spec.replications, spec.horizon_s))
    result = ExperimentResult(
        spec=spec, oracle_params=oracle_params,
        mae_table=MaeTable(tuple(rows)), cells=tuple(cells),
    )
    if out_dir is not None:
        result.write_csvs(out_dir)
    return result


def _fmt(val) -> str:
    if isinstance(val, float):
        return repr(float(val))  # np.float64 is a float subclass; force plain repr
    return str(val)


def _write_rows(path: Path, header, rows) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _write_all(result: ExperimentResult, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = result.spec
    n_lanes = spec.scenario.topology.n_in_lanes
    d = spec.scenario.topology.n_out_roads
    lanes = [_lane_label(i) for i in range(n_lanes)]
    written = []

    written.append(_write_rows(
        out_dir / "mae.csv",
        ["estimator", "lane", "p", "mae", "replications"],
        [(r.estimator, r.lane, r.p, r.mae, r.replications) for r in result.mae_table.rows],
    ))

    header = (["scenario", "p_true", "replication", "p_hat", "lambda_true", "lambda_hat"]
              + [f"rho_hat_{j + 1}" for j in range(d)]
              + [f"mae_E0_{ln}" for ln in lanes] + [f"mae_E1_{ln}" for ln in lanes]
              + ["excluded_cycles"])
    prows = []
    nan = float("nan")
    for c in result.cells:
        row = [spec.name, c.p_true, c.replication, c.p_hat, spec.scenario.lam, c.lambda_hat]
        row += list(c.rho_hat)
        row += [c.count_maes.get(("E0", i), nan) for i in range(n_lanes)]
        row += [c.count_maes.get(("E1", i), nan) for i in range(n_lanes)]
        row.append(c.excluded_cycles)
        prows.append(row)
    written.append(_write_rows(out_dir / "primary.csv", header, prows))

    def _fig_rows(estimators, lane_labels):
        return [(r.estimator, r.lane, r.p, r.mae, r.replications)
                for r in result.mae_table.rows
                if r.estimator in estimators and r.lane in lane_labels]

    flow = [e for e in spec.estimators if e in FLOW_ESTIMATORS]
    if flow:
        rows3 = []
        for est in flow:
            for p_idx, p in enumerate(spec.p_grid):
                vals = [c.flow_errs[est][0] for c in result.cells if c.p_idx == p_idx]
                errs = [c.flow_errs[est][1] for c in result.cells if c.p_idx == p_idx]
                rows3.append((est, "link", p, float(np.mean(vals)), float(np.mean(errs))))
        written.append(_write_rows(
            out_dir / "fig3.csv", ["estimator", "lane", "p", "value", "abs_err"], rows3))
    if any(e in COUNT_ESTIMATORS for e in spec.estimators):
        written.append(_write_rows(
            out_dir / "fig4.csv", ["estimator", "lane", "p", "mae", "replications"],
            _fig_rows(set(COUNT_ESTIMATORS), set(lanes))))
    if any(e in QUEUE_ESTIMATORS for e in spec.estimators):
        fname = "fig6.csv" if spec.name == "s2" else "fig5.csv"
        written.append(_write_rows(
            out_dir / fname, ["estimator", "lane", "p", "mae", "replications"],
            _fig_rows(set(QUEUE_ESTIMATORS), set(lanes))))
    return written


def write_trace_csv(trace: SimTrace, path) -> Path:
    """One row per cycle: queues, probe queues, m, x_p, overflow flag."""
    n_lanes = len(trace.cycles[0].true_queues) if trace.cycles else 3
    lanes = [_lane_label(i).upper() for i in range(n_lanes)]
    header = (["cycle"] + lanes + [f"{ln}_p" for ln in lanes] + ["m", "x_p", "overflow"])
    rows = []
    for cyc in trace.cycles:
        rows.append([cyc.cycle_index, *cyc.true_queues, *cyc.probe_queues,
                     cyc.m, cyc.x_p, int(cyc.overflow)])
    return _write_rows(Path(path), header, rows)


def write_exits_csv(trace: SimTrace, path) -> Path:
    """One row per probe exit: cycle, probe id, destination, exit time (3 dp)."""
    rows = []
    for cyc in trace.cycles:
        for ex in cyc.probe_exits:
            rows.append([cyc.cycle_index, ex.probe_id, ex.dest, f"{ex.t_e:.3f}"])
    return _write_rows(Path(path), ["cycle", "probe_id", "dest", "t_e"], rows)
