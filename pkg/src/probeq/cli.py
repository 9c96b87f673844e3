"""Command-line front end.

Subcommands:
  simulate    run one simulation and dump per-cycle trace + probe exits
  estimate    run one simulation and print the flow-parameter estimates
  experiment  full sweep (p grid x replications) with CSV outputs
  assignment  solve the lane-assignment QP for a config or a bare rho

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .assignment import (
    InfeasibleTopology,
    InvalidRatios,
    JunctionTopology,
    TurnRatios,
    solve_assignment,
)
from .config import ParseError, ValidationError, bundled_config_path, load_config
from .estimators import estimate_primary
from .harness import run_experiment, write_exits_csv, write_trace_csv
from .sim import run_simulation

__all__ = ["main"]


def _resolve_config(name: str):
    path = Path(name)
    if path.is_file():
        return path
    try:
        return bundled_config_path(name)
    except FileNotFoundError:
        raise ParseError(f"config {name!r}: no such file and no bundled config") from None


def _load(args):
    spec = load_config(_resolve_config(args.config))
    scenario = spec.scenario
    if getattr(args, "seed", None) is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    if getattr(args, "p", None) is not None:
        scenario = dataclasses.replace(scenario, p=args.p)
    spec = dataclasses.replace(spec, scenario=scenario)
    if getattr(args, "p_grid", None):
        grid = tuple(float(tok) for tok in args.p_grid.replace(",", " ").split())
        spec = dataclasses.replace(spec, p_grid=grid)
    if getattr(args, "replications", None) is not None:
        spec = dataclasses.replace(spec, replications=args.replications)
    return spec


def _cmd_simulate(args) -> int:
    spec = _load(args)
    trace = run_simulation(spec.scenario)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace_path = write_trace_csv(trace, out / f"trace_{spec.name}.csv")
    exits_path = write_exits_csv(trace, out / f"exits_{spec.name}.csv")
    overflows = sum(1 for c in trace.cycles if c.overflow)
    print(f"cycles={len(trace.cycles)} arrivals={trace.total_arrivals} "
          f"departures={trace.total_departures} in_system={trace.final_in_system} "
          f"overflow_cycles={overflows}")
    print(f"wrote {trace_path}")
    print(f"wrote {exits_path}")
    return 0


def _cmd_estimate(args) -> int:
    spec = _load(args)
    trace = run_simulation(spec.scenario)
    est = estimate_primary(trace)
    print(f"p_true={spec.scenario.p!r}")
    print(f"p_hat={est.p_hat!r}")
    print(f"lambda_true={spec.scenario.lam!r}")
    print(f"lambda_hat={est.lambda_hat!r}")
    print("rho_hat=" + ",".join(repr(r) for r in est.rho_hat))
    print("lane_rates_hat=" + ",".join(repr(r) for r in est.lane_rates_hat))
    return 0


def _cmd_experiment(args) -> int:
    spec = _load(args)
    result = run_experiment(
        spec, out_dir=args.out_dir, oracle_params=args.oracle_params,
        n_workers=args.workers,
    )
    print(f"wrote {len(result.mae_table.rows)} MAE rows across "
          f"{len(result.cells)} cells to {args.out_dir}")
    return 0


def _cmd_assignment(args) -> int:
    if args.rho:
        rho = TurnRatios(tuple(float(tok) for tok in args.rho.replace(",", " ").split()))
        topology = JunctionTopology.standard3() if len(rho.rho) == 3 else \
            JunctionTopology(len(rho.rho), len(rho.rho))
    elif args.config:
        spec = load_config(_resolve_config(args.config))
        rho, topology = spec.scenario.rho, spec.scenario.topology
    else:
        raise ParseError("assignment needs --config or --rho")
    w = solve_assignment(topology, rho)
    for i, row in enumerate(w.w):
        print(f"w[{chr(ord('a') + i)}] = " + ", ".join(repr(float(v)) for v in row))
    print("row_sums = " + ", ".join(repr(float(v)) for v in w.row_sums))
    print("col_sums = " + ", ".join(repr(float(v)) for v in w.col_sums))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="probeq",
        description="Probe-vehicle queue estimation at a signalized junction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp, with_p=False):
        sp.add_argument("--config", required=True,
                        help="config file path or bundled name (s1, s2, fig3)")
        sp.add_argument("--seed", type=int, default=None, help="override master seed")
        if with_p:
            sp.add_argument("--p", type=float, default=None,
                            help="penetration ratio for this run (default: first of p_grid)")

    sp = sub.add_parser("simulate", help="run one simulation, dump trace CSVs")
    add_common(sp, with_p=True)
    sp.add_argument("--out-dir", default=".", help="directory for output CSVs")
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("estimate", help="run one simulation, print flow estimates")
    add_common(sp, with_p=True)
    sp.set_defaults(func=_cmd_estimate)

    sp = sub.add_parser("experiment", help="full sweep with CSV outputs")
    add_common(sp)
    sp.add_argument("--out-dir", default=".", help="directory for output CSVs")
    sp.add_argument("--p-grid", default=None, help="comma-separated penetration ratios")
    sp.add_argument("--replications", type=int, default=None)
    sp.add_argument("--oracle-params", action="store_true",
                    help="evaluate the queue posteriors with true parameters "
                         "instead of estimates")
    sp.add_argument("--workers", type=int, default=None, help="process-pool size")
    sp.set_defaults(func=_cmd_experiment)

    sp = sub.add_parser("assignment", help="solve the lane-assignment QP")
    sp.add_argument("--config", default=None,
                    help="config file path or bundled name (s1, s2, fig3)")
    sp.add_argument("--rho", default=None, help="comma-separated turn ratios")
    sp.set_defaults(func=_cmd_assignment)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError, InvalidRatios, InfeasibleTopology,
            FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # anything else is a runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
