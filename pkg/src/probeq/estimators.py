"""Point estimators that reduce a simulated trace to model parameters.

All estimators consume only what a probe fleet can report: queued probe
counts and positions, probe destinations, probe exit times.  Ground-truth
fields on the cycle records are never read here; they exist for scoring.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .assignment import AssignmentMatrix, solve_assignment
from .sim import CycleObservation, SimTrace

__all__ = [
    "NoProbeExits",
    "ZeroPenetration",
    "ZeroColumn",
    "ProbeCountEstimate",
    "PrimaryEstimates",
    "estimate_p",
    "estimate_lambda",
    "estimate_turn_ratios",
    "probe_counts_E0",
    "probe_counts_E1",
    "estimate_primary",
]


class NoProbeExits(ValueError):
    """No probe ever crossed the stop line, so flow-based ratios are undefined."""


class ZeroPenetration(ValueError):
    """A rate estimate was requested with p = 0."""


class ZeroColumn(ValueError):
    """A probe exited to a road whose turn ratio is zero."""


@dataclass(frozen=True)
class ProbeCountEstimate:
    """Per-lane queued-probe counts: fractional scores and their rounding."""

    raw: tuple[float, ...]
    counts: tuple[int, ...]


@dataclass(frozen=True)
class PrimaryEstimates:
    p_hat: float
    lambda_hat: float
    rho_hat: tuple[float, ...]
    lane_rates_hat: tuple[float, ...]


def _cycles(trace) -> Sequence[CycleObservation]:
    return trace.cycles if isinstance(trace, SimTrace) else trace


def estimate_p(trace, q_sat: float) -> float:
    """Penetration ratio from queued-probe counts vs implied served flow.

    Each cycle contributes x_p probes to the numerator and, per road, the
    exit time of the last queued probe to the denominator: a road serving
    until time t has released about t * q_sat vehicles, of which the probes
    are a p-fraction.  Sums are accumulated across cycles before dividing
    so probe-free cycles cost nothing; the ratio is clamped to [0, 1].
    """
    if q_sat <= 0:
        raise ValueError("q_sat must be positive")
    num = 0.0
    t_sum = 0.0
    for cyc in _cycles(trace):
        num += cyc.x_p
        last: dict[int, float] = {}
        for ex in cyc.probe_exits:
            if ex.queued and ex.t_e > last.get(ex.dest, 0.0):
                last[ex.dest] = ex.t_e
        t_sum += sum(last.values())
    if t_sum <= 0.0:
        raise NoProbeExits("no queued probe exits in any cycle")
    return min(1.0, num / (q_sat * t_sum))


def estimate_lambda(trace, p: float, red_s: float | None = None) -> float:
    """Link arrival rate from probe arrivals during red, inflated by 1/p.

    Counts every probe arrival on the link during red, queued or not.
    red_s may be omitted when a full trace (with its timing) is passed.
    """
    if p <= 0.0:
        raise ZeroPenetration("cannot scale probe arrivals with p = 0")
    if red_s is None:
        if not isinstance(trace, SimTrace):
            raise ValueError("red_s is required when passing bare cycles")
        red_s = trace.config.timing.red_s
    if red_s <= 0:
        raise ValueError("red duration must be positive")
    cycles = _cycles(trace)
    if not len(cycles):
        raise ValueError("need at least one cycle")
    total = sum(cyc.probe_arrivals_in_red for cyc in cycles)
    return total / (p * red_s * len(cycles))


def estimate_turn_ratios(trace, n_roads: int = 3) -> np.ndarray:
    """Empirical destination shares over every probe exit in the trace."""
    counts = np.zeros(n_roads, dtype=float)
    for cyc in _cycles(trace):
        for ex in cyc.probe_exits:
            counts[ex.dest] += 1.0
    total = counts.sum()
    if total == 0:
        raise NoProbeExits("no probe exits in any cycle")
    return counts / total


def probe_counts_E0(cycle: CycleObservation, n_lanes: int = 3) -> ProbeCountEstimate:
    """Assign each queued probe to its destination's nominal lane.

    Road j is fed primarily by lane j (left turns from the leftmost lane,
    and so on), so the destination doubles as a lane guess.  Exact whenever
    the assignment matrix is diagonal.
    """
    counts = [0] * n_lanes
    for dest in cycle.queued_probe_dests:
        if not 0 <= dest < n_lanes:
            raise ValueError(f"destination {dest} has no nominal lane")
        counts[dest] += 1
    return ProbeCountEstimate(raw=tuple(float(c) for c in counts), counts=tuple(counts))


def probe_counts_E1(cycle: CycleObservation, w, rho=None) -> ProbeCountEstimate:
    """Split each queued probe across lanes by the posterior P(lane | dest).

    A probe bound for road j came from lane i with probability w_ij / rho_j,
    with rho_j the j-th column sum of W unless given explicitly; summing
    those vectors over the queued probes gives fractional per-lane counts,
    rounded half away from zero to integers.
    """
    mat = w.w if isinstance(w, AssignmentMatrix) else np.asarray(w, dtype=float)
    if rho is None:
        col = mat.sum(axis=0)
    else:
        col = np.asarray(rho.rho if hasattr(rho, "rho") else rho, dtype=float)
    raw = np.zeros(mat.shape[0], dtype=float)
    for dest in cycle.queued_probe_dests:
        if col[dest] <= 0.0:
            raise ZeroColumn(f"probe exited to road {dest} with zero turn ratio")
        raw += mat[:, dest] / col[dest]
    counts = np.floor(raw + 0.5).astype(int)
    return ProbeCountEstimate(raw=tuple(float(v) for v in raw), counts=tuple(int(c) for c in counts))


def estimate_primary(trace: SimTrace, q_sat: float | None = None) -> PrimaryEstimates:
    """Chain the flow estimators: p, then lambda scaled by it, then the
    turn ratios and the per-lane rates implied by refitting W to them."""
    cfg = trace.config
    q_sat = cfg.q_sat if q_sat is None else q_sat
    p_hat = estimate_p(trace, q_sat)
    lam_hat = estimate_lambda(trace, p_hat)
    rho_hat = estimate_turn_ratios(trace, cfg.topology.n_out_roads)
    w_hat = solve_assignment(cfg.topology, rho_hat)
    lane_rates = lam_hat * w_hat.row_sums
    return PrimaryEstimates(
        p_hat=p_hat,
        lambda_hat=lam_hat,
        rho_hat=tuple(float(r) for r in rho_hat),
        lane_rates_hat=tuple(float(r) for r in lane_rates),
    )
