"""Discrete-event simulation of one signalized 3-lane approach.

Vehicles arrive on the link as a Poisson process of rate lambda, pick a
(lane, destination) pair from the assignment matrix W, and are probes with
probability p.  During red they stack up per lane in arrival order; at the
end of red the per-cycle observation is captured.  During green each
OUTGOING road serves its queued vehicles in first-in-first-out order at the
saturation rate q_sat (the saturation rate is a property of the receiving
road: queued vehicles from the three lanes merge in queue-position order),
while green arrivals join behind or pass through an empty road unharmed.

Whatever green could not serve carries over as a residual queue and flags
the cycle as overflowed; downstream accuracy statistics exclude such cycles
and their successors (the estimators assume the undersaturated regime).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .assignment import (
    AssignmentMatrix,
    JunctionTopology,
    TurnRatios,
    solve_assignment,
)

__all__ = [
    "SignalTiming",
    "ScenarioConfig",
    "CycleObservation",
    "ProbeExit",
    "SimTrace",
    "sample_vehicle",
    "discharge",
    "run_simulation",
]


@dataclass(frozen=True)
class SignalTiming:
    red_s: float
    green_s: float

    def __post_init__(self):
        if self.red_s <= 0 or self.green_s <= 0:
            raise ValueError("red and green durations must be positive")

    @property
    def cycle_s(self) -> float:
        return self.red_s + self.green_s


@dataclass(frozen=True)
class ScenarioConfig:
    """One approach's generative parameters for a simulation run."""

    topology: JunctionTopology
    rho: TurnRatios
    lam: float
    p: float
    q_sat: float
    timing: SignalTiming
    horizon_s: float
    seed: object = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p={self.p} outside [0, 1]")
        if self.lam < 0:
            raise ValueError(f"lambda={self.lam} negative")
        if self.q_sat <= 0:
            raise ValueError(f"q_sat={self.q_sat} must be positive")
        if self.horizon_s <= 0:
            raise ValueError("horizon must be positive")

    def solve_w(self) -> AssignmentMatrix:
        return solve_assignment(self.topology, self.rho)

    def is_saturated(self, w: AssignmentMatrix | None = None) -> bool:
        """True when peak per-lane demand can outrun a green phase."""
        w = w if w is not None else self.solve_w()
        peak = self.lam * self.timing.cycle_s * float(np.max(w.row_sums))
        return peak >= self.q_sat * self.timing.green_s


class Vehicle(NamedTuple):
    vid: int
    lane: int
    dest: int
    probe: bool


class ProbeExit(NamedTuple):
    probe_id: int
    dest: int
    t_e: float
    queued: bool  # member of the end-of-red cohort (vs a green arrival)


@dataclass(frozen=True)
class CycleObservation:
    """Everything measurable in one cycle.

    m is the deepest per-lane last-probe position: each lane's last queued
    probe has a 1-based row index from the stop line, and m is the maximum
    of those (0 when no probe is queued).  last_probe_lane is the lane
    attaining it (first of a..c on ties, None when m = 0).
    """

    cycle_index: int
    true_queues: tuple[int, int, int]
    probe_queues: tuple[int, int, int]
    m: int
    last_probe_lane: int | None
    x_p: int
    probe_exits: tuple[ProbeExit, ...]
    probe_arrivals_in_red: int
    overflow: bool
    # plumbing used by the estimators, not part of the observable core
    last_probe_rows: tuple[int, int, int] = (0, 0, 0)
    queued_probe_lanes: tuple[int, ...] = ()
    queued_probe_dests: tuple[int, ...] = ()
    carry_in: int = 0


@dataclass(frozen=True)
class SimTrace:
    config: ScenarioConfig
    w: AssignmentMatrix
    cycles: tuple[CycleObservation, ...]
    total_arrivals: int = 0
    total_departures: int = 0
    final_in_system: int = 0


def sample_vehicle(rng: np.random.Generator, w, p: float, size: int | None = None):
    """Draw (destination, lane, is_probe) from the joint law W x Bernoulli(p).

    size=None gives one scalar triple; an integer gives three arrays.
    """
    mat = w.w if isinstance(w, AssignmentMatrix) else np.asarray(w, dtype=float)
    n, d = mat.shape
    flat = mat.ravel()
    flat = flat / flat.sum()
    k = rng.choice(n * d, size=size, p=flat)
    lane, dest = k // d, k % d
    probe = rng.random(size) < p
    if size is None:
        return int(dest), int(lane), bool(probe)
    return dest, lane, probe


def discharge(queue, q_sat: float, green_s: float, arrivals=()):
    """Serve one road's queue at rate q_sat for green_s seconds.

    queue holds the vehicles present at green start (k-th exits at
    k/q_sat); arrivals is an iterable of (offset, vehicle) in time order,
    joining behind or passing through an empty road at their offset.
    Returns (exits, residual) with exits as (vehicle, exit_time) pairs.
    """
    if q_sat <= 0:
        raise ValueError("q_sat must be positive")
    headway = 1.0 / q_sat
    exits, residual = [], []
    prev = 0.0
    blocked = False
    stream = [(0.0, veh, True) for veh in queue]
    stream += [(off, veh, False) for off, veh in arrivals]
    stream.sort(key=lambda rec: (not rec[2], rec[0]))  # cohort first, then by offset
    for off, veh, queued in stream:
        if blocked:
            residual.append(veh)
            continue
        t = prev + headway if queued or prev > off else off
        if t <= green_s + 1e-9:
            exits.append((veh, t))
            prev = t
        else:
            residual.append(veh)
            blocked = True
    return exits, residual


def run_simulation(config: ScenarioConfig, w: AssignmentMatrix | None = None,
                   green_arrivals: bool = True) -> SimTrace:
    """Simulate floor(horizon / cycle) cycles; reproducible from the seed."""
    w = w if w is not None else config.solve_w()
    mat = w.w
    n_lanes, d = mat.shape
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    timing = config.timing
    n_cycles = int(config.horizon_s // timing.cycle_s)
    lam, p, q_sat = config.lam, config.p, config.q_sat

    next_vid = 0
    residual_by_lane: list[list[Vehicle]] = [[] for _ in range(n_lanes)]
    total_arrivals = 0
    total_departures = 0
    cycles = []

    for ci in range(n_cycles):
        carry_in = sum(len(q) for q in residual_by_lane)
        lanes_q = residual_by_lane
        residual_by_lane = [[] for _ in range(n_lanes)]

        n_red = rng.poisson(lam * timing.red_s)
        dest, lane, probe = sample_vehicle(rng, w, p, size=n_red) if n_red else (
            np.empty(0, int), np.empty(0, int), np.empty(0, bool))
        probe_arrivals_in_red = int(probe.sum()) if n_red else 0
        for i in range(n_red):
            lanes_q[lane[i]].append(Vehicle(next_vid, int(lane[i]), int(dest[i]), bool(probe[i])))
            next_vid += 1
        total_arrivals += n_red

        # end-of-red snapshot
        true_queues = tuple(len(q) for q in lanes_q)
        probe_rows = [0] * n_lanes
        probe_queues = [0] * n_lanes
        q_lanes, q_dests = [], []
        for i, q in enumerate(lanes_q):
            for row, veh in enumerate(q, start=1):
                if veh.probe:
                    probe_rows[i] = row
                    probe_queues[i] += 1
        # queued probes in cross-lane (row, lane) order for the estimators
        for row, i, veh in sorted(
            (row, i, veh)
            for i, q in enumerate(lanes_q)
            for row, veh in enumerate(q, start=1)
            if veh.probe
        ):
            q_lanes.append(i)
            q_dests.append(veh.dest)
        m = max(probe_rows)
        last_probe_lane = probe_rows.index(m) if m > 0 else None
        x_p = sum(probe_queues)

        # green phase: per-road FIFO service at q_sat
        n_green = rng.poisson(lam * timing.green_s) if green_arrivals else 0
        if n_green:
            offs = np.sort(rng.uniform(0.0, timing.green_s, size=n_green))
            gdest, glane, gprobe = sample_vehicle(rng, w, p, size=n_green)
        total_arrivals += n_green

        cohort = sorted(
            ((row, i, veh) for i, q in enumerate(lanes_q) for row, veh in enumerate(q, start=1)),
            key=lambda rec: (rec[0], rec[1]),
        )
        exits_all = []
        overflow = False
        for j in range(d):
            road_queue = [veh for _, _, veh in cohort if veh.dest == j]
            road_arr = []
            if n_green:
                for k in np.nonzero(gdest == j)[0]:
                    road_arr.append(
                        (float(offs[k]), Vehicle(next_vid + int(k), int(glane[k]), j, bool(gprobe[k])))
                    )
            exits, residual = discharge(road_queue, q_sat, timing.green_s, road_arr)
            exits_all.extend(exits)
            if residual:
                overflow = True
                for veh in residual:
                    residual_by_lane[veh.lane].append(veh)
        next_vid += n_green
        total_departures += len(exits_all)
        # keep lane order stable for the next red: old cohort first by id
        for q in residual_by_lane:
            q.sort(key=lambda veh: veh.vid)

        cohort_ids = {veh.vid for _, _, veh in cohort}
        probe_exits = tuple(
            ProbeExit(veh.vid, veh.dest, float(t), veh.vid in cohort_ids)
            for veh, t in sorted(exits_all, key=lambda rec: (rec[1], rec[0].vid))
            if veh.probe
        )
        cycles.append(
            CycleObservation(
                cycle_index=ci,
                true_queues=true_queues,
                probe_queues=tuple(probe_queues),
                m=m,
                last_probe_lane=last_probe_lane,
                x_p=x_p,
                probe_exits=probe_exits,
                probe_arrivals_in_red=probe_arrivals_in_red,
                overflow=overflow,
                last_probe_rows=tuple(probe_rows),
                queued_probe_lanes=tuple(q_lanes),
                queued_probe_dests=tuple(q_dests),
                carry_in=carry_in,
            )
        )

    final_in_system = sum(len(q) for q in residual_by_lane)
    return SimTrace(
        config=config,
        w=w,
        cycles=tuple(cycles),
        total_arrivals=total_arrivals,
        total_departures=total_departures,
        final_in_system=final_in_system,
    )
