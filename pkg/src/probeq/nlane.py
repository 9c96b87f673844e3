"""Extension of the 3-lane machinery to approaches with n >= 3 lanes.

The n-lane approach is covered by the n - 2 windows of three consecutive
lanes.  Each window is a self-contained 3-lane problem (its own m, x_p and
per-lane data), solved with the unchanged 3-lane estimators; a physical
lane's estimate is the plain average over every window containing it.  With
n = 3 there is a single window and the pipeline degenerates to the 3-lane
one exactly, down to the floating-point bits.
"""
from __future__ import annotations

import dataclasses
from typing import Callable, Mapping, Sequence

from .sim import CycleObservation

__all__ = [
    "TooFewLanes",
    "MissingWindow",
    "enumerate_windows",
    "window_observation",
    "estimate_nlane",
    "nlane_pipeline",
]


class TooFewLanes(ValueError):
    """Windowing needs at least three lanes."""


class MissingWindow(KeyError):
    """A lane's average was requested without all of its windows present."""


def enumerate_windows(n: int) -> tuple[tuple[int, int, int], ...]:
    """All (i, i+1, i+2) windows, left to right."""
    if n < 3:
        raise TooFewLanes(f"need at least 3 lanes, got {n}")
    return tuple((i, i + 1, i + 2) for i in range(n - 2))


def window_observation(cycle: CycleObservation, window: Sequence[int]) -> CycleObservation:
    """Restrict a cycle record to one window's three lanes.

    Lane indices are remapped to 0..2; m and x_p are recomputed from the
    window's own probes.  For the full window (0, 1, 2) of a 3-lane record
    this is the identity.
    """
    w = tuple(window)
    rows = tuple(cycle.last_probe_rows[i] for i in w)
    m = max(rows)
    kept = [(w.index(lane), dest)
            for lane, dest in zip(cycle.queued_probe_lanes, cycle.queued_probe_dests)
            if lane in w]
    return dataclasses.replace(
        cycle,
        true_queues=tuple(cycle.true_queues[i] for i in w),
        probe_queues=tuple(cycle.probe_queues[i] for i in w),
        m=m,
        last_probe_lane=rows.index(m) if m > 0 else None,
        x_p=sum(cycle.probe_queues[i] for i in w),
        last_probe_rows=rows,
        queued_probe_lanes=tuple(local for local, _ in kept),
        queued_probe_dests=tuple(dest for _, dest in kept),
    )


def estimate_nlane(window_estimates: Mapping[tuple[int, int, int], Sequence[float]],
                   n: int) -> tuple[float, ...]:
    """Average per-window lane estimates back onto the n physical lanes."""
    windows = enumerate_windows(n)
    sums = [0.0] * n
    hits = [0] * n
    for win in windows:
        if win not in window_estimates:
            raise MissingWindow(f"window {win} missing from estimates")
        vals = window_estimates[win]
        if len(vals) != 3:
            raise ValueError(f"window {win} must carry exactly 3 lane values")
        for local, lane in enumerate(win):
            sums[lane] += float(vals[local])
            hits[lane] += 1
    return tuple(s / h for s, h in zip(sums, hits))


def estimator_for_window(estimator: Callable[[CycleObservation, int], float],
                         cycle: CycleObservation,
                         window: Sequence[int]) -> tuple[float, float, float]:
    """Run a (cycle, local lane) -> value estimator on one window."""
    local_cycle = window_observation(cycle, window)
    return tuple(estimator(local_cycle, k) for k in range(3))


def nlane_pipeline(cycle: CycleObservation, n: int,
                   estimator: Callable[[CycleObservation, int], float]) -> tuple[float, ...]:
    """Window the cycle, estimate each window, average per physical lane."""
    estimates = {win: estimator_for_window(estimator, cycle, win)
                 for win in enumerate_windows(n)}
    return estimate_nlane(estimates, n)
