"""Lane-assignment matrix estimation.

Recovers the joint lane/destination probability matrix W (n_lanes x d) from
the observed turn ratios rho_j and the junction topology.  W is the minimizer
of

    || row_sums(W) - (1/n, ..., 1/n) ||^2  +  eps ||W||^2

subject to column sums equal to rho, forbidden movements fixed at zero, and
0 <= w_ij <= 1.  The tiny ridge term makes the optimum unique (the row-sum
objective alone is indifferent to how a lane splits its mass across permitted
destinations); eps = 1e-10 leaves the printed-table values untouched at 1e-7.

Solved with a primal active-set method on the box constraints; each
equality-constrained subproblem is solved exactly via a null-space basis of
the column-sum constraints.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "InfeasibleTopology",
    "InvalidRatios",
    "NegativeRate",
    "JunctionTopology",
    "TurnRatios",
    "AssignmentMatrix",
    "solve_assignment",
    "lane_weights",
    "lane_arrival_rates",
]

_EPS_RIDGE = 1e-10
_FEAS_TOL = 1e-9
_KKT_TOL = 1e-8


class InfeasibleTopology(ValueError):
    """Some destination with rho_j > 0 has no permitted origin lane."""


class InvalidRatios(ValueError):
    """Turn ratios are not a probability vector."""


class NegativeRate(ValueError):
    """Arrival rate must be nonnegative."""


@dataclass(frozen=True)
class JunctionTopology:
    """Permitted (lane, road) movements of one approach.

    forbidden lists the (lane i, road j) pairs that are physically
    impossible; everything else is allowed.
    """

    n_in_lanes: int = 3
    n_out_roads: int = 3
    forbidden: frozenset = frozenset()

    def __post_init__(self):
        if self.n_in_lanes < 1 or self.n_out_roads < 1:
            raise ValueError("need at least one lane and one road")
        for i, j in self.forbidden:
            if not (0 <= i < self.n_in_lanes and 0 <= j < self.n_out_roads):
                raise ValueError(f"forbidden pair {(i, j)} out of bounds")

    def permitted_mask(self) -> np.ndarray:
        mask = np.ones((self.n_in_lanes, self.n_out_roads), dtype=bool)
        for i, j in self.forbidden:
            mask[i, j] = False
        return mask

    @classmethod
    def standard3(cls) -> "JunctionTopology":
        """Left turns only from lane a, right only from lane c, straight
        from any lane; roads ordered (left, straight, right)."""
        return cls(3, 3, frozenset({(1, 0), (2, 0), (0, 2), (1, 2)}))


@dataclass(frozen=True)
class TurnRatios:
    """Fractions of traffic leaving via each outgoing road."""

    rho: tuple

    def __post_init__(self):
        rho = tuple(float(x) for x in self.rho)
        object.__setattr__(self, "rho", rho)
        if any(r < 0.0 or r > 1.0 for r in rho):
            raise InvalidRatios(f"turn ratios outside [0,1]: {rho}")
        if abs(sum(rho) - 1.0) > _FEAS_TOL:
            raise InvalidRatios(f"turn ratios sum to {sum(rho)!r}, not 1")


@dataclass(frozen=True)
class AssignmentMatrix:
    """Joint lane/destination probabilities; rows are lanes, columns roads."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def row_sums(self) -> np.ndarray:
        return self.w.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.w.sum(axis=0)


def _as_ratios(rho) -> np.ndarray:
    if isinstance(rho, TurnRatios):
        return np.asarray(rho.rho, dtype=float)
    return np.asarray(TurnRatios(tuple(rho)).rho, dtype=float)


def _null_space(mat: np.ndarray) -> np.ndarray:
    if mat.size == 0:
        return np.eye(mat.shape[1])
    u, s, vt = np.linalg.svd(mat, full_matrices=True)
    rank = int(np.sum(s > 1e-12 * max(s[0], 1.0))) if s.size else 0
    return vt[rank:].T


def _eq_solve(lmat, v, cmat, r, pinned, pinned_vals, eps):
    """Minimize ||L x - v||^2 + eps||x||^2 s.t. C x = r and x[pinned] fixed."""
    k = lmat.shape[1]
    free = ~pinned
    x = np.zeros(k)
    x[pinned] = pinned_vals[pinned]
    if not free.any():
        return x
    rhs = r - cmat[:, pinned] @ x[pinned]
    cf = cmat[:, free]
    # rows whose free support vanished must already be satisfied
    live = np.abs(cf).sum(axis=1) > 0
    if np.any(~live & (np.abs(rhs) > _FEAS_TOL)):
        raise RuntimeError("active bounds leave a column sum unsatisfiable")
    cf, rhs = cf[live], rhs[live]
    x0, *_ = np.linalg.lstsq(cf, rhs, rcond=None)
    z = _null_space(cf)
    lf = lmat[:, free]
    stacked = np.vstack([lf @ z, np.sqrt(eps) * z])
    target = np.concatenate([v - lmat[:, pinned] @ x[pinned] - lf @ x0, -np.sqrt(eps) * x0])
    y, *_ = np.linalg.lstsq(stacked, target, rcond=None)
    x[free] = x0 + z @ y
    return x


def solve_assignment(topology: JunctionTopology, rho) -> AssignmentMatrix:
    """Solve the constrained QP for W; deterministic, KKT-checked.

    Raises InfeasibleTopology when some rho_j > 0 has every lane forbidden,
    InvalidRatios for a malformed rho.
    """
    ratios = _as_ratios(rho)
    n, d = topology.n_in_lanes, topology.n_out_roads
    if ratios.shape != (d,):
        raise InvalidRatios(f"expected {d} ratios, got {ratios.shape[0]}")
    mask = topology.permitted_mask()
    for j in range(d):
        if ratios[j] > 0.0 and not mask[:, j].any():
            raise InfeasibleTopology(f"road {j} has rho={ratios[j]} but no permitted lane")
    # zero-ratio columns are forced to zero entirely
    mask = mask & (ratios[None, :] > 0.0)

    lanes, roads = np.nonzero(mask)
    k = lanes.size
    w = np.zeros((n, d))
    if k == 0:
        return AssignmentMatrix(w)

    # L x = row sums, C x = column sums over the free coordinates
    lmat = np.zeros((n, k))
    lmat[lanes, np.arange(k)] = 1.0
    cmat = np.zeros((d, k))
    cmat[roads, np.arange(k)] = 1.0
    v = np.full(n, 1.0 / n)
    r = ratios.copy()

    # feasible start: split each column equally among its permitted lanes
    x = np.empty(k)
    for j in range(d):
        members = roads == j
        if members.any():
            x[members] = ratios[j] / members.sum()

    pinned = np.zeros(k, dtype=bool)
    pinned_vals = np.zeros(k)

    for _ in range(100 * (k + 1)):
        x_star = _eq_solve(lmat, v, cmat, r, pinned, pinned_vals, _EPS_RIDGE)
        step = x_star - x
        if np.max(np.abs(step)) > 1e-13:
            # longest step keeping 0 <= x <= 1; pin the blocking coordinate
            alpha = 1.0
            block, bval = -1, 0.0
            for i in range(k):
                if pinned[i] or abs(step[i]) < 1e-15:
                    continue
                bound = 1.0 if step[i] > 0 else 0.0
                a_i = (bound - x[i]) / step[i]
                if a_i < alpha - 1e-15:
                    alpha, block, bval = max(a_i, 0.0), i, bound
            x = x + alpha * step
            if block >= 0:
                pinned[block] = True
                pinned_vals[block] = bval
                x[block] = bval
                continue
        # subproblem optimum reached; verify bound multipliers
        g = 2.0 * (lmat.T @ (lmat @ x - v)) + 2.0 * _EPS_RIDGE * x
        free = ~pinned
        nu = np.zeros(d)
        if free.any():
            nu, *_ = np.linalg.lstsq(cmat[:, free].T, -g[free], rcond=None)
        lam = g + cmat.T @ nu
        worst, worst_i = -_KKT_TOL, -1
        for i in np.nonzero(pinned)[0]:
            mult = lam[i] if pinned_vals[i] == 0.0 else -lam[i]
            if mult < worst:
                worst, worst_i = mult, i
        if worst_i < 0:
            break
        pinned[worst_i] = False
    else:
        raise RuntimeError("active-set iteration failed to converge")

    w[lanes, roads] = np.clip(x, 0.0, 1.0)
    result = AssignmentMatrix(w)
    _check_kkt(result, topology, ratios)
    return result


def _check_kkt(result: AssignmentMatrix, topology: JunctionTopology, ratios: np.ndarray):
    w = result.w
    if np.any(w < -_FEAS_TOL) or np.any(w > 1.0 + _FEAS_TOL):
        raise RuntimeError("solution violates box constraints")
    col_err = np.max(np.abs(result.col_sums - ratios))
    if col_err > 1e-6:
        raise RuntimeError(f"column sums off by {col_err}")
    for i, j in topology.forbidden:
        if w[i, j] != 0.0:
            raise RuntimeError("forbidden entry nonzero")


def lane_weights(w) -> np.ndarray:
    """Row sums w_i: the probability that a vehicle uses lane i."""
    mat = w.w if isinstance(w, AssignmentMatrix) else np.asarray(w, dtype=float)
    return mat.sum(axis=1)


def lane_arrival_rates(w, lam: float) -> np.ndarray:
    """Per-lane arrival rates lambda_i = lambda * w_i."""
    if lam < 0:
        raise NegativeRate(f"lambda={lam} is negative")
    return lane_weights(w) * lam
