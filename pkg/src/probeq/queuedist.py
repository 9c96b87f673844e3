"""Queue-length probability distributions for a 3-lane signalized approach.

Three nested models of the end-of-red queue (A, B, C):

* ``prop1_pmf`` -- the prior: independent Poisson queues with stocks
  mu_i = lambda_i * r_i.
* ``prop2_joint`` -- the joint law of (A, B, C) conditioned on the two
  cross-lane probe observables: the last-probe position m and the total
  queued probe count x_p.
* ``prop3_pmf`` -- a per-lane law conditioned on that lane's estimated
  probe count and on m, mixing over which lane holds the last probe.

All pmfs are truncated to [0, N_max] with an explicit tail-mass bound and
renormalized.  Weights are assembled from independently max-scaled factors
so no intermediate can overflow regardless of mu, m or x_p.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend

__all__ = [
    "DegenerateObservation",
    "InconsistentObservation",
    "QueuePmf",
    "JointQueuePmf",
    "StockParams",
    "binom",
    "default_n_max",
    "prop1_pmf",
    "prop2_joint",
    "prop2_expectations",
    "prop2_means",
    "S_term",
    "prop3_pmf",
    "prop3_expectation",
]


class DegenerateObservation(ValueError):
    """No usable probe observation (m = 0 or x_p = 0); use the prior."""


class InconsistentObservation(ValueError):
    """Observation leaves an empty support (e.g. m < a_p_hat)."""


def binom(n: int, k: int) -> float:
    """C(n, k) with the extended convention: 0 outside 0 <= k <= n.

    Exact integer arithmetic up to n = 60, log-gamma above (values there
    exceed 2**53 anyway, so the float rounding is already unavoidable).
    """
    if k < 0 or n < 0 or k > n:
        return 0.0
    if n <= 60:
        return float(math.comb(n, k))
    return math.exp(
        math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
    )


def default_n_max(mu_max: float, m: int = 0, x_p: int = 0) -> int:
    """Truncation bound: 10-sigma Poisson tail plus the combinatorial offsets."""
    return int(math.ceil(mu_max + 10.0 * math.sqrt(mu_max + 1.0))) + int(m) + int(x_p) + 20


def _log_factorials(n_max: int) -> np.ndarray:
    # log(n!) for n = 0..n_max via cumulative sum, exact enough to 1e-13 rel.
    out = np.zeros(n_max + 1)
    if n_max >= 2:
        out[1:] = np.cumsum(np.log(np.arange(1, n_max + 1)))
    return out


def _log_poisson(mu: float, n_max: int) -> np.ndarray:
    """log pi(n, mu) for n = 0..n_max; -inf entries for mu = 0, n > 0."""
    n = np.arange(n_max + 1)
    if mu == 0.0:
        out = np.full(n_max + 1, -np.inf)
        out[0] = 0.0
        return out
    return n * math.log(mu) - mu - _log_factorials(n_max)


def _log_binom_column(t_max: int, k: int) -> np.ndarray:
    """log C(t, k) for t = 0..t_max (-inf where t < k)."""
    t = np.arange(t_max + 1)
    out = np.full(t_max + 1, -np.inf)
    if k < 0 or k > t_max:
        return out
    lf = _log_factorials(t_max + 1)
    ok = t >= k
    out[ok] = lf[t[ok]] - lf[k] - lf[t[ok] - k]
    return out


def _scaled_exp(logs: np.ndarray) -> np.ndarray:
    """exp(logs - max(logs)), with all-(-inf) rows collapsing to zeros."""
    top = np.max(logs)
    if not np.isfinite(top):
        return np.zeros_like(logs)
    return np.exp(logs - top)


@dataclass(frozen=True)
class QueuePmf:
    """Truncated pmf of one queue length on support 0..n_max."""

    probs: np.ndarray
    n_max: int
    tail_mass_bound: float

    def mean(self) -> float:
        return float(np.arange(self.n_max + 1) @ self.probs)

    def __post_init__(self):
        self.probs.setflags(write=False)


@dataclass(frozen=True)
class JointQueuePmf:
    """Truncated joint pmf of (A, B, C) on the cube [0, n_max]^3."""

    probs: np.ndarray
    n_max: int
    tail_mass_bound: float

    def marginal_means(self) -> tuple[float, float, float]:
        n = np.arange(self.n_max + 1)
        return (
            float(self.probs.sum(axis=(1, 2)) @ n),
            float(self.probs.sum(axis=(0, 2)) @ n),
            float(self.probs.sum(axis=(0, 1)) @ n),
        )

    def __post_init__(self):
        self.probs.setflags(write=False)


@dataclass(frozen=True)
class StockParams:
    """Per-lane stocks and the cycle's probe observation.

    mu is derived as lambda_i * r_i; probe_counts carries the per-lane
    estimated probe counts (a_p_hat, b_p_hat, c_p_hat) used by prop3.
    """

    lambdas: tuple[float, float, float]
    r: tuple[float, float, float] | float
    p: float
    m: int
    x_p: int
    probe_counts: tuple[int, int, int] = (0, 0, 0)
    mu: tuple[float, float, float] = field(init=False)

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p={self.p} outside [0, 1]")
        try:
            r = tuple(float(t) for t in self.r)
        except TypeError:
            r = (float(self.r),) * len(self.lambdas)
        object.__setattr__(self, "r", r)
        if min(self.lambdas) < 0 or min(self.r) < 0:
            raise ValueError("negative rate or elapsed red time")
        if self.m < 0 or self.x_p < 0 or min(self.probe_counts) < 0:
            raise ValueError("m, x_p and probe counts must be nonnegative")
        for v in (self.m, self.x_p, *self.probe_counts):
            if int(v) != v:
                raise ValueError("m, x_p and probe counts must be integers")
        object.__setattr__(
            self, "mu", tuple(l * t for l, t in zip(self.lambdas, self.r))
        )


def prop1_pmf(mu_i: float, n_max: int | None = None) -> QueuePmf:
    """Prior queue pmf: truncated Poisson(mu_i)."""
    if mu_i < 0:
        raise ValueError(f"mu={mu_i} negative")
    if n_max is None:
        n_max = default_n_max(mu_i)
    w = _scaled_exp(_log_poisson(mu_i, n_max))
    z = w.sum()
    # Poisson tail beyond n_max is geometric-dominated by ratio mu/(n_max+1).
    rho = mu_i / (n_max + 1)
    tail = w[-1] * rho / (1.0 - rho) / z if rho < 1.0 else math.inf
    return QueuePmf(w / z, n_max, float(tail))


def _prop2_factors(params: StockParams, n_max: int):
    """Max-scaled per-axis factors g_i[n] = (1-p)^n pi(n, mu_i) and the
    sigma lookup btab[t] = C(t, x_p - 1); scales cancel in normalization."""
    q = 1.0 - params.p
    n = np.arange(n_max + 1)
    if q == 0.0:
        decay = np.full(n_max + 1, -np.inf)
        decay[0] = 0.0
    else:
        decay = n * math.log(q)
    gs = [_scaled_exp(_log_poisson(mu, n_max) + decay) for mu in params.mu]
    t_max = params.m - 1 + params.m + 3 * n_max  # idx never exceeds this
    btab = _scaled_exp(_log_binom_column(t_max, params.x_p - 1))
    return gs, btab


def _prop2_tail_bound(cube: np.ndarray, z: float, params: StockParams, n_max: int) -> float:
    """Upper bound on the truncated-away mass, relative to the kept mass.

    Along each axis the cell weight beyond the boundary is dominated by a
    geometric series: the Poisson ratio mu*q/(n+1) times the worst-case
    growth x_p of the sigma factor (C(t+1, x_p-1)/C(t, x_p-1) <= x_p).
    """
    if z <= 0.0:
        return math.inf
    q = 1.0 - params.p
    total = 0.0
    for axis, mu in enumerate(params.mu):
        slab = cube.take(n_max, axis=axis).sum()
        if slab == 0.0:
            continue
        rho = q * mu * params.x_p / (n_max + 1)
        total += slab * rho / (1.0 - rho) if rho < 1.0 else math.inf
    return total / z


def prop2_joint(params: StockParams, n_max: int | None = None) -> JointQueuePmf:
    """Joint pmf of (A, B, C) given the last-probe position m and probe
    total x_p, proportional to sigma_{a,b,c} (1-p)^{a+b+c} prod pi(n_i, mu_i)
    on the support {m <= max(a,b,c), x_p <= a+b+c} and zero elsewhere."""
    m, x_p = params.m, params.x_p
    if m == 0 or x_p == 0:
        raise DegenerateObservation(
            f"m={m}, x_p={x_p}: no probe observation; use prop1_pmf"
        )
    if n_max is None:
        n_max = default_n_max(max(params.mu), m, x_p)
    factor_params = params
    if params.p == 1.0:
        # q -> 0 limit: the decay factor is dropped and the law collapses
        # onto the lowest supported total a+b+c.
        factor_params = dataclasses.replace(params, p=0.0)
    gs, btab = _prop2_factors(factor_params, n_max)
    cube = np.empty((n_max + 1,) * 3)
    _backend.prop2_fill(gs[0], gs[1], gs[2], btab, m, x_p, cube)
    if params.p == 1.0:
        _restrict_to_min_sum(cube)
    z = cube.sum()
    if z <= 0.0:
        raise InconsistentObservation(
            f"empty support for m={m}, x_p={x_p} under mu={params.mu}"
        )
    tail = _prop2_tail_bound(cube, z, params, n_max)
    return JointQueuePmf(cube / z, n_max, float(tail))


def _restrict_to_min_sum(cube: np.ndarray) -> None:
    n = cube.shape[0]
    idx = np.arange(n)
    s3 = idx[:, None, None] + idx[None, :, None] + idx[None, None, :]
    pos = cube > 0.0
    if not pos.any():
        return
    cube[s3 != s3[pos].min()] = 0.0


def prop2_expectations(joint: JointQueuePmf) -> tuple[float, float, float]:
    """Marginal means (A_hat, B_hat, C_hat) of a joint pmf."""
    return joint.marginal_means()


def prop2_means(params: StockParams, n_max: int | None = None) -> tuple[float, float, float]:
    """Marginal means of prop2_joint without materializing the cube.

    Equal to prop2_expectations(prop2_joint(params)) to float precision;
    this is the hot path used once per simulated cycle.
    """
    m, x_p = params.m, params.x_p
    if m == 0 or x_p == 0:
        raise DegenerateObservation(
            f"m={m}, x_p={x_p}: no probe observation; use prop1_pmf"
        )
    if params.p == 1.0:
        return prop2_expectations(prop2_joint(params, n_max))
    if n_max is None:
        n_max = default_n_max(max(params.mu), m, x_p)
    gs, btab = _prop2_factors(params, n_max)
    z, sa, sb, sc = _backend.prop2_zmom(gs[0], gs[1], gs[2], btab, m, x_p)
    if z <= 0.0:
        raise InconsistentObservation(
            f"empty support for m={m}, x_p={x_p} under mu={params.mu}"
        )
    return sa / z, sb / z, sc / z


def S_term(mu: float, m: int, nu: int, p: float, n_max: int | None = None) -> float:
    """S_mu^{m,nu} = sum over k >= max(m, nu), 1 <= j <= min(k, m) of
    C(m-1, j-1) p^j (1-p)^{k-j} pi(k, mu); the weight that a lane with
    stock mu holds the last probe at row m with nu probes seen elsewhere.

    Every (j, k) term is bounded by 1 (it is a binomial pmf value times
    p (1-p)^{k-m}), so linear-space accumulation is safe.
    """
    if m < 1:
        raise ValueError(f"m={m} must be >= 1")
    if n_max is None:
        n_max = default_n_max(mu, m, nu)
    k_lo = max(m, nu)
    if k_lo > n_max or mu == 0.0:
        return 0.0
    pois = np.exp(_log_poisson(mu, n_max))  # true pi(k, mu); entries <= 1
    k = np.arange(k_lo, n_max + 1)
    total = 0.0
    for j in range(1, m + 1):
        cj = binom(m - 1, j - 1) * p**j
        if cj == 0.0:
            continue
        valid = k >= j
        total += cj * float(
            ((1.0 - p) ** (k[valid] - j)) @ pois[k[valid]]
        )
    return total


def _prop3_roles(lane: int, params: StockParams):
    others = [i for i in range(3) if i != lane]
    mu_a = params.mu[lane]
    lam_a = params.lambdas[lane]
    lam_bc = [params.lambdas[i] for i in others]
    mu_bc = [params.mu[i] for i in others]
    return mu_a, lam_a, lam_bc, mu_bc


def _thinned_prior(mu_a: float, p: float, n_max: int) -> QueuePmf:
    # a_p_hat = 0 branch: (1-p)^a pi(a, mu)/sum_n (.) = Poisson((1-p) mu).
    return prop1_pmf((1.0 - p) * mu_a, n_max)


def prop3_pmf(lane: int, params: StockParams, n_max: int | None = None) -> QueuePmf:
    """Per-lane queue pmf given that lane's estimated probe count and m.

    Branches: the a_p_hat = 0 branch is the thinned prior
    Poisson((1-p) mu); the general branch weights
    (lam_a C(m-1, a_p-1) + (lam_b S_b + lam_c S_c) C(a, a_p)) (1-p)^a pi(a, mu_a)
    over a >= a_p_hat.  m < a_p_hat leaves an empty support and raises
    InconsistentObservation; callers fall back to the zero branch shape.
    """
    if lane not in (0, 1, 2):
        raise ValueError(f"lane={lane} out of range")
    a_p = int(params.probe_counts[lane])
    m, p = params.m, params.p
    mu_a, lam_a, lam_bc, mu_bc = _prop3_roles(lane, params)
    if n_max is None:
        n_max = default_n_max(max(params.mu), m, a_p)
    if a_p == 0 or m == 0:
        return _thinned_prior(mu_a, p, n_max)
    if m < a_p:
        raise InconsistentObservation(
            f"m={m} < a_p_hat={a_p}: support empty; fall back to the zero branch"
        )
    if p == 1.0:
        probs = np.zeros(n_max + 1)
        probs[a_p] = 1.0  # q -> 0 limit: lowest supported a dominates
        return QueuePmf(probs, n_max, 0.0)

    n = np.arange(n_max + 1)
    s_bc = sum(
        lam * S_term(mu, m, a_p, p, n_max) for lam, mu in zip(lam_bc, mu_bc)
    )
    # per-a mixture coefficient in log space: the own-lane term is constant
    # in a, the cross-lane term carries C(a, a_p)
    own = lam_a * binom(m - 1, a_p - 1)
    log_own = math.log(own) if own > 0.0 else -math.inf
    log_cross = (
        math.log(s_bc) if s_bc > 0.0 else -math.inf
    ) + _log_binom_column(n_max, a_p)
    log_coef = np.logaddexp(np.full(n_max + 1, log_own), log_cross)
    log_w = log_coef + n * math.log(1.0 - p) + _log_poisson(mu_a, n_max)
    log_w[n < a_p] = -np.inf
    w = _scaled_exp(log_w)
    z = w.sum()
    if z <= 0.0:
        raise InconsistentObservation(
            f"zero mass for lane {lane} with m={m}, a_p_hat={a_p}, mu={mu_a}"
        )
    rho = (1.0 - p) * mu_a / max(n_max + 1 - a_p, 1)
    tail = w[-1] * rho / (1.0 - rho) / z if rho < 1.0 else math.inf
    return QueuePmf(w / z, n_max, float(tail))


def prop3_expectation(pmf: QueuePmf) -> float:
    """Mean of a per-lane queue pmf."""
    return pmf.mean()
