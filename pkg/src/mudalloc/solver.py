"""Penalty-relaxed fractional-programming solver for the matching problem.

The binary matching problem is relaxed to the box with the concave-on-box
penalty ``p(Q) = lam * sum(q^2 - q)``. For fixed ``Q`` the SINR auxiliaries
``gamma`` and the dual variables ``mu`` have closed forms; the remaining
sum-of-ratios objective is handled with a quadratic transform (auxiliaries
``theta``), and the convex penalty is replaced by its tangent plane, which
gives a concave separable lower bound that touches the transformed objective
at the anchor point. Each lower bound is maximized over the relaxed
polytope by projected-gradient ascent.

Denominators of the transformed terms hold the total received power
``sigma^2 + sum_{i <= k} |h s|^2 q_i + I`` (the user's own power included);
with that choice ``max_gamma`` of the transformed objective equals the sum
rate exactly and ``max_theta`` of the quadratic transform equals the
transformed objective exactly.
"""
import json
import logging
import math
import time
import warnings
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, InfeasibleError
from .polytope import MatchingPolytope, PGAConfig, Projector, maximize
from .ratemodel import (
    MatchingMatrix,
    RateModelParams,
    check_feasibility,
    denominator,
    max_nonintegrality,
    processing_load,
    require_counting_feasible,
    sinr,
    stronger_sum,
    sum_rate,
    weaker_sum,
)

__all__ = [
    "LN2",
    "SQRT_FLOOR",
    "SolverConfig",
    "SolverState",
    "OuterRecord",
    "AllocationReport",
    "SlmSubproblem",
    "penalty",
    "penalty_gradient",
    "update_gamma",
    "update_mu",
    "update_theta",
    "fp_offset",
    "p1_objective",
    "p2_objective",
    "p3_objective",
    "build_slm_subproblem",
    "initial_matching",
    "round_and_repair",
    "solve",
    "ConvergenceWarning",
]

log = logging.getLogger(__name__)

LN2 = math.log(2.0)
SQRT_FLOOR = 1e-12


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the iterative solver.

    ``lambda_init=None`` picks ``lambda_scale`` times the mean absolute
    sum-rate gradient at the starting point. With ``lambda_mode="schedule"``
    the weight grows by ``lambda_growth`` after each outer iteration that
    ends with max non-integrality above ``integrality_tol``; ``"fixed"``
    keeps it constant.
    """

    lambda_init: float = None
    lambda_scale: float = 0.25
    lambda_growth: float = 2.5
    lambda_mode: str = "schedule"
    integrality_tol: float = 1e-3
    eps_m: float = 1e-4
    eps_n: float = 1e-5
    max_outer: int = 50
    max_inner: int = 30
    rounding_threshold: float = 0.5
    init: str = "uniform"
    theta_in_inner_loop: bool = False
    pga: PGAConfig = field(default_factory=PGAConfig)

    def __post_init__(self):
        if self.lambda_init is not None and not self.lambda_init > 0:
            raise ConfigError("lambda_init must be positive")
        if not (self.lambda_scale > 0 and self.lambda_growth >= 1):
            raise ConfigError("lambda_scale must be > 0 and lambda_growth >= 1")
        if self.lambda_mode not in ("schedule", "fixed"):
            raise ConfigError(f"unknown lambda_mode {self.lambda_mode!r}")
        if not (self.eps_m > 0 and self.eps_n > 0 and self.integrality_tol > 0):
            raise ConfigError("tolerances must be positive")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ConfigError("iteration limits must be >= 1")
        if self.init not in ("uniform", "round_robin"):
            raise ConfigError(f"unknown init {self.init!r}")


# -- closed-form pieces -------------------------------------------------------

def penalty(Q, lam):
    """lam * sum(q^2 - q): zero at binary points, negative inside the box."""
    q = np.asarray(Q, dtype=float)
    return float(lam * np.sum(q * q - q))


def penalty_gradient(Q, lam):
    return lam * (2.0 * np.asarray(Q, dtype=float) - 1.0)


def update_gamma(scenario, params, Q):
    """Optimal SINR auxiliaries: the SINR of every (n, k, j) at ``Q``."""
    return sinr(scenario, params, Q)


def update_mu(gamma):
    """Optimal dual variables 1 / (ln 2 (1 + gamma))."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise ValueError("gamma must be non-negative")
    return 1.0 / (LN2 * (1.0 + gamma))


def update_theta(scenario, params, Q, gamma):
    """Maximizer of the quadratic transform in theta:
    sqrt(|hs|^2 q (1 + gamma)) / (ln 2 * total-power denominator)."""
    q = np.asarray(Q, dtype=float)
    num = scenario.power * q[None] * (1.0 + gamma)
    den = denominator(scenario, params, q, include_self=True)
    return np.sqrt(num) / (LN2 * den)


def fp_offset(gamma):
    """log2(1 + gamma) - gamma / ln 2, the gamma-only part of the transform."""
    return np.log2(1.0 + gamma) - gamma / LN2


def p1_objective(scenario, params, Q, lam):
    return sum_rate(scenario, params, Q) + penalty(Q, lam)


def p2_objective(scenario, params, Q, gamma, lam):
    """Sum-of-ratios objective after the Lagrangian dual transform."""
    q = np.asarray(Q, dtype=float)
    den = denominator(scenario, params, q, include_self=True)
    ratio = scenario.power * q[None] * (1.0 + gamma) / (LN2 * den)
    return float(np.sum(fp_offset(gamma) + ratio)) + penalty(q, lam)


def _p3_terms(scenario, params, q, gamma, theta):
    den = denominator(scenario, params, q, include_self=True)
    root = np.sqrt(scenario.power * q[None] * (1.0 + gamma))
    return float(np.sum(2.0 * theta * root - theta**2 * den * LN2 + fp_offset(gamma)))


def p3_objective(scenario, params, Q, gamma, theta, lam):
    """Quadratic-transform objective with the exact penalty."""
    q = np.asarray(Q, dtype=float)
    return _p3_terms(scenario, params, q, gamma, theta) + penalty(q, lam)


# -- lower-bound subproblem ---------------------------------------------------

class SlmSubproblem:
    """Concave separable lower bound of the quadratic-transform objective.

    Value: ``sum(2 c sqrt(q) - w q) + const`` where ``w`` folds in the
    denominator coefficients and the penalty tangent at the anchor.
    Calling the object returns ``(value, gradient)``.
    """

    def __init__(self, sqrt_coef, lin_coef, base_const, anchor, lam):
        self.sqrt_coef = sqrt_coef
        self.lin_coef = lin_coef
        self.base_const = base_const
        self.lam = lam
        self.anchor = np.array(anchor, dtype=float)
        grad_p = penalty_gradient(self.anchor, lam)
        self.weights = lin_coef - grad_p
        self.const = base_const + penalty(self.anchor, lam) - float(np.sum(grad_p * self.anchor))

    def reanchor(self, anchor):
        return SlmSubproblem(self.sqrt_coef, self.lin_coef, self.base_const, anchor, self.lam)

    def __call__(self, Q):
        value, grad = kernels.separable_sqrt_linear(
            np.asarray(Q, dtype=float), self.sqrt_coef, self.weights, SQRT_FLOOR
        )
        return value + self.const, grad

    def value(self, Q):
        return self(Q)[0]

    def gradient(self, Q):
        return self(Q)[1]


def build_slm_subproblem(scenario, params, gamma, theta, anchor, lam):
    """Assemble the tangent-penalty lower bound at ``anchor``.

    The total-power denominator is affine in Q, so
    ``sum theta^2 ln2 * den`` collapses to ``sum_{k,j} W[k,j] q[k,j] + const``
    with W gathered by prefix/suffix sums along each SIC order.
    """
    gamma = np.asarray(gamma, dtype=float)
    theta = np.asarray(theta, dtype=float)
    t2 = theta**2
    power = scenario.power
    sqrt_coef = np.sum(theta * np.sqrt(power * (1.0 + gamma)), axis=0)

    # own + stronger-user power: user i appears in the denominators of itself and every weaker k
    coef = power * (weaker_sum(scenario, t2) + t2)
    const = params.sigma2 * float(np.sum(t2))
    eps = params.epsilon
    if eps > 0:
        if params.variant == "as_printed":
            # I[n,k,j] = eps |h_nkj|^2 sum_{i weaker} |s_ni|^2 q_ij
            coef = coef + eps * scenario.sig2[:, :, None] * stronger_sum(scenario, t2 * scenario.gain2)
        else:
            # I[n,k,j] = eps sum_{i weaker} |h_nij s_ni|^2 (1 - q_ij)
            coef = coef - eps * power * stronger_sum(scenario, t2)
            const += eps * float(np.sum(t2 * weaker_sum(scenario, power)))
    lin_coef = LN2 * np.sum(coef, axis=0)
    base_const = float(np.sum(fp_offset(gamma))) - LN2 * const
    return SlmSubproblem(sqrt_coef, lin_coef, base_const, anchor, lam)


# -- state and report ---------------------------------------------------------

@dataclass
class SolverState:
    Q: np.ndarray
    gamma: np.ndarray = None
    theta: np.ndarray = None
    mu: np.ndarray = None
    lam: float = 0.0
    outer: int = 0
    inner_total: int = 0


@dataclass
class OuterRecord:
    outer: int
    lam: float
    inner_iterations: int
    objective_start: float  # P1 at the iterate entering this outer step, same lam
    objective: float  # P1 after the step
    sum_rate: float
    max_nonintegrality: float
    rel_change: float
    p3_trace: list
    identity_gap: float  # |sum log2(1 + gamma) - C_SUM|


@dataclass
class AllocationReport:
    Q_binary: MatchingMatrix
    Q_relaxed: np.ndarray
    relaxed_objective: float
    relaxed_sum_rate: float
    rounded_sum_rate: float
    load: np.ndarray
    outer_iterations: int
    inner_iterations: int
    converged: bool
    converged_at: int  # first outer iteration meeting the stop rule, or -1
    lambda_final: float
    repaired: bool
    wall_time: float
    trace: list = field(default_factory=list)

    @property
    def objective_trace(self):
        return [r.objective for r in self.trace]

    def to_dict(self):
        K, J = self.Q_binary.shape
        return {
            "K": K,
            "J": J,
            "q_s": self.Q_binary.q_s,
            "q_l": self.Q_binary.q_l,
            "Q_binary": self.Q_binary.to_bitstring(),
            "relaxed_objective": self.relaxed_objective,
            "relaxed_sum_rate": self.relaxed_sum_rate,
            "rounded_sum_rate": self.rounded_sum_rate,
            "load": [float(v) for v in self.load],
            "total_load": float(np.sum(self.load)),
            "outer_iterations": self.outer_iterations,
            "inner_iterations": self.inner_iterations,
            "converged": self.converged,
            "converged_at": self.converged_at,
            "lambda_final": self.lambda_final,
            "repaired": self.repaired,
            "wall_time": self.wall_time,
            "trace": {
                "objective": [r.objective for r in self.trace],
                "objective_start": [r.objective_start for r in self.trace],
                "sum_rate": [r.sum_rate for r in self.trace],
                "lambda": [r.lam for r in self.trace],
                "max_nonintegrality": [r.max_nonintegrality for r in self.trace],
                "inner_iterations": [r.inner_iterations for r in self.trace],
                "identity_gap": [r.identity_gap for r in self.trace],
            },
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


# -- initialization, rounding, repair -----------------------------------------

def _round_robin_binary(K, J, q_s, q_l):
    """User k takes satellites k, k+1, ... (mod J) until it meets ceil(q_l)."""
    need = math.ceil(q_l - 1e-12)
    cap = math.floor(q_s + 1e-12)
    q = np.zeros((K, J))
    load = np.zeros(J, dtype=int)
    ptr = 0
    for k in range(K):
        got, tried = 0, 0
        while got < need and tried < J:
            j = (ptr + tried) % J
            tried += 1
            if load[j] < cap and q[k, j] == 0:
                q[k, j] = 1
                load[j] += 1
                got += 1
        ptr = (ptr + tried) % J
    return q


def initial_matching(polytope, how="uniform"):
    """Feasible starting point for the relaxed problem."""
    if how == "uniform":
        return polytope.uniform_point()
    q = _round_robin_binary(polytope.K, polytope.J, polytope.q_s, polytope.q_l)
    from .polytope import project
    return project(q, polytope)


def _column_rate(scenario, params, q):
    """Per-satellite sum-rate contributions of matching ``q``."""
    return np.sum(np.log2(1.0 + sinr(scenario, params, q)), axis=(0, 1))


def _marginal(scenario, params, q, k, j):
    """Sum-rate change from toggling q[k, j]."""
    base = _column_rate(scenario, params, q)[j]
    q2 = q.copy()
    q2[k, j] = 1.0 - q2[k, j]
    return _column_rate(scenario, params, q2)[j] - base


def _augment(q, k, cap, need=None):
    """Give user ``k`` one more satellite by shifting other users along a path.

    Breadth-first search over satellites: from a full satellite ``a`` some
    user ``u`` on ``a`` may move to a satellite ``b`` it is not on. The path
    ends at a satellite with spare capacity, or, when ``need`` is given, at a
    full satellite holding a user with more than ``need`` satellites, who
    then gives up that seat. Returns True on success.
    """
    K, J = q.shape
    load = q.sum(axis=0)
    rows = q.sum(axis=1)
    starts = [j for j in range(J) if q[k, j] == 0]
    parent = {j: None for j in starts}
    frontier = deque(starts)
    end, drop = None, None
    while frontier:
        a = frontier.popleft()
        if load[a] < cap:
            end = a
            break
        if need is not None:
            surplus = [u for u in np.flatnonzero(q[:, a] == 1) if u != k and rows[u] > need]
            if surplus:
                end, drop = a, int(surplus[0])
                break
        for u in np.flatnonzero(q[:, a] == 1):
            if u == k:
                continue
            for b in np.flatnonzero(q[u] == 0):
                if b not in parent:
                    parent[b] = (a, int(u))
                    frontier.append(b)
    if end is None:
        return False
    trial = q.copy()
    if drop is not None:
        trial[drop, end] = 0.0
    node = end
    while parent[node] is not None:
        a, u = parent[node]
        if trial[u, a] != 1 or trial[u, node] != 0:
            return False
        trial[u, a], trial[u, node] = 0.0, 1.0
        node = a
    if trial[k, node] != 0:
        return False
    trial[k, node] = 1.0
    q[:] = trial
    return True


def round_and_repair(Q_relaxed, q_s, q_l, scenario, params=None, threshold=0.5):
    """Threshold a relaxed matching and repair it into a feasible binary one.

    Over-full satellites drop their least valuable users (smallest sum-rate
    loss); users short of ``q_l`` then take the free satellite with the
    largest sum-rate gain, shifting other users along an augmenting path
    when no satellite has room.
    """
    params = params or RateModelParams.from_scenario(scenario)
    q = (np.asarray(Q_relaxed, dtype=float) >= threshold).astype(float)
    K, J = q.shape
    require_counting_feasible(K, J, q_s, q_l)
    need = math.ceil(q_l - 1e-12)
    cap = math.floor(q_s + 1e-12)
    for j in range(J):
        while q[:, j].sum() > cap:
            users = np.flatnonzero(q[:, j] == 1)
            losses = [-_marginal(scenario, params, q, k, j) for k in users]
            q[users[int(np.argmin(losses))], j] = 0.0
    for k in range(K):
        while q[k].sum() < need:
            free = [j for j in range(J) if q[k, j] == 0 and q[:, j].sum() < cap]
            if free:
                gains = [_marginal(scenario, params, q, k, j) for j in free]
                q[k, free[int(np.argmax(gains))]] = 1.0
            elif not _augment(q, k, cap, need):
                raise InfeasibleError(f"cannot give user {k} {need} satellites under q_s={q_s}")
    rep = check_feasibility(q, q_s, q_l)
    if not rep.feasible:  # pragma: no cover - guarded by construction
        raise InfeasibleError(f"repair produced an infeasible matching: {rep.violations}")
    return MatchingMatrix(q, q_s, q_l)


# -- Algorithm 1 --------------------------------------------------------------

def _rel_change(new, old):
    return abs(new - old) / max(abs(old), 1e-300)


def solve(scenario, q_s, q_l, cfg=SolverConfig(), params=None, callback=None):
    """Run the penalty/fractional-programming iteration and round the result.

    ``callback(state, record)`` is invoked after every outer iteration.
    """
    t0 = time.perf_counter()
    params = params or RateModelParams.from_scenario(scenario)
    N, K, J = scenario.dims
    require_counting_feasible(K, J, q_s, q_l)
    poly = MatchingPolytope(K, J, q_s, q_l)
    projector = Projector(poly, cfg.pga.projection_tol, cfg.pga.max_sweeps)

    state = SolverState(Q=initial_matching(poly, cfg.init))
    state.gamma = update_gamma(scenario, params, state.Q)
    state.theta = update_theta(scenario, params, state.Q, state.gamma)
    if cfg.lambda_init is not None:
        state.lam = cfg.lambda_init
    else:
        probe = build_slm_subproblem(scenario, params, state.gamma, state.theta, state.Q, 0.0)
        scale = float(np.mean(np.abs(probe.gradient(state.Q))))
        state.lam = cfg.lambda_scale * scale if scale > 0 else 1.0

    records = []
    converged_at = -1
    prev_obj = p1_objective(scenario, params, state.Q, state.lam)
    for m in range(cfg.max_outer):
        state.outer = m + 1
        gamma = update_gamma(scenario, params, state.Q)
        C = sum_rate(scenario, params, state.Q)
        gap = abs(float(np.sum(np.log2(1.0 + gamma))) - C)
        state.gamma = gamma
        state.mu = update_mu(gamma)
        state.theta = update_theta(scenario, params, state.Q, gamma)
        obj_start = p1_objective(scenario, params, state.Q, state.lam)

        sub = build_slm_subproblem(scenario, params, gamma, state.theta, state.Q, state.lam)
        prev_val = sub.value(state.Q)
        p3_trace = [prev_val]
        inner = 0
        Q = state.Q
        for inner in range(1, cfg.max_inner + 1):
            res = maximize(sub, Q, poly, cfg.pga, projector)
            Q = res.x
            p3_trace.append(p3_objective(scenario, params, Q, gamma, state.theta, state.lam))
            done = _rel_change(res.value, prev_val) < cfg.eps_n
            prev_val = res.value
            if cfg.theta_in_inner_loop:
                state.theta = update_theta(scenario, params, Q, gamma)
                sub = build_slm_subproblem(scenario, params, gamma, state.theta, Q, state.lam)
            else:
                sub = sub.reanchor(Q)
            if done:
                break
        state.Q = Q
        state.inner_total += inner

        obj = p1_objective(scenario, params, Q, state.lam)
        nonint = max_nonintegrality(Q)
        rel = _rel_change(obj, prev_obj)
        rec = OuterRecord(
            outer=m + 1, lam=state.lam, inner_iterations=inner, objective_start=obj_start,
            objective=obj, sum_rate=sum_rate(scenario, params, Q), max_nonintegrality=nonint,
            rel_change=rel, p3_trace=p3_trace, identity_gap=gap,
        )
        records.append(rec)
        if callback is not None:
            callback(state, rec)
        log.debug("outer %d lam=%.3g obj=%.6g nonint=%.2e rel=%.2e inner=%d",
                  m + 1, state.lam, obj, nonint, rel, inner)
        prev_obj = obj
        integral = nonint < cfg.integrality_tol or cfg.lambda_mode == "fixed"
        if rel < cfg.eps_m and integral:
            converged_at = m + 1
            break
        if cfg.lambda_mode == "schedule" and nonint >= cfg.integrality_tol:
            state.lam *= cfg.lambda_growth
            prev_obj = p1_objective(scenario, params, Q, state.lam)

    converged = converged_at > 0
    if not converged:
        warnings.warn(
            f"solver stopped after {cfg.max_outer} outer iterations without meeting eps_m",
            ConvergenceWarning, stacklevel=2,
        )
    Qb = round_and_repair(state.Q, q_s, q_l, scenario, params, cfg.rounding_threshold)
    thresholded = (state.Q >= cfg.rounding_threshold).astype(float)
    return AllocationReport(
        Q_binary=Qb,
        Q_relaxed=state.Q,
        relaxed_objective=records[-1].objective,
        relaxed_sum_rate=records[-1].sum_rate,
        rounded_sum_rate=sum_rate(scenario, params, Qb),
        load=processing_load(scenario, Qb),
        outer_iterations=state.outer,
        inner_iterations=state.inner_total,
        converged=converged,
        converged_at=converged_at,
        lambda_final=state.lam,
        repaired=bool(np.any(thresholded != Qb.q)),
        wall_time=time.perf_counter() - t0,
        trace=records,
    )
