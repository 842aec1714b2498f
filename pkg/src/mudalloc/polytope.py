"""Relaxed matching polytope and projected-gradient ascent over it.

The polytope is

    { X in [0,1]^{K x J} : sum_j X[k, j] >= q_l for all k,
                           sum_k X[k, j] <= q_s for all j }

Projection uses Dykstra's alternating projections over the three constraint
families (box, row half-spaces, column half-spaces). The compiled kernel is
used when available, see :mod:`mudalloc.kernels`.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InfeasibleError, NumericalError

__all__ = [
    "MatchingPolytope",
    "PGAConfig",
    "AscentResult",
    "Projector",
    "project",
    "maximize",
]


@dataclass(frozen=True)
class MatchingPolytope:
    """Feasible set of the relaxed matching problem.

    Construction fails with :class:`InfeasibleError` when the counting bound
    ``K * q_l <= J * q_s`` or ``q_l <= J`` does not hold.
    """

    K: int
    J: int
    q_s: float
    q_l: float

    def __post_init__(self):
        if self.K < 1 or self.J < 1:
            raise InfeasibleError(f"empty polytope dimensions K={self.K}, J={self.J}")
        if self.q_s < 0 or self.q_l < 0:
            raise InfeasibleError(f"negative limits q_s={self.q_s}, q_l={self.q_l}")
        if self.q_l > self.J:
            raise InfeasibleError(f"q_l={self.q_l} exceeds the number of satellites J={self.J}")
        if self.K * self.q_l > self.J * self.q_s + 1e-12:
            raise InfeasibleError(
                f"counting bound violated: K*q_l={self.K * self.q_l:g} > J*q_s={self.J * self.q_s:g}"
            )

    @property
    def shape(self):
        return (self.K, self.J)

    def violation(self, x):
        """Largest constraint violation of ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        return max(
            0.0,
            float(-x.min()),
            float(x.max() - 1.0),
            float((self.q_l - x.sum(axis=1)).max()),
            float((x.sum(axis=0) - self.q_s).max()),
        )

    def contains(self, x, tol=1e-9):
        return self.violation(x) <= tol

    def uniform_point(self):
        """Constant matrix saturating every column cap (clipped to 1)."""
        level = min(1.0, self.q_s / self.K)
        return np.full(self.shape, level)


@dataclass(frozen=True)
class PGAConfig:
    max_iters: int = 500
    shrink: float = 0.5
    sufficient_increase: float = 1e-4
    grad_tol: float = 1e-6
    rel_tol: float = 1e-6
    patience: int = 3
    projection_tol: float = 1e-9
    max_sweeps: int = 200_000
    max_backtracks: int = 60
    step_min: float = 1e-14
    step_max: float = 1e14

    def __post_init__(self):
        for name in ("max_iters", "shrink", "sufficient_increase", "grad_tol", "projection_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.shrink < 1:
            raise ValueError("shrink must be < 1")


class Projector:
    """Projection onto a fixed polytope that keeps Dykstra's correction terms.

    Dykstra's method is block coordinate ascent on the dual, so starting a
    projection from the correction terms of the previous one is valid and
    much cheaper when consecutive points are close.
    """

    def __init__(self, polytope, tol=1e-9, max_sweeps=200_000):
        self.polytope = polytope
        self.tol = tol
        self.max_sweeps = max_sweeps
        self._warm = None
        self.calls = 0
        self.sweeps = 0

    def __call__(self, point):
        poly = self.polytope
        x, sweeps, self._warm = kernels.dykstra_project(
            point, float(poly.q_s), float(poly.q_l), self.tol, self.max_sweeps, self._warm
        )
        self.calls += 1
        self.sweeps += sweeps
        return x

    def reset(self):
        self._warm = None


def project(point, polytope, tol=1e-12, max_sweeps=200_000):
    """Euclidean projection of ``point`` onto ``polytope``.

    ``tol`` bounds the last sweep's change of every Dykstra correction term;
    the result is feasible and optimal to about that accuracy.
    """
    point = np.asarray(point, dtype=float)
    if point.shape != polytope.shape:
        raise ValueError(f"point has shape {point.shape}, polytope {polytope.shape}")
    x, _, _ = kernels.dykstra_project(
        point, float(polytope.q_s), float(polytope.q_l), tol, max_sweeps, None
    )
    return x


@dataclass
class AscentResult:
    x: np.ndarray
    value: float
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)
    grad_mapping_norm: float = float("nan")


def _check_finite(value, grad, x):
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise NumericalError("non-finite objective or gradient during ascent", iterate=np.array(x))


def maximize(objective, start, polytope, cfg=PGAConfig(), projector=None):
    """Projected-gradient ascent of a concave function over ``polytope``.

    ``objective(x)`` returns ``(value, gradient)``. Steps follow a
    Barzilai-Borwein guess refined by backtracking along the projection arc
    until ``f(x+) >= f(x) + sufficient_increase * <g, x+ - x>``. Stops when
    the gradient mapping ``||x+ - x|| / t`` drops below ``grad_tol``, or
    when ``patience`` consecutive steps each gain less than
    ``rel_tol * max(|f|, 1e-12)``; the latter is scale free and matters when
    gradients blow up near the boundary.
    Entries whose gradient is exactly zero are never moved by the box step.
    """
    proj = projector if projector is not None else Projector(
        polytope, cfg.projection_tol, cfg.max_sweeps
    )
    x = np.array(start, dtype=float)
    f, g = objective(x)
    _check_finite(f, g, x)
    trace = [f]
    gmax = float(np.abs(g).max())
    t = 1.0 / gmax if gmax > 0 else 1.0
    converged = False
    gm = float("nan")
    it = 0
    stalled = 0
    for it in range(1, cfg.max_iters + 1):
        accepted = False
        for _ in range(cfg.max_backtracks):
            x_new = proj(x + t * g)
            d = x_new - x
            f_new, g_new = objective(x_new)
            _check_finite(f_new, g_new, x_new)
            if f_new >= f + cfg.sufficient_increase * float(np.vdot(g, d)):
                accepted = True
                break
            t *= cfg.shrink
        gm = float(np.linalg.norm(d)) / t
        if not accepted or not f_new > f:
            # stationary up to floating-point resolution; keep x
            converged = True
            break
        gain = f_new - f
        stalled = stalled + 1 if gain < cfg.rel_tol * max(abs(f), 1e-12) else 0
        x, s = x_new, d
        y = g_new - g
        f, g = f_new, g_new
        trace.append(f)
        if gm < cfg.grad_tol or stalled >= cfg.patience:
            converged = True
            break
        sy = float(np.vdot(s, y))
        if sy < 0:
            t = float(np.vdot(s, s)) / -sy
        else:
            t = t * 2.0
        t = min(max(t, cfg.step_min), cfg.step_max)
    return AscentResult(x=x, value=f, iterations=it, converged=converged, trace=trace,
                        grad_mapping_norm=gm)
