"""Residual interference, SIC sum-rate and detection-load models.

Shapes: the matching matrix ``Q`` is K x J; per-link tensors are N x K x J.
SIC ordering is computed per (RE, satellite) from ``|h[n, k, j]|^2``; the
"stronger" users of ``k`` are those preceding it in that order and the
"weaker" ones those following it.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InfeasibleError
from .scenario import INTERFERENCE_VARIANTS

__all__ = [
    "RateModelParams",
    "MatchingMatrix",
    "Violation",
    "FeasibilityReport",
    "stronger_sum",
    "weaker_sum",
    "interference",
    "residual_interference",
    "sinr",
    "sum_rate",
    "processing_load",
    "check_feasibility",
    "counting_feasible",
    "paper_q_l",
    "clamped_q_l",
    "max_nonintegrality",
]


@dataclass(frozen=True)
class RateModelParams:
    epsilon: float
    sigma2: float
    variant: str = "as_printed"

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ConfigError(f"epsilon must be >= 0 (got {self.epsilon})")
        if not self.sigma2 > 0:
            raise ConfigError(f"sigma2 must be > 0 (got {self.sigma2})")
        if self.variant not in INTERFERENCE_VARIANTS:
            raise ConfigError(f"unknown interference variant {self.variant!r}")

    @classmethod
    def from_scenario(cls, scenario, epsilon=None, variant=None):
        c = scenario.config
        return cls(
            epsilon=c.epsilon if epsilon is None else epsilon,
            sigma2=scenario.sigma2,
            variant=c.interference_variant if variant is None else variant,
        )


@dataclass(frozen=True, eq=False)
class MatchingMatrix:
    """Satellite-user matching ``q[k, j]`` with its constraint limits."""

    q: np.ndarray
    q_s: float
    q_l: float
    binary: bool = field(default=None)

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        if q.ndim != 2:
            raise ConfigError("matching matrix must be 2-D (K x J)")
        if np.any(q < 0) or np.any(q > 1):
            raise ConfigError("matching entries must lie in [0, 1]")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        if self.binary is None:
            object.__setattr__(self, "binary", bool(np.all((q == 0) | (q == 1))))

    @property
    def shape(self):
        return self.q.shape

    def targets(self, j):
        """G_j, the users detected at satellite ``j``."""
        return tuple(int(k) for k in np.flatnonzero(self.q[:, j] > 0.5))

    def to_bitstring(self):
        """Row-major 0/1 string of a binary matching."""
        return "".join("1" if v > 0.5 else "0" for v in self.q.ravel())

    @classmethod
    def from_bitstring(cls, bits, K, J, q_s, q_l):
        if len(bits) != K * J or set(bits) - {"0", "1"}:
            raise ConfigError("bitstring must have K*J characters of 0/1")
        q = np.array([int(b) for b in bits], dtype=float).reshape(K, J)
        return cls(q, q_s, q_l)


def _as_q(Q):
    return np.asarray(getattr(Q, "q", Q), dtype=float)


def stronger_sum(scenario, values):
    """For each (n, k, j), sum of ``values[n, i, j]`` over users i before k in SIC order."""
    order, rank = scenario.sic_order, scenario.sic_rank
    srt = np.take_along_axis(values, order, axis=1)
    excl = np.cumsum(srt, axis=1) - srt
    return np.take_along_axis(excl, rank, axis=1)


def weaker_sum(scenario, values):
    """For each (n, k, j), sum of ``values[n, i, j]`` over users i after k in SIC order."""
    order, rank = scenario.sic_order, scenario.sic_rank
    srt = np.take_along_axis(values, order, axis=1)
    incl = np.cumsum(srt, axis=1)
    tail = incl[:, -1:, :] - incl
    return np.take_along_axis(tail, rank, axis=1)


def interference(scenario, params, Q):
    """Residual interference tensor I[n, k, j] from imperfect cancellation.

    ``as_printed``: eps * |h[n,k,j]|^2 * sum_{i weaker} |s[n,i]|^2 q[i,j].
    ``complement``: eps * sum_{i weaker} |h[n,i,j]|^2 |s[n,i]|^2 (1 - q[i,j]).
    """
    q = _as_q(Q)
    if params.epsilon == 0:
        return np.zeros(scenario.dims)
    if params.variant == "as_printed":
        weights = scenario.sig2[:, :, None] * q[None]
        return params.epsilon * scenario.gain2 * weaker_sum(scenario, weights)
    weights = scenario.power * (1.0 - q)[None]
    return params.epsilon * weaker_sum(scenario, weights)


def residual_interference(scenario, params, Q, n, k, j):
    """Interference on user ``k`` at RE ``n`` of satellite ``j``, by direct summation."""
    q = _as_q(Q)
    N, K, J = scenario.dims
    if not (0 <= n < N and 0 <= k < K and 0 <= j < J):
        raise IndexError(f"index (n={n}, k={k}, j={j}) out of range for dims {(N, K, J)}")
    rank = scenario.sic_rank[n, :, j]
    g2, s2 = scenario.gain2, scenario.sig2
    total = 0.0
    for i in range(K):
        if rank[i] <= rank[k]:
            continue
        if params.variant == "as_printed":
            total += g2[n, k, j] * s2[n, i] * q[i, j]
        else:
            total += g2[n, i, j] * s2[n, i] * (1.0 - q[i, j])
    return params.epsilon * total


def denominator(scenario, params, Q, include_self=False):
    """sigma^2 + stronger-user power + residual interference, per (n, k, j).

    With ``include_self`` the user's own received power is added, which is
    the total-power denominator used by the fractional-programming transform.
    """
    q = _as_q(Q)
    pq = scenario.power * q[None]
    den = params.sigma2 + stronger_sum(scenario, pq) + interference(scenario, params, q)
    if include_self:
        den = den + pq
    return den


def sinr(scenario, params, Q):
    q = _as_q(Q)
    return scenario.power * q[None] / denominator(scenario, params, q)


def sum_rate(scenario, params, Q):
    """Sum over (n, k, j) of log2(1 + SINR), in bit/s/Hz."""
    return float(np.sum(np.log2(1.0 + sinr(scenario, params, Q))))


def processing_load(scenario, Q):
    """Traversal count per satellite.

    A satellite detecting ``c`` target users on one RE evaluates
    ``M**(c - 1)`` joint hypotheses per target user, so that RE costs
    ``c * M**(c - 1)``.
    """
    q = _as_q(Q)
    if not np.all((q == 0) | (q == 1)):
        raise ConfigError("processing load is defined for binary matchings only")
    M = scenario.config.modulation_order
    occupied = (scenario.signatures.s != 0).astype(int)  # N x K
    counts = occupied @ q.astype(int)  # N x J: |F(n) & G_j|
    per_re = np.where(counts > 0, counts * np.power(float(M), np.maximum(counts - 1, 0)), 0.0)
    return per_re.sum(axis=0)


@dataclass(frozen=True)
class Violation:
    constraint: str  # "C1", "C2", "C3" or "C4"
    index: tuple
    margin: float  # how far the constraint is missed (> 0)


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    violations: tuple
    counting_bound_ok: bool

    def __bool__(self):
        return self.feasible


def counting_feasible(K, J, q_s, q_l, binary=True):
    """Whether some matching can meet both limits.

    Summing C1 over users and C2 over satellites gives ``K * q_l <= J * q_s``;
    binary matchings need the integer version with ceil(q_l) and floor(q_s).
    """
    if binary:
        ql, qs = math.ceil(q_l - 1e-12), math.floor(q_s + 1e-12)
    else:
        ql, qs = q_l, q_s
    return ql <= J and K * ql <= J * qs + 1e-12


def check_feasibility(Q, q_s, q_l, tol=1e-9):
    """List every violated constraint of a matching together with its margin."""
    q = _as_q(Q)
    K, J = q.shape
    out = []
    for k, s in enumerate(q.sum(axis=1)):
        if s < q_l - tol:
            out.append(Violation("C1", (k,), float(q_l - s)))
    for j, s in enumerate(q.sum(axis=0)):
        if s > q_s + tol:
            out.append(Violation("C2", (j,), float(s - q_s)))
    for k, j in zip(*np.nonzero((q < -tol) | (q > 1 + tol))):
        out.append(Violation("C4", (int(k), int(j)), float(max(-q[k, j], q[k, j] - 1))))
    frac = np.minimum(np.abs(q), np.abs(1 - q))
    for k, j in zip(*np.nonzero(frac > tol)):
        out.append(Violation("C3", (int(k), int(j)), float(frac[k, j])))
    return FeasibilityReport(not out, tuple(out), counting_feasible(K, J, q_s, q_l))


def paper_q_l(q_s, K, J):
    """The simulation rule q_l = q_s * K / J as stated for the reference study."""
    return q_s * K / J


def clamped_q_l(q_s, K, J):
    """q_l used by the harness: the stated rule, clamped to floor(J q_s / K)
    whenever it would break the counting bound K q_l <= J q_s."""
    ql = paper_q_l(q_s, K, J)
    if K * ql > J * q_s or ql > J:
        ql = math.floor(J * q_s / K)
    return min(ql, J)


def max_nonintegrality(Q):
    q = _as_q(Q)
    return float(np.max(np.minimum(q, 1.0 - q))) if q.size else 0.0


def require_counting_feasible(K, J, q_s, q_l, binary=True):
    if not counting_feasible(K, J, q_s, q_l, binary=binary):
        raise InfeasibleError(
            f"no matching satisfies q_s={q_s}, q_l={q_l} with K={K}, J={J} "
            f"(counting bound K*q_l <= J*q_s)"
        )
