"""Reference allocators: greedy, round robin, centralized bound, exhaustive oracle."""
import enum
import itertools
import math

import numpy as np

from .errors import InfeasibleError
from .ratemodel import MatchingMatrix, RateModelParams, require_counting_feasible, sum_rate
from .solver import _augment

__all__ = [
    "BaselineKind",
    "BudgetExceededError",
    "greedy_allocate",
    "round_robin_allocate",
    "centralized_allocate",
    "exhaustive_allocate",
    "count_candidates",
    "target_count",
]


class BaselineKind(str, enum.Enum):
    GREEDY = "greedy"
    ROUND_ROBIN = "round_robin"
    CENTRALIZED = "centralized"
    EXHAUSTIVE = "exhaustive"


class BudgetExceededError(InfeasibleError):
    """Exhaustive enumeration refused: too many candidate matchings."""

    def __init__(self, count, budget):
        super().__init__(f"exhaustive search needs {count} candidates, budget is {budget}")
        self.count = count
        self.budget = budget


def target_count(q_l, J):
    """Satellites each user asks for in the greedy and round-robin baselines.

    ceil(q_l), but at least one so that q_l = 0 does not leave users unserved.
    """
    return min(J, max(1, math.ceil(q_l - 1e-12)))


def _complete(q, order, q_s, q_l):
    """Bring users still short of ceil(q_l) up to it via augmenting paths."""
    cap = math.floor(q_s + 1e-12)
    need = math.ceil(q_l - 1e-12)
    for k in order:
        while q[k].sum() < need:
            if not _augment(q, k, cap, need):
                raise InfeasibleError(f"no satellite with spare capacity for user {k}")
    return q


def greedy_allocate(scenario, q_s, q_l, rng=None):
    """Users in random order pick their strongest satellites by sum_n |h|^2.

    Each user takes up to ``target_count(q_l)`` satellites among those with
    room; users left short of q_l are completed by augmenting paths.
    """
    N, K, J = scenario.dims
    require_counting_feasible(K, J, q_s, q_l)
    rng = np.random.default_rng(rng)
    cap = math.floor(q_s + 1e-12)
    want = target_count(q_l, J)
    agg = scenario.gain2.sum(axis=0)  # K x J
    order = rng.permutation(K)
    q = np.zeros((K, J))
    load = np.zeros(J, dtype=int)
    for k in order:
        got = 0
        for j in np.argsort(-agg[k], kind="stable"):
            if got == want:
                break
            if load[j] < cap:
                q[k, j] = 1.0
                load[j] += 1
                got += 1
    return MatchingMatrix(_complete(q, order, q_s, q_l), q_s, q_l)


def round_robin_allocate(scenario, q_s, q_l, rng=None):
    """Channel-oblivious: users in random order take satellites cyclically.

    A single cursor sweeps the satellites from a random start, skipping full
    ones, so consecutive users land on consecutive satellites.
    """
    N, K, J = scenario.dims
    require_counting_feasible(K, J, q_s, q_l)
    rng = np.random.default_rng(rng)
    cap = math.floor(q_s + 1e-12)
    want = target_count(q_l, J)
    order = rng.permutation(K)
    cursor = int(rng.integers(J))
    q = np.zeros((K, J))
    load = np.zeros(J, dtype=int)
    for k in order:
        got = 0
        for _ in range(J):
            if got == want:
                break
            j = cursor % J
            cursor += 1
            if load[j] < cap:
                q[k, j] = 1.0
                load[j] += 1
                got += 1
    return MatchingMatrix(_complete(q, order, q_s, q_l), q_s, q_l)


def centralized_allocate(K, J):
    """Every satellite detects every user: the rate upper bound (ignores q_s)."""
    return MatchingMatrix(np.ones((K, J)), q_s=K, q_l=J)


def _row_patterns(J, need):
    """All 0/1 rows with at least ``need`` ones, lexicographically descending."""
    return [np.array(bits, dtype=float)
            for bits in itertools.product((1, 0), repeat=J) if sum(bits) >= need]


def count_candidates(K, J, q_l):
    """Upper bound on enumerated matchings: row patterns ** K."""
    need = math.ceil(q_l - 1e-12)
    per_row = sum(math.comb(J, r) for r in range(need, J + 1))
    return per_row ** K


def exhaustive_allocate(scenario, q_s, q_l, params=None, budget=10**7):
    """Global optimum over all binary matchings meeting C1-C3.

    Depth-first over users with column-capacity pruning. Ties keep the
    lexicographically largest row-major bit pattern met first.
    """
    params = params or RateModelParams.from_scenario(scenario)
    N, K, J = scenario.dims
    require_counting_feasible(K, J, q_s, q_l)
    count = count_candidates(K, J, q_l)
    if count > budget:
        raise BudgetExceededError(count, budget)
    cap = math.floor(q_s + 1e-12)
    rows = _row_patterns(J, math.ceil(q_l - 1e-12))
    q = np.zeros((K, J))
    load = np.zeros(J)
    best = [-np.inf, None]

    def visit(k):
        if k == K:
            r = sum_rate(scenario, params, q)
            if r > best[0]:
                best[0], best[1] = r, q.copy()
            return
        for row in rows:
            if np.any(load + row > cap):
                continue
            q[k] = row
            load[:] += row
            visit(k + 1)
            load[:] -= row
        q[k] = 0.0

    visit(0)
    if best[1] is None:
        raise InfeasibleError("no binary matching satisfies the constraints")
    return MatchingMatrix(best[1], q_s, q_l)
