import itertools

import cvxpy as cp
import numpy as np
import pytest
from scipy.optimize import minimize

from mudalloc.errors import InfeasibleError, NumericalError
from mudalloc.polytope import MatchingPolytope, PGAConfig, Projector, maximize, project


def cvx_projection(point, q_s, q_l):
    K, J = point.shape
    X = cp.Variable((K, J))
    cons = [X >= 0, X <= 1, cp.sum(X, axis=1) >= q_l, cp.sum(X, axis=0) <= q_s]
    cp.Problem(cp.Minimize(cp.sum_squares(X - point)), cons).solve(
        solver="CLARABEL", tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    return X.value


def test_construction_certifies_infeasibility():
    with pytest.raises(InfeasibleError):
        MatchingPolytope(32, 8, 3, 12.0)
    with pytest.raises(InfeasibleError):
        MatchingPolytope(2, 2, 5, 3)
    poly = MatchingPolytope(32, 8, 4, 1)
    assert poly.contains(poly.uniform_point())


def test_single_row_hand_example():
    x = project(np.zeros((1, 2)), MatchingPolytope(1, 2, 1, 1))
    assert np.abs(x - 0.5).max() <= 1e-9


def test_interior_point_unchanged():
    poly = MatchingPolytope(4, 3, 2, 1)
    x0 = np.full((4, 3), 0.45)
    assert poly.contains(x0)
    assert np.array_equal(project(x0, poly), x0)


def test_box_only_is_clamp():
    rng = np.random.default_rng(0)
    p = rng.normal(0.5, 1.0, (5, 3))
    assert np.allclose(project(p, MatchingPolytope(5, 3, 5, 0)), np.clip(p, 0, 1), atol=1e-12)


@pytest.mark.parametrize("K,J,q_s,q_l", [(4, 2, 2, 1), (6, 3, 2, 1), (5, 4, 3, 2), (8, 4, 4, 2),
                                         (3, 5, 3, 4.5), (7, 3, 2.5, 0.5)])
def test_projection_matches_convex_solver(K, J, q_s, q_l):
    rng = np.random.default_rng(K * 31 + J)
    poly = MatchingPolytope(K, J, q_s, q_l)
    for _ in range(5):
        p = rng.normal(0.5, 0.8, (K, J))
        x = project(p, poly, tol=1e-12)
        ref = cvx_projection(p, q_s, q_l)
        assert np.abs(x - ref).max() < 1e-6
        assert poly.violation(x) < 1e-9


def test_projection_idempotent_and_nonexpansive():
    poly = MatchingPolytope(6, 3, 3, 1)
    rng = np.random.default_rng(1)
    for _ in range(200):
        a, b = rng.normal(0.5, 1, (2, 6, 3))
        pa, pb = project(a, poly), project(b, poly)
        assert np.abs(project(pa, poly) - pa).max() <= 1e-9
        assert np.linalg.norm(pa - pb) <= np.linalg.norm(a - b) + 1e-9


def test_warm_projector_agrees_with_cold():
    poly = MatchingPolytope(8, 4, 2, 1)  # tight: K q_l = J q_s
    proj = Projector(poly, tol=1e-12)
    rng = np.random.default_rng(3)
    x = poly.uniform_point()
    for _ in range(10):
        p = x + 0.1 * rng.normal(size=x.shape)
        warm = proj(p)
        cold = project(p, poly, tol=1e-12)
        assert np.abs(warm - cold).max() < 1e-8
        x = warm
    assert proj.calls == 10 and proj.sweeps > 0


# -- projected-gradient ascent -------------------------------------------------

def test_interior_maximizer_recovered():
    poly = MatchingPolytope(3, 3, 3, 0.5)
    x0 = np.array([[0.2, 0.5, 0.7], [0.3, 0.3, 0.3], [0.9, 0.1, 0.4]])

    def f(x):
        d = x - x0
        return -float(np.sum(d * d)), -2.0 * d

    res = maximize(f, np.full((3, 3), 0.5), poly)
    assert res.converged
    assert np.abs(res.x - x0).max() < 1e-6


def test_linear_objective_reaches_vertex():
    poly = MatchingPolytope(4, 3, 4, 0)
    c = np.random.default_rng(5).normal(size=(4, 3))
    res = maximize(lambda x: (float(np.sum(c * x)), c), np.full((4, 3), 0.5), poly)
    assert np.array_equal(res.x, (c > 0).astype(float))


def test_zero_gradient_entries_stay():
    poly = MatchingPolytope(2, 2, 2, 0)
    c = np.array([[1.0, 0.0], [-1.0, 0.0]])
    start = np.array([[0.3, 0.37], [0.6, 0.81]])
    res = maximize(lambda x: (float(np.sum(c * x)), c), start, poly)
    assert res.x[0, 1] == 0.37 and res.x[1, 1] == 0.81
    assert res.x[0, 0] == 1.0 and res.x[1, 0] == 0.0


def grid_oracle(f, q_s, q_l, step=0.05):
    """Best feasible point of a 2x2 problem on a grid, then SLSQP polish."""
    g = np.arange(0.0, 1.0 + 1e-12, step)
    best, arg = -np.inf, None
    for v in itertools.product(g, repeat=4):
        x = np.array(v).reshape(2, 2)
        if (x.sum(1) >= q_l - 1e-12).all() and (x.sum(0) <= q_s + 1e-12).all():
            val = f(x)
            if val > best:
                best, arg = val, x
    cons = [{"type": "ineq", "fun": lambda z: z.reshape(2, 2).sum(1) - q_l},
            {"type": "ineq", "fun": lambda z: q_s - z.reshape(2, 2).sum(0)}]
    res = minimize(lambda z: -f(z.reshape(2, 2)), arg.ravel(), method="SLSQP",
                   bounds=[(0, 1)] * 4, constraints=cons, options={"ftol": 1e-14})
    return max(best, -res.fun)


@pytest.mark.parametrize("seed", range(4))
def test_concave_quadratic_matches_grid_oracle(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(4, 4))
    H = -(A @ A.T) - 0.1 * np.eye(4)
    b = rng.normal(size=4) * 2
    q_s, q_l = 1.5, 0.5

    def f(x):
        z = x.ravel()
        return 0.5 * z @ H @ z + b @ z

    obj = lambda x: (f(x), (H @ x.ravel() + b).reshape(2, 2))
    poly = MatchingPolytope(2, 2, q_s, q_l)
    res = maximize(obj, poly.uniform_point(), poly, PGAConfig(rel_tol=1e-12, grad_tol=1e-9))
    assert abs(res.value - grid_oracle(f, q_s, q_l)) < 1e-4
    assert poly.violation(res.x) < 1e-8
    assert np.all(np.diff(res.trace) > 0)


def test_nonfinite_objective_raises_with_iterate():
    poly = MatchingPolytope(2, 2, 2, 0)

    def f(x):
        return (float("nan") if x[0, 0] > 0.6 else float(x.sum())), np.ones_like(x)

    with pytest.raises(NumericalError) as info:
        maximize(f, np.full((2, 2), 0.5), poly)
    assert info.value.iterate.shape == (2, 2)


def test_config_validation():
    for bad in (dict(shrink=1.5), dict(grad_tol=0), dict(max_iters=0)):
        with pytest.raises(ValueError):
            PGAConfig(**bad)
