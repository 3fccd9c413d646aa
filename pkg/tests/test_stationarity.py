import numpy as np
import pytest

from nscq.bilevel import combined_penalty
from nscq.expr import abs_, max_, min_, power, var
from nscq.sets import Box
from nscq.stationarity import (NOT_STATIONARY, STATIONARY, check_mstationarity, compass_search, solve_penalized)
from nscq.system import FeasibilitySystem, active_index_sets
from nscq.vcalc import phi0

x1, x2 = var("x1"), var("x2")


@pytest.mark.parametrize("point", [[-2.0, -2.0, 9.0, 0.0], [-1.0, 1.0, 0.0, 0.0]])
def test_cubic_cp_points_are_stationary(cubic_cp, point):
    sys = cubic_cp.system
    rep = check_mstationarity(sys, cubic_cp.objective, point)
    assert rep.verdict == STATIONARY
    assert np.linalg.norm(rep.objective_vertex + rep.multipliers.combination(sys, point)) <= 1e-8


def test_multiplier_sign_pattern(cubic_cp):
    sys, point = cubic_cp.system, [-2.0, -2.0, 9.0, 0.0]
    rep = check_mstationarity(sys, cubic_cp.objective, point)
    idx = active_index_sets(sys, point)
    mv = rep.multipliers
    assert np.all(mv.lam_g >= -1e-12)
    assert np.all(mv.lam_H[idx.zero_G] == 0) and np.all(mv.lam_G[idx.zero_H] == 0)
    inactive = [i for i in range(sys.n) if i not in idx.active_g]
    assert np.all(mv.lam_g[inactive] == 0)


def test_quadratic_interior_minimum():
    f = power(x1 - 1, 2) + power(x2 + 0.5, 2)
    sys = FeasibilitySystem(["x1", "x2"], blocks=[Box([-3, -3], [3, 3])])
    rep = check_mstationarity(sys, f, [1.0, -0.5])
    assert rep.verdict == STATIONARY
    mv = rep.multipliers
    assert not np.any(mv.eta) and mv.lam_g.size == mv.lam_h.size == 0


def test_linear_objective_never_stationary():
    sys = FeasibilitySystem(["x1"])
    for x in (-1.0, 0.0, 3.0):
        assert check_mstationarity(sys, x1, [x]).verdict == NOT_STATIONARY


def test_box_corner_stationary_for_linear_objective():
    sys = FeasibilitySystem(["x1"], blocks=[Box([0.0], [1.0])])
    assert check_mstationarity(sys, x1, [0.0]).verdict == STATIONARY
    assert check_mstationarity(sys, x1, [1.0]).verdict == NOT_STATIONARY


@pytest.mark.parametrize("f, verdict", [
    (abs_(x1), STATIONARY),
    (max_(x1, -2 * x1), STATIONARY),
    (-abs_(x1), NOT_STATIONARY),
    (min_(x1, -x1), NOT_STATIONARY),
])
def test_kinked_objectives(f, verdict):
    # limiting subgradients: whole hull at convex kinks, branch gradients at concave ones
    sys = FeasibilitySystem(["x1"])
    assert check_mstationarity(sys, f, [0.0]).verdict == verdict


def test_biactive_branch_pattern():
    # min x1 + x2 subject to 0 <= x1 _|_ x2 >= 0: the origin is M-stationary
    sys = FeasibilitySystem(["x1", "x2"], G=[x1], H=[x2])
    rep = check_mstationarity(sys, x1 + x2, [0.0, 0.0])
    assert rep.verdict == STATIONARY
    lg, lh = rep.multipliers.lam_G[0], rep.multipliers.lam_H[0]
    assert (lg > 0 and lh > 0) or lg * lh == 0
    # min -x1 - x2 has descent along both branches
    assert check_mstationarity(sys, -x1 - x2, [0.0, 0.0]).verdict == NOT_STATIONARY


# penalized solver ---------------------------------------------------------------

def test_penalty_single_equality():
    sys = FeasibilitySystem(["x1"], h=[x1])
    res = solve_penalized(sys, power(x1, 2), [0.5])
    assert abs(res.point[0]) <= 1e-4 and res.residuals[-1] <= 1e-4
    assert not res.infeasible


def test_penalty_infeasible_toy_flagged():
    sys = FeasibilitySystem(["x1"], h=[power(x1, 2) + 1])
    res = solve_penalized(sys, x1, [0.3])
    assert res.infeasible and res.residuals[-1] >= 1.0 - 1e-9


def test_exact_penalty_keeps_local_solution(cubic_cp):
    star = np.array([-2.0, -2.0, 9.0, 0.0])
    sys = cubic_cp.system
    mu = 50.0
    F = lambda z: float(z[0] + z[1]) + mu * combined_penalty(cubic_cp, z)  # noqa: E731
    # derivative-free search started at the solution stays put
    z, _, _, _ = compass_search(F, star, sys.project_C, step=1e-3, min_step=1e-9, budget=4000)
    assert np.linalg.norm(z - star) <= 1e-3
    # and a start nearby returns within 1e-3
    z, _, _, _ = compass_search(F, star + np.array([0.0, 0.0, 3e-4, 0.0]), sys.project_C,
                                step=1e-3, min_step=1e-10, budget=20000)
    assert np.linalg.norm(z - star) <= 1e-3


@pytest.mark.parametrize("start", [[0.5], [-0.8], [2.0]])
def test_penalty_trace_monotone(start):
    sys = FeasibilitySystem(["x1"], h=[x1], blocks=[Box([-3.0], [3.0])])
    res = solve_penalized(sys, power(x1 - 1, 2), start)
    r = res.residuals
    assert all(b <= a + 1e-12 for a, b in zip(r, r[1:]))


def test_penalty_trace_monotone_on_cubic_cp(cubic_cp):
    res = solve_penalized(cubic_cp.system, cubic_cp.objective, [0.0, 0.5, 0.0, 0.0],
                          schedule=(1e0, 1e1, 1e2, 1e3))
    r = res.residuals
    assert all(b <= a + 1e-12 for a, b in zip(r, r[1:]))
    assert phi0(cubic_cp.system, res.point) == pytest.approx(r[-1])


def test_compass_search_rosenbrock_valley():
    f = lambda z: (1 - z[0]) ** 2 + 10 * (z[1] - z[0] ** 2) ** 2  # noqa: E731
    z, fz, _, exhausted = compass_search(f, [-1.0, 1.0], lambda z: z, step=0.5, budget=50000)
    assert fz <= 1e-8 and not exhausted


def test_compass_search_budget_flag():
    f = lambda z: float(np.sum(z ** 2))  # noqa: E731
    _, _, evals, exhausted = compass_search(f, [1.0, 1.0], lambda z: z, budget=10)
    assert exhausted and evals == 10
