import math

import numpy as np
import pytest

from nscq.bilevel import (BilevelProgram, EmptyFeasibleSetError, PreconditionError, augmented_kkt_jacobian,
                          build_combined_program, combined_penalty, danskin_generators, feasibility_jacobian,
                          kkt_jacobian, kkt_multipliers, multiplier_block, value_function, w_generators)
from nscq.examples import CUBIC_POINTS, cubic_value, exponential_points, exponential_value
from nscq.expr import const, power, var
from nscq.system import is_feasible

LN2 = math.log(2.0)
OPT, INTERIOR = CUBIC_POINTS["optimal"], CUBIC_POINTS["interior"]


# value function -------------------------------------------------------------------

@pytest.mark.parametrize("x, V, S", [(0.0, -2.0, [1.0]), (-2.0, -2.0, [-2.0, 1.0]), (-3.0, -18.0, [-3.0]),
                                     (1.5, 1.5 ** 3 - 4.5, [1.5])])
def test_cubic_value_function(cubic, x, V, S):
    sample = value_function(cubic, [x])
    assert sample.value == pytest.approx(V, abs=1e-9)
    assert sorted(sample.minimizers[:, 0]) == pytest.approx(S, abs=1e-4)


def test_cubic_value_matches_formula(cubic):
    for x in np.linspace(-3, 2, 25):
        assert value_function(cubic, [x]).value == pytest.approx(cubic_value(x), abs=1e-6)


@pytest.mark.parametrize("x", [(1.0, 2.0), (2.0, 1.0), (0.5, 0.5), (-1.0, 3.0)])
def test_exponential_value_function(exponential, x):
    sample = value_function(exponential, x)
    assert sample.value == pytest.approx(exponential_value(*x), abs=1e-9)


def test_exponential_solution_set(exponential):
    assert value_function(exponential, [1.0, 2.0]).minimizers[:, 0] == pytest.approx([LN2])
    assert value_function(exponential, [2.0, 1.0]).minimizers[:, 0] == pytest.approx([-LN2])


def test_empty_lower_feasible_set():
    x, y = var("x"), var("y")
    blp = BilevelProgram(["x"], ["y"], F=x, f=y, g=[x - y], y_lower=[-1.0], y_upper=[1.0])
    with pytest.raises(EmptyFeasibleSetError):
        value_function(blp, [2.0])


# subgradient generators -----------------------------------------------------------

def test_danskin_at_tie(exponential):
    gens = danskin_generators(exponential, [1.0, 1.0])
    got = sorted(map(tuple, np.round(gens, 9)))
    assert got == [(0.5, -0.5), (2.0, -2.0)]


def test_danskin_single(exponential):
    np.testing.assert_allclose(danskin_generators(exponential, [1.0, 2.0]), [[2.0, -2.0]], atol=1e-9)


def test_danskin_without_x_dependence():
    x, y = var("x"), var("y")
    blp = BilevelProgram(["x"], ["y"], F=x, f=power(y, 2), y_lower=[-1.0], y_upper=[1.0])
    np.testing.assert_array_equal(danskin_generators(blp, [0.3]), [[0.0]])


def test_danskin_precondition(cubic):
    with pytest.raises(PreconditionError):
        danskin_generators(cubic, [0.0])


@pytest.mark.parametrize("x, expected", [(0.0, 0.0), (-3.0, 24.0), (1.5, 3 * 1.5 ** 2 - 3)])
def test_w_generators(cubic, x, expected):
    w = w_generators(cubic, [x])
    assert w.mfcq and w.kkt_solvable
    np.testing.assert_allclose(w.generators, [[expected]], atol=1e-6)


@pytest.mark.parametrize("x", [-3.0, -2.5, 1.5, 2.0])
def test_w_generator_matches_finite_difference(cubic, x):
    h = 1e-5
    V = lambda t: value_function(cubic, [t]).value  # noqa: E731
    if x - h < -3.0:
        fd = (-3 * V(x) + 4 * V(x + h) - V(x + 2 * h)) / (2 * h)
    elif x + h > 2.0:
        fd = (3 * V(x) - 4 * V(x - h) + V(x - 2 * h)) / (2 * h)
    else:
        fd = (V(x + h) - V(x - h)) / (2 * h)
    gens = w_generators(cubic, [x]).generators
    assert gens.shape == (1, 1)
    assert abs(gens[0, 0] - fd) <= 1e-4


def test_kkt_multipliers_singleton(cubic):
    active, verts, mfcq = kkt_multipliers(cubic, [-3.0], [-3.0])
    assert active == [0] and mfcq and len(verts) == 1
    assert verts[0][0] == pytest.approx([24.0, 0.0])


# combined program ---------------------------------------------------------------------

def test_cubic_cp_shape(cubic_cp):
    sys = cubic_cp.system
    assert sys.variables == ["x", "y", "u1", "u2"]
    assert (sys.n, sys.m, sys.p) == (1, 2, 2)
    assert is_feasible(sys, OPT).feasible and is_feasible(sys, INTERIOR).feasible


def test_exponential_cp_shape(exponential_cp):
    sys = exponential_cp.system
    assert sys.d == 5 and sys.p == 2
    for p in exponential_points().values():
        assert is_feasible(sys, p).feasible


def test_cp_without_lower_inequalities():
    x, y = var("x"), var("y")
    blp = BilevelProgram(["x"], ["y"], F=x, f=power(y - x, 2), y_lower=[-5.0], y_upper=[5.0])
    cp = build_combined_program(blp)
    assert cp.system.p == 0 and cp.system.variables == ["x", "y"]


@pytest.mark.parametrize("x", [-2.5, -1.0, 0.5])
def test_solutions_extend_to_cp_points(cubic, cubic_cp, x):
    sample = value_function(cubic, [x])
    for y in sample.minimizers[:, 0]:
        _, verts, _ = kkt_multipliers(cubic, [x], [y])
        assert verts
        # the upper equality is not part of the lower problem; check the lower-level rows only
        point = np.r_[x, y, verts[0][0]]
        vals = cubic_cp.system.values(point)
        assert abs(vals["h"][1]) <= 1e-8
        assert vals["g"][0] <= 1e-8
        assert min(abs(min(a, b)) for a, b in zip(vals["G"], vals["H"])) <= 1e-8


# rank-test matrices --------------------------------------------------------------------

def test_feasibility_jacobian_at_optimum(cubic_cp):
    rep = feasibility_jacobian(cubic_cp, OPT)
    np.testing.assert_allclose(rep.matrix, [[-4.0, 1.0], [1.0, -1.0]])
    assert rep.rank.rank == 2 and rep.meets_target


def test_feasibility_jacobian_interior(cubic_cp):
    rep = feasibility_jacobian(cubic_cp, INTERIOR)
    np.testing.assert_allclose(rep.matrix, [[-2.0, 1.0]])
    assert rep.rank.rank == 1 and not rep.meets_target


def test_feasibility_jacobian_empty():
    x, y = var("x"), var("y")
    blp = BilevelProgram(["x"], ["y"], F=x, f=power(y, 2), y_lower=[-1.0], y_upper=[1.0])
    cp = build_combined_program(blp)
    rep = feasibility_jacobian(cp, [0.0, 0.0])
    assert rep.matrix.shape == (0, 2) and rep.rank.rank == 0


def test_kkt_jacobian_interior(cubic_cp):
    rep = kkt_jacobian(cubic_cp, INTERIOR)
    np.testing.assert_allclose(rep.matrix, [[0.0, 6.0], [-2.0, 1.0]])
    assert rep.rank.rank == 2 and rep.target == 2


def test_kkt_jacobian_optimum(cubic_cp):
    rep = kkt_jacobian(cubic_cp, OPT)
    assert rep.matrix.shape[1] == 3 and rep.rank.rank == 3 and rep.target == 3


def test_rank_decomposition(cubic_cp):
    sj = feasibility_jacobian(cubic_cp, OPT)
    assert sj.meets_target
    assert kkt_jacobian(cubic_cp, OPT).rank.rank == sj.rank.rank + multiplier_block(cubic_cp, OPT).rank.rank


def test_kkt_jacobian_identity_hessian():
    x, y1, y2 = var("x"), var("y1"), var("y2")
    blp = BilevelProgram(["x"], ["y1", "y2"], F=x, f=0.5 * power(y1 - x, 2) + 0.5 * power(y2, 2),
                         y_lower=[-5.0, -5.0], y_upper=[5.0, 5.0])
    cp = build_combined_program(blp)
    rep = kkt_jacobian(cp, [0.0, 0.0, 0.0])
    assert rep.rank.rank == 2


@pytest.mark.parametrize("family", ["tied", "upper-bound", "lower-bound"])
def test_augmented_kkt_jacobian_rank_four(exponential_cp, family):
    p = exponential_points()[family]
    gens = danskin_generators(exponential_cp.program, p[:2])
    for w in list(gens) + [gens.mean(axis=0)]:
        ranks = [augmented_kkt_jacobian(exponential_cp, p, a, w).rank.rank for a in (0, 1)]
        assert ranks == [4, 4]


@pytest.mark.parametrize("family", ["tied", "upper-bound", "lower-bound"])
def test_alpha_changes_rank_by_at_most_one(exponential_cp, family):
    p = exponential_points()[family]
    w = np.array([7.0, -1.0])  # arbitrary vector: the bound holds for any row
    m0 = augmented_kkt_jacobian(exponential_cp, p, 0, w)
    m1 = augmented_kkt_jacobian(exponential_cp, p, 1, w)
    np.testing.assert_array_equal(m0.matrix[:-1], m1.matrix[:-1])
    assert not m0.matrix[-1].any()
    assert abs(m1.rank.rank - m0.rank.rank) <= 1


def test_augmented_rejects_bad_input(exponential_cp):
    p = exponential_points()["tied"]
    with pytest.raises(ValueError):
        augmented_kkt_jacobian(exponential_cp, p, 2, [0.0, 0.0])
    with pytest.raises(ValueError):
        augmented_kkt_jacobian(exponential_cp, p, 1, [0.0])


# penalty ---------------------------------------------------------------------------------

@pytest.mark.parametrize("fixture, point, expected", [
    ("cubic_cp", [-2.0, -2.0, 9.0, 0.0], 0.0),
    ("cubic_cp", [-2.0, -2.0, 8.0, 0.0], 1.0),
    ("exponential_cp", [1.0, 1.0, 0.0, 0.0, 0.0], 0.5),
])
def test_combined_penalty(request, fixture, point, expected):
    cp = request.getfixturevalue(fixture)
    assert combined_penalty(cp, point) == pytest.approx(expected, abs=1e-9)


def test_combined_penalty_linf(cubic_cp):
    p = [-2.0, -2.1, 9.0, 0.0]
    assert combined_penalty(cubic_cp, p, "linf") <= combined_penalty(cubic_cp, p) + 1e-15
    assert combined_penalty(cubic_cp, p, "linf") == pytest.approx(1.23)


def test_upper_inequalities_enter_penalty():
    x, y = var("x"), var("y")
    blp = BilevelProgram(["x"], ["y"], F=x, f=power(y, 2), G=[x - 1 + const(0.0) * y],
                         y_lower=[-1.0], y_upper=[1.0])
    cp = build_combined_program(blp)
    assert combined_penalty(cp, [3.0, 0.0]) == pytest.approx(2.0)
