import numpy as np
import pytest

from nscq.cq import SamplingPlan
from nscq.errorbound import (FeasibleGrid, VariantPreconditionError, distance_to_feasible,
                             estimate_error_bound_modulus, residual_phi, sample_feasible_points)
from nscq.expr import power, var
from nscq.sets import Box
from nscq.system import FeasibilitySystem, is_feasible

x1, x2 = var("x1"), var("x2")
STAR = np.array([-2.0, -2.0, 9.0, 0.0])


def test_residual_zero_at_feasible(cubic_sys):
    assert residual_phi(cubic_sys, STAR) <= 1e-10


def test_residual_cubic_perturbed(cubic_sys):
    x, y, u1, u2 = -2.0, -2.1, 9.0, 0.0
    g = [x - y, y - 3]
    # value-function term inactive; upper equality, Lagrangian equation, complementarity terms
    expected = (abs(x ** 2 + y - 2) + abs(3 * y ** 2 - 3 - u1 + u2)
                + max(g[0], -u1, g[0] - u1, min(-g[0], u1)) + max(g[1], -u2, g[1] - u2, min(-g[1], u2)))
    assert residual_phi(cubic_sys, [x, y, u1, u2]) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(1.43)


def test_residual_single_pair():
    sys = FeasibilitySystem(["x1", "x2"], G=[x1], H=[x2])
    assert residual_phi(sys, [-1.0, -2.0]) == 3.0
    assert residual_phi(sys, [-1.0, -2.0], norm="linf") == 2.0


def test_strict_variant(cubic_sys):
    # pairs at the solution: 0 = -g1 < u1 and -g2 > u2 = 0
    z = STAR + np.array([0.0, 0.0, 0.5, -0.25])
    assert residual_phi(cubic_sys, z, "strict", anchor=STAR) == pytest.approx(0.5 + 0.25 + 0.25)


def test_strict_variant_requires_no_biactive_pairs():
    sys = FeasibilitySystem(["x1", "x2"], G=[x1], H=[x2])
    with pytest.raises(VariantPreconditionError):
        residual_phi(sys, [0.1, 0.1], "strict", anchor=[0.0, 0.0])
    with pytest.raises(VariantPreconditionError):
        residual_phi(sys, [0.1, 0.1], "strict")


def test_residual_vanishes_iff_functionally_feasible(cubic_sys, rng):
    for _ in range(40):
        z = STAR + rng.normal(scale=0.5, size=4) * rng.integers(0, 2, 4)
        assert (residual_phi(cubic_sys, z) <= 1e-10) == (is_feasible(cubic_sys, z).residuals.functional <= 1e-10)


def test_distance_feasible_point_is_zero(cubic_sys):
    assert distance_to_feasible(cubic_sys, STAR).value == 0.0


@pytest.mark.parametrize("method", ["grid", "penalty"])
def test_distance_single_equality(method):
    sys = FeasibilitySystem(["x1", "x2"], h=[x1])
    est = distance_to_feasible(sys, [0.3, 0.0], method)
    assert est.value == pytest.approx(0.3, abs=1e-6)
    assert not est.flagged


@pytest.fixture(scope="module")
def circle():
    sys = FeasibilitySystem(["x1", "x2"], h=[power(x1, 2) + power(x2, 2) - 1], blocks=[Box([-2, -2], [2, 2])])
    return sys, FeasibleGrid(sys, np.zeros(2), 1.5, 201, tol=2e-2)


@pytest.mark.parametrize("seed", range(5))
def test_grid_not_below_penalty_on_smooth_systems(circle, seed):
    sys, grid = circle
    z = np.random.default_rng(seed).uniform(-1.5, 1.5, 2)
    g = grid.distance(z)
    p = distance_to_feasible(sys, z, "penalty")
    assert g.value >= p.value - grid.resolution
    assert abs(g.value - abs(np.linalg.norm(z) - 1)) <= grid.resolution + 1e-6


def test_error_bound_trivial_at_interior_point():
    sys = FeasibilitySystem(["x1"], g=[x1 - 1], blocks=[Box([-5.0], [5.0])])
    rep = estimate_error_bound_modulus(sys, [0.0], SamplingPlan(K=3, points_per_radius=8))
    assert rep.trivial and rep.alpha_hat is None and rep.samples == 32


def test_error_bound_cubic_cp_route(cubic_sys):
    rep = estimate_error_bound_modulus(cubic_sys, STAR, SamplingPlan(radii=[1e-2], points_per_radius=50))
    assert rep.finite and rep.route == "full-rank condition holds" and rep.strict_complementarity


def test_error_bound_linf_no_larger_than_l1_ratio(cubic_sys):
    plan = SamplingPlan(radii=[1e-2], points_per_radius=30)
    l1 = estimate_error_bound_modulus(cubic_sys, STAR, plan)
    linf = estimate_error_bound_modulus(cubic_sys, STAR, plan, norm="linf")
    # the l∞ residual is smaller, so the ratio can only grow
    assert linf.alpha_hat >= l1.alpha_hat


def test_negative_control_diverges():
    sys = FeasibilitySystem(["x1"], h=[power(x1, 2)])
    alphas = [estimate_error_bound_modulus(sys, [0.0], SamplingPlan(radii=[r], points_per_radius=4)).alpha_hat
              for r in (1e-1, 1e-2)]
    assert alphas[1] >= 10 * alphas[0] * (1 - 1e-9)


def test_sample_feasible_points(cubic_sys):
    sys = FeasibilitySystem(["x1", "x2"], h=[x1 - power(x2, 2)])
    pts = sample_feasible_points(sys, [0.0, 0.0], 1e-2, 5, seed=3)
    assert pts
    for z in pts:
        assert is_feasible(sys, z).feasible and np.linalg.norm(z) <= 1e-2
