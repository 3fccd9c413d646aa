import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nscq.expr import var
from nscq.system import FeasibilitySystem
from nscq.vcalc import (NotInOmegaError, dist_omega, normal_cone_omega, phi0, phi0_subdifferential_elements,
                        project_omega)


@pytest.mark.parametrize("a, b, branch, inside, outside", [
    (0.0, 1.0, "first-zero", [(5.0, 0.0), (-2.0, 0.0)], [(0.0, 1.0)]),
    (1.0, 0.0, "second-zero", [(0.0, 3.0), (0.0, -1.0)], [(1.0, 0.0)]),
    (0.0, 0.0, "both-zero", [(-1.0, -2.0), (4.0, 0.0), (0.0, -3.0), (0.0, 2.0)], [(1.0, 1.0), (1.0, -1.0)]),
])
def test_normal_cone_branches(a, b, branch, inside, outside):
    cone = normal_cone_omega(a, b)
    assert cone.branch == branch
    for v in inside:
        assert cone.contains(v)
    for v in outside:
        assert not cone.contains(v)


@pytest.mark.parametrize("a, b", [(1.0, 1.0), (-1.0, 0.0), (0.0, -0.5)])
def test_normal_cone_outside_omega(a, b):
    with pytest.raises(NotInOmegaError):
        normal_cone_omega(a, b)


@pytest.mark.parametrize("a, b, l1, linf", [(1.0, 0.0, 0.0, 0.0), (-1.0, -2.0, 3.0, 2.0), (2.0, 3.0, 2.0, 2.0)])
def test_dist_omega(a, b, l1, linf):
    assert dist_omega(a, b, "l1") == l1
    assert dist_omega(a, b, "linf") == linf


@pytest.mark.parametrize("a, b, expected", [(1.0, 0.0, (1.0, 0.0)), (-1.0, -2.0, (0.0, 0.0)),
                                            (2.0, 3.0, (0.0, 3.0)), (2.0, 2.0, (2.0, 0.0))])
def test_project_omega(a, b, expected):
    assert project_omega(a, b) == expected


def test_distance_matches_candidate_oracle_on_grid():
    ticks = np.linspace(-2, 2, 41)
    for a, b in itertools.product(ticks, ticks):
        cands = [(max(a, 0.0), 0.0), (0.0, max(b, 0.0)), (0.0, 0.0)]
        l1 = min(abs(a - p) + abs(b - q) for p, q in cands)
        linf = min(max(abs(a - p), abs(b - q)) for p, q in cands)
        assert abs(dist_omega(a, b, "l1") - l1) <= 1e-12
        assert abs(dist_omega(a, b, "linf") - linf) <= 1e-12


@settings(max_examples=300, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_projection_is_nearest_point(a, b):
    p = np.array(project_omega(a, b))
    assert p.min() >= 0 and p[0] * p[1] == 0
    # compare against a dense sample of both half-axes
    t = np.linspace(0, 10, 2001)
    best = min(np.hypot(a - t, b).min(), np.hypot(a, b - t).min())
    assert np.hypot(a - p[0], b - p[1]) <= best + 1e-12


def test_phi0_cubic_cp_perturbed(cubic_sys):
    x, y, u1, u2 = -2.0, -2.1, 9.0, 0.0
    expected = (abs(x ** 2 + y - 2) + abs(3 * y ** 2 - 3 - u1 + u2)
                + abs(min(-(x - y), u1)) + abs(min(-(y - 3), u2)))
    # the value-function inequality is inactive there
    assert phi0(cubic_sys, [x, y, u1, u2]) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(1.43)


def test_phi0_single_equality():
    x = var("x")
    sys = FeasibilitySystem(["x"], h=[x])
    for eps in (1e-3, -0.25, 2.0):
        assert phi0(sys, [eps]) == abs(eps)


def test_phi0_vanishes_on_feasible(cubic_sys, sawtooth):
    # V comes from a refined grid search, exact up to rounding
    assert phi0(cubic_sys, [-2.0, -2.0, 9.0, 0.0]) <= 1e-10
    assert phi0(sawtooth, [0.0, 0.0, 0.5, 0.5]) == 0.0


def test_certificate_inactive_constraints():
    x = var("x")
    sys = FeasibilitySystem(["x"], g=[x - 1])
    certs = phi0_subdifferential_elements(sys, [0.0])
    assert len(certs) == 1 and np.all(certs[0].vector == 0)


def test_certificate_violated_equality():
    x, y = var("x"), var("y")
    sys = FeasibilitySystem(["x", "y"], h=[x + 2 * y])
    certs = phi0_subdifferential_elements(sys, [1.0, 0.0])
    assert len(certs) == 1
    assert certs[0].lam_h[0] == 1.0
    np.testing.assert_array_equal(certs[0].vector, [1.0, 2.0])


def test_certificates_at_biactive_pair():
    """G = x, H = y at the origin: the term |min(x, y)|."""
    x, y = var("x"), var("y")
    sys = FeasibilitySystem(["x", "y"], G=[x], H=[y])
    certs = phi0_subdifferential_elements(sys, [0.0, 0.0])
    vecs = {tuple(c.vector) for c in certs}
    # hand enumeration of the generators of the subdifferential of |min(x, y)| at 0
    expected = {(0.0, 0.0), (-1.0, 0.0), (0.0, -1.0), (-1.0, -1.0), (1.0, 0.0), (0.0, 1.0)}
    assert vecs == {tuple(float(t) for t in v) for v in expected}
    for c in certs:
        lg, lh = c.lam_G[0], c.lam_H[0]
        assert (lg > 0 and lh > 0) or lg * lh == 0


@settings(max_examples=100, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1))
def test_phi0_gradients_lie_in_certificate_hull(a, b):
    """At differentiable points of phi0 its gradient is one of the certificate vectors."""
    x, y = var("x"), var("y")
    sys = FeasibilitySystem(["x", "y"], g=[x + y - 0.5], h=[x - y * y], G=[x], H=[y + 0.25])
    p = np.array([a, b])
    h = 1e-7
    grad = np.array([(phi0(sys, p + h * e) - phi0(sys, p - h * e)) / (2 * h) for e in np.eye(2)])
    certs = phi0_subdifferential_elements(sys, p, tol=1e-6)
    if len(certs) > 1:
        return
    assert np.allclose(grad, certs[0].vector, atol=1e-5)
