"""Error-bound residuals and empirical modulus estimates.

The bound under study is ``d_F(x) <= alpha * phi(x)`` for ``x in C`` near a
feasible point, with ``phi`` the l1 residual of the functional constraints.
``alpha`` is estimated as the largest observed ratio over sampled points;
distances to the feasible set come from a grid oracle or a penalty
projection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import config
from .cq import SamplingPlan, _jsonable, check_fullrank
from .stationarity import minimize_with_penalty
from .system import FeasibilitySystem, active_index_sets, is_feasible, residuals
from .vcalc import dist_omega, phi0


class VariantPreconditionError(ValueError):
    pass


def residual_phi(sys: FeasibilitySystem, x, variant: str = "full", anchor=None, tol: float | None = None,
                 norm: str = "l1") -> float:
    """Residual of ``g <= 0, h = 0`` and the complementarity pairs.

    ``"full"`` measures each pair by its distance to the complementarity
    set. ``"strict"`` requires no biactive pair at ``anchor`` and measures
    ``|G_i|`` on pairs with ``G_i = 0`` there and ``|H_i|`` on the others.
    Component residuals are summed (``norm="l1"``) or maximized (``"linf"``).
    """
    if norm not in ("l1", "linf"):
        raise ValueError(f"unknown norm {norm!r}")
    v = sys.values(x)
    parts = [np.maximum(v["g"], 0.0), np.abs(v["h"])]
    if variant == "full":
        parts.append(np.array([dist_omega(a, b, norm) for a, b in zip(v["G"], v["H"])]))
    elif variant == "strict":
        if anchor is None:
            raise VariantPreconditionError("the strict variant needs an anchor point")
        idx = active_index_sets(sys, anchor, tol)
        if idx.biactive:
            raise VariantPreconditionError("biactive pairs at the anchor: strict complementarity fails")
        parts += [np.abs(v["G"][idx.zero_G]), np.abs(v["H"][idx.zero_H])]
    else:
        raise ValueError(f"unknown residual variant {variant!r}")
    comp = np.concatenate([np.ravel(p) for p in parts]) if parts else np.zeros(0)
    if comp.size == 0:
        return 0.0
    return float(comp.sum() if norm == "l1" else comp.max())


# distance to the feasible set ------------------------------------------------------

@dataclass
class DistanceEstimate:
    value: float
    method: str
    nearest: np.ndarray | None
    flagged: bool = False
    notes: list = field(default_factory=list)

    def to_dict(self):
        return _jsonable(self.__dict__)


class FeasibleGrid:
    """Feasible nodes of a uniform grid on a box, for repeated distance queries.

    The grid has an odd number of points per coordinate so that its center
    is a node. A node counts as feasible when its residual is within ``tol``
    and no larger than that of both neighbors along some grid line, so that
    a thin tolerance tube around a degenerate feasible set collapses onto
    the nodes closest to it.
    """

    def __init__(self, sys: FeasibilitySystem, center, half_width: float, points: int | None = None,
                 tol: float | None = None):
        tol = config.settings.feas_tol if tol is None else tol
        center = np.asarray(center, dtype=float)
        d = center.size
        if points is None:
            points = max(9, int(round(4000 ** (1.0 / d))))
        points = int(points) | 1
        axes = [np.linspace(c - half_width, c + half_width, points) for c in center]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        shape = mesh.shape[:-1]
        cand = mesh.reshape(-1, d)
        R = np.array([residuals(sys, z).max_residual for z in cand]).reshape(shape)
        line_min = np.zeros(shape, dtype=bool)
        for ax in range(d):
            lo = np.concatenate([np.full_like(R.take([0], axis=ax), np.inf), R.take(range(points - 1), axis=ax)], axis=ax)
            hi = np.concatenate([R.take(range(1, points), axis=ax), np.full_like(R.take([0], axis=ax), np.inf)], axis=ax)
            line_min |= (R <= lo) & (R <= hi)
        mask = (R <= tol) & line_min
        self.points = cand[mask.reshape(-1)]
        self.resolution = half_width / (points - 1) * np.sqrt(d)
        self.center = center
        self.half_width = half_width

    def distance(self, x) -> DistanceEstimate:
        if self.points.shape[0] == 0:
            return DistanceEstimate(np.inf, "grid", None, True, ["no feasible grid point"])
        gaps = np.linalg.norm(self.points - np.asarray(x, dtype=float), axis=1)
        k = int(np.argmin(gaps))
        return DistanceEstimate(float(gaps[k]), "grid", self.points[k])


def distance_to_feasible(sys: FeasibilitySystem, x, method: str = "grid", center=None, half_width: float = 1.0,
                         points: int | None = None, budget: int = 20000,
                         schedule=(1e2, 1e4, 1e6, 1e8)) -> DistanceEstimate:
    """Distance from ``x`` to the feasible set.

    ``"grid"`` scans a box around ``center`` and is exact up to the grid
    resolution. The default center is ``x`` snapped to a lattice through
    the origin, so that feasible points with coordinates on that lattice
    are nodes.
    ``"penalty"`` minimizes ``0.5 ||z - x||**2 + (k/2) phi0(z)**2`` over ``C``
    for increasing ``k`` and returns an upper bound, flagged when the final
    point is not feasible.
    """
    x = np.asarray(x, dtype=float)
    if is_feasible(sys, x).feasible:
        return DistanceEstimate(0.0, method, x.copy())
    if method == "grid":
        if center is None:
            n = max(9, int(round(4000 ** (1.0 / x.size)))) if points is None else int(points)
            spacing = 2.0 * half_width / ((n | 1) - 1)
            center = np.round(x / spacing) * spacing
        grid = FeasibleGrid(sys, center, half_width, points)
        return grid.distance(x)
    if method != "penalty":
        raise ValueError(f"unknown method {method!r}")
    res = minimize_with_penalty(lambda z: 0.5 * float(np.sum((z - x) ** 2)), lambda z: phi0(sys, z),
                                sys.project_C, x, schedule, exponent=2, budget=budget, step=0.1)
    z = res.point
    ok = is_feasible(sys, z, max(config.settings.feas_tol, 1e-6)).feasible
    notes = [] if ok else [f"final residual {phi0(sys, z):.3e}"]
    if res.budget_exhausted:
        notes.append("inner budget exhausted")
    return DistanceEstimate(float(np.linalg.norm(z - x)), "penalty", z, not ok or res.budget_exhausted, notes)


# modulus estimation ----------------------------------------------------------------

@dataclass
class ErrorBoundReport:
    alpha_hat: float | None
    samples: int
    worst_sample: np.ndarray | None
    strict_complementarity: bool
    variant: str
    method: str
    per_radius: dict
    route: str
    trivial: bool = False
    notes: list = field(default_factory=list)

    @property
    def finite(self) -> bool:
        return self.alpha_hat is not None and np.isfinite(self.alpha_hat)

    def to_dict(self):
        return _jsonable({k: getattr(self, k) for k in (
            "alpha_hat", "samples", "worst_sample", "strict_complementarity", "variant", "method",
            "per_radius", "route", "trivial", "notes")})


def _sphere_samples(sys, x, r, count, rng):
    out = []
    for _ in range(count):
        u = rng.standard_normal(sys.d)
        u /= np.linalg.norm(u)
        out.append(sys.project_C(x + r * u))
    return out


def estimate_error_bound_modulus(sys: FeasibilitySystem, x, plan: SamplingPlan | None = None, variant: str = "full",
                                 method: str | None = None, tol: float | None = None,
                                 grid_points: int | None = None, norm: str = "l1") -> ErrorBoundReport:
    """Largest observed ``d_F / phi`` over points of ``C`` on spheres around ``x``.

    One sphere per radius of ``plan``. Points with ``phi <= tol`` are
    skipped unless they are at positive distance from the feasible set, in
    which case the estimate is infinite.
    """
    tol = config.settings.feas_tol if tol is None else tol
    plan = plan or SamplingPlan()
    x = np.asarray(x, dtype=float)
    idx = active_index_sets(sys, x, tol)
    strict = not idx.biactive
    method = method or ("grid" if sys.d <= 4 else "penalty")
    radii = plan.radius_list()
    seed = config.settings.seed if plan.seed is None else plan.seed
    rng = np.random.default_rng(seed)
    grid = FeasibleGrid(sys, x, 2 * max(radii), grid_points, tol) if method == "grid" else None
    per_radius, worst, alpha, count = {}, None, None, 0
    infinite = False
    for r in radii:
        best = None
        for z in _sphere_samples(sys, x, r, plan.points_per_radius, rng):
            phi = residual_phi(sys, z, variant, anchor=x, tol=tol, norm=norm)
            if grid is not None:
                dist = grid.distance(z).value
            else:
                dist = distance_to_feasible(sys, z, "penalty").value
            count += 1
            if phi <= tol:
                if dist > max(tol, grid.resolution if grid is not None else tol):
                    infinite = True
                    worst = z
                continue
            ratio = dist / phi
            best = ratio if best is None else max(best, ratio)
            if alpha is None or ratio > alpha:
                alpha, worst = ratio, z
        per_radius[repr(r)] = best
    if infinite:
        alpha = np.inf
    fr = check_fullrank(sys, x, tol)
    if fr.verdict == "holds":
        route = "full-rank condition holds"
    elif strict and all(b.regular for b in sys.blocks) and sys.is_smooth():
        route = "strict complementarity with regular data (requires RCPLD)"
    else:
        route = "no sufficient condition verified"
    notes = []
    if grid is not None:
        notes.append(f"grid oracle: {grid.points.shape[0]} feasible nodes, resolution {grid.resolution:.3e}")
    return ErrorBoundReport(alpha, count, worst, strict, variant, method, per_radius, route,
                            trivial=alpha is None and not infinite, notes=notes)


# feasible points near a reference point ----------------------------------------------

def sample_feasible_points(sys: FeasibilitySystem, x, radius: float, count: int, seed: int | None = None,
                           budget: int = 3000) -> list:
    """Feasible points within ``radius`` of ``x`` by residual minimization from random starts.

    Starts are projected into ``C``; each is driven towards the feasible set
    by a compass search on ``phi0``. Points that end feasible and inside the
    ball are kept; ``x`` itself is returned when nothing else is found.
    """
    seed = config.settings.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=float)
    out = []
    attempts = 0
    while len(out) < count and attempts < 5 * count:
        attempts += 1
        u = rng.standard_normal(sys.d)
        z0 = sys.project_C(x + 0.5 * radius * rng.uniform() * u / np.linalg.norm(u))
        res = minimize_with_penalty(lambda z: 0.0, lambda z: phi0(sys, z), sys.project_C, z0, (1.0,),
                                    exponent=2, budget=budget, step=0.25 * radius)
        z = res.point
        if np.linalg.norm(z - x) <= radius and is_feasible(sys, z).feasible:
            out.append(z)
    return out or [x.copy()]
