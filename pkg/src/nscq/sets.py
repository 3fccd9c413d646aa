"""Catalog of abstract constraint sets with projections and normal cones.

Every set reports its limiting normal cone as a union of *charts*. A chart is
a finitely generated cone ``cone(rays) + span(lineality)``; the lineality rows
are orthonormal and the rays are pointed modulo the lineality space, so a
chart element is zero exactly when all of its coefficients are zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import config
from .linalg import canonical_cone, cone_distance, cone_projection, linear_feasibility


class PointNotInSetError(ValueError):
    pass


@dataclass
class Chart:
    rays: np.ndarray
    lineality: np.ndarray
    tag: str = ""

    @property
    def dim(self) -> int:
        return self.rays.shape[1]

    @property
    def is_zero(self) -> bool:
        return self.rays.shape[0] == 0 and self.lineality.shape[0] == 0

    def distance(self, v) -> float:
        return cone_distance(v, self.rays, self.lineality)

    def project(self, v) -> np.ndarray:
        return cone_projection(v, self.rays, self.lineality)

    def generators(self) -> np.ndarray:
        return np.vstack([self.rays, self.lineality])

    def to_dict(self):
        return {"tag": self.tag, "rays": self.rays.tolist(), "lineality": self.lineality.tolist()}


def make_chart(rays, lineality, dim, tag="") -> Chart:
    R = np.asarray(rays, dtype=float).reshape(-1, dim)
    L = np.asarray(lineality, dtype=float).reshape(-1, dim)
    if R.shape[0] == 0 and L.shape[0] == 0:
        return Chart(np.zeros((0, dim)), np.zeros((0, dim)), tag)
    R, L = canonical_cone(R, L)
    return Chart(R.reshape(-1, dim), L.reshape(-1, dim), tag)


@dataclass
class NormalCone:
    """Union of charts; ``exact`` is False when it is only an outer estimate."""

    dim: int
    charts: list = field(default_factory=list)
    exact: bool = True

    def contains(self, v, tol: float | None = None) -> bool:
        return normal_cone_membership(self, v, tol)

    def distance(self, v) -> float:
        if not self.charts:
            return float(np.linalg.norm(v))
        return min(c.distance(v) for c in self.charts)

    def project(self, v) -> np.ndarray:
        if not self.charts:
            return np.zeros(self.dim)
        best = min(self.charts, key=lambda c: c.distance(v))
        return best.project(v)

    @property
    def is_zero(self) -> bool:
        return all(c.is_zero for c in self.charts)

    def generators(self) -> np.ndarray:
        rows = [c.generators() for c in self.charts]
        return np.vstack(rows) if rows else np.zeros((0, self.dim))

    def to_dict(self):
        return {"dim": self.dim, "exact": self.exact, "charts": [c.to_dict() for c in self.charts]}


def zero_cone(dim: int) -> NormalCone:
    return NormalCone(dim, [Chart(np.zeros((0, dim)), np.zeros((0, dim)), "zero")])


def normal_cone_membership(cone: NormalCone, v, tol: float | None = None) -> bool:
    tol = config.settings.feas_tol if tol is None else tol
    v = np.asarray(v, dtype=float)
    if np.linalg.norm(v) <= tol:
        return True
    return cone.distance(v) <= tol


class CatalogSet:
    kind = "abstract"
    dim: int
    polyhedral = False
    regular = True

    def project(self, z) -> np.ndarray:
        raise NotImplementedError

    def distance(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return float(np.linalg.norm(self.project(z) - z))

    def contains(self, z, tol: float | None = None) -> bool:
        tol = config.settings.feas_tol if tol is None else tol
        return self.distance(z) <= tol

    def normal_cone(self, z, tol: float | None = None) -> NormalCone:
        raise NotImplementedError

    def _check_member(self, z, tol):
        tol = config.settings.feas_tol if tol is None else tol
        z = np.asarray(z, dtype=float)
        if z.shape != (self.dim,):
            raise ValueError(f"expected a point of dimension {self.dim}")
        if not self.contains(z, tol):
            raise PointNotInSetError(f"point {z.tolist()} is not in the {self.kind} set")
        return z, tol

    def to_dict(self) -> dict:
        raise NotImplementedError


def _enc(values):
    return [None if not np.isfinite(v) else float(v) for v in values]


def _dec(values, default):
    return np.array([default if v is None else float(v) for v in values], dtype=float)


class FullSpace(CatalogSet):
    kind = "full"
    polyhedral = True

    def __init__(self, dim: int):
        self.dim = int(dim)

    def project(self, z):
        return np.asarray(z, dtype=float).copy()

    def normal_cone(self, z, tol=None):
        self._check_member(z, tol)
        return zero_cone(self.dim)

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim}


class Box(CatalogSet):
    kind = "box"
    polyhedral = True

    def __init__(self, lower, upper):
        self.lower = np.asarray(lower, dtype=float).reshape(-1)
        self.upper = np.asarray(upper, dtype=float).reshape(-1)
        if self.lower.shape != self.upper.shape:
            raise ValueError("box bounds must have equal length")
        if np.any(self.lower > self.upper):
            raise ValueError("empty box")
        self.dim = self.lower.shape[0]

    def project(self, z):
        return np.clip(np.asarray(z, dtype=float), self.lower, self.upper)

    def normal_cone(self, z, tol=None):
        z, tol = self._check_member(z, tol)
        rays, lin = [], []
        for i in range(self.dim):
            lo = abs(z[i] - self.lower[i]) <= tol
            hi = abs(z[i] - self.upper[i]) <= tol
            e = np.eye(self.dim)[i]
            if lo and hi:
                lin.append(e)
            elif lo:
                rays.append(-e)
            elif hi:
                rays.append(e)
        return NormalCone(self.dim, [make_chart(rays, lin, self.dim, "polyhedral")])

    def to_dict(self):
        return {"kind": self.kind, "lower": _enc(self.lower), "upper": _enc(self.upper)}


class Polyhedron(CatalogSet):
    """``{z : A z <= b}``."""

    kind = "polyhedron"
    polyhedral = True

    def __init__(self, A, b):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.asarray(b, dtype=float).reshape(-1)
        if self.A.shape[0] != self.b.shape[0]:
            raise ValueError("A and b must have matching rows")
        self.dim = self.A.shape[1]
        m = self.A.shape[0]
        # nonempty iff A z + s = b has a solution with s >= 0 and z free
        sol = linear_feasibility(np.hstack([self.A, np.eye(m)]), self.b,
                                 free=[True] * self.dim + [False] * m)
        if sol is None:
            raise ValueError("polyhedron is empty")
        self._interior_hint = sol[: self.dim]

    def contains(self, z, tol=None):
        tol = config.settings.feas_tol if tol is None else tol
        z = np.asarray(z, dtype=float)
        return bool(np.all(self.A @ z - self.b <= tol * np.maximum(1.0, np.linalg.norm(self.A, axis=1))))

    def project(self, z):
        z = np.asarray(z, dtype=float)
        if np.all(self.A @ z <= self.b):
            return z.copy()
        cons = {"type": "ineq", "fun": lambda w: self.b - self.A @ w, "jac": lambda w: -self.A}
        res = minimize(lambda w: 0.5 * np.sum((w - z) ** 2), self._interior_hint, jac=lambda w: w - z,
                       constraints=[cons], method="SLSQP", options={"ftol": 1e-15, "maxiter": 500})
        return res.x

    def normal_cone(self, z, tol=None):
        z, tol = self._check_member(z, tol)
        act = np.abs(self.A @ z - self.b) <= tol * np.maximum(1.0, np.linalg.norm(self.A, axis=1))
        return NormalCone(self.dim, [make_chart(self.A[act], [], self.dim, "polyhedral")])

    def to_dict(self):
        return {"kind": self.kind, "A": self.A.tolist(), "b": self.b.tolist()}


class PolyhedralUnion(CatalogSet):
    """Finite union of polyhedra.

    The reported normal cone is the union of the member cones at the point,
    which contains the limiting normal cone of the union; it is flagged as an
    outer estimate when more than one member is active.
    """

    kind = "union"
    polyhedral = True
    regular = False

    def __init__(self, members):
        self.members = [m if isinstance(m, Polyhedron) else Polyhedron(*m) for m in members]
        if not self.members:
            raise ValueError("empty union")
        dims = {m.dim for m in self.members}
        if len(dims) != 1:
            raise ValueError("members must share a dimension")
        self.dim = dims.pop()

    def contains(self, z, tol=None):
        return any(m.contains(z, tol) for m in self.members)

    def project(self, z):
        cands = [m.project(z) for m in self.members]
        z = np.asarray(z, dtype=float)
        return min(cands, key=lambda p: np.linalg.norm(p - z))

    def normal_cone(self, z, tol=None):
        z, tol = self._check_member(z, tol)
        charts = []
        for m in self.members:
            if m.contains(z, tol):
                charts.extend(m.normal_cone(z, tol).charts)
        return NormalCone(self.dim, charts, exact=len(charts) <= 1)

    def to_dict(self):
        return {"kind": self.kind, "members": [m.to_dict() for m in self.members]}


class Segment(CatalogSet):
    kind = "segment"
    polyhedral = True

    def __init__(self, p0, p1):
        self.p0 = np.asarray(p0, dtype=float).reshape(-1)
        self.p1 = np.asarray(p1, dtype=float).reshape(-1)
        if self.p0.shape != self.p1.shape:
            raise ValueError("segment endpoints must share a dimension")
        if np.allclose(self.p0, self.p1):
            raise ValueError("segment endpoints must be distinct")
        self.dim = self.p0.shape[0]
        self.direction = (self.p1 - self.p0) / np.linalg.norm(self.p1 - self.p0)

    def parameter(self, z):
        d = self.p1 - self.p0
        return float(np.dot(np.asarray(z, dtype=float) - self.p0, d) / np.dot(d, d))

    def project(self, z):
        t = min(1.0, max(0.0, self.parameter(z)))
        return self.p0 + t * (self.p1 - self.p0)

    def normal_cone(self, z, tol=None):
        z, tol = self._check_member(z, tol)
        d = self.direction
        # orthogonal complement of the direction
        _, _, vt = np.linalg.svd(d[None, :])
        perp = vt[1:]
        length = np.linalg.norm(self.p1 - self.p0)
        t = self.parameter(z)
        if t * length <= tol:
            return NormalCone(self.dim, [make_chart([-d], perp, self.dim, "endpoint")])
        if (1 - t) * length <= tol:
            return NormalCone(self.dim, [make_chart([d], perp, self.dim, "endpoint")])
        return NormalCone(self.dim, [make_chart([], perp, self.dim, "interior")])

    def to_dict(self):
        return {"kind": self.kind, "p0": self.p0.tolist(), "p1": self.p1.tolist()}


class Sawtooth(CatalogSet):
    """Graph of a piecewise-linear sawtooth on [-1, 1].

    The function vanishes at 0 and at every ``±2**-n``. On each interval
    between ``2**(-n-1)`` and ``2**-n`` (and its mirror image) the graph is the
    two upper edges of an isosceles triangle of height 1. Structure finer
    than ``2**-depth`` is replaced by the flat segment through the origin.
    """

    kind = "sawtooth"
    regular = False
    dim = 2

    def __init__(self, depth: int = 24):
        self.depth = int(depth)
        xs = [0.0, 2.0 ** -self.depth]
        for n in range(self.depth - 1, -1, -1):
            xs += [3 * 2.0 ** (-n - 2), 2.0 ** -n]
        ys = [0.0, 0.0] + [1.0, 0.0] * self.depth
        right = np.column_stack([xs, ys])
        left = right[:0:-1] * np.array([-1.0, 1.0])
        self.nodes = np.vstack([left, right])
        self._a = self.nodes[:-1]
        self._b = self.nodes[1:]

    def height(self, x1):
        return np.interp(np.abs(x1), self.nodes[len(self.nodes) // 2:, 0], self.nodes[len(self.nodes) // 2:, 1])

    def project(self, z):
        z = np.asarray(z, dtype=float)
        ab = self._b - self._a
        t = np.clip(np.einsum("ij,ij->i", z - self._a, ab) / np.einsum("ij,ij->i", ab, ab), 0.0, 1.0)
        pts = self._a + t[:, None] * ab
        k = int(np.argmin(np.sum((pts - z) ** 2, axis=1)))
        return pts[k]

    def normal_cone(self, z, tol=None):
        z, tol = self._check_member(z, tol)
        if np.linalg.norm(z) <= tol:
            return NormalCone(2, [make_chart([], [(1, 0)], 2, "origin"), make_chart([], [(0, 1)], 2, "origin")])
        sgn = 1.0 if z[0] >= 0 else -1.0
        charts = self._right_charts(np.array([abs(z[0]), z[1]]), tol)
        if sgn < 0:
            flip = np.array([-1.0, 1.0])
            charts = [make_chart(c.rays * flip, c.lineality * flip, 2, c.tag) for c in charts]
        return NormalCone(2, charts)

    def _right_charts(self, z, tol):
        x1, x2 = z
        lines = lambda *dirs, tag: [make_chart([], [d], 2, tag) for d in dirs]
        if abs(x1 - 1.0) <= tol and abs(x2) <= tol:
            inward = np.array([-0.25, 1.0])
            inward /= np.linalg.norm(inward)
            return [make_chart([-inward], [(inward[1], -inward[0])], 2, "endpoint")]
        if x1 < 2.0 ** -self.depth - tol:
            return lines((0, 1), tag="flat")
        n = int(np.floor(-np.log2(x1)))  # x1 in [2^(-n-1), 2^-n)
        lo = 2.0 ** (-n - 1)
        if abs(x1 - 2.0 ** -n) <= tol and n >= 1:
            n, lo = n - 1, 2.0 ** -n  # valley at the right end of the interval below
        c = 2.0 ** (-n - 2)
        apex = lo + c
        if np.hypot(x1 - lo, x2) <= tol:
            return lines((0, 1), (1, -c), (1, c / 2), tag="valley")
        if np.hypot(x1 - apex, x2 - 1.0) <= tol:
            return lines((1, -c), (1, c), tag="apex") + [make_chart([(1, c), (-1, c)], [], 2, "apex")]
        if x1 < apex:
            return lines((1, -c), tag="edge")
        return lines((1, c), tag="edge")

    def to_dict(self):
        return {"kind": self.kind, "depth": self.depth}


def from_dict(spec: dict) -> CatalogSet:
    kind = spec.get("kind")
    if kind == "full":
        return FullSpace(spec["dim"])
    if kind == "box":
        return Box(_dec(spec["lower"], -np.inf), _dec(spec["upper"], np.inf))
    if kind == "polyhedron":
        return Polyhedron(spec["A"], spec["b"])
    if kind == "union":
        return PolyhedralUnion([from_dict(m) for m in spec["members"]])
    if kind == "segment":
        return Segment(spec["p0"], spec["p1"])
    if kind == "sawtooth":
        return Sawtooth(spec.get("depth", 24))
    raise ValueError(f"unknown set kind {kind!r}")
