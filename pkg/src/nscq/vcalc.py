"""Calculus for the complementarity set and the aggregate residual.

``OMEGA = {(a, b) : a >= 0, b >= 0, a * b = 0}``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import config
from .linalg import BranchExplosionError
from .sets import NormalCone, make_chart
from .system import FeasibilitySystem


class NotInOmegaError(ValueError):
    pass


@dataclass
class OmegaNormalCone:
    """Limiting normal cone of the complementarity set at one pair.

    ``branch`` is one of ``"first-zero"`` (a = 0 < b), ``"second-zero"``
    (a > 0 = b) or ``"both-zero"``.
    """

    branch: str
    cone: NormalCone

    def contains(self, v, tol=None) -> bool:
        return self.cone.contains(v, tol)


def normal_cone_omega(a: float, b: float, tol: float | None = None) -> OmegaNormalCone:
    tol = config.settings.feas_tol if tol is None else tol
    if a < -tol or b < -tol or min(abs(a), abs(b)) > tol:
        raise NotInOmegaError(f"({a}, {b}) is not complementary")
    if abs(a) <= tol and abs(b) <= tol:
        charts = [make_chart([(-1, 0), (0, -1)], [], 2, "both-negative"),
                  make_chart([], [(1, 0)], 2, "second-free-zero"),
                  make_chart([], [(0, 1)], 2, "first-free-zero")]
        return OmegaNormalCone("both-zero", NormalCone(2, charts))
    if abs(a) <= tol:
        return OmegaNormalCone("first-zero", NormalCone(2, [make_chart([], [(1, 0)], 2, "first-zero")]))
    return OmegaNormalCone("second-zero", NormalCone(2, [make_chart([], [(0, 1)], 2, "second-zero")]))


def dist_omega(a: float, b: float, norm: str = "l1") -> float:
    """Distance from ``(a, b)`` to the complementarity set in the l1 or l∞ norm."""
    if norm == "l1":
        return max(-a, -b, -(a + b), min(a, b))
    if norm in ("linf", "l∞", "inf"):
        return abs(min(a, b))
    raise ValueError(f"unsupported norm {norm!r}")


def project_omega(a: float, b: float) -> tuple[float, float]:
    """Euclidean projection onto the complementarity set."""
    p = (max(a, 0.0), 0.0)
    q = (0.0, max(b, 0.0))
    dp = (a - p[0]) ** 2 + (b - p[1]) ** 2
    dq = (a - q[0]) ** 2 + (b - q[1]) ** 2
    return p if dp <= dq else q


def phi0(sys: FeasibilitySystem, x) -> float:
    """Sum of constraint violations of the functional constraints."""
    v = sys.values(x)
    return float(np.sum(np.maximum(v["g"], 0.0)) + np.sum(np.abs(v["h"]))
                 + np.sum(np.abs(np.minimum(v["G"], v["H"]))))


@dataclass
class Phi0Certificate:
    value: float
    lam_g: np.ndarray
    lam_h: np.ndarray
    lam_G: np.ndarray
    lam_H: np.ndarray
    g_vertices: dict = field(default_factory=dict)  # i -> chosen subgradient of g_i
    vector: np.ndarray = None


def _pair_options(G, H, tol):
    """(lam_G, lam_H) generators for one pair; the pair term is -lam_G ∇G - lam_H ∇H."""
    if G < H - tol:
        if G > tol:
            return [(-1.0, 0.0)]
        if G < -tol:
            return [(1.0, 0.0)]
        return [(-1.0, 0.0), (1.0, 0.0)]
    if G > H + tol:
        if H > tol:
            return [(0.0, -1.0)]
        if H < -tol:
            return [(0.0, 1.0)]
        return [(0.0, -1.0), (0.0, 1.0)]
    if G > tol:
        return [(-1.0, 0.0), (0.0, -1.0)]
    if G < -tol:
        return [(1.0, 0.0), (0.0, 1.0)]
    return [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (-1.0, 0.0), (0.0, -1.0)]


def phi0_subdifferential_elements(sys: FeasibilitySystem, x, tol: float | None = None,
                                  cap: int | None = None) -> list[Phi0Certificate]:
    """Generators whose convex hull contains the limiting subdifferential of :func:`phi0`.

    One certificate per combination of per-term generator choices; multipliers
    obey the sign pattern ``lam_H = 0`` where ``G < H``, ``lam_G = 0`` where
    ``G > H`` and, where ``G = H``, both positive or one of them zero.
    """
    tol = config.settings.feas_tol if tol is None else tol
    cap = config.settings.branch_cap if cap is None else cap
    x = np.asarray(x, dtype=float)
    val = sys.values(x)
    d = sys.d
    options = []  # list of (kind, index, list of (coefficient, vector))
    g_choices = {}
    for i, gi in enumerate(val["g"]):
        if gi < -tol:
            continue
        verts = sys.subdifferential(i, x).vertices
        lams = [1.0] if gi > tol else [0.0, 1.0]
        options.append([("g", i, lam, v) for lam in lams for v in (verts if lam else verts[:1])])
        g_choices[i] = verts
    grads_h = sys.gradients("h", x)
    for i, hi in enumerate(val["h"]):
        lams = [1.0] if hi > tol else ([-1.0] if hi < -tol else [-1.0, 1.0])
        options.append([("h", i, lam, grads_h[i]) for lam in lams])
    grads_G = sys.gradients("G", x)
    grads_H = sys.gradients("H", x)
    for i, (a, b) in enumerate(zip(val["G"], val["H"])):
        options.append([("pair", i, pair, None) for pair in _pair_options(a, b, tol)])
    total = int(np.prod([len(o) for o in options])) if options else 1
    if total > cap:
        raise BranchExplosionError(len(options), cap)
    certs = []
    for combo in itertools.product(*options):
        lam_g, lam_h = np.zeros(sys.n), np.zeros(sys.m)
        lam_G, lam_H = np.zeros(sys.p), np.zeros(sys.p)
        chosen = {}
        vec = np.zeros(d)
        for kind, i, lam, v in combo:
            if kind == "g":
                lam_g[i] = lam
                chosen[i] = np.asarray(v)
                vec += lam * v
            elif kind == "h":
                lam_h[i] = lam
                vec += lam * v
            else:
                lam_G[i], lam_H[i] = lam
                vec -= lam[0] * grads_G[i] + lam[1] * grads_H[i]
        certs.append(Phi0Certificate(phi0(sys, x), lam_g, lam_h, lam_G, lam_H, chosen, vec))
    return certs
