"""Feasibility systems with complementarity structure.

A system collects inequality constraints ``g(x) <= 0`` (possibly nonsmooth),
equalities ``h(x) = 0``, complementarity pairs ``0 <= G(x) ⊥ H(x) >= 0`` and
a product ``C = C_1 × ... × C_l`` of catalog sets, one per consecutive block
of variables.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import config
from .expr import ExpressionError, environment, gradient, subdifferential_vertices, _eval
from .sets import CatalogSet, FullSpace, NormalCone


class InfeasiblePointError(ValueError):
    pass


class FeasibilitySystem:
    """Constraint data ``g <= 0, h = 0, (G, H) complementary, x in C``."""

    def __init__(self, variables: Sequence[str], g=(), h=(), G=(), H=(), blocks=None, name=""):
        self.variables = list(variables)
        if len(set(self.variables)) != len(self.variables):
            raise ExpressionError("duplicate variable names")
        self.g = list(g)
        self.h = list(h)
        self.G = list(G)
        self.H = list(H)
        self.name = name
        if len(self.G) != len(self.H):
            raise ValueError("G and H must have the same length")
        self.blocks: list[CatalogSet] = list(blocks) if blocks else [FullSpace(len(self.variables))]
        if sum(b.dim for b in self.blocks) != len(self.variables):
            raise ValueError("block dimensions must partition the variables")
        known = set(self.variables)
        for e in self.g + self.h + self.G + self.H:
            missing = e.free - known
            if missing:
                raise ExpressionError(f"undeclared variables {sorted(missing)}")
        for kind in ("h", "G", "H"):
            if any(not e.smooth for e in getattr(self, kind)):
                raise ValueError(f"{kind} constraints must be smooth")
        self.slices = []
        start = 0
        for b in self.blocks:
            self.slices.append(slice(start, start + b.dim))
            start += b.dim

    # sizes ------------------------------------------------------------------
    @property
    def d(self) -> int:
        return len(self.variables)

    @property
    def n(self) -> int:
        return len(self.g)

    @property
    def m(self) -> int:
        return len(self.h)

    @property
    def p(self) -> int:
        return len(self.G)

    @property
    def l(self) -> int:  # noqa: E743
        return len(self.blocks)

    def __repr__(self):
        return (f"FeasibilitySystem({self.name!r}, d={self.d}, n={self.n}, m={self.m}, "
                f"p={self.p}, blocks={[b.kind for b in self.blocks]})")

    # evaluation -------------------------------------------------------------
    def values(self, x) -> dict:
        env = environment(self.variables, x)
        return {k: np.array([float(_eval(e, env)) for e in getattr(self, k)])
                for k in ("g", "h", "G", "H")}

    def gradients(self, kind: str, x) -> np.ndarray:
        exprs = getattr(self, kind)
        if not exprs:
            return np.zeros((0, self.d))
        return np.vstack([gradient(e, self.variables, x) for e in exprs])

    def subdifferential(self, i: int, x, tol=None):
        return subdifferential_vertices(self.g[i], self.variables, x, tol)

    # the abstract set ---------------------------------------------------------
    def block(self, x, i):
        return np.asarray(x, dtype=float)[self.slices[i]]

    def project_C(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.concatenate([b.project(x[s]) for b, s in zip(self.blocks, self.slices)])

    def set_distances(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([b.distance(x[s]) for b, s in zip(self.blocks, self.slices)])

    def normal_cones(self, x, tol=None) -> list[NormalCone]:
        x = np.asarray(x, dtype=float)
        return [b.normal_cone(x[s], tol) for b, s in zip(self.blocks, self.slices)]

    def embed(self, i: int, vec) -> np.ndarray:
        out = np.zeros(self.d)
        out[self.slices[i]] = vec
        return out

    def is_smooth(self) -> bool:
        return all(e.smooth for e in self.g)


@dataclass
class IndexSets:
    """Active-set partition at a point (0-based indices).

    ``active_g``: inequalities with ``g_i = 0``; ``zero_G``: pairs with
    ``0 = G_i < H_i``; ``biactive``: ``G_i = H_i = 0``; ``zero_H``:
    ``G_i > H_i = 0``.
    """

    active_g: list = field(default_factory=list)
    zero_G: list = field(default_factory=list)
    biactive: list = field(default_factory=list)
    zero_H: list = field(default_factory=list)

    def to_dict(self):
        return {"active_g": list(self.active_g), "zero_G": list(self.zero_G),
                "biactive": list(self.biactive), "zero_H": list(self.zero_H)}


@dataclass
class Residuals:
    g_plus: np.ndarray
    h_abs: np.ndarray
    comp: np.ndarray  # |min(G, H)|
    set_distance: np.ndarray

    @property
    def functional(self) -> float:
        parts = [self.g_plus, self.h_abs, self.comp]
        return float(max((np.max(p) for p in parts if p.size), default=0.0))

    @property
    def max_residual(self) -> float:
        return max(self.functional, float(np.max(self.set_distance, initial=0.0)))

    def to_dict(self):
        return {"g_plus": self.g_plus.tolist(), "h_abs": self.h_abs.tolist(),
                "comp": self.comp.tolist(), "set_distance": self.set_distance.tolist()}


def residuals(sys: FeasibilitySystem, x) -> Residuals:
    v = sys.values(x)
    return Residuals(np.maximum(v["g"], 0.0), np.abs(v["h"]), np.abs(np.minimum(v["G"], v["H"])),
                     sys.set_distances(x))


@dataclass
class FeasibilityReport:
    feasible: bool
    residuals: Residuals

    def __bool__(self):
        return self.feasible


def is_feasible(sys: FeasibilitySystem, x, tol: float | None = None) -> FeasibilityReport:
    tol = config.settings.feas_tol if tol is None else tol
    r = residuals(sys, x)
    return FeasibilityReport(r.max_residual <= tol, r)


def active_index_sets(sys: FeasibilitySystem, x, tol: float | None = None) -> IndexSets:
    tol = config.settings.feas_tol if tol is None else tol
    rep = is_feasible(sys, x, tol)
    if not rep.feasible:
        raise InfeasiblePointError(f"point is infeasible (max residual {rep.residuals.max_residual:.3e})")
    v = sys.values(x)
    out = IndexSets(active_g=[i for i, gi in enumerate(v["g"]) if abs(gi) <= tol])
    for i, (a, b) in enumerate(zip(v["G"], v["H"])):
        if abs(a) <= tol and abs(b) <= tol:
            out.biactive.append(i)
        elif abs(a) <= tol:
            out.zero_G.append(i)
        else:
            out.zero_H.append(i)
    return out
