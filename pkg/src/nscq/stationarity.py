"""M-stationarity checks and a penalized local solver.

The check is a linear feasibility problem per objective subgradient vertex
and per branch of the biactive pairs. The solver minimizes
``f + (k/2) phi0**2 + 0.5 ||x - anchor||**2`` over ``C`` for an increasing
penalty schedule with a derivative-free compass search.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import config
from .cq import MultiplierVector, _assemble, _decode, _Point, _jsonable
from .expr import Expression, _eval, environment, subdifferential_vertices
from .linalg import BranchExplosionError, branch_cases, linear_feasibility
from .system import FeasibilitySystem, active_index_sets
from .vcalc import phi0

STATIONARY = "stationary"
NOT_STATIONARY = "not-stationary-within-model"
INCOMPLETE = "incomplete"


@dataclass
class MStationarityReport:
    verdict: str
    multipliers: MultiplierVector | None = None
    objective_vertex: np.ndarray | None = None
    residual: float | None = None
    branches: dict = field(default_factory=dict)
    index_sets: object = None
    notes: list = field(default_factory=list)

    def to_dict(self):
        return _jsonable({"verdict": self.verdict, "multipliers": self.multipliers,
                          "objective_vertex": self.objective_vertex, "residual": self.residual,
                          "branches": self.branches, "index_sets": self.index_sets,
                          "notes": self.notes})


def _split_pairs(biactive, case):
    """Free/nonneg/dropped treatment of each biactive pair for one branch case."""
    G_free, H_free, both = [], [], []
    for i, br in zip(biactive, case):
        if br == "both":
            both.append(i)
        elif br == "G-zero":
            H_free.append(i)
        else:
            G_free.append(i)
    return G_free, H_free, both


def check_mstationarity(sys: FeasibilitySystem, f: Expression, x, tol: float | None = None) -> MStationarityReport:
    """Search for M-stationarity multipliers of ``min f`` subject to ``sys`` at ``x``.

    Multipliers satisfy ``lam_g >= 0`` on active inequalities, ``lam_H = 0``
    where ``0 = G < H``, ``lam_G = 0`` where ``G > H = 0`` and, on biactive
    pairs, both nonnegative or one of them zero. The normal-cone element is
    a member of one chart of ``N_C(x)``. The objective subgradient ranges
    over the convex hull of one piece of its vertex set, so convex kinks
    contribute their whole hull and concave kinks only their branches.
    """
    tol = config.settings.feas_tol if tol is None else tol
    x = np.asarray(x, dtype=float)
    idx = active_index_sets(sys, x, tol)
    pt = _Point(sys, x, tol)
    fsd = subdifferential_vertices(f, sys.variables, x)
    subs = {i: pt.subdiff(i) for i in idx.active_g}
    cones = pt.cones()
    exact = fsd.exact and all(s.exact for s in subs.values()) and all(c.exact for c in cones)
    box = config.settings.multiplier_box
    try:
        cases = list(branch_cases(len(idx.biactive)))
    except BranchExplosionError as err:
        return MStationarityReport(INCOMPLETE, index_sets=idx, notes=[str(err)])
    for piece in fsd.pieces:
        P = np.asarray(piece, dtype=float).reshape(-1, sys.d)
        for pc in itertools.product(*[range(len(subs[i].pieces)) for i in idx.active_g]):
            g_cols = {i: subs[i].pieces[j] for i, j in zip(idx.active_g, pc)}
            for cc in itertools.product(*[range(len(c.charts)) for c in cones]):
                charts = {b: cones[b].charts[j] for b, j in enumerate(cc) if not cones[b].charts[j].is_zero}
                for case in cases:
                    G_free, H_free, both = _split_pairs(idx.biactive, case)
                    fam = _assemble(pt, g_cols, range(sys.m), idx.zero_G + G_free, idx.zero_H + H_free,
                                    [], charts)
                    for i in both:
                        fam.add(-pt.grad["G"][i], "nonneg", ("G", i))
                        fam.add(-pt.grad["H"][i], "nonneg", ("H", i))
                    found = _solve_case(sys, x, fam, g_cols, P, tol, box)
                    if found is None:
                        continue
                    mv, fv, res = found
                    return MStationarityReport(STATIONARY, mv, fv, res,
                                               {str(i): br for i, br in zip(idx.biactive, case)}, idx)
    notes = [] if exact else ["subdifferential or normal cone is an outer estimate"]
    return MStationarityReport(NOT_STATIONARY, index_sets=idx, notes=notes)


def _solve_case(sys, x, fam, g_cols, P, tol, box):
    """Convex weights ``w`` on the rows of ``P`` and family coefficients with ``P^T w + combination = 0``."""
    k = len(fam)
    A = np.zeros((sys.d + 1, k + P.shape[0]))
    if k:
        A[: sys.d, :k] = fam.matrix(sys.d).T
    A[: sys.d, k:] = P.T
    A[sys.d, k:] = 1.0
    b = np.r_[np.zeros(sys.d), 1.0]
    free = [s == "free" for s in fam.signs] + [False] * P.shape[0]
    sol = linear_feasibility(A, b, free=free)
    if sol is None or np.abs(sol[:k]).sum() > box:
        return None
    fv = P.T @ sol[k:]
    if k:
        mv = _decode(sys, fam, sol[:k], g_cols)
    else:
        mv = MultiplierVector(np.zeros(sys.n), np.zeros(sys.m), np.zeros(sys.p), np.zeros(sys.p), np.zeros(sys.d))
    res = float(np.linalg.norm(fv + mv.combination(sys, x)))
    if res > max(tol, 1e-8 * max(1.0, np.abs(A).max())):
        return None
    return mv, fv, res


# penalized solver ---------------------------------------------------------------

@dataclass
class PenaltyStep:
    penalty: float
    point: np.ndarray
    residual: float
    objective: float
    evaluations: int
    budget_exhausted: bool

    def to_dict(self):
        return _jsonable(self.__dict__)


@dataclass
class PenaltyResult:
    point: np.ndarray
    trace: list
    budget_exhausted: bool
    infeasible: bool

    @property
    def residuals(self) -> list:
        return [s.residual for s in self.trace]

    def to_dict(self):
        return _jsonable({"point": self.point, "trace": self.trace,
                          "budget_exhausted": self.budget_exhausted, "infeasible": self.infeasible})


def compass_search(fun: Callable, x0, project: Callable, step: float = 0.1, min_step: float = 1e-10,
                   budget: int = 5000, seed: int | None = None):
    """Derivative-free pattern search with projection.

    Polls the coordinate directions and, before shrinking the step, a
    random orthonormal basis, which lets the search follow curved valleys.
    Returns ``(x, value, evaluations, exhausted)``.
    """
    rng = np.random.default_rng(config.settings.seed if seed is None else seed)
    x = project(np.asarray(x0, dtype=float))
    fx = fun(x)
    evals = 1
    d = x.size
    coords = np.eye(d)

    def poll(dirs, x, fx, evals):
        for dvec in dirs:
            for sgn in (1.0, -1.0):
                if evals >= budget:
                    return x, fx, evals, False
                z = project(x + sgn * step * dvec)
                fz = fun(z)
                evals += 1
                if fz < fx - 1e-15 * max(1.0, abs(fx)):
                    return z, fz, evals, True
        return x, fx, evals, False

    while step >= min_step:
        x, fx, evals, improved = poll(coords, x, fx, evals)
        if not improved and d > 1 and evals < budget:
            q, _ = np.linalg.qr(rng.standard_normal((d, d)))
            x, fx, evals, improved = poll(q.T, x, fx, evals)
        if evals >= budget:
            return x, fx, evals, True
        if not improved:
            step *= 0.5
    return x, fx, evals, False


def minimize_with_penalty(objective: Callable, residual: Callable, project: Callable, x0,
                          schedule: Sequence[float], exponent: int = 2, anchor=None,
                          radius: float = np.inf, budget: int = 5000, step: float = 0.1) -> PenaltyResult:
    """Warm-started penalty continuation.

    For each ``k`` in ``schedule`` minimizes ``objective + (k / exponent) *
    residual**exponent`` (plus ``0.5 ||x - anchor||**2`` when an anchor is
    given) over the feasible projections, optionally restricted to a ball
    of ``radius`` around the anchor.
    """
    x = project(np.asarray(x0, dtype=float))
    center = None if anchor is None else np.asarray(anchor, dtype=float)

    def proj(z):
        z = project(z)
        if center is not None and np.isfinite(radius):
            off = z - center
            nrm = np.linalg.norm(off)
            if nrm > radius:
                z = project(center + off * (radius / nrm))
        return z

    trace = []
    exhausted_any = False
    for k in schedule:
        def fun(z, k=k):
            val = objective(z) + (k / exponent) * residual(z) ** exponent
            if center is not None:
                val += 0.5 * float(np.sum((z - center) ** 2))
            return val
        x, fx, evals, exhausted = compass_search(fun, x, proj, step=step, budget=budget)
        exhausted_any |= exhausted
        trace.append(PenaltyStep(float(k), x.copy(), float(residual(x)), float(fx), evals, exhausted))
    infeasible = _stalled(trace)
    return PenaltyResult(x, trace, exhausted_any, infeasible)


def _stalled(trace) -> bool:
    last = trace[-1].residual
    if last <= 1e-4:
        return False
    if len(trace) < 2:
        return True
    return trace[-2].residual - last <= 1e-2 * trace[-2].residual


def solve_penalized(sys: FeasibilitySystem, f: Expression, x0, schedule: Sequence[float] = (1e0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6),
                    anchor=None, radius: float = np.inf, budget: int = 5000) -> PenaltyResult:
    """Approximately solve ``min f + (k/2) phi0**2 + 0.5 ||x - anchor||**2`` over ``C``.

    ``anchor`` defaults to ``x0``. The trace records ``phi0`` after each
    penalty level; ``infeasible`` is set when the residual stalls away from
    zero.
    """
    x0 = np.asarray(x0, dtype=float)
    anchor = x0 if anchor is None else anchor

    def objective(z):
        return float(_eval(f, environment(sys.variables, z)))

    return minimize_with_penalty(objective, lambda z: phi0(sys, z), sys.project_C, x0, schedule,
                                 exponent=2, anchor=anchor, radius=radius, budget=budget)
