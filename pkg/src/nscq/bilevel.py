"""Bilevel programs through the value function and the lower-level KKT system.

The lower level ``min_y f(x, y) s.t. g(x, y) <= 0, h(x, y) = 0`` is solved by
brute force on a grid over a declared box for ``y`` followed by a local
refinement of every discrete local minimizer. The combined program keeps
both the value-function inequality ``f - V <= 0`` and the KKT conditions,
with complementarity pairs ``(-g_i, u_i)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.ndimage import label as connected_components
from scipy.optimize import minimize

from . import config
from .expr import Expression, Oracle, _eval, const, derivative, gradient, oracle, var
from .linalg import RankReport, hull_vertices, numerical_rank, positive_dependence_certificate
from .sets import CatalogSet, FullSpace
from .system import FeasibilitySystem, active_index_sets
from .vcalc import dist_omega


class EmptyFeasibleSetError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


@dataclass
class BilevelProgram:
    """Upper objective ``F``, upper constraints ``G <= 0, H = 0``, lower data ``f, g, h``.

    Attributes
    ----------
    x_vars, y_vars : list of str
        Upper and lower variable names.
    y_lower, y_upper : array_like
        Box that contains every lower-level feasible point for the upper
        variables of interest; the value function is computed on this box.
    x_set : CatalogSet, optional
        Abstract constraint on the upper variables.
    """

    x_vars: list
    y_vars: list
    F: Expression
    f: Expression
    g: list = field(default_factory=list)
    h: list = field(default_factory=list)
    G: list = field(default_factory=list)
    H: list = field(default_factory=list)
    y_lower: Sequence[float] = ()
    y_upper: Sequence[float] = ()
    x_set: CatalogSet | None = None
    name: str = ""
    grid_points: int | None = None

    def __post_init__(self):
        self.x_vars, self.y_vars = list(self.x_vars), list(self.y_vars)
        self.g, self.h, self.G, self.H = list(self.g), list(self.h), list(self.G), list(self.H)
        self.y_lower = np.asarray(self.y_lower, dtype=float).reshape(-1)
        self.y_upper = np.asarray(self.y_upper, dtype=float).reshape(-1)
        if self.y_lower.size != len(self.y_vars) or self.y_upper.size != len(self.y_vars):
            raise ValueError("the y-box needs one bound per lower variable")
        if np.any(self.y_lower > self.y_upper):
            raise ValueError("empty y-box")
        for e in [self.f] + self.g + self.h:
            if not e.smooth:
                raise ValueError("lower-level expressions must be smooth")
        if self.x_set is None:
            self.x_set = FullSpace(len(self.x_vars))
        if self.x_set.dim != len(self.x_vars):
            raise ValueError("x_set dimension does not match the upper variables")
        self._cache = {}

    @property
    def d(self):
        return len(self.x_vars)

    @property
    def s(self):
        return len(self.y_vars)

    @property
    def m(self):
        return len(self.g)

    @property
    def n(self):
        return len(self.h)

    @property
    def variables(self):
        return self.x_vars + self.y_vars

    def lower_depends_on_x(self) -> bool:
        xs = set(self.x_vars)
        return any(e.free & xs for e in self.g + self.h)

    def default_grid(self) -> int:
        if self.grid_points:
            return int(self.grid_points)
        return 2001 if self.s == 1 else 201


# value function ------------------------------------------------------------

@dataclass
class ValueFunctionSample:
    """Lower-level optimal value and minimizers at one upper point.

    ``minimizers`` holds one representative per cluster; ``members`` holds
    every refined or grid point whose value is within tolerance of the
    minimum (a flat cluster contributes all of its grid points).
    """

    x: np.ndarray
    value: float
    minimizers: np.ndarray
    members: np.ndarray
    clusters: list
    grid_points: int
    spacing: np.ndarray

    def to_dict(self):
        return {"x": self.x.tolist(), "value": self.value, "minimizers": self.minimizers.tolist(),
                "clusters": [c.tolist() for c in self.clusters],
                "grid_points": self.grid_points, "spacing": self.spacing.tolist()}


def _lower_env(blp, x, Y):
    env = {n: float(v) for n, v in zip(blp.x_vars, x)}
    for j, n in enumerate(blp.y_vars):
        env[n] = Y[..., j]
    return env


def _ev(e, env, shape):
    return np.broadcast_to(np.asarray(_eval(e, env), dtype=float), shape)


def _neighbors_min(F):
    """Elementwise minimum over the axis-neighbors of a grid array (inf padded)."""
    out = np.full(F.shape, np.inf)
    for ax in range(F.ndim):
        for shift in (1, -1):
            rolled = np.roll(F, shift, axis=ax)
            edge = [slice(None)] * F.ndim
            edge[ax] = 0 if shift == 1 else -1
            rolled[tuple(edge)] = np.inf
            out = np.minimum(out, rolled)
    return out


def _refine(blp, x, y0, lo, hi):
    env_x = {n: float(v) for n, v in zip(blp.x_vars, x)}

    def env(y):
        e = dict(env_x)
        e.update({n: float(v) for n, v in zip(blp.y_vars, y)})
        return e

    def fun(y):
        return float(_eval(blp.f, env(y)))

    def jac(y):
        return np.array([float(_eval(derivative(blp.f, n), env(y))) for n in blp.y_vars])

    cons = [{"type": "ineq", "fun": (lambda y, e=e: -float(_eval(e, env(y))))} for e in blp.g]
    cons += [{"type": "eq", "fun": (lambda y, e=e: float(_eval(e, env(y))))} for e in blp.h]
    try:
        res = minimize(fun, y0, jac=jac, bounds=list(zip(lo, hi)), constraints=cons, method="SLSQP",
                       options={"ftol": 1e-15, "maxiter": 200})
        y = np.clip(res.x, lo, hi)
    except (ValueError, ArithmeticError):  # pragma: no cover - defensive
        return y0, fun(y0)
    gv = [float(_eval(e, env(y))) for e in blp.g]
    hv = [float(_eval(e, env(y))) for e in blp.h]
    if max(gv, default=-1.0) > 1e-9 or max(map(abs, hv), default=0.0) > 1e-9 or fun(y) > fun(y0):
        return y0, fun(y0)
    return y, fun(y)


def value_function(blp: BilevelProgram, x, grid_points: int | None = None,
                   value_tol: float = 1e-9, cluster_tol: float = 1e-4) -> ValueFunctionSample:
    """Lower-level value ``V(x)`` and solution set ``S(x)`` by grid search plus refinement.

    Parameters
    ----------
    blp : BilevelProgram
    x : array_like
        Upper-level point.
    grid_points : int, optional
        Points per lower variable (default 2001 for one lower variable).
    value_tol : float
        Points with ``f <= V + value_tol * max(1, |V|)`` belong to ``S(x)``.
    cluster_tol : float
        Minimizers closer than this (or adjacent on the grid) form one cluster.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    N = grid_points or blp.default_grid()
    key = (tuple(np.round(x, 13)), N, value_tol, cluster_tol)
    if key in blp._cache:
        return blp._cache[key]
    axes = [np.linspace(lo, hi, N) for lo, hi in zip(blp.y_lower, blp.y_upper)]
    spacing = np.array([(hi - lo) / (N - 1) for lo, hi in zip(blp.y_lower, blp.y_upper)])
    Y = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    shape = Y.shape[:-1]
    env = _lower_env(blp, x, Y)
    fv = _ev(blp.f, env, shape).copy()
    feasible = np.ones(shape, dtype=bool)
    for e in blp.g:
        feasible &= _ev(e, env, shape) <= 1e-12
    for e in blp.h:
        hv = np.abs(_ev(e, env, shape))
        slack = max(float(np.max(np.abs(np.diff(hv, axis=ax)))) for ax in range(hv.ndim)) if N > 1 else 0.0
        feasible &= hv <= slack
    if not feasible.any():
        raise EmptyFeasibleSetError(f"no lower-level feasible grid point at x={x.tolist()}")
    fv[~feasible] = np.inf
    local = feasible & (fv <= _neighbors_min(fv))
    comps, ncomp = connected_components(local)
    refined, members = [], []
    for c in range(1, ncomp + 1):
        cells = np.argwhere(comps == c)
        best = cells[np.argmin(fv[tuple(cells.T)])]
        y0 = Y[tuple(best)]
        lo = np.maximum(y0 - spacing, blp.y_lower)
        hi = np.minimum(y0 + spacing, blp.y_upper)
        y, val = _refine(blp, x, y0, lo, hi)
        refined.append((val, y, cells))
    V = min(v for v, _, _ in refined)
    thresh = V + value_tol * max(1.0, abs(V))
    for val, y, cells in refined:
        if val <= thresh:
            members.append(y)
            if len(cells) > 1:
                flat = [Y[tuple(cl)] for cl in cells if fv[tuple(cl)] <= thresh]
                members.extend(flat)
    members = np.unique(np.array(members), axis=0)
    link = max(cluster_tol, 1.01 * float(np.linalg.norm(spacing)))
    if len(members) > 1:
        labels = fcluster(linkage(members, method="single"), t=link, criterion="distance")
    else:
        labels = np.ones(len(members), dtype=int)
    reps, clusters = [], []
    f_at = lambda y: float(_eval(blp.f, {**{n: float(v) for n, v in zip(blp.x_vars, x)},  # noqa: E731
                                         **{n: float(v) for n, v in zip(blp.y_vars, y)}}))
    for lab in sorted(set(labels), key=lambda l: members[labels == l][0].tolist()):
        pts = members[labels == lab]
        reps.append(min(pts, key=f_at))
        clusters.append(pts)
    out = ValueFunctionSample(x, float(V), np.array(reps), members, clusters, N, spacing)
    blp._cache[key] = out
    return out


# generators of the Clarke subdifferential of V ------------------------------------------

def _grad_at(e, variables, point, names):
    full = gradient(e, variables, point)
    pos = [variables.index(n) for n in names]
    return full[pos]


def danskin_generators(blp: BilevelProgram, x, grid_points: int | None = None) -> np.ndarray:
    """Extreme points of ``{∇_x f(x, y) : y in S(x)}`` when the lower constraints ignore ``x``."""
    if blp.lower_depends_on_x():
        raise PreconditionError("lower-level constraints depend on x; use w_generators")
    sample = value_function(blp, x, grid_points)
    pts = [np.r_[sample.x, y] for y in sample.members]
    gens = np.array([_grad_at(blp.f, blp.variables, p, blp.x_vars) for p in pts])
    return hull_vertices(gens, tol=1e-12)


@dataclass
class KKTData:
    y: np.ndarray
    active: list
    multipliers: list  # list of (u, v) vertices
    mfcq: bool
    generators: np.ndarray


@dataclass
class WGenerators:
    generators: np.ndarray
    per_solution: list
    mfcq: bool
    kkt_solvable: bool

    def to_dict(self):
        return {"generators": self.generators.tolist(), "mfcq": self.mfcq,
                "kkt_solvable": self.kkt_solvable,
                "per_solution": [{"y": k.y.tolist(), "active": k.active,
                                  "multipliers": [{"u": u.tolist(), "v": v.tolist()} for u, v in k.multipliers],
                                  "mfcq": k.mfcq} for k in self.per_solution]}


def kkt_multipliers(blp: BilevelProgram, x, y, tol: float = 1e-7):
    """Vertices of the lower-level multiplier set ``M(x, y)``.

    Basic solutions of ``∇_y f + u ∇_y g + v ∇_y h = 0`` with ``u >= 0``
    supported on the active inequalities. Returns ``(active, vertices, mfcq)``.
    """
    p = np.r_[np.asarray(x, dtype=float), np.asarray(y, dtype=float)]
    env = dict(zip(blp.variables, p))
    active = [i for i, e in enumerate(blp.g) if float(_eval(e, env)) >= -tol]
    fy = _grad_at(blp.f, blp.variables, p, blp.y_vars)
    Gy = np.array([_grad_at(blp.g[i], blp.variables, p, blp.y_vars) for i in active]).reshape(-1, blp.s)
    Hy = np.array([_grad_at(e, blp.variables, p, blp.y_vars) for e in blp.h]).reshape(-1, blp.s)
    rows = np.vstack([Gy, Hy])
    mfcq = positive_dependence_certificate(rows, ["nonneg"] * len(active) + ["free"] * blp.n) is None \
        if rows.shape[0] else True
    if 2 ** len(active) > 2 ** 8 * 2 ** blp.s:
        raise PreconditionError("too many active lower-level constraints")
    verts = []
    scale = max(1.0, float(np.abs(fy).max()), float(np.abs(rows).max()) if rows.size else 1.0)
    for k in range(len(active) + 1):
        for B in itertools.combinations(range(len(active)), k):
            M = np.vstack([Gy[list(B)], Hy]).reshape(-1, blp.s)
            if M.shape[0] and numerical_rank(M).rank < M.shape[0]:
                continue
            if M.shape[0]:
                coef, *_ = np.linalg.lstsq(M.T, -fy, rcond=None)
            else:
                coef = np.zeros(0)
            if np.linalg.norm(fy + coef @ M) > 1e-8 * scale:
                continue
            uB, v = coef[:len(B)], coef[len(B):]
            if np.any(uB < -1e-10):
                continue
            u = np.zeros(blp.m)
            u[[active[b] for b in B]] = np.maximum(uB, 0.0)
            if not any(np.allclose(u, u2, atol=1e-9) and np.allclose(v, v2, atol=1e-9) for u2, v2 in verts):
                verts.append((u, v))
    return active, verts, mfcq


def _solution_probe_points(sample: ValueFunctionSample, limit: int = 32):
    pts = []
    for rep, cl in zip(sample.minimizers, sample.clusters):
        pts.append(rep)
        if len(cl) > 1:
            for j in range(cl.shape[1]):
                pts.append(cl[np.argmin(cl[:, j])])
                pts.append(cl[np.argmax(cl[:, j])])
            step = max(1, len(cl) // limit)
            pts.extend(cl[::step])
    return np.unique(np.array(pts), axis=0)


def w_generators(blp: BilevelProgram, x, grid_points: int | None = None, tol: float = 1e-7) -> WGenerators:
    """Generators ``∇_x f + u ∇_x g + v ∇_x h`` over ``y in S(x)`` and multiplier vertices."""
    x = np.asarray(x, dtype=float).reshape(-1)
    sample = value_function(blp, x, grid_points)
    per, gens = [], []
    mfcq_all, kkt_all = True, True
    for y in _solution_probe_points(sample):
        active, verts, mfcq = kkt_multipliers(blp, x, y, tol)
        p = np.r_[x, y]
        fx = _grad_at(blp.f, blp.variables, p, blp.x_vars)
        gx = np.array([_grad_at(e, blp.variables, p, blp.x_vars) for e in blp.g]).reshape(-1, blp.d)
        hx = np.array([_grad_at(e, blp.variables, p, blp.x_vars) for e in blp.h]).reshape(-1, blp.d)
        here = [fx + u @ gx + v @ hx for u, v in verts]
        gens.extend(here)
        per.append(KKTData(y, active, verts, mfcq, np.array(here).reshape(-1, blp.d)))
        mfcq_all &= mfcq
        kkt_all &= bool(verts)
    G = hull_vertices(np.array(gens), tol=1e-12) if gens else np.zeros((0, blp.d))
    return WGenerators(G, per, mfcq_all, kkt_all)


class ValueFunctionOracle(Oracle):
    """``V`` as an expression node; subgradients come from Danskin or KKT generators."""

    label = "V"

    def __init__(self, blp: BilevelProgram, grid_points: int | None = None):
        self.blp = blp
        self.grid_points = grid_points

    def value(self, args):
        return value_function(self.blp, args, self.grid_points).value

    def subgradients(self, args):
        if not self.blp.lower_depends_on_x():
            gens = danskin_generators(self.blp, args, self.grid_points)
            return gens, True
        w = w_generators(self.blp, args, self.grid_points)
        if w.generators.shape[0] == 0:
            raise PreconditionError("lower-level KKT system has no solution at a minimizer")
        return w.generators, w.generators.shape[0] == 1 and w.mfcq


# the combined program -------------------------------------------------------------

@dataclass
class CombinedProgram:
    """Feasibility system over ``(x, y, u, v)`` plus the upper objective."""

    system: FeasibilitySystem
    objective: Expression
    program: BilevelProgram
    u_vars: list
    v_vars: list
    lagrangian_gradient: list

    @property
    def variables(self):
        return self.system.variables


def _fresh(prefix, k, taken):
    out = []
    for i in range(k):
        name = f"{prefix}{i + 1}"
        while name in taken:
            name = "_" + name
        taken.add(name)
        out.append(name)
    return out


def build_combined_program(blp: BilevelProgram, grid_points: int | None = None) -> CombinedProgram:
    """``f - V <= 0, G <= 0, H = 0, ∇_y L = 0, (-g, u)`` complementary, ``x in X``."""
    taken = set(blp.variables)
    u_vars = _fresh("u", blp.m, taken)
    v_vars = _fresh("v", blp.n, taken)
    u = [var(n) for n in u_vars]
    v = [var(n) for n in v_vars]
    grad_L = []
    for yj in blp.y_vars:
        term = derivative(blp.f, yj)
        for ui, gi in zip(u, blp.g):
            term = term + ui * derivative(gi, yj)
        for vi, hi in zip(v, blp.h):
            term = term + vi * derivative(hi, yj)
        grad_L.append(term)
    V = oracle(ValueFunctionOracle(blp, grid_points), [var(n) for n in blp.x_vars])
    g = [blp.f - V] + list(blp.G)
    h = list(blp.H) + grad_L
    G = [const(0.0) - gi for gi in blp.g]
    variables = blp.variables + u_vars + v_vars
    rest = blp.s + blp.m + blp.n
    blocks = [blp.x_set] + ([FullSpace(rest)] if rest else [])
    sys = FeasibilitySystem(variables, g=g, h=h, G=G, H=u, blocks=blocks, name=f"combined {blp.name}".strip())
    return CombinedProgram(sys, blp.F, blp, u_vars, v_vars, grad_L)


# rank-test matrices ---------------------------------------------------------------

@dataclass
class MatrixReport:
    matrix: np.ndarray
    rank: RankReport
    target: int | None
    rows: list
    columns: list

    @property
    def meets_target(self) -> bool | None:
        return None if self.target is None else self.rank.rank == self.target

    def to_dict(self):
        return {"matrix": self.matrix.tolist(), "rank": self.rank.rank, "target": self.target,
                "meets_target": self.meets_target, "rows": self.rows, "columns": self.columns,
                "singular_values": self.rank.singular_values.tolist()}


@dataclass
class _CPIndex:
    inactive_zero_u: list  # g < 0, u = 0
    positive_u: list  # g = 0, u > 0
    biactive: list  # g = 0, u = 0


def _cp_index(cp: CombinedProgram, point, tol):
    idx = active_index_sets(cp.system, point, tol)
    return _CPIndex(idx.zero_H, idx.zero_G, idx.biactive)


def _split(cp: CombinedProgram, point):
    blp = cp.program
    p = np.asarray(point, dtype=float).reshape(-1)
    xy = p[:blp.d + blp.s]
    return p, xy


def _grads(exprs, variables, point, names):
    if not exprs:
        return np.zeros((0, len(names)))
    return np.vstack([_grad_at(e, variables, point, names) for e in exprs])


def feasibility_jacobian(cp: CombinedProgram, point, tol: float | None = None) -> MatrixReport:
    """Rows ``∇h``, ``∇H`` and ``∇g`` on the strictly complementary active set, over ``(x, y)``."""
    tol = config.settings.feas_tol if tol is None else tol
    blp = cp.program
    p, _ = _split(cp, point)
    ix = _cp_index(cp, p, tol)
    names = blp.variables
    rows = [_grads(blp.h, cp.variables, p, names), _grads(blp.H, cp.variables, p, names),
            _grads([blp.g[i] for i in ix.positive_u], cp.variables, p, names)]
    M = np.vstack(rows).reshape(-1, len(names))
    labels = [f"h{i}" for i in range(blp.n)] + [f"H{i}" for i in range(len(blp.H))] + \
        [f"g{i}" for i in ix.positive_u]
    return MatrixReport(M, numerical_rank(M), blp.d + blp.s, labels, names)


def multiplier_block(cp: CombinedProgram, point, tol: float | None = None) -> MatrixReport:
    """``[∇_y h^T, ∇_y g_A^T]`` with ``A`` the active lower inequalities."""
    tol = config.settings.feas_tol if tol is None else tol
    blp = cp.program
    p, _ = _split(cp, point)
    ix = _cp_index(cp, p, tol)
    act = sorted(ix.positive_u + ix.biactive)
    M = np.hstack([_grads(blp.h, cp.variables, p, blp.y_vars).T,
                   _grads([blp.g[i] for i in act], cp.variables, p, blp.y_vars).T]).reshape(blp.s, -1)
    return MatrixReport(M, numerical_rank(M), len(act) + blp.n, blp.y_vars,
                        [f"v{i}" for i in range(blp.n)] + [f"u{i}" for i in act])


def _lagrangian_rows(cp, p):
    names = cp.program.variables
    return _grads(cp.lagrangian_gradient, cp.variables, p, names)


def kkt_jacobian(cp: CombinedProgram, point, tol: float | None = None) -> MatrixReport:
    """Block matrix of the KKT rank test; target ``d + s + m + n - |K|``.

    Rows: ``∇_{x,y}(∇_y L)`` next to ``∇_y h^T`` and ``∇_y g_A^T`` for the
    active lower inequalities ``A``, then ``∇h``, ``∇H`` and ``∇g`` on the
    strictly complementary active set padded with zeros. ``K`` is the set of
    inactive lower inequalities.
    """
    tol = config.settings.feas_tol if tol is None else tol
    blp = cp.program
    p, _ = _split(cp, point)
    ix = _cp_index(cp, p, tol)
    act = sorted(ix.positive_u + ix.biactive)
    names = blp.variables
    top = np.hstack([_lagrangian_rows(cp, p),
                     _grads(blp.h, cp.variables, p, blp.y_vars).T.reshape(blp.s, -1),
                     _grads([blp.g[i] for i in act], cp.variables, p, blp.y_vars).T.reshape(blp.s, -1)])
    extra = blp.n + len(act)
    lower = np.vstack([_grads(blp.h, cp.variables, p, names), _grads(blp.H, cp.variables, p, names),
                       _grads([blp.g[i] for i in ix.positive_u], cp.variables, p, names)])
    lower = np.hstack([lower, np.zeros((lower.shape[0], extra))])
    M = np.vstack([top, lower])
    target = blp.d + blp.s + blp.m + blp.n - len(ix.inactive_zero_u)
    rows = [f"dL/d{y}" for y in blp.y_vars] + [f"h{i}" for i in range(blp.n)] + \
        [f"H{i}" for i in range(len(blp.H))] + [f"g{i}" for i in ix.positive_u]
    cols = names + [f"v{i}" for i in range(blp.n)] + [f"u{i}" for i in act]
    return MatrixReport(M, numerical_rank(M), target, rows, cols)


def augmented_kkt_jacobian(cp: CombinedProgram, point, alpha: int, w, upper_active: Sequence[int] = (),
                           extra_active: Sequence[int] = (), extra_unit: Sequence[int] = (),
                           tol: float | None = None) -> MatrixReport:
    """Matrix of the constant-rank test for the combined program.

    Columns are ``(x, y, v, u)``. Rows: ``∇_{x,y}(∇_y L)`` with ``∇_y h^T`` and
    ``∇_y g^T``; ``∇h``; ``∇H``; ``∇G`` on ``upper_active``; ``∇g`` on the
    strictly complementary active set plus ``extra_active``; unit rows for
    the inactive inequalities plus ``extra_unit`` in the ``u`` columns; and
    ``alpha * (∇f - (w, 0))``. ``w`` is an element of the convex hull of the
    value-function generators at ``x``.
    """
    if alpha not in (0, 1):
        raise ValueError("alpha must be 0 or 1")
    tol = config.settings.feas_tol if tol is None else tol
    blp = cp.program
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.size != blp.d:
        raise ValueError(f"w must have length {blp.d}")
    p, _ = _split(cp, point)
    ix = _cp_index(cp, p, tol)
    names = blp.variables
    nxy = blp.d + blp.s
    ncol = nxy + blp.n + blp.m
    top = np.hstack([_lagrangian_rows(cp, p),
                     _grads(blp.h, cp.variables, p, blp.y_vars).T.reshape(blp.s, -1),
                     _grads(blp.g, cp.variables, p, blp.y_vars).T.reshape(blp.s, -1)])
    g_rows = sorted(set(ix.positive_u) | set(extra_active))
    body = np.vstack([_grads(blp.h, cp.variables, p, names), _grads(blp.H, cp.variables, p, names),
                      _grads([blp.G[i] for i in upper_active], cp.variables, p, names),
                      _grads([blp.g[i] for i in g_rows], cp.variables, p, names)])
    body = np.hstack([body, np.zeros((body.shape[0], blp.n + blp.m))])
    units = sorted(set(ix.inactive_zero_u) | set(extra_unit))
    E = np.zeros((len(units), ncol))
    for r, i in enumerate(units):
        E[r, nxy + blp.n + i] = 1.0
    fgrad = _grad_at(blp.f, cp.variables, p, names)
    last = np.zeros((1, ncol))
    last[0, :nxy] = alpha * (fgrad - np.r_[w, np.zeros(blp.s)])
    M = np.vstack([top, body, E, last])
    rows = [f"dL/d{y}" for y in blp.y_vars] + [f"h{i}" for i in range(blp.n)] + \
        [f"H{i}" for i in range(len(blp.H))] + [f"G{i}" for i in upper_active] + \
        [f"g{i}" for i in g_rows] + [f"e_u{i}" for i in units] + ["value"]
    cols = names + [f"v{i}" for i in range(blp.n)] + [f"u{i}" for i in range(blp.m)]
    return MatrixReport(M, numerical_rank(M), None, rows, cols)


def combined_penalty(cp: CombinedProgram, point, norm: str = "l1") -> float:
    """Residual of the combined program.

    Components are ``(f - V)_+``, ``|H|``, ``|h|``, ``(G)_+``, ``|∇_y L|`` and
    ``d_Omega(-g_i, u_i)``; they are summed for ``norm="l1"`` and maximized
    for ``"linf"``.
    """
    if norm not in ("l1", "linf"):
        raise ValueError(f"unknown norm {norm!r}")
    blp = cp.program
    p = np.asarray(point, dtype=float).reshape(-1)
    env = dict(zip(cp.variables, p))
    ev = lambda e: float(_eval(e, env))  # noqa: E731
    V = value_function(blp, p[:blp.d]).value
    parts = [max(ev(blp.f) - V, 0.0)]
    parts += [abs(ev(e)) for e in blp.H] + [abs(ev(e)) for e in blp.h]
    parts += [max(ev(e), 0.0) for e in blp.G]
    parts += [abs(ev(e)) for e in cp.lagrangian_gradient]
    parts += [dist_omega(-ev(gi), env[ui], norm) for gi, ui in zip(blp.g, cp.u_vars)]
    return float(sum(parts) if norm == "l1" else max(parts))
