"""Rank tests, sign-preserving reduction and linear feasibility.

All rank decisions in the package go through :func:`numerical_rank`, which
normalizes rows before thresholding singular values. This makes the rank of a
family of gradient vectors independent of how each vector is scaled.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog, nnls
from scipy.spatial import ConvexHull, QhullError

from . import config

ZERO_ROW = 1e-12  # rows below this (relative to the largest, floor 1) count as zero


class InconsistentDecompositionError(ValueError):
    """The vector is not in the span claimed by the caller."""


class BranchExplosionError(RuntimeError):
    """Complementarity branch enumeration exceeds the configured cap."""

    def __init__(self, n_pairs: int, cap: int):
        super().__init__(f"3^{n_pairs} branch cases exceed the cap {cap}")
        self.n_pairs = n_pairs
        self.cap = cap


@dataclass
class RankReport:
    """Numerical rank of a family of row vectors.

    ``singular_values`` are those of the row-normalized matrix with zero rows
    removed; ``rank`` counts the values above ``tol`` times the largest.
    """

    rank: int
    singular_values: np.ndarray
    tol: float

    def to_dict(self):
        return {"rank": int(self.rank), "singular_values": [float(s) for s in self.singular_values],
                "tol": self.tol}


def _as_rows(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[None, :] if M.size else M.reshape(0, 0)
    return M


def numerical_rank(M, tol: float | None = None) -> RankReport:
    tol = config.settings.rank_tol if tol is None else tol
    M = _as_rows(M)
    if M.size == 0:
        return RankReport(0, np.zeros(0), tol)
    norms = np.linalg.norm(M, axis=1)
    big = norms.max()
    keep = norms > ZERO_ROW * max(1.0, big)
    if not np.any(keep):
        return RankReport(0, np.zeros(min(M.shape)), tol)
    N = M[keep] / norms[keep, None]
    s = np.linalg.svd(N, compute_uv=False)
    return RankReport(int(np.sum(s > tol * s[0])), s, tol)


def select_basis(vectors, tol: float | None = None) -> list[int]:
    """Greedy basis of the span, scanning in index order (0-based)."""
    V = _as_rows(vectors)
    chosen: list[int] = []
    for i in range(V.shape[0]):
        trial = chosen + [i]
        if numerical_rank(V[trial], tol).rank == len(trial):
            chosen = trial
    return chosen


def null_vector(V: np.ndarray) -> np.ndarray:
    """Unit vector c minimizing ||V^T c|| for rows V."""
    V = _as_rows(V)
    # full_matrices so that the trailing rows span the null space when k > d
    _, _, vt = np.linalg.svd(V.T, full_matrices=True)
    return vt[-1]


@dataclass
class ReductionResult:
    indices: list  # retained extras (0-based)
    base_coeffs: np.ndarray
    extra_coeffs: np.ndarray  # aligned with ``indices``
    residual: float


def caratheodory_reduce(v, base, extras, alphas, tol: float | None = None) -> ReductionResult:
    """Drop extras until the family is independent, keeping coefficient signs.

    Parameters
    ----------
    v : array_like
        Target vector, equal to a combination of ``base`` plus
        ``sum(alphas[i] * extras[i])``.
    base : sequence of vectors
        Linearly independent vectors whose coefficients are unrestricted.
    extras : sequence of vectors
    alphas : sequence of nonzero floats

    Returns
    -------
    ReductionResult
        Retained extras ``I`` with coefficients of the same sign as the
        corresponding ``alphas``, and ``base ∪ extras[I]`` independent.
    """
    v = np.asarray(v, dtype=float)
    d = v.shape[0]
    B = np.asarray(base, dtype=float).reshape(-1, d)
    E = np.asarray(extras, dtype=float).reshape(-1, d)
    alphas = np.asarray(alphas, dtype=float).reshape(-1)
    if alphas.shape[0] != E.shape[0]:
        raise ValueError("one alpha per extra vector is required")
    if np.any(alphas == 0):
        raise ValueError("alphas must be nonzero")
    if B.shape[0] and numerical_rank(B, tol).rank < B.shape[0]:
        raise ValueError("base vectors must be linearly independent")
    scale = max(1.0, np.linalg.norm(v), *(np.abs(alphas) * np.linalg.norm(E, axis=1)))
    r = v - alphas @ E
    if B.shape[0]:
        beta, *_ = np.linalg.lstsq(B.T, r, rcond=None)
        resid = np.linalg.norm(B.T @ beta - r)
    else:
        beta, resid = np.zeros(0), np.linalg.norm(r)
    if resid > 1e-9 * scale:
        raise InconsistentDecompositionError(f"residual {resid:.3e} outside the base span")

    active = list(range(E.shape[0]))
    coef = alphas.copy()
    nb = B.shape[0]
    while active:
        F = np.vstack([B, E[active]]) if nb else E[active]
        if numerical_rank(F, tol).rank == F.shape[0]:
            break
        z = null_vector(F)
        ze = z[nb:]
        ce = coef[active]
        ratios = np.full(len(active), np.inf)
        nz = np.abs(ze) > 1e-12 * np.abs(ze).max()
        same = nz & (np.sign(ze) == np.sign(ce))
        if not np.any(same):
            z, ze = -z, -ze
            same = nz & (np.sign(ze) == np.sign(ce))
        ratios[same] = ce[same] / ze[same]
        t = ratios.min()
        beta = beta - t * z[:nb]
        new = ce - t * ze
        hit = ratios <= t * (1 + 1e-12)
        drop = [active[j] for j in np.flatnonzero(hit)]
        drop_set = set(drop)
        for j, i in enumerate(active):
            coef[i] = 0.0 if i in drop_set else new[j]
        active = [i for i in active if i not in drop_set]

    # polish for exact reconstruction while keeping signs
    if nb or active:
        F = np.vstack([B, E[active]]) if nb else E[active]
        sol, *_ = np.linalg.lstsq(F.T, v, rcond=None)
        if np.all(np.sign(sol[nb:]) == np.sign(alphas[active])):
            beta = sol[:nb]
            for j, i in enumerate(active):
                coef[i] = sol[nb + j]
    ex = np.array([coef[i] for i in active])
    recon = (beta @ B if nb else np.zeros(d)) + (ex @ E[active] if active else 0.0)
    return ReductionResult(active, np.asarray(beta), ex, float(np.linalg.norm(recon - v)))


# linear feasibility ----------------------------------------------------------

def linear_feasibility(A, b, free=None, tol: float | None = None):
    """Find ``z`` with ``A z = b`` and ``z[i] >= 0`` for every non-free ``i``.

    Solved as a zero-objective linear program with the dual simplex method,
    so a basic solution is returned. Returns ``None`` when infeasible.
    """
    tol = config.settings.lp_tol if tol is None else tol
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    n = A.shape[1]
    free = np.zeros(n, dtype=bool) if free is None else np.asarray(free, dtype=bool)
    bounds = [(None, None) if f else (0.0, None) for f in free]
    res = linprog(np.zeros(n), A_eq=A, b_eq=b, bounds=bounds, method="highs-ds",
                  options={"primal_feasibility_tolerance": max(tol, 1e-10)})
    if res.status != 0:
        return None
    out = np.asarray(res.x, dtype=float)
    out[~free] = np.maximum(out[~free], 0.0)
    if np.linalg.norm(A @ out - b) > 1e-7 * max(1.0, np.abs(b).sum(), np.abs(A).max()):
        return None
    return out


@dataclass
class DependenceCertificate:
    """Nonzero sign-constrained multipliers annihilating a vector family."""

    multipliers: np.ndarray
    signs: list
    branches: tuple = ()
    residual: float = 0.0

    def to_dict(self):
        return {"multipliers": [float(c) for c in self.multipliers], "signs": list(self.signs),
                "branches": list(self.branches), "residual": self.residual}


BRANCHES = ("both", "G-zero", "H-zero")


def _pair_slots(signs):
    pairs = []
    i = 0
    while i < len(signs):
        if signs[i] == "paired":
            if i + 1 >= len(signs) or signs[i + 1] != "paired":
                raise ValueError("paired entries must come in consecutive (G, H) pairs")
            pairs.append((i, i + 1))
            i += 2
        else:
            if signs[i] not in ("free", "nonneg"):
                raise ValueError(f"unknown sign constraint {signs[i]!r}")
            i += 1
    return pairs


def branch_cases(n_pairs: int, cap: int | None = None):
    cap = config.settings.branch_cap if cap is None else cap
    if 3 ** n_pairs > cap:
        raise BranchExplosionError(n_pairs, cap)
    return itertools.product(BRANCHES, repeat=n_pairs)


def branch_signs(signs, pairs, case):
    """Concrete per-entry pattern ('free' | 'nonneg' | 'zero') for a branch case."""
    pattern = list(signs)
    for (iG, iH), br in zip(pairs, case):
        if br == "both":
            pattern[iG] = pattern[iH] = "nonneg"
        elif br == "G-zero":
            pattern[iG], pattern[iH] = "zero", "free"
        else:
            pattern[iG], pattern[iH] = "free", "zero"
    return pattern


def _certificate_for_pattern(V, pattern, tol):
    k = V.shape[0]
    S = [i for i in range(k) if pattern[i] == "nonneg"]
    F = [i for i in range(k) if pattern[i] == "free"]
    c = np.zeros(k)
    if F and numerical_rank(V[F], tol).rank < len(F):
        z = null_vector(V[F])
        c[F] = z
    elif S:
        cols = S + F
        A = np.vstack([V[cols].T, np.r_[np.ones(len(S)), np.zeros(len(F))]])
        b = np.r_[np.zeros(V.shape[1]), 1.0]
        sol = linear_feasibility(A, b, free=[False] * len(S) + [True] * len(F))
        if sol is None:
            return None
        c[cols] = sol
    else:
        return None
    total = np.abs(c).sum()
    if total == 0:
        return None
    return c / total


def positive_dependence_certificate(vectors, signs: Sequence[str], branch_cap: int | None = None,
                                    tol: float | None = None):
    """Nonzero multipliers with the given sign pattern and ``sum c_i v_i = 0``.

    Parameters
    ----------
    vectors : array_like, shape (k, d)
    signs : sequence of {'free', 'nonneg', 'paired'}
        Paired entries come as consecutive (G, H) pairs; their multipliers
        are either both nonnegative or one of them vanishes.

    Returns
    -------
    DependenceCertificate or None
        Multipliers normalized to ``sum |c| = 1``.
    """
    V = _as_rows(vectors)
    signs = list(signs)
    if V.shape[0] != len(signs):
        raise ValueError("one sign constraint per vector is required")
    if V.shape[0] == 0:
        return None
    pairs = _pair_slots(signs)
    for case in branch_cases(len(pairs), branch_cap):
        pattern = branch_signs(signs, pairs, case)
        c = _certificate_for_pattern(V, pattern, tol)
        if c is None:
            continue
        res = float(np.linalg.norm(c @ V))
        if res <= 1e-8 * max(1.0, np.abs(V).max()):
            return DependenceCertificate(c, pattern, tuple(case), res)
    return None


# cones and hulls ---------------------------------------------------------------

def orth(M, tol=1e-10) -> np.ndarray:
    """Orthonormal rows spanning the row space of M."""
    M = _as_rows(M)
    if M.size == 0:
        return np.zeros((0, M.shape[1] if M.ndim == 2 else 0))
    u, s, vt = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((0, M.shape[1]))
    return vt[s > tol * s[0]]


def cone_distance(v, rays, lineality) -> float:
    """Euclidean distance from ``v`` to ``cone(rays) + span(lineality)``."""
    v = np.asarray(v, dtype=float)
    d = v.shape[0]
    L = orth(np.asarray(lineality, dtype=float).reshape(-1, d))
    P = np.eye(d) - L.T @ L if L.shape[0] else np.eye(d)
    w = P @ v
    R = np.asarray(rays, dtype=float).reshape(-1, d)
    if R.shape[0] == 0:
        return float(np.linalg.norm(w))
    Rp = R @ P
    _, rnorm = nnls(Rp.T, w)
    return float(rnorm)


def cone_projection(v, rays, lineality) -> np.ndarray:
    """Nearest point of ``cone(rays) + span(lineality)`` to ``v``."""
    v = np.asarray(v, dtype=float)
    d = v.shape[0]
    L = orth(np.asarray(lineality, dtype=float).reshape(-1, d))
    lin_part = L.T @ (L @ v) if L.shape[0] else np.zeros(d)
    P = np.eye(d) - L.T @ L if L.shape[0] else np.eye(d)
    w = P @ v
    R = np.asarray(rays, dtype=float).reshape(-1, d)
    if R.shape[0] == 0:
        return lin_part
    Rp = R @ P
    coef, _ = nnls(Rp.T, w)
    return lin_part + coef @ Rp


def canonical_cone(rays, lineality, tol: float = 1e-10):
    """Split a finitely generated cone into lineality basis and pointed rays.

    Returns ``(rays, lineality)`` where the lineality rows are orthonormal,
    the rays are unit vectors orthogonal to the lineality space, and no ray
    is the negative of a combination of the others.
    """
    R = np.asarray(rays, dtype=float)
    L = np.asarray(lineality, dtype=float)
    d = R.shape[1] if R.ndim == 2 and R.size else (L.shape[1] if L.ndim == 2 and L.size else None)
    if d is None:
        return np.zeros((0, 0)), np.zeros((0, 0))
    R = R.reshape(-1, d)
    L = L.reshape(-1, d)
    lineal = []
    for i in range(R.shape[0]):
        A = np.vstack([R, L]).T
        free = [False] * R.shape[0] + [True] * L.shape[0]
        if linear_feasibility(A, -R[i], free=free) is not None:
            lineal.append(i)
    Lb = orth(np.vstack([L, R[lineal]]) if lineal or L.shape[0] else np.zeros((0, d)), tol)
    P = np.eye(d) - Lb.T @ Lb if Lb.shape[0] else np.eye(d)
    out = []
    for i in range(R.shape[0]):
        if i in lineal:
            continue
        r = P @ R[i]
        n = np.linalg.norm(r)
        if n <= tol:
            continue
        r = r / n
        if not any(np.allclose(r, q, atol=1e-12) for q in out):
            out.append(r)
    return (np.array(out).reshape(-1, d), Lb.reshape(-1, d))


def hull_vertices(points, tol: float = 1e-9) -> np.ndarray:
    """Extreme points of a finite point set (rows)."""
    P = _as_rows(points)
    if P.shape[0] <= 1:
        return P
    P = _unique(P, tol)
    if P.shape[0] <= 2:
        return P
    c = P.mean(axis=0)
    _, s, vt = np.linalg.svd(P - c, full_matrices=False)
    scale = max(1.0, s[0]) if s.size else 1.0
    k = int(np.sum(s > tol * scale))
    if k == 0:
        return P[:1]
    coords = (P - c) @ vt[:k].T
    if k == 1:
        return P[[int(np.argmin(coords[:, 0])), int(np.argmax(coords[:, 0]))]]
    try:
        hull = ConvexHull(coords)
    except QhullError:  # pragma: no cover - degenerate input
        return P
    return P[sorted(hull.vertices)]


def _unique(P, tol):
    keep = [0]
    for i in range(1, P.shape[0]):
        K = P[keep]
        gap = np.linalg.norm(K - P[i], axis=1)
        if not np.any(gap <= tol * np.maximum(1.0, np.linalg.norm(K, axis=1))):
            keep.append(i)
    return P[keep]


def project_to_hull(points, target) -> np.ndarray:
    """Nearest point to ``target`` in the convex hull of the rows of ``points``."""
    P = _as_rows(points)
    t = np.asarray(target, dtype=float)
    if P.shape[0] == 1:
        return P[0].copy()
    w = 1e4 * max(1.0, np.abs(P).max())
    A = np.vstack([P.T, w * np.ones(P.shape[0])])
    coef, _ = nnls(A, np.r_[t, w])
    total = coef.sum()
    coef = coef / total if total > 0 else np.full(P.shape[0], 1.0 / P.shape[0])
    return coef @ P


@dataclass
class Family:
    """Labelled vector family with per-vector sign constraints."""

    vectors: list = field(default_factory=list)
    signs: list = field(default_factory=list)
    labels: list = field(default_factory=list)

    def add(self, vec, sign, label):
        self.vectors.append(np.asarray(vec, dtype=float))
        self.signs.append(sign)
        self.labels.append(label)

    def matrix(self, d: int) -> np.ndarray:
        return np.array(self.vectors).reshape(-1, d)

    def __len__(self):
        return len(self.vectors)
