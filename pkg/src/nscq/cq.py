"""Constraint-qualification checks and sampled probes.

NNAMCQ, LCQ and the full-rank condition are decided pointwise. RCPLD and
RCRCQ quantify over all sequences converging to the point, so they are
probed on a :class:`SamplingPlan`; a clean probe reports
``"no-violation-found"``, which is evidence rather than proof.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import config
from .expr import is_affine
from .linalg import (BranchExplosionError, Family, numerical_rank, positive_dependence_certificate,
                     project_to_hull, select_basis)
from .system import FeasibilitySystem, IndexSets, active_index_sets

HOLDS = "holds"
FAILS = "fails"
NO_VIOLATION = "no-violation-found"
VIOLATED = "violated-with-witness"
INCOMPLETE = "incomplete"


@dataclass
class SamplingPlan:
    """Points ``project_C(x* + r u)`` with ``u`` uniform on the unit sphere.

    Radii are ``r0 * rho**k`` for ``k = 0..K`` unless given explicitly.
    """

    r0: float = 1e-2
    rho: float = 0.5
    K: int = 12
    points_per_radius: int = 16
    seed: int | None = None
    radii: list | None = None

    def radius_list(self) -> list:
        if self.radii is not None:
            r = [float(v) for v in self.radii]
        else:
            r = [self.r0 * self.rho ** k for k in range(self.K + 1)]
        if any(b >= a for a, b in zip(r, r[1:])) or any(v <= 0 for v in r):
            raise ValueError("radii must be positive and strictly decreasing")
        return r

    def samples(self, sys: FeasibilitySystem, x) -> list:
        seed = config.settings.seed if self.seed is None else self.seed
        rng = np.random.default_rng(seed)
        x = np.asarray(x, dtype=float)
        out = []
        for r in self.radius_list():
            for _ in range(self.points_per_radius):
                u = rng.standard_normal(sys.d)
                u /= np.linalg.norm(u)
                z = sys.project_C(x + r * u)
                if np.linalg.norm(z - x) > 0:
                    out.append((r, z))
        return out

    def to_dict(self):
        return {"radii": self.radius_list(), "points_per_radius": self.points_per_radius,
                "seed": config.settings.seed if self.seed is None else self.seed,
                "projection": "catalog"}


@dataclass
class MultiplierVector:
    lam_g: np.ndarray
    lam_h: np.ndarray
    lam_G: np.ndarray
    lam_H: np.ndarray
    eta: np.ndarray
    g_vertices: dict = field(default_factory=dict)

    def combination(self, sys: FeasibilitySystem, x) -> np.ndarray:
        """``sum lam_g v + sum lam_h ∇h - sum lam_G ∇G - sum lam_H ∇H + eta``."""
        out = self.eta.copy()
        for i, v in self.g_vertices.items():
            out += self.lam_g[i] * v
        out += self.lam_h @ sys.gradients("h", x) if sys.m else 0.0
        if sys.p:
            out -= self.lam_G @ sys.gradients("G", x) + self.lam_H @ sys.gradients("H", x)
        return out

    def to_dict(self):
        return {"lam_g": self.lam_g.tolist(), "lam_h": self.lam_h.tolist(),
                "lam_G": self.lam_G.tolist(), "lam_H": self.lam_H.tolist(),
                "eta": self.eta.tolist(),
                "g_vertices": {str(i): v.tolist() for i, v in sorted(self.g_vertices.items())}}


@dataclass
class CQReport:
    check: str
    verdict: str
    payload: dict = field(default_factory=dict)
    plan: dict | None = None
    chain: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {"check": self.check, "verdict": self.verdict, "payload": _jsonable(self.payload),
                "plan": self.plan, "chain": list(self.chain), "notes": list(self.notes)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    return obj


# per-point data --------------------------------------------------------------

class _Point:
    """Lazily evaluated derivative data of a system at one point."""

    def __init__(self, sys: FeasibilitySystem, x, tol):
        self.sys = sys
        self.x = np.asarray(x, dtype=float)
        self.tol = tol
        self.grad = {k: sys.gradients(k, self.x) for k in ("h", "G", "H")}
        self._sub = {}
        self._cones = None

    def subdiff(self, i):
        if i not in self._sub:
            self._sub[i] = self.sys.subdifferential(i, self.x)
        return self._sub[i]

    def cones(self):
        if self._cones is None:
            self._cones = self.sys.normal_cones(self.x, self.tol)
        return self._cones

    def nearest_subgradient(self, i, target):
        sd = self.subdiff(i)
        cands = [project_to_hull(p, target) for p in sd.pieces]
        return min(cands, key=lambda v: np.linalg.norm(v - target))

    def nearest_normal(self, b, target):
        return self.cones()[b].project(target)


def _nontrivial_blocks(sys):
    return [b for b, blk in enumerate(sys.blocks) if blk.kind != "full"]


def _assemble(pt: _Point, g_cols: dict, h_idx, G_free, H_free, paired, charts: dict) -> Family:
    sys = pt.sys
    fam = Family()
    for i, verts in g_cols.items():
        for j, v in enumerate(verts):
            fam.add(v, "nonneg", ("g", i, j))
    for i in h_idx:
        fam.add(pt.grad["h"][i], "free", ("h", i))
    for i in G_free:
        fam.add(-pt.grad["G"][i], "free", ("G", i))
    for i in H_free:
        fam.add(-pt.grad["H"][i], "free", ("H", i))
    for i in paired:
        fam.add(-pt.grad["G"][i], "paired", ("G", i))
        fam.add(-pt.grad["H"][i], "paired", ("H", i))
    for b, chart in charts.items():
        for j, r in enumerate(chart.rays):
            fam.add(sys.embed(b, r), "nonneg", ("eta", b, "ray", j))
        for j, r in enumerate(chart.lineality):
            fam.add(sys.embed(b, r), "free", ("eta", b, "lin", j))
    return fam


def _decode(sys: FeasibilitySystem, fam: Family, coeffs, g_cols: dict) -> MultiplierVector:
    mv = MultiplierVector(np.zeros(sys.n), np.zeros(sys.m), np.zeros(sys.p), np.zeros(sys.p),
                          np.zeros(sys.d))
    acc = {i: np.zeros(sys.d) for i in g_cols}
    for c, lab, vec in zip(coeffs, fam.labels, fam.vectors):
        kind = lab[0]
        if kind == "g":
            mv.lam_g[lab[1]] += c
            acc[lab[1]] += c * vec
        elif kind == "h":
            mv.lam_h[lab[1]] += c
        elif kind == "G":
            mv.lam_G[lab[1]] += c
        elif kind == "H":
            mv.lam_H[lab[1]] += c
        else:
            mv.eta += c * vec
    for i, verts in g_cols.items():
        lam = mv.lam_g[i]
        mv.g_vertices[i] = acc[i] / lam if lam > 1e-14 else np.asarray(verts[0], dtype=float)
    return mv


def _unit_max(mv: MultiplierVector) -> MultiplierVector:
    """Rescale so the largest multiplier or normal-vector entry has modulus one."""
    scale = max(np.abs(np.concatenate([mv.lam_g, mv.lam_h, mv.lam_G, mv.lam_H, mv.eta])).max(), 1e-300)
    return MultiplierVector(mv.lam_g / scale, mv.lam_h / scale, mv.lam_G / scale, mv.lam_H / scale,
                            mv.eta / scale, dict(mv.g_vertices))


def _eta_blocks(sys, eta):
    return {b: eta[s] for b, s in enumerate(sys.slices)}


# pointwise checks ----------------------------------------------------------------

def check_nnamcq(sys: FeasibilitySystem, x, tol: float | None = None) -> CQReport:
    """No nonzero abnormal multipliers at ``x``."""
    tol = config.settings.feas_tol if tol is None else tol
    idx = active_index_sets(sys, x, tol)
    pt = _Point(sys, x, tol)
    subs = {i: pt.subdiff(i) for i in idx.active_g}
    cones = pt.cones()
    exact = all(s.exact for s in subs.values()) and all(c.exact for c in cones)
    piece_opts = [range(len(subs[i].pieces)) for i in idx.active_g]
    chart_opts = [range(len(c.charts)) for c in cones]
    try:
        for pc in itertools.product(*piece_opts):
            g_cols = {i: subs[i].pieces[j] for i, j in zip(idx.active_g, pc)}
            for cc in itertools.product(*chart_opts):
                charts = {b: cones[b].charts[j] for b, j in enumerate(cc) if not cones[b].charts[j].is_zero}
                fam = _assemble(pt, g_cols, range(sys.m), idx.zero_G, idx.zero_H, idx.biactive, charts)
                cert = positive_dependence_certificate(fam.matrix(sys.d), fam.signs)
                if cert is None:
                    continue
                mv = _decode(sys, fam, cert.multipliers, g_cols)
                mv = _unit_max(mv)
                return CQReport("nnamcq", FAILS, {
                    "multipliers": mv, "index_sets": idx, "branches": list(cert.branches),
                    "residual": float(np.linalg.norm(mv.combination(sys, x))),
                    "charts": {str(b): cones[b].charts[j].tag for b, j in enumerate(cc)}})
    except BranchExplosionError as err:
        return CQReport("nnamcq", INCOMPLETE, {"index_sets": idx}, notes=[str(err)])
    verdict = HOLDS if exact else NO_VIOLATION
    notes = [] if exact else ["subdifferential or normal cone is an outer estimate"]
    return CQReport("nnamcq", verdict, {"index_sets": idx}, notes=notes)


def _base_family(pt: _Point, idx: IndexSets):
    rows, labels = [], []
    for i in range(pt.sys.m):
        rows.append(pt.grad["h"][i])
        labels.append(("h", i))
    for i in idx.zero_G:
        rows.append(pt.grad["G"][i])
        labels.append(("G", i))
    for i in idx.zero_H:
        rows.append(pt.grad["H"][i])
        labels.append(("H", i))
    return np.array(rows).reshape(-1, pt.sys.d), labels


def check_fullrank(sys: FeasibilitySystem, x, tol: float | None = None) -> CQReport:
    """Rank of ∇h, ∇G on the G-zero branch and ∇H on the H-zero branch equals d."""
    tol = config.settings.feas_tol if tol is None else tol
    idx = active_index_sets(sys, x, tol)
    pt = _Point(sys, x, tol)
    M, labels = _base_family(pt, idx)
    rr = numerical_rank(M)
    met = rr.rank == sys.d
    payload = {"rank": rr.rank, "d": sys.d, "condition_met": met, "matrix": M,
               "singular_values": rr.singular_values, "index_sets": idx}
    chain = ["full-rank condition", "RCPLD", "local error bound"] if met else []
    return CQReport("fullrank", HOLDS if met else NO_VIOLATION, payload, chain=chain,
                    notes=[] if met else ["rank below d: the full-rank route does not apply"])


def check_lcq(sys: FeasibilitySystem) -> CQReport:
    """All constraint functions affine and every block a (union of) polyhedra."""
    nonaffine = [f"{k}[{i}]" for k in ("g", "h", "G", "H")
                 for i, e in enumerate(getattr(sys, k)) if not is_affine(e)]
    nonpoly = [b for b, blk in enumerate(sys.blocks) if not blk.polyhedral]
    ok = not nonaffine and not nonpoly
    return CQReport("lcq", HOLDS if ok else FAILS,
                    {"nonaffine": nonaffine, "nonpolyhedral_blocks": nonpoly},
                    chain=["LCQ", "RCRCQ", "RCPLD"] if ok else [])


# sampled probes -----------------------------------------------------------------

def _accept_radius(r: float) -> float:
    return max(math.sqrt(r), 1e-6)


def _subsets(items, descending=False):
    items = list(items)
    sizes = range(len(items), -1, -1) if descending else range(len(items) + 1)
    for k in sizes:
        yield from (list(c) for c in itertools.combinations(items, k))


def _subset_budget(idx: IndexSets):
    return 2 ** len(idx.active_g) * 4 ** len(idx.biactive)


def _short_circuit(sys, x, tol, name, allow_fullrank=True):
    lcq = check_lcq(sys)
    if lcq.verdict == HOLDS:
        return CQReport(name, NO_VIOLATION, {"route": "lcq"}, chain=["LCQ", "RCRCQ"] +
                        (["RCPLD"] if name == "rcpld" else []),
                        notes=["short-circuited: LCQ holds"])
    if allow_fullrank:
        fr = check_fullrank(sys, x, tol)
        if fr.verdict == HOLDS:
            return CQReport(name, NO_VIOLATION, {"route": "fullrank", "rank": fr.payload["rank"]},
                            chain=["full-rank condition", "RCPLD"],
                            notes=["short-circuited: full-rank condition holds"])
    return None


def probe_rcpld(sys: FeasibilitySystem, x, plan: SamplingPlan | None = None, tol: float | None = None,
                short_circuit: bool = True) -> CQReport:
    """Sample-based search for violations of RCPLD at ``x``.

    Part (i) compares the rank of the smooth base family at every sample with
    its rank at ``x``. Part (ii) enumerates index subsets, computes a
    sign-feasible dependence certificate at ``x`` for each and checks that
    the corresponding family stays dependent along sampled sequences with
    matched subgradients and normal vectors.
    """
    tol = config.settings.feas_tol if tol is None else tol
    plan = plan or SamplingPlan()
    x = np.asarray(x, dtype=float)
    if short_circuit:
        sc = _short_circuit(sys, x, tol, "rcpld")
        if sc is not None:
            sc.plan = plan.to_dict()
            return sc
    idx = active_index_sets(sys, x, tol)
    star = _Point(sys, x, tol)
    samples = [(r, _Point(sys, z, tol)) for r, z in plan.samples(sys, x)]
    base, base_labels = _base_family(star, idx)
    base_rank = numerical_rank(base).rank
    for r, pk in samples:
        Mk, _ = _base_family(pk, idx)
        rk = numerical_rank(Mk).rank
        if rk != base_rank:
            return CQReport("rcpld", VIOLATED, {
                "part": "rank-constancy", "point": pk.x, "radius": r, "rank_at_point": base_rank,
                "rank_at_sample": rk, "matrix_at_point": base, "matrix_at_sample": Mk},
                plan=plan.to_dict())
    basis = [base_labels[j] for j in select_basis(base)]
    I1 = [i for k, i in basis if k == "h"]
    I2 = [i for k, i in basis if k == "G"]
    I3 = [i for k, i in basis if k == "H"]
    cones = star.cones()
    blocks = [b for b in _nontrivial_blocks(sys) if not cones[b].is_zero]
    budget = _subset_budget(idx)
    cap = config.settings.subset_cap
    explored = 0
    notes = [f"vertex matching: nearest subgradient within sqrt(radius); basis h{I1} G{I2} H{I3}"]
    subs = {i: star.subdiff(i) for i in idx.active_g}
    try:
        for I4 in _subsets(idx.active_g):
            for I5 in _subsets(idx.biactive):
                for I6 in _subsets(idx.biactive):
                    if explored >= cap:
                        raise _Budget
                    explored += 1
                    witness = _rcpld_case(sys, star, samples, subs, cones, blocks, I1, I2, I3,
                                          I4, I5, I6, tol)
                    if witness is not None:
                        return CQReport("rcpld", VIOLATED, witness, plan=plan.to_dict(), notes=notes)
    except _Budget:
        return CQReport("rcpld", INCOMPLETE, {"explored_fraction": explored / budget},
                        plan=plan.to_dict(), notes=notes + ["subset cap reached"])
    except BranchExplosionError as err:
        return CQReport("rcpld", INCOMPLETE, {"explored_fraction": explored / budget},
                        plan=plan.to_dict(), notes=notes + [str(err)])
    notes.append(f"{explored} index-subset combinations checked on {len(samples)} samples")
    return CQReport("rcpld", NO_VIOLATION, {"samples": len(samples), "subsets": explored},
                    plan=plan.to_dict(), notes=notes)


class _Budget(Exception):
    pass


def _rcpld_case(sys, star, samples, subs, cones, blocks, I1, I2, I3, I4, I5, I6, tol):
    both = [i for i in I5 if i in I6]
    G_free = I2 + [i for i in I5 if i not in I6]
    H_free = I3 + [i for i in I6 if i not in I5]
    piece_opts = [range(len(subs[i].pieces)) for i in I4]
    seen = set()
    for pc in itertools.product(*piece_opts):
        g_cols = {i: subs[i].pieces[j] for i, j in zip(I4, pc)}
        for L in _subsets(blocks):
            for cc in itertools.product(*[range(len(cones[b].charts)) for b in L]):
                charts = {b: cones[b].charts[j] for b, j in zip(L, cc) if not cones[b].charts[j].is_zero}
                fam = _assemble(star, g_cols, I1, G_free, H_free, both, charts)
                if len(fam) == 0:
                    continue
                cert = positive_dependence_certificate(fam.matrix(sys.d), fam.signs)
                if cert is None:
                    continue
                mv = _decode(sys, fam, cert.multipliers, g_cols)
                eta = _eta_blocks(sys, mv.eta)
                support = tuple(b for b in L if np.linalg.norm(eta[b]) > 1e-12)
                key = (pc, support, tuple(np.round(mv.eta, 10)))
                if key in seen:
                    continue
                seen.add(key)
                w = _rcpld_sequences(sys, samples, mv, I1, I2 + I5, I3 + I6, I4, support, eta)
                if w is not None:
                    w.update({"part": "dependence-persistence", "I1": I1, "I2": I2, "I3": I3,
                              "I4": I4, "I5": I5, "I6": I6, "L": list(support),
                              "certificate": mv, "branches": list(cert.branches)})
                    return w
    return None


def _rcpld_sequences(sys, samples, mv, h_idx, G_idx, H_idx, I4, support, eta):
    for r, pk in samples:
        delta = _accept_radius(r)
        rows = []
        ok = True
        for i in I4:
            v = pk.nearest_subgradient(i, mv.g_vertices[i])
            if np.linalg.norm(v - mv.g_vertices[i]) > delta * max(1.0, np.linalg.norm(mv.g_vertices[i])):
                ok = False
                break
            rows.append(v)
        if not ok:
            continue
        rows += [pk.grad["h"][i] for i in h_idx]
        rows += [pk.grad["G"][i] for i in G_idx]
        rows += [pk.grad["H"][i] for i in H_idx]
        for b in support:
            nb = pk.nearest_normal(b, eta[b])
            if np.linalg.norm(nb - eta[b]) > delta * np.linalg.norm(eta[b]) or np.linalg.norm(nb) == 0:
                ok = False
                break
            rows.append(sys.embed(b, nb))
        if not ok or not rows:
            continue
        M = np.array(rows)
        rr = numerical_rank(M)
        if rr.rank == M.shape[0]:
            return {"point": pk.x, "radius": r, "family": M, "rank": rr.rank, "size": M.shape[0],
                    "singular_values": rr.singular_values}
    return None


_GENERIC = (1.0, 0.618, 0.382, 0.854, 0.472, 0.729, 0.236, 0.910)


def _generic_element(chart):
    gens = chart.generators()
    if gens.shape[0] == 0:
        return None
    w = np.array([_GENERIC[j % len(_GENERIC)] for j in range(gens.shape[0])])
    return w @ gens


def probe_rcrcq(sys: FeasibilitySystem, x, plan: SamplingPlan | None = None, tol: float | None = None,
                short_circuit: bool = True, max_witnesses: int = 1) -> CQReport:
    """Sample-based search for rank changes in the relaxed constant-rank families.

    For each choice of index subsets, subgradients at ``x`` and normal
    vectors (either vanishing in the limit or persisting), the rank of the
    family at ``x`` is compared with its rank along sampled sequences.
    """
    tol = config.settings.feas_tol if tol is None else tol
    plan = plan or SamplingPlan()
    x = np.asarray(x, dtype=float)
    if short_circuit:
        sc = _short_circuit(sys, x, tol, "rcrcq", allow_fullrank=False)
        if sc is not None:
            sc.plan = plan.to_dict()
            return sc
    idx = active_index_sets(sys, x, tol)
    star = _Point(sys, x, tol)
    samples = [(r, _Point(sys, z, tol)) for r, z in plan.samples(sys, x)]
    cones = star.cones()
    blocks = _nontrivial_blocks(sys)
    subs = {i: star.subdiff(i) for i in idx.active_g}
    witnesses = []
    explored = 0
    cap = config.settings.subset_cap
    notes = ["limit normals: zero (vanishing sequences) or chart generators at the point",
             "vertex matching: nearest subgradient within sqrt(radius)"]
    for I4 in _subsets(idx.active_g, descending=True):
        for I5 in _subsets(idx.biactive):
            for I6 in _subsets(idx.biactive):
                for L in _subsets(blocks):
                    explored += 1
                    if explored > cap:
                        return _rcrcq_report(witnesses, plan, notes + ["subset cap reached"], True)
                    for vstar in itertools.product(*[subs[i].vertices for i in I4]):
                        eta_opts = [[None] + [g for c in cones[b].charts for g in c.generators()] for b in L]
                        for etas in itertools.product(*eta_opts):
                            w = _rcrcq_case(sys, star, samples, idx, I4, I5, I6, L, vstar, etas)
                            if w is not None:
                                witnesses.append(w)
                                if len(witnesses) >= max_witnesses:
                                    return _rcrcq_report(witnesses, plan, notes, False)
    return _rcrcq_report(witnesses, plan, notes + [f"{explored} subset combinations, {len(samples)} samples"],
                         False)


def _rcrcq_report(witnesses, plan, notes, truncated):
    if witnesses:
        payload = dict(witnesses[0])
        payload["additional_witnesses"] = witnesses[1:]
        return CQReport("rcrcq", VIOLATED, payload, plan=plan.to_dict(), notes=notes)
    return CQReport("rcrcq", INCOMPLETE if truncated else NO_VIOLATION, {}, plan=plan.to_dict(), notes=notes)


def _rcrcq_family(pt, sys, idx, I4, I5, I6, L, gvecs, nus):
    rows = list(gvecs)
    rows += [pt.grad["h"][i] for i in range(sys.m)]
    rows += [pt.grad["G"][i] for i in idx.zero_G + I5]
    rows += [pt.grad["H"][i] for i in idx.zero_H + I6]
    rows += [sys.embed(b, nu) for b, nu in zip(L, nus)]
    return np.array(rows).reshape(-1, sys.d)


def _rcrcq_case(sys, star, samples, idx, I4, I5, I6, L, vstar, etas):
    nus_star = [np.zeros(sys.blocks[b].dim) if e is None else e for b, e in zip(L, etas)]
    M0 = _rcrcq_family(star, sys, idx, I4, I5, I6, L, vstar, nus_star)
    r0 = numerical_rank(M0).rank
    for r, pk in samples:
        delta = _accept_radius(r)
        gv = []
        for i, v in zip(I4, vstar):
            vk = pk.nearest_subgradient(i, v)
            if np.linalg.norm(vk - v) > delta * max(1.0, np.linalg.norm(v)):
                break
            gv.append(vk)
        else:
            # per block: candidate normal vectors along the sequence
            options = []
            for b, e in zip(L, etas):
                cone = pk.cones()[b]
                if e is None:
                    opts = [g for g in (_generic_element(c) for c in cone.charts) if g is not None]
                    options.append(opts or [np.zeros(sys.blocks[b].dim)])
                else:
                    nb = cone.project(e)
                    if np.linalg.norm(nb - e) > delta * np.linalg.norm(e):
                        options.append([])
                    else:
                        options.append([nb])
            for nus in itertools.product(*options):
                Mk = _rcrcq_family(pk, sys, idx, I4, I5, I6, L, gv, nus)
                rk = numerical_rank(Mk).rank
                if rk != r0:
                    return {"point": pk.x, "radius": r, "I4": I4, "I5": I5, "I6": I6, "L": L,
                            "limit_subgradients": [np.asarray(v) for v in vstar],
                            "limit_normals": [None if e is None else np.asarray(e) for e in etas],
                            "sequence_normals": [np.asarray(n) for n in nus],
                            "matrix_at_limit": M0, "matrix_at_sample": Mk,
                            "rank_at_limit": r0, "rank_at_sample": rk}
    return None


def implication_checks(reports: dict) -> list:
    """Cross-check verdicts against the known implications between conditions."""
    issues = []
    get = lambda k: reports.get(k).verdict if reports.get(k) else None  # noqa: E731
    if get("lcq") == HOLDS and get("rcrcq") == VIOLATED:
        issues.append("LCQ holds but the RCRCQ probe reports a violation")
    if get("rcrcq") == NO_VIOLATION and get("rcpld") == VIOLATED:
        issues.append("RCRCQ probe is clean but the RCPLD probe reports a violation")
    if get("fullrank") == HOLDS and get("rcpld") == VIOLATED:
        issues.append("full-rank condition holds but the RCPLD probe reports a violation")
    if get("nnamcq") == HOLDS and get("rcpld") == VIOLATED:
        issues.append("NNAMCQ holds but the RCPLD probe reports a violation")
    return issues
