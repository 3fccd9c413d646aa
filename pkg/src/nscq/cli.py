"""Command-line interface.

``nscq <command> [options]``. Every command prints a plain-text report and,
with ``--out PATH``, writes the machine-readable JSON report to ``PATH``.
Exit status: 0 on success (warnings are listed under ``"warnings"``), 1 on
internal errors or failed reproductions, 2 on malformed input.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import config
from .bilevel import (PreconditionError, build_combined_program, combined_penalty, danskin_generators,
                      kkt_jacobian, kkt_multipliers, augmented_kkt_jacobian, feasibility_jacobian,
                      multiplier_block, value_function)
from .cq import (SamplingPlan, _jsonable, check_fullrank, check_lcq, check_nnamcq, implication_checks,
                 probe_rcpld, probe_rcrcq)
from .errorbound import VariantPreconditionError, estimate_error_bound_modulus
from .problemfile import ProblemFile, ProblemFileError, canonical_json, dumps, load
from .stationarity import check_mstationarity, solve_penalized
from .system import InfeasiblePointError, active_index_sets

EXAMPLES = {
    "4.1": ("sawtooth.json", "expected_sawtooth.json"),
    "5.1": ("cubic_bilevel.json", "expected_cubic_bilevel.json"),
    "5.2": ("exponential_bilevel.json", "expected_exponential_bilevel.json"),
}


class UsageError(ValueError):
    pass


@dataclass
class AnalysisReport:
    command: dict
    results: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    ok: bool = True
    emit: str | None = None  # problem-file text for reformulate-bilevel

    def to_dict(self) -> dict:
        return _jsonable({"command": self.command, "results": self.results, "warnings": self.warnings,
                          "ok": self.ok})

    def to_json(self) -> str:
        return canonical_json(_finite(self.to_dict()))

    def to_text(self) -> str:
        lines = [f"nscq {self.command.get('command', '')}"]
        for path, val in _flatten(_finite(self.to_dict())["results"], "results"):
            lines.append(f"  {path}: {val}")
        for w in self.warnings:
            lines.append(f"  warning: {w}")
        lines.append("  status: " + ("ok" if self.ok else "FAILED"))
        return "\n".join(lines) + "\n"


def _finite(obj):
    """Replace non-finite floats by strings so the JSON stays standard."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    return obj


def _flatten(obj, prefix, max_list=6):
    """Scalar leaves of a report as ``(path, value)``; long numeric lists are summarized."""
    if isinstance(obj, dict):
        for k in sorted(obj):
            yield from _flatten(obj[k], f"{prefix}.{k}", max_list)
    elif isinstance(obj, list):
        if obj and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj) and len(obj) <= max_list:
            yield prefix, obj
        elif not obj:
            yield prefix, []
        elif len(obj) > max_list:
            yield prefix, f"<{len(obj)} items>"
        else:
            for i, v in enumerate(obj):
                yield from _flatten(v, f"{prefix}[{i}]", max_list)
    else:
        yield prefix, obj


# argument handling ------------------------------------------------------------------

def _radii(text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"radii must be comma-separated numbers: {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("at least one radius is needed")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None, help="feasibility and active-set tolerance")
    common.add_argument("--seed", type=int, default=None, help="sampling seed")
    common.add_argument("--radii", type=_radii, default=None, help="comma-separated sampling radii")
    common.add_argument("--points-per-radius", type=int, default=None)
    common.add_argument("--branch-cap", type=int, default=None, help="cap on complementarity branch cases")
    common.add_argument("--grid", type=int, default=None, help="value-function grid points per lower variable")
    common.add_argument("--norm", choices=("l1", "linf"), default="l1", help="residual norm")
    common.add_argument("--out", type=Path, default=None, help="write the JSON report (or problem file) here")

    ap = argparse.ArgumentParser(prog="nscq", description="Constraint qualifications, stationarity and error "
                                 "bounds for nonsmooth systems with complementarity constraints.")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_problem(name, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("problem", type=Path, help="problem file (JSON)")
        p.add_argument("--point", default=None, help="anchor name or comma-separated coordinates")
        return p

    with_problem("check-cq", "run every constraint-qualification check at a point")
    with_problem("check-stationarity", "search for M-stationarity multipliers at a point")
    p = with_problem("error-bound", "estimate the error-bound modulus at a point")
    p.add_argument("--variant", choices=("full", "strict"), default="full")
    p.add_argument("--method", choices=("grid", "penalty"), default=None)
    p.add_argument("--grid-points", type=int, default=None, help="distance-oracle grid points per axis")
    p = sub.add_parser("reformulate-bilevel", parents=[common], help="emit the combined program as a problem file")
    p.add_argument("problem", type=Path)
    p = with_problem("penalty-solve", "approximately minimize the objective by exact penalization")
    p.add_argument("--budget", type=int, default=5000, help="function evaluations per penalty level")
    p.add_argument("--radius", type=float, default=float("inf"), help="trust radius around the start")
    p = sub.add_parser("reproduce-example", parents=[common], help="run a shipped example and compare")
    p.add_argument("example", choices=sorted(EXAMPLES))
    return ap


def _plan(args) -> SamplingPlan:
    plan = SamplingPlan(seed=args.seed, radii=args.radii)
    if args.points_per_radius is not None:
        plan.points_per_radius = args.points_per_radius
    return plan


def _settings(args, pf: ProblemFile | None = None):
    values = dict(pf.tolerances) if pf is not None else {}
    if args.tol is not None:
        values["feas_tol"] = args.tol
    if args.branch_cap is not None:
        values["branch_cap"] = args.branch_cap
    if args.seed is not None:
        values["seed"] = args.seed
    return config.override(**values)


def _load(path) -> ProblemFile:
    try:
        return load(path)
    except OSError as err:
        raise ProblemFileError(str(err), str(path)) from None


def _resolve(pf: ProblemFile, grid):
    """Effective problem file, system and objective.

    A file with only a bilevel section is replaced by its combined program,
    with anchors lifted to the combined variables.
    """
    if pf.has_system:
        if pf.bilevel is not None and grid is not None:
            pf.bilevel.grid_points = grid
        return pf, pf.system(), pf.objective
    if pf.bilevel is not None:
        cp_pf, _ = reformulate(pf, grid)
        return cp_pf, cp_pf.system(), cp_pf.objective
    raise ProblemFileError("the file has neither constraints nor a bilevel section")


def _point(pf: ProblemFile, spec, d):
    if spec is None:
        try:
            x = pf.anchor()
        except KeyError as err:
            raise UsageError(str(err)) from None
    elif any(ch.isdigit() for ch in spec) and all(ch in "0123456789.,-+eE " for ch in spec):
        x = np.array([float(t) for t in spec.split(",")])
    else:
        try:
            x = pf.anchor(spec)
        except KeyError as err:
            raise UsageError(str(err)) from None
    if x.size != d:
        raise UsageError(f"point has {x.size} coordinates, the problem has {d} variables")
    return x


# commands -----------------------------------------------------------------------------

def run_check_cq(sys_, x, plan) -> tuple[dict, list]:
    reports = {"nnamcq": check_nnamcq(sys_, x), "fullrank": check_fullrank(sys_, x), "lcq": check_lcq(sys_),
               "rcpld": probe_rcpld(sys_, x, plan), "rcrcq": probe_rcrcq(sys_, x, plan)}
    issues = implication_checks(reports)
    out = {k: r.to_dict() for k, r in reports.items()}
    out["implication_issues"] = issues
    out["index_sets"] = active_index_sets(sys_, x).to_dict()
    return out, [f"implication check: {m}" for m in issues]


def _cmd_check_cq(args, report):
    pf = _load(args.problem)
    with _settings(args, pf):
        pf, sys_, _ = _resolve(pf, args.grid)
        x = _point(pf, args.point, sys_.d)
        report.results, report.warnings = run_check_cq(sys_, x, _plan(args))
        report.results["point"] = x


def _cmd_check_stationarity(args, report):
    pf = _load(args.problem)
    with _settings(args, pf):
        pf, sys_, obj = _resolve(pf, args.grid)
        if obj is None:
            raise ProblemFileError("an objective is required", "$.objective")
        x = _point(pf, args.point, sys_.d)
        rep = check_mstationarity(sys_, obj, x)
        report.results = {"point": x, "mstationarity": rep.to_dict()}
        report.warnings = list(rep.notes)


def _cmd_error_bound(args, report):
    pf = _load(args.problem)
    with _settings(args, pf):
        pf, sys_, _ = _resolve(pf, args.grid)
        x = _point(pf, args.point, sys_.d)
        plan = _plan(args)
        if args.radii is None:
            plan.radii = [1e-2]
            if args.points_per_radius is None:
                plan.points_per_radius = 200
        try:
            rep = estimate_error_bound_modulus(sys_, x, plan, args.variant, args.method,
                                               grid_points=args.grid_points, norm=args.norm)
        except VariantPreconditionError as err:
            report.warnings.append(f"hypothesis violated: {err}")
            report.results = {"point": x, "error_bound": None, "variant": args.variant}
            return
        report.results = {"point": x, "error_bound": rep.to_dict(), "norm": args.norm, "plan": plan.to_dict()}
        if not rep.finite and not rep.trivial:
            report.warnings.append("no finite modulus observed near the point")


def extend_anchor(blp, point):
    """Lift an upper/lower point to the combined program using a lower multiplier vertex."""
    x, y = point[:blp.d], point[blp.d:blp.d + blp.s]
    _, verts, _ = kkt_multipliers(blp, x, y)
    if not verts:
        return None
    u, v = verts[0]
    return np.r_[x, y, u, v]


def reformulate(pf: ProblemFile, grid=None) -> tuple[ProblemFile, list]:
    if pf.bilevel is None:
        raise ProblemFileError("a bilevel section is required", "$.bilevel")
    blp = pf.bilevel
    if grid is not None:
        blp.grid_points = grid
    cp = build_combined_program(blp, blp.grid_points)
    anchors, warnings = [], []
    for name, pt in pf.anchors:
        pt = np.asarray(pt, dtype=float)
        if pt.size == len(cp.variables):
            anchors.append((name, pt))
            continue
        lifted = extend_anchor(blp, pt) if pt.size == blp.d + blp.s else None
        if lifted is None:
            warnings.append(f"anchor {name!r} has no lower-level multipliers and was dropped")
        else:
            anchors.append((name, lifted))
    out = ProblemFile.from_system(cp.system, objective=cp.objective, bilevel=blp, anchors=anchors,
                                  tolerances=pf.tolerances)
    out.name = pf.name
    return out, warnings


def _cmd_reformulate(args, report):
    pf = _load(args.problem)
    with _settings(args, pf):
        out, warnings = reformulate(pf, args.grid)
    report.warnings = warnings
    report.results = {"variables": out.variables, "anchors": {k: p for k, p in out.anchors},
                      "constraints": {k: len(getattr(out, k)) for k in ("g", "h", "G", "H")}}
    report.emit = dumps(out)


def _cmd_penalty_solve(args, report):
    pf = _load(args.problem)
    with _settings(args, pf):
        pf, sys_, obj = _resolve(pf, args.grid)
        if obj is None:
            raise ProblemFileError("an objective is required", "$.objective")
        x0 = _point(pf, args.point, sys_.d)
        res = solve_penalized(sys_, obj, x0, radius=args.radius, budget=args.budget)
        report.results = {"start": x0, "solution": res.to_dict()}
        if res.infeasible:
            report.warnings.append("penalty residual stalled away from zero: the problem may be locally infeasible")
        if res.budget_exhausted:
            report.warnings.append("evaluation budget exhausted at some penalty level")


# example reproduction ---------------------------------------------------------------

def data_path(name: str) -> Path:
    return Path(str(resources.files("nscq") / "data" / name))


def _reproduce_sawtooth(pf, plan, grid):
    sys_ = pf.system()
    x = pf.anchor("star")
    out, _ = run_check_cq(sys_, x, plan)
    nn, rc, rp = out["nnamcq"], out["rcrcq"], out["rcpld"]
    return {
        "index_sets": out["index_sets"],
        "nnamcq": nn["verdict"],
        "nnamcq_certificate_residual_below_1e-8": bool(nn["payload"].get("residual", 1.0) <= 1e-8),
        "fullrank": out["fullrank"]["verdict"],
        "lcq": out["lcq"]["verdict"],
        "rcrcq": rc["verdict"],
        "rcrcq_rank_at_sample": rc["payload"].get("rank_at_sample"),
        "rcrcq_rank_at_limit": rc["payload"].get("rank_at_limit"),
        "rcpld": rp["verdict"],
        "implication_issues": out["implication_issues"],
    }


def _reproduce_cubic(pf, plan, grid):
    cp_pf, _ = reformulate(pf, grid)
    sys_ = cp_pf.system()
    cp = build_combined_program(cp_pf.bilevel, cp_pf.bilevel.grid_points)
    blp = cp.program
    xs = np.linspace(-3.0, 2.0, 11)
    res = {"value_function": {f"{x:+.1f}": value_function(blp, [x]).value for x in xs},
           "solutions_at_-2": sorted(float(v) for v in value_function(blp, [-2.0]).minimizers[:, 0])}
    for name in ("optimal", "interior"):
        p = cp_pf.anchor(name)
        res[name] = {
            "point": p,
            "index_sets": active_index_sets(sys_, p).to_dict(),
            "feasibility_jacobian_rank": feasibility_jacobian(cp, p).rank.rank,
            "kkt_jacobian_rank": kkt_jacobian(cp, p).rank.rank,
            "kkt_jacobian_target": kkt_jacobian(cp, p).target,
            "multiplier_block_rank": multiplier_block(cp, p).rank.rank,
            "fullrank": check_fullrank(sys_, p).verdict,
            "mstationarity": check_mstationarity(sys_, cp.objective, p).verdict,
        }
    return res


def _reproduce_exponential(pf, plan, grid):
    cp_pf, _ = reformulate(pf, grid)
    cp = build_combined_program(cp_pf.bilevel, cp_pf.bilevel.grid_points)
    blp = cp.program
    pts = [(-1.0, 1.0), (0.0, 0.0), (1.0, -1.0), (0.5, 2.0), (2.0, 0.5)]
    res = {"value_function": {f"{a:+.1f},{b:+.1f}": value_function(blp, [a, b]).value for a, b in pts},
           "danskin_at_tie": sorted(map(list, np.round(danskin_generators(blp, [1.0, 1.0]), 12)))}
    ranks = {}
    for name, _ in cp_pf.anchors:
        p = cp_pf.anchor(name)
        gens = danskin_generators(blp, p[:blp.d])
        for alpha in (0, 1):
            for j, w in enumerate(gens):
                ranks[f"{name}/alpha={alpha}/w{j}"] = augmented_kkt_jacobian(cp, p, alpha, w).rank.rank
    res["augmented_kkt_jacobian_ranks"] = ranks
    res["penalty_at_1_1"] = combined_penalty(cp, [1.0, 1.0, 0.0, 0.0, 0.0])
    return res


_REPRODUCERS = {"4.1": _reproduce_sawtooth, "5.1": _reproduce_cubic, "5.2": _reproduce_exponential}


def compare(expected, actual, tol, path="$"):
    """Differences between stored and computed results; numbers match within ``tol``."""
    if isinstance(expected, dict):
        if not isinstance(actual, dict):
            return [f"{path}: expected an object"]
        diffs = []
        for k in sorted(expected):
            if k not in actual:
                diffs.append(f"{path}.{k}: missing")
            else:
                diffs += compare(expected[k], actual[k], tol, f"{path}.{k}")
        return diffs
    if isinstance(expected, list):
        if not isinstance(actual, list) or len(actual) != len(expected):
            return [f"{path}: expected {expected}, got {actual}"]
        return [d for i, (e, a) in enumerate(zip(expected, actual)) for d in compare(e, a, tol, f"{path}[{i}]")]
    if isinstance(expected, bool) or expected is None or isinstance(expected, str):
        return [] if type(expected) is type(actual) and expected == actual else [f"{path}: expected {expected!r}, got {actual!r}"]
    if isinstance(expected, (int, float)):
        if isinstance(actual, bool) or not isinstance(actual, (int, float)) or abs(expected - actual) > tol:
            return [f"{path}: expected {expected}, got {actual}"]
        return []
    return [f"{path}: unsupported expected value {expected!r}"]


def reproduce(example: str, plan=None, grid=None) -> dict:
    problem, expected = EXAMPLES[example]
    pf = _load(data_path(problem))
    exp_doc = json.loads(data_path(expected).read_text())
    with config.override(**pf.tolerances):
        actual = _finite(_jsonable(_REPRODUCERS[example](pf, plan or SamplingPlan(), grid)))
    diffs = compare(exp_doc["results"], actual, exp_doc.get("tolerance", 1e-6))
    return {"example": example, "results": actual, "differences": diffs, "match": not diffs}


def _cmd_reproduce(args, report):
    with _settings(args):
        out = reproduce(args.example, _plan(args), args.grid)
    report.results = out
    report.ok = out["match"]


_COMMANDS = {"check-cq": _cmd_check_cq, "check-stationarity": _cmd_check_stationarity,
             "error-bound": _cmd_error_bound, "reformulate-bilevel": _cmd_reformulate,
             "penalty-solve": _cmd_penalty_solve, "reproduce-example": _cmd_reproduce}


def _echo(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k == "out":
            continue
        out[k] = str(v) if isinstance(v, Path) else v
    return out


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    report = AnalysisReport(_echo(args))
    try:
        _COMMANDS[args.command](args, report)
    except (ProblemFileError, UsageError, InfeasiblePointError) as err:
        print(f"nscq: error: {err}", file=sys.stderr)
        return 2
    except PreconditionError as err:
        report.warnings.append(f"hypothesis violated: {err}")
    except Exception as err:  # noqa: BLE001
        print(f"nscq: internal error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1
    if args.out is not None:
        args.out.write_text(report.emit if report.emit is not None else report.to_json())
    if report.emit is not None and args.out is None:
        # the problem file is the output
        sys.stdout.write(report.emit)
    else:
        sys.stdout.write(report.to_text())
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())
