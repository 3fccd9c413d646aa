"""JSON problem files.

A problem file holds a feasibility system, an optional objective, an
optional bilevel program and named anchor points::

    {
      "schema": 1,
      "name": "...",
      "variables": ["x1", "x2"],
      "constraints": {"g": [...], "h": [...], "G": [...], "H": [...]},
      "sets": [{"kind": "box", "lower": [...], "upper": [...]}, ...],
      "objective": <expression> | null,
      "bilevel": {...} | null,
      "anchors": [{"name": "star", "point": [...]}],
      "tolerances": {"feas_tol": 1e-8, ...}
    }

Expressions are nested objects. Leaves are ``{"op": "const", "value": c}``
and ``{"op": "var", "name": n}``; ``pow`` carries an integer ``"value"``;
every other node has ``"args"``. The value function of the bilevel section
appears as ``{"op": "value_function", "args": [<upper variables>]}``.

:func:`dumps` writes the canonical form: sorted keys, two-space indent and a
trailing newline, so equal problems serialize to equal bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import config
from .bilevel import BilevelProgram, ValueFunctionOracle
from .expr import Expression, ExpressionError
from .sets import FullSpace, from_dict as set_from_dict
from .system import FeasibilitySystem

SCHEMA = 1
_ARITY = {"add": 2, "sub": 2, "mul": 2, "div": 2, "pow": 1, "exp": 1, "ln": 1, "abs": 1}


class ProblemFileError(ValueError):
    """Malformed problem file; ``location`` is a JSON path or ``line:column``."""

    def __init__(self, message: str, location: str = "$"):
        super().__init__(f"{location}: {message}")
        self.location = location
        self.message = message


# expressions ------------------------------------------------------------------------

def expression_to_tree(e: Expression, oracle_names: dict | None = None) -> dict:
    op = e.op
    if op == "const":
        return {"op": "const", "value": e.value}
    if op == "var":
        return {"op": "var", "name": e.name}
    if op == "pow":
        return {"op": "pow", "value": int(e.value), "args": [expression_to_tree(e.args[0], oracle_names)]}
    if op == "oracle":
        key = (oracle_names or {}).get(id(e.payload))
        if key is None:
            raise ProblemFileError(f"oracle node {getattr(e.payload, 'label', '?')!r} has no file representation")
        return {"op": key, "args": [expression_to_tree(a, oracle_names) for a in e.args]}
    return {"op": op, "args": [expression_to_tree(a, oracle_names) for a in e.args]}


def tree_to_expression(tree, where: str = "$", oracles: dict | None = None) -> Expression:
    """Build an expression node by node, without algebraic simplification."""
    if not isinstance(tree, dict):
        raise ProblemFileError("expression must be an object", where)
    op = tree.get("op")
    if not isinstance(op, str):
        raise ProblemFileError("missing or non-string 'op'", where)
    if op == "const":
        val = tree.get("value")
        if isinstance(val, bool) or not isinstance(val, (int, float)) or not np.isfinite(val):
            raise ProblemFileError("const needs a finite numeric 'value'", where)
        return Expression("const", value=float(val) + 0.0)
    if op == "var":
        name = tree.get("name")
        if not isinstance(name, str) or not name:
            raise ProblemFileError("var needs a nonempty string 'name'", where)
        return Expression("var", name=name)
    args = tree.get("args")
    if not isinstance(args, list):
        raise ProblemFileError(f"{op} needs an 'args' list", where)
    kids = [tree_to_expression(a, f"{where}.args[{i}]", oracles) for i, a in enumerate(args)]
    if op in (oracles or {}):
        return Expression("oracle", kids, payload=oracles[op])
    if op in ("max", "min"):
        if len(kids) < 2:
            raise ProblemFileError(f"{op} needs at least two arguments", where)
        return Expression(op, kids)
    if op not in _ARITY:
        raise ProblemFileError(f"unknown operation {op!r}", where)
    if len(kids) != _ARITY[op]:
        raise ProblemFileError(f"{op} takes {_ARITY[op]} argument(s), got {len(kids)}", where)
    if op == "pow":
        n = tree.get("value")
        if isinstance(n, bool) or not isinstance(n, (int, float)) or float(n) != int(n) or int(n) in (0, 1):
            raise ProblemFileError("pow needs an integer 'value' other than 0 and 1", where)
        return Expression("pow", kids, value=int(n))
    return Expression(op, kids)


# problem files ------------------------------------------------------------------

@dataclass
class ProblemFile:
    variables: list
    g: list = field(default_factory=list)
    h: list = field(default_factory=list)
    G: list = field(default_factory=list)
    H: list = field(default_factory=list)
    sets: list = field(default_factory=list)
    objective: Expression | None = None
    bilevel: BilevelProgram | None = None
    anchors: list = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)
    name: str = ""

    # construction ------------------------------------------------------------
    @classmethod
    def from_system(cls, sys: FeasibilitySystem, objective=None, bilevel=None, anchors=None, tolerances=None):
        blocks = [] if len(sys.blocks) == 1 and isinstance(sys.blocks[0], FullSpace) else list(sys.blocks)
        return cls(list(sys.variables), list(sys.g), list(sys.h), list(sys.G), list(sys.H), blocks,
                   objective, bilevel, _anchor_list(anchors), dict(tolerances or {}), sys.name)

    @classmethod
    def from_bilevel(cls, blp: BilevelProgram, anchors=None, tolerances=None):
        return cls(list(blp.variables), bilevel=blp, anchors=_anchor_list(anchors),
                   tolerances=dict(tolerances or {}), name=blp.name)

    @property
    def has_system(self) -> bool:
        return bool(self.g or self.h or self.G or self.H or self.sets)

    def system(self) -> FeasibilitySystem:
        return FeasibilitySystem(self.variables, self.g, self.h, self.G, self.H,
                                 blocks=self.sets or None, name=self.name)

    def anchor(self, name: str | None = None) -> np.ndarray:
        if not self.anchors:
            raise KeyError("the problem file declares no anchor points")
        if name is None:
            return np.array(self.anchors[0][1], dtype=float)
        for key, pt in self.anchors:
            if key == name:
                return np.array(pt, dtype=float)
        raise KeyError(f"unknown anchor {name!r}; known: {[k for k, _ in self.anchors]}")

    def settings(self):
        """Context manager applying the file's tolerances."""
        return config.override(**self.tolerances)

    # serialization ------------------------------------------------------------
    def _oracle_names(self) -> dict:
        names = {}
        for e in self.g + self.h + self.G + self.H + ([self.objective] if self.objective else []):
            for node in _walk(e):
                if node.op == "oracle" and isinstance(node.payload, ValueFunctionOracle):
                    if self.bilevel is None or node.payload.blp is not self.bilevel:
                        raise ProblemFileError("value-function node without its bilevel section")
                    names[id(node.payload)] = "value_function"
        return names

    def to_dict(self) -> dict:
        names = self._oracle_names()
        tree = lambda e: expression_to_tree(e, names)  # noqa: E731
        return {
            "schema": SCHEMA,
            "name": self.name,
            "variables": list(self.variables),
            "constraints": {k: [tree(e) for e in getattr(self, k)] for k in ("g", "h", "G", "H")},
            "sets": [b.to_dict() for b in self.sets],
            "objective": None if self.objective is None else tree(self.objective),
            "bilevel": None if self.bilevel is None else _bilevel_to_dict(self.bilevel),
            "anchors": [{"name": k, "point": [float(v) for v in p]} for k, p in self.anchors],
            "tolerances": dict(self.tolerances),
        }

    @classmethod
    def from_dict(cls, doc) -> "ProblemFile":
        if not isinstance(doc, dict):
            raise ProblemFileError("top level must be an object")
        if doc.get("schema") != SCHEMA:
            raise ProblemFileError(f"unsupported schema {doc.get('schema')!r}", "$.schema")
        known = {"schema", "name", "variables", "constraints", "sets", "objective", "bilevel", "anchors",
                 "tolerances"}
        extra = sorted(set(doc) - known)
        if extra:
            raise ProblemFileError(f"unknown field {extra[0]!r}", f"$.{extra[0]}")
        variables = doc.get("variables")
        if not isinstance(variables, list) or not all(isinstance(v, str) for v in variables):
            raise ProblemFileError("must be a list of names", "$.variables")
        blp = None
        oracles = {}
        if doc.get("bilevel") is not None:
            blp = _bilevel_from_dict(doc["bilevel"], "$.bilevel")
            blp.name = str(doc.get("name", ""))
            oracles["value_function"] = ValueFunctionOracle(blp, blp.grid_points)
        cons = doc.get("constraints") or {}
        if not isinstance(cons, dict):
            raise ProblemFileError("must be an object", "$.constraints")
        parts = {}
        for k in ("g", "h", "G", "H"):
            items = cons.get(k, [])
            if not isinstance(items, list):
                raise ProblemFileError("must be a list", f"$.constraints.{k}")
            parts[k] = [tree_to_expression(t, f"$.constraints.{k}[{i}]", oracles) for i, t in enumerate(items)]
        sets = []
        for i, s in enumerate(doc.get("sets") or []):
            try:
                sets.append(set_from_dict(s))
            except (KeyError, TypeError, ValueError) as err:
                raise ProblemFileError(str(err), f"$.sets[{i}]") from None
        obj = doc.get("objective")
        objective = None if obj is None else tree_to_expression(obj, "$.objective", oracles)
        anchors = []
        for i, a in enumerate(doc.get("anchors") or []):
            if not isinstance(a, dict) or not isinstance(a.get("name"), str) or not isinstance(a.get("point"), list):
                raise ProblemFileError("anchor needs 'name' and 'point'", f"$.anchors[{i}]")
            if len(a["point"]) != len(variables):
                raise ProblemFileError("point dimension differs from the variable count", f"$.anchors[{i}].point")
            anchors.append((a["name"], [float(v) for v in a["point"]]))
        tols = doc.get("tolerances") or {}
        allowed = {f.name for f in fields(config.Settings)}
        for key in tols:
            if key not in allowed:
                raise ProblemFileError(f"unknown tolerance {key!r}", f"$.tolerances.{key}")
        pf = cls(list(variables), parts["g"], parts["h"], parts["G"], parts["H"], sets, objective, blp,
                 anchors, dict(tols), str(doc.get("name", "")))
        if pf.has_system:
            try:
                pf.system()
            except (ExpressionError, ValueError) as err:
                raise ProblemFileError(str(err), "$.constraints") from None
        return pf


def _anchor_list(anchors):
    if anchors is None:
        return []
    items = anchors.items() if isinstance(anchors, dict) else anchors
    return [(str(k), [float(v) for v in np.asarray(p, dtype=float)]) for k, p in items]


def _walk(e: Expression):
    yield e
    for a in e.args:
        yield from _walk(a)


def _bilevel_to_dict(blp: BilevelProgram) -> dict:
    tree = expression_to_tree
    return {
        "upper_variables": list(blp.x_vars),
        "lower_variables": list(blp.y_vars),
        "upper_objective": tree(blp.F),
        "lower_objective": tree(blp.f),
        "upper_constraints": {"G": [tree(e) for e in blp.G], "H": [tree(e) for e in blp.H]},
        "lower_constraints": {"g": [tree(e) for e in blp.g], "h": [tree(e) for e in blp.h]},
        "lower_box": {"lower": [float(v) for v in blp.y_lower], "upper": [float(v) for v in blp.y_upper]},
        "upper_set": blp.x_set.to_dict(),
        "grid_points": blp.grid_points,
    }


def _bilevel_from_dict(doc, where) -> BilevelProgram:
    if not isinstance(doc, dict):
        raise ProblemFileError("must be an object", where)
    try:
        xs, ys = doc["upper_variables"], doc["lower_variables"]
        uc = doc.get("upper_constraints", {})
        lc = doc.get("lower_constraints", {})
        box = doc["lower_box"]
    except KeyError as err:
        raise ProblemFileError(f"missing field {err.args[0]!r}", where) from None

    def trees(items, path):
        return [tree_to_expression(t, f"{path}[{i}]") for i, t in enumerate(items)]

    F = tree_to_expression(doc.get("upper_objective"), f"{where}.upper_objective")
    f = tree_to_expression(doc.get("lower_objective"), f"{where}.lower_objective")
    x_set = None
    if doc.get("upper_set") is not None:
        try:
            x_set = set_from_dict(doc["upper_set"])
        except (KeyError, TypeError, ValueError) as err:
            raise ProblemFileError(str(err), f"{where}.upper_set") from None
    try:
        return BilevelProgram(xs, ys, F, f, g=trees(lc.get("g", []), f"{where}.lower_constraints.g"),
                              h=trees(lc.get("h", []), f"{where}.lower_constraints.h"),
                              G=trees(uc.get("G", []), f"{where}.upper_constraints.G"),
                              H=trees(uc.get("H", []), f"{where}.upper_constraints.H"),
                              y_lower=box["lower"], y_upper=box["upper"], x_set=x_set,
                              grid_points=doc.get("grid_points"))
    except (ValueError, TypeError, KeyError) as err:
        raise ProblemFileError(str(err), where) from None


# text I/O -------------------------------------------------------------------------

def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def dumps(pf: ProblemFile) -> str:
    return canonical_json(pf.to_dict())


def loads(text: str) -> ProblemFile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ProblemFileError(err.msg, f"line {err.lineno}, column {err.colno}") from None
    return ProblemFile.from_dict(doc)


def load(path) -> ProblemFile:
    return loads(Path(path).read_text())


def save(pf: ProblemFile, path) -> None:
    Path(path).write_text(dumps(pf))
