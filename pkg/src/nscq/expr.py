"""Scalar piecewise-smooth expression trees.

Expressions are immutable trees over named variables. They support
vectorized evaluation, exact symbolic differentiation of smooth parts and
enumeration of generators for the Clarke subdifferential at kinks of
``max``, ``min`` and ``abs`` nodes.

A special ``oracle`` node wraps a Lipschitz function that has no closed form
(the lower-level value function of a bilevel program). It reports its own
value and subgradient generators.

Examples
--------
>>> x1, x2 = var("x1"), var("x2")
>>> e = 2 * x1 + x2
>>> evaluate(e, ["x1", "x2"], [1.0, 1.0])
3.0
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import config

SMOOTH_UNARY = ("exp", "ln")
NONSMOOTH = ("max", "min", "abs")
OPS = ("const", "var", "add", "sub", "mul", "div", "pow", "exp", "ln",
       "max", "min", "abs", "oracle")


class ExpressionError(ValueError):
    """Malformed expression or unresolved variable."""


class DomainError(ArithmeticError):
    """Evaluation outside the domain (log of a nonpositive value, 1/0)."""


class NonsmoothError(ValueError):
    """Symbolic differentiation reached a max/min/abs or oracle node."""


class Expression:
    """Immutable expression node.

    Use the builder functions (:func:`var`, :func:`const`, :func:`max_`, ...)
    or Python arithmetic operators rather than this constructor.
    """

    __slots__ = ("op", "args", "value", "name", "payload", "free", "smooth", "_hash")

    def __init__(self, op, args=(), value=None, name=None, payload=None):
        if op not in OPS:
            raise ExpressionError(f"unknown node kind {op!r}")
        self.op = op
        self.args = tuple(args)
        self.value = value
        self.name = name
        self.payload = payload
        free = frozenset([name]) if op == "var" else frozenset()
        for a in self.args:
            free = free | a.free
        self.free = free
        self.smooth = op not in NONSMOOTH and op != "oracle" and all(a.smooth for a in self.args)
        key = (op, value, name, id(payload) if payload is not None else None,
               tuple(hash(a) for a in self.args))
        self._hash = hash(key)

    # structural identity -------------------------------------------------
    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expression) or self._hash != other._hash:
            return False
        return (self.op == other.op and self.value == other.value and self.name == other.name
                and self.payload is other.payload and self.args == other.args)

    def __repr__(self):
        return to_string(self)

    # arithmetic sugar ------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(-1.0, self)

    def __pow__(self, n):
        return power(self, n)

    @property
    def is_constant(self) -> bool:
        return not self.free and self.op != "oracle"

    def eval(self, env: Mapping[str, object]):
        """Evaluate under a name->value mapping (floats or numpy arrays)."""
        return _eval(self, env)


# builders ----------------------------------------------------------------

def _wrap(x) -> Expression:
    if isinstance(x, Expression):
        return x
    if isinstance(x, (int, float, np.integer, np.floating)):
        return const(float(x))
    raise ExpressionError(f"cannot convert {x!r} to an expression")


def const(c: float) -> Expression:
    c = float(c)
    if not math.isfinite(c):
        raise ExpressionError("constants must be finite")
    return Expression("const", value=c + 0.0)


def var(name: str) -> Expression:
    if not isinstance(name, str) or not name:
        raise ExpressionError("variable names must be nonempty strings")
    return Expression("var", name=name)


def _cval(e: Expression):
    return e.value if e.op == "const" else None


def add(a, b) -> Expression:
    a, b = _wrap(a), _wrap(b)
    ca, cb = _cval(a), _cval(b)
    if ca is not None and cb is not None:
        return const(ca + cb)
    if ca == 0.0:
        return b
    if cb == 0.0:
        return a
    return Expression("add", (a, b))


def sub(a, b) -> Expression:
    a, b = _wrap(a), _wrap(b)
    ca, cb = _cval(a), _cval(b)
    if ca is not None and cb is not None:
        return const(ca - cb)
    if cb == 0.0:
        return a
    return Expression("sub", (a, b))


def mul(a, b) -> Expression:
    a, b = _wrap(a), _wrap(b)
    ca, cb = _cval(a), _cval(b)
    if ca is not None and cb is not None:
        return const(ca * cb)
    if ca == 0.0 or cb == 0.0:
        return const(0.0)
    if ca == 1.0:
        return b
    if cb == 1.0:
        return a
    return Expression("mul", (a, b))


def div(a, b) -> Expression:
    a, b = _wrap(a), _wrap(b)
    ca, cb = _cval(a), _cval(b)
    if cb == 0.0:
        raise DomainError("division by the constant zero")
    if ca is not None and cb is not None:
        return const(ca / cb)
    if ca == 0.0:
        return const(0.0)
    if cb == 1.0:
        return a
    return Expression("div", (a, b))


def power(a, n) -> Expression:
    if isinstance(n, Expression):
        if n.op != "const":
            raise ExpressionError("exponent must be an integer constant")
        n = n.value
    if float(n) != int(n):
        raise ExpressionError("only integer exponents are supported")
    n = int(n)
    a = _wrap(a)
    if n == 0:
        return const(1.0)
    if n == 1:
        return a
    ca = _cval(a)
    if ca is not None:
        if ca == 0.0 and n < 0:
            raise DomainError("zero to a negative power")
        return const(ca ** n)
    return Expression("pow", (a,), value=n)


def exp(a) -> Expression:
    a = _wrap(a)
    if a.op == "const":
        return const(math.exp(a.value))
    return Expression("exp", (a,))


def ln(a) -> Expression:
    a = _wrap(a)
    if a.op == "const":
        if a.value <= 0:
            raise DomainError("log of a nonpositive constant")
        return const(math.log(a.value))
    return Expression("ln", (a,))


def _extremum(op, items) -> Expression:
    args = [_wrap(x) for x in items]
    if not args:
        raise ExpressionError(f"{op} needs at least one argument")
    if len(args) == 1:
        return args[0]
    if all(a.op == "const" for a in args):
        vals = [a.value for a in args]
        return const(max(vals) if op == "max" else min(vals))
    return Expression(op, args)


def max_(*items) -> Expression:
    return _extremum("max", items)


def min_(*items) -> Expression:
    return _extremum("min", items)


def abs_(a) -> Expression:
    a = _wrap(a)
    if a.op == "const":
        return const(abs(a.value))
    return Expression("abs", (a,))


def oracle(fn: "Oracle", args: Sequence) -> Expression:
    """Wrap a Lipschitz black-box function of the given argument expressions."""
    args = [_wrap(a) for a in args]
    if any(not a.smooth for a in args):
        raise ExpressionError("oracle arguments must be smooth expressions")
    return Expression("oracle", args, payload=fn)


class Oracle:
    """Interface for functions entering expressions as opaque nodes.

    Subclasses implement :meth:`value` and :meth:`subgradients`. The latter
    returns an array of generators whose convex hull contains the Clarke
    subdifferential at the point, plus an exactness flag.
    """

    label = "oracle"

    def value(self, args: np.ndarray) -> float:
        raise NotImplementedError

    def subgradients(self, args: np.ndarray) -> tuple[np.ndarray, bool]:
        raise NotImplementedError


# evaluation ----------------------------------------------------------------

def _eval(e: Expression, env):
    op = e.op
    if op == "const":
        return e.value
    if op == "var":
        try:
            return env[e.name]
        except KeyError:
            raise ExpressionError(f"unresolved variable {e.name!r}") from None
    if op == "oracle":
        vals = [np.asarray(_eval(a, env), dtype=float) for a in e.args]
        if any(v.ndim for v in vals):
            shape = np.broadcast(*vals).shape
            flat = [np.broadcast_to(v, shape).ravel() for v in vals]
            out = np.array([e.payload.value(np.array(col)) for col in zip(*flat)])
            return out.reshape(shape)
        return float(e.payload.value(np.array([float(v) for v in vals])))
    vals = [_eval(a, env) for a in e.args]
    if op == "add":
        return vals[0] + vals[1]
    if op == "sub":
        return vals[0] - vals[1]
    if op == "mul":
        return vals[0] * vals[1]
    if op == "div":
        if np.any(np.asarray(vals[1]) == 0):
            raise DomainError("division by zero")
        return vals[0] / vals[1]
    if op == "pow":
        if e.value < 0 and np.any(np.asarray(vals[0]) == 0):
            raise DomainError("zero to a negative power")
        return vals[0] ** e.value if e.value > 0 else 1.0 / vals[0] ** (-e.value)
    if op == "exp":
        return np.exp(vals[0]) if isinstance(vals[0], np.ndarray) else math.exp(vals[0])
    if op == "ln":
        if np.any(np.asarray(vals[0]) <= 0):
            raise DomainError("log of a nonpositive value")
        return np.log(vals[0]) if isinstance(vals[0], np.ndarray) else math.log(vals[0])
    if op == "max":
        return functools.reduce(np.maximum, vals) if _any_array(vals) else max(vals)
    if op == "min":
        return functools.reduce(np.minimum, vals) if _any_array(vals) else min(vals)
    if op == "abs":
        return np.abs(vals[0]) if isinstance(vals[0], np.ndarray) else abs(vals[0])
    raise ExpressionError(f"cannot evaluate {op}")  # pragma: no cover


def _any_array(vals):
    return any(isinstance(v, np.ndarray) for v in vals)


def environment(variables: Sequence[str], point) -> dict:
    point = np.asarray(point, dtype=float)
    if point.shape[0] != len(variables):
        raise ExpressionError(f"point has {point.shape[0]} entries, expected {len(variables)}")
    return {name: (float(point[i]) if point.ndim == 1 else point[i]) for i, name in enumerate(variables)}


def evaluate(e: Expression, variables: Sequence[str], point) -> float:
    """Evaluate ``e`` at ``point`` whose entries follow ``variables``."""
    val = _eval(e, environment(variables, point))
    return float(val) if np.ndim(val) == 0 else val


# symbolic differentiation ---------------------------------------------------

@functools.lru_cache(maxsize=None)
def derivative(e: Expression, name: str) -> Expression:
    """Partial derivative of ``e`` with respect to variable ``name``.

    Raises :class:`NonsmoothError` when a max/min/abs or oracle node depends
    on ``name``.
    """
    if name not in e.free:
        return const(0.0)
    op, a = e.op, e.args
    if op == "var":
        return const(1.0)
    if op == "add":
        return add(derivative(a[0], name), derivative(a[1], name))
    if op == "sub":
        return sub(derivative(a[0], name), derivative(a[1], name))
    if op == "mul":
        return add(mul(derivative(a[0], name), a[1]), mul(a[0], derivative(a[1], name)))
    if op == "div":
        u, v = a
        du, dv = derivative(u, name), derivative(v, name)
        if dv.op == "const" and dv.value == 0.0:
            return div(du, v)
        return div(sub(mul(du, v), mul(u, dv)), power(v, 2))
    if op == "pow":
        n = e.value
        return mul(mul(const(n), power(a[0], n - 1)), derivative(a[0], name))
    if op == "exp":
        return mul(e, derivative(a[0], name))
    if op == "ln":
        return div(derivative(a[0], name), a[0])
    raise NonsmoothError(f"cannot differentiate through a {op} node in {name!r}")


def gradient(e: Expression, variables: Sequence[str], point) -> np.ndarray:
    env = environment(variables, point)
    return np.array([float(_eval(derivative(e, v), env)) if v in e.free else 0.0
                     for v in variables])


def hessian(e: Expression, variables: Sequence[str], point) -> np.ndarray:
    env = environment(variables, point)
    d = len(variables)
    out = np.zeros((d, d))
    for i, vi in enumerate(variables):
        if vi not in e.free:
            continue
        di = derivative(e, vi)
        for j, vj in enumerate(variables):
            if vj in di.free:
                out[i, j] = float(_eval(derivative(di, vj), env))
    return out


def is_affine(e: Expression) -> bool:
    """Syntactic affinity test."""
    op = e.op
    if op in ("const", "var") or not e.free:
        return op != "oracle" or not e.free
    if op in ("add", "sub"):
        return is_affine(e.args[0]) and is_affine(e.args[1])
    if op == "mul":
        u, v = e.args
        return (u.is_constant and is_affine(v)) or (v.is_constant and is_affine(u))
    if op == "div":
        return e.args[1].is_constant and is_affine(e.args[0])
    return False


# subdifferential generators -----------------------------------------------------

@dataclass
class SubdifferentialVertexSet:
    """Generators of a Clarke subdifferential outer estimate.

    Attributes
    ----------
    vertices : ndarray, shape (k, d)
        Distinct generator vectors.
    exact : bool
        ``True`` when the calculus rules used hold with equality.
    pieces : list of ndarray
        The subdifferential lies in the union of the convex hulls of the
        pieces. Each piece is a subset of ``vertices``.
    """

    vertices: np.ndarray
    exact: bool
    pieces: list = field(default_factory=list)

    @property
    def is_singleton(self) -> bool:
        return self.vertices.shape[0] == 1


@dataclass
class _SD:
    value: float
    pieces: list
    kinked: bool
    exact: bool
    regular: bool


def _unique_rows(M: np.ndarray) -> np.ndarray:
    if M.shape[0] <= 1:
        return M
    keep = []
    for i in range(M.shape[0]):
        if not any(np.allclose(M[i], M[j], rtol=0, atol=1e-13) for j in keep):
            keep.append(i)
    return M[keep]


def _minkowski(P, Q):
    out = []
    for p in P:
        for q in Q:
            out.append(_unique_rows((p[:, None, :] + q[None, :, :]).reshape(-1, p.shape[1])))
    return out


def _scaled(sd: _SD, c: float) -> list:
    return [c * p for p in sd.pieces]


def _smooth_grad(e, env, idx, d):
    g = np.zeros(d)
    for name in e.free:
        if name not in idx:
            raise ExpressionError(f"unresolved variable {name!r}")
        g[idx[name]] = float(_eval(derivative(e, name), env))
    return g


def _sd(e: Expression, s: float, env, idx, d, tol) -> _SD:
    if e.smooth:
        return _SD(float(_eval(e, env)), [s * _smooth_grad(e, env, idx, d)[None, :]], False, True, True)
    op, a = e.op, e.args
    if op == "oracle":
        argv = np.array([float(_eval(x, env)) for x in a])
        gens, exact = e.payload.subgradients(argv)
        gens = np.atleast_2d(np.asarray(gens, dtype=float))
        J = np.vstack([_smooth_grad(x, env, idx, d) for x in a])
        piece = _unique_rows(s * gens @ J)
        return _SD(float(e.payload.value(argv)), [piece], piece.shape[0] > 1, bool(exact), False)
    if op in ("add", "sub"):
        x = _sd(a[0], s, env, idx, d, tol)
        y = _sd(a[1], s if op == "add" else -s, env, idx, d, tol)
        val = x.value + y.value if op == "add" else x.value - y.value
        both = x.kinked and y.kinked
        exact = x.exact and y.exact and (not both or (x.regular and y.regular))
        return _SD(val, _minkowski(x.pieces, y.pieces), x.kinked or y.kinked, exact,
                   x.regular and y.regular)
    if op == "mul":
        u, v = a
        if u.is_constant or v.is_constant:
            c, w = (float(_eval(u, env)), v) if u.is_constant else (float(_eval(v, env)), u)
            inner = _sd(w, s * np.sign(c), env, idx, d, tol)
            return _SD(c * inner.value, _scaled(inner, abs(c)), inner.kinked, inner.exact, inner.regular)
        uv, vv = float(_eval(u, env)), float(_eval(v, env))
        x = _sd(u, s * _sgn(vv), env, idx, d, tol)
        y = _sd(v, s * _sgn(uv), env, idx, d, tol)
        kinked = x.kinked or y.kinked
        pieces = _minkowski(_scaled(x, abs(vv)), _scaled(y, abs(uv)))
        return _SD(uv * vv, pieces, kinked, x.exact and y.exact and not kinked, not kinked)
    if op == "div":
        u, v = a
        vv = float(_eval(v, env))
        if vv == 0.0:
            raise DomainError("division by zero")
        if v.is_constant:
            inner = _sd(u, s * np.sign(vv), env, idx, d, tol)
            return _SD(inner.value / vv, _scaled(inner, 1.0 / abs(vv)), inner.kinked, inner.exact, inner.regular)
        uv = float(_eval(u, env))
        x = _sd(u, s * _sgn(vv), env, idx, d, tol)
        y = _sd(v, -s * _sgn(uv), env, idx, d, tol)
        kinked = x.kinked or y.kinked
        pieces = _minkowski(_scaled(x, 1.0 / abs(vv)), _scaled(y, abs(uv) / vv ** 2))
        return _SD(uv / vv, pieces, kinked, x.exact and y.exact and not kinked, not kinked)
    if op in ("pow", "exp", "ln"):
        uv = float(_eval(a[0], env))
        if op == "pow":
            n = e.value
            if n < 0 and uv == 0.0:
                raise DomainError("zero to a negative power")
            c, val = n * uv ** (n - 1), uv ** n
        elif op == "exp":
            c = val = math.exp(uv)
        else:
            if uv <= 0:
                raise DomainError("log of a nonpositive value")
            c, val = 1.0 / uv, math.log(uv)
        inner = _sd(a[0], s * _sgn(c), env, idx, d, tol)
        return _SD(val, _scaled(inner, abs(c)), inner.kinked and c != 0.0, inner.exact,
                   inner.regular and c > 0)
    if op in ("max", "min"):
        vals = [float(_eval(x, env)) for x in a]
        best = max(vals) if op == "max" else min(vals)
        active = [i for i, v in enumerate(vals) if abs(v - best) <= tol]
        if len(active) == 1:
            return _sd(a[active[0]], s, env, idx, d, tol)
        subs = [_sd(a[i], s, env, idx, d, tol) for i in active]
        exact = all(x.exact and not x.kinked for x in subs)
        convex_side = (op == "max") == (s > 0)
        if convex_side:
            piece = _unique_rows(np.vstack([p for x in subs for p in x.pieces]))
            return _SD(best, [piece], True, exact, all(x.regular for x in subs))
        return _SD(best, [p for x in subs for p in x.pieces], True, exact, False)
    if op == "abs":
        uv = float(_eval(a[0], env))
        if uv > tol:
            return _abs_branch(a[0], s, env, idx, d, tol, uv)
        if uv < -tol:
            return _abs_branch(a[0], -s, env, idx, d, tol, uv)
        x = _sd(a[0], s, env, idx, d, tol)
        y = _sd(a[0], -s, env, idx, d, tol)
        exact = x.exact and not x.kinked
        if s > 0:
            piece = _unique_rows(np.vstack(x.pieces + y.pieces))
            return _SD(abs(uv), [piece], True, exact, x.regular)
        return _SD(abs(uv), x.pieces + y.pieces, True, exact, False)
    raise ExpressionError(f"unsupported node {op}")  # pragma: no cover


def _abs_branch(u, s, env, idx, d, tol, uv):
    inner = _sd(u, s, env, idx, d, tol)
    inner.value = abs(uv)
    return inner


def _sgn(c: float) -> float:
    return 1.0 if c >= 0 else -1.0


def subdifferential_vertices(e: Expression, variables: Sequence[str], point,
                             tol: float | None = None) -> SubdifferentialVertexSet:
    """Generators for the Clarke subdifferential of ``e`` at ``point``.

    Parameters
    ----------
    e : Expression
    variables : sequence of str
        Variable order defining the coordinates of gradients.
    point : array_like
    tol : float, optional
        Branch gap below which max/min/abs branches count as tied.

    Returns
    -------
    SubdifferentialVertexSet

    Notes
    -----
    A max node (or a min node under a negative sign) contributes the convex
    hull of its active branches; a min node contributes their union. Sums use
    Minkowski combinations of pieces. Products of a kinked subexpression with
    a nonconstant factor are outer estimates.
    """
    tol = config.settings.kink_tol if tol is None else tol
    env = environment(variables, point)
    idx = {v: i for i, v in enumerate(variables)}
    res = _sd(e, 1.0, env, idx, len(variables), tol)
    pieces = [_unique_rows(p) for p in res.pieces]
    verts = _unique_rows(np.vstack(pieces))
    return SubdifferentialVertexSet(verts, bool(res.exact), pieces)


# printing ---------------------------------------------------------------------

_INFIX = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


def to_string(e: Expression) -> str:
    op = e.op
    if op == "const":
        return repr(e.value)
    if op == "var":
        return e.name
    if op in _INFIX:
        return f"({to_string(e.args[0])} {_INFIX[op]} {to_string(e.args[1])})"
    if op == "pow":
        return f"{to_string(e.args[0])}^{e.value}"
    if op == "oracle":
        label = getattr(e.payload, "label", "oracle")
        return f"{label}({', '.join(to_string(a) for a in e.args)})"
    return f"{op}({', '.join(to_string(a) for a in e.args)})"


def variables_of(exprs: Iterable[Expression]) -> frozenset:
    out = frozenset()
    for e in exprs:
        out = out | e.free
    return out
