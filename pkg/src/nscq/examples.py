"""Built-in worked problems.

``sawtooth_system``
    A nonsmooth inequality and one equality in four variables with the
    sawtooth graph and a segment as abstract sets. At ``(0, 0, 1/2, 1/2)``
    NNAMCQ and RCRCQ fail while RCPLD holds.
``cubic_bilevel``
    One-dimensional cubic lower level ``y**3 - 3 y`` on ``x <= y <= 3``,
    upper equality ``x**2 + y - 2 = 0`` and ``x in [-3, 2]``.
``exponential_bilevel``
    Lower level ``(x1 - x2) exp(y)`` on ``|y| <= ln 2`` with the upper
    equality ``x1 - x2 + y - 1/2 = 0``.
"""

from __future__ import annotations

import math

import numpy as np

from .bilevel import BilevelProgram
from .expr import const, exp, max_, power, var
from .sets import Box, Sawtooth, Segment
from .system import FeasibilitySystem

LN2 = math.log(2.0)


def sawtooth_system(depth: int = 24) -> FeasibilitySystem:
    x1, x2, x3, x4 = (var(n) for n in ("x1", "x2", "x3", "x4"))
    g = x1 + x2 - max_(const(0.5), x3) - x4 + 1
    h = 2 * x1 + x2
    return FeasibilitySystem(["x1", "x2", "x3", "x4"], g=[g], h=[h],
                             blocks=[Sawtooth(depth), Segment([0.0, 1.0], [1.0, 0.0])], name="sawtooth")


SAWTOOTH_POINT = np.array([0.0, 0.0, 0.5, 0.5])


def cubic_bilevel(F=None) -> BilevelProgram:
    x, y = var("x"), var("y")
    return BilevelProgram(
        ["x"], ["y"], F=x + y if F is None else F, f=power(y, 3) - 3 * y,
        g=[x - y, y - 3], H=[power(x, 2) + y - 2],
        y_lower=[-3.0], y_upper=[3.0], x_set=Box([-3.0], [2.0]), name="cubic")


def cubic_value(x: float) -> float:
    """Closed-form value function of :func:`cubic_bilevel`."""
    return -2.0 if -2.0 <= x <= 1.0 else x ** 3 - 3 * x


def cubic_solutions(x: float) -> list:
    if x == -2.0:
        return [-2.0, 1.0]
    return [1.0] if -2.0 < x <= 1.0 else [x]


CUBIC_POINTS = {"optimal": np.array([-2.0, -2.0, 9.0, 0.0]), "interior": np.array([-1.0, 1.0, 0.0, 0.0])}


def exponential_bilevel(F=None) -> BilevelProgram:
    x1, x2, y = var("x1"), var("x2"), var("y")
    return BilevelProgram(
        ["x1", "x2"], ["y"], F=x1 + x2 if F is None else F, f=x1 * exp(y) - x2 * exp(y),
        g=[-y - LN2, y - LN2], H=[x1 - x2 + y - 0.5],
        y_lower=[-LN2], y_upper=[LN2], name="exponential")


def exponential_value(x1: float, x2: float) -> float:
    if x1 == x2:
        return 0.0
    return 2.0 * (x1 - x2) if x1 < x2 else 0.5 * (x1 - x2)


def exponential_points(a: float = 0.3, shift: float = 0.0) -> dict:
    """Combined-program points of the three solution families.

    ``tied`` has ``x1 = x2 = a``. ``upper-bound`` has ``x1 < x2`` with
    solution ``y = ln 2`` and ``lower-bound`` has ``x1 > x2`` with
    ``y = -ln 2``; both satisfy the upper equality and are shifted by
    ``shift`` along ``(1, 1)``. Multipliers solve the lower KKT system.
    """
    gap_up = LN2 - 0.5  # x2 - x1 on the y = ln 2 family
    gap_down = LN2 + 0.5  # x1 - x2 on the y = -ln 2 family
    return {
        "tied": np.array([a, a, 0.5, 0.0, 0.0]),
        "upper-bound": np.array([shift, shift + gap_up, LN2, 0.0, 2.0 * gap_up]),
        "lower-bound": np.array([shift + gap_down, shift, -LN2, 0.5 * gap_down, 0.0]),
    }
