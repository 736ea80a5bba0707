"""Derivative-free scalar searches used throughout the package.

All one-dimensional optimisations run golden-section on a bracket found by
doubling, and all root finds are plain bisection.  Convexity of every
objective we optimise makes these robust even near degenerate models where
curvature vanishes.
"""

from __future__ import annotations

import math
from typing import Callable

from .errors import BracketingFailure

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0  # 1/phi
INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0  # 1/phi^2


def golden_min(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    xtol: float = 1e-10,
) -> tuple[float, float]:
    """Minimise a unimodal ``f`` on ``[lo, hi]`` to absolute x-tolerance ``xtol``.

    Returns ``(x, f(x))`` at the best probed point.
    """
    a, b = float(lo), float(hi)
    h = b - a
    if h <= xtol:
        x = 0.5 * (a + b)
        return x, f(x)
    c = a + INV_PHI2 * h
    d = a + INV_PHI * h
    fc, fd = f(c), f(d)
    n = max(1, math.ceil(math.log(xtol / h) / math.log(INV_PHI)))
    for _ in range(n):
        if fc < fd:
            b, d, fd = d, c, fc
            h *= INV_PHI
            c = a + INV_PHI2 * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h *= INV_PHI
            d = a + INV_PHI * h
            fd = f(d)
    if fc < fd:
        return c, fc
    return d, fd


def golden_max(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    xtol: float = 1e-10,
) -> tuple[float, float]:
    x, neg = golden_min(lambda s: -f(s), lo, hi, xtol)
    return x, -neg


def bracket_min(
    f: Callable[[float], float],
    start: float = 0.0,
    step: float = 1.0,
    s_max: float = 64.0,
) -> tuple[float, float, bool]:
    """Bracket the minimum of a convex ``f`` on ``[start, inf)`` by doubling.

    Returns ``(lo, hi, at_boundary)``.  ``at_boundary`` is set when ``f`` is
    still decreasing at ``start + s_max``, in which case the infimum appears
    to be a limit at infinity and ``hi`` is the boundary point.
    """
    x_prev = start
    f_prev = f(start)
    x = start + step
    while x <= start + s_max + 1e-12:
        fx = f(x)
        if fx > f_prev:
            # minimum lies in [previous-previous, x]; widen left to be safe
            lo = max(start, 2.0 * x_prev - x)
            return lo, x, False
        x_prev, f_prev = x, fx
        x = start + (x - start) * 2.0
    return start, start + s_max, True


def bisect_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    xtol: float = 1e-10,
    f_lo: float | None = None,
    f_hi: float | None = None,
) -> float:
    """Bisect a sign change of ``f`` on ``[lo, hi]`` to x-tolerance ``xtol``."""
    a, b = float(lo), float(hi)
    fa = f(a) if f_lo is None else f_lo
    fb = f(b) if f_hi is None else f_hi
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if (fa > 0.0) == (fb > 0.0):
        raise BracketingFailure(f"no sign change on [{a}, {b}] ({fa}, {fb})")
    while b - a > xtol:
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0.0:
            return m
        if (fm > 0.0) == (fa > 0.0):
            a, fa = m, fm
        else:
            b, fb = m, fm
    return 0.5 * (a + b)
