"""Adaptive Simpson quadrature used to evaluate residual ``Int`` terms."""

from __future__ import annotations

import math

from .errors import QuadratureFailure

ABS_TOL = 1e-8
MAX_DEPTH = 50
EVAL_BUDGET = 2_000_000


def _simpson(f, a, b, tol, max_depth, counter):
    def g(x):
        counter[0] += 1
        if counter[0] > EVAL_BUDGET:
            raise QuadratureFailure("evaluation budget exhausted before tolerance was met")
        return f(x)

    def rec(a, fa, b, fb, m, fm, whole, tol, depth):
        lm, rm = (a + m) / 2, (m + b) / 2
        flm, frm = g(lm), g(rm)
        left = (m - a) / 6 * (fa + 4 * flm + fm)
        right = (b - m) / 6 * (fm + 4 * frm + fb)
        delta = left + right - whole
        # at MAX_DEPTH the panel is at float resolution; accept what we have
        if depth >= max_depth or abs(delta) <= 15 * tol or not math.isfinite(delta):
            return left + right + delta / 15
        return (rec(a, fa, m, fm, lm, flm, left, tol / 2, depth + 1)
                + rec(m, fm, b, fb, rm, frm, right, tol / 2, depth + 1))

    fa, fb = g(a), g(b)
    m = (a + b) / 2
    fm = g(m)
    whole = (b - a) / 6 * (fa + 4 * fm + fb)
    return rec(a, fa, b, fb, m, fm, whole, tol, 0)


def _panels(f, a, b, tol, panels, counter):
    h = (b - a) / panels
    total = 0.0
    for i in range(panels):
        lo = a + i * h
        hi = b if i == panels - 1 else lo + h
        total += _simpson(f, lo, hi, tol / panels, MAX_DEPTH, counter)
    return total


def _probe_center(f, lo, hi):
    """Locate the bulk of an integrand on an unbounded range.

    Returns (center, scale) for the map x = center + scale * t / (1 - t^2).
    """
    grid = [0.0]
    for k in range(-24, 49):
        r = 10 ** (k / 8)
        grid.extend((r, -r))
    grid = sorted(x for x in grid if lo < x < hi)
    best_x, best_v = 0.0, -1.0
    for x in grid:
        try:
            v = abs(f(x))
        except (OverflowError, ZeroDivisionError, ValueError):
            continue
        if math.isfinite(v) and v > best_v:
            best_x, best_v = x, v
    if best_v <= 0:
        return 0.0, 1.0
    i = grid.index(best_x)
    gaps = [abs(grid[j] - best_x) for j in (i - 1, i + 1) if 0 <= j < len(grid)]
    return best_x, max(min(gaps), 1e-6)


def integrate(f, a: float, b: float, tol: float = ABS_TOL, panels: int = 8) -> float:
    """Integrate ``f`` over ``[a, b]``; either bound may be infinite.

    Unbounded ranges use x = c + s * t / (1 - t^2) over t in (-1, 1) (or the
    half of it that covers the range), with c, s picked from a coarse probe.
    """
    if a == b:
        return 0.0
    if a > b:
        return -integrate(f, b, a, tol, panels)
    counter = [0]
    if math.isinf(a) or math.isinf(b):
        if math.isinf(a) and math.isinf(b):
            c, s = _probe_center(f, a, b)
            t_lo, t_hi = -1.0, 1.0
        elif math.isinf(b):
            c, s = a, max(_probe_center(f, a, b)[0] - a, 1.0)
            t_lo, t_hi = 0.0, 1.0
        else:
            c, s = b, max(b - _probe_center(f, a, b)[0], 1.0)
            t_lo, t_hi = -1.0, 0.0

        def g(t):
            d = 1.0 - t * t
            if d <= 0.0:
                return 0.0
            x = c + s * t / d
            if not (a < x < b) and not (x == a or x == b):
                return 0.0
            v = f(x)
            return v * s * (1.0 + t * t) / (d * d) if v else 0.0

        out = _panels(g, t_lo, t_hi, tol, panels * 4, counter)
    else:
        out = _panels(f, a, b, tol, panels, counter)
    if math.isnan(out):
        raise QuadratureFailure("integrand produced NaN")
    return out
