"""Small shared numerical helpers (deterministic adaptive quadrature)."""

from __future__ import annotations

import math
from typing import Callable, Sequence

__all__ = ["adaptive_simpson"]


def _simpson(f: Callable[[float], float], a: float, fa: float, b: float, fb: float):
    m = 0.5 * (a + b)
    fm = f(m)
    return m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def _recurse(f, a, fa, b, fb, m, fm, whole, tol, depth):
    lm, flm, left = _simpson(f, a, fa, m, fm)
    rm, frm, right = _simpson(f, m, fm, b, fb)
    delta = left + right - whole
    if depth <= 0 or abs(delta) <= 15.0 * tol:
        # Richardson correction; error of the returned value ~ delta/15
        return left + right + delta / 15.0
    return _recurse(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1) + _recurse(
        f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1
    )


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    *,
    abs_tol: float = 1e-9,
    breakpoints: Sequence[float] = (),
    max_depth: int = 48,
) -> float:
    """Integrate ``f`` on [a, b] by adaptive Simpson to absolute tolerance.

    ``breakpoints`` are interior abscissae where the integrand is known to be
    only piecewise smooth (or where narrow features start); the interval is
    split there first so the refinement cannot step over them.  Evaluation
    order is fixed, so results are bit-reproducible for a given integrand.
    """
    if not b > a:
        if b == a:
            return 0.0
        return -adaptive_simpson(f, b, a, abs_tol=abs_tol, breakpoints=breakpoints, max_depth=max_depth)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("adaptive_simpson needs a finite interval")
    pts = [a]
    for p in sorted(set(float(p) for p in breakpoints)):
        if a < p < b:
            pts.append(p)
    pts.append(b)
    total = 0.0
    tol_each = abs_tol / (len(pts) - 1)
    for lo, hi in zip(pts[:-1], pts[1:]):
        flo, fhi = f(lo), f(hi)
        m, fm, whole = _simpson(f, lo, flo, hi, fhi)
        total += _recurse(f, lo, flo, hi, fhi, m, fm, whole, tol_each, max_depth)
    return total
