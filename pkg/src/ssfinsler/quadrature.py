"""Adaptive Simpson quadrature plus a vectorized fixed-grid variant.

The adaptive routine is the precision workhorse (phi values, normalization
integrals).  The fixed-grid variant integrates to many upper limits at once
on a shared normalized grid; because the node layout is frozen, the result
is an analytic function of the limits, which keeps finite differences of
quadrature-backed quantities clean.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "QuadratureResult",
    "QuadratureError",
    "integrate",
    "batch_integral",
]

MAX_PANELS = 1 << 20


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error: float
    subdivisions: int


def integrate(f: Callable[[float], float], a: float, b: float,
              tol: float = 1e-10) -> QuadratureResult:
    """Adaptive Simpson integral of ``f`` over [a, b].

    Bisects until the local Richardson estimate |S2 - S1|/15 is below the
    tolerance apportioned to the subinterval; raises QuadratureError after
    2^20 panels (a near-singular integrand).
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    a = float(a)
    b = float(b)
    if a == b:
        return QuadratureResult(0.0, 0.0, 0)
    sign = 1.0
    if b < a:
        a, b = b, a
        sign = -1.0

    def simpson(x0, f0, x2, f2):
        x1 = 0.5 * (x0 + x2)
        f1 = f(x1)
        return x1, f1, (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    fa = f(a)
    fb = f(b)
    m, fm, whole = simpson(a, fa, b, fb)
    # stack entries: (x0, f0, x2, f2, mid, fmid, S, local_tol, depth)
    stack = [(a, fa, b, fb, m, fm, whole, tol, 0)]
    total = 0.0
    err = 0.0
    panels = 1
    while stack:
        x0, f0, x2, f2, x1, f1, S, loc, depth = stack.pop()
        lm, lfm, SL = simpson(x0, f0, x1, f1)
        rm, rfm, SR = simpson(x1, f1, x2, f2)
        panels += 1
        if panels > MAX_PANELS:
            raise QuadratureError("maximum subdivision count exhausted")
        delta = SL + SR - S
        if abs(delta) <= 15.0 * loc or depth >= 48:
            total += SL + SR + delta / 15.0
            err += abs(delta) / 15.0
        else:
            stack.append((x0, f0, x1, f1, lm, lfm, SL, loc / 2.0, depth + 1))
            stack.append((x1, f1, x2, f2, rm, rfm, SR, loc / 2.0, depth + 1))
    return QuadratureResult(sign * total, err, panels)


def _simpson_weights(num_panels: int) -> tuple[np.ndarray, np.ndarray]:
    n = 2 * num_panels
    t = np.linspace(0.0, 1.0, n + 1)
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w /= 3.0 * n
    return t, w


def batch_integral(integrand: Callable[[np.ndarray], np.ndarray],
                   upper: np.ndarray,
                   tol: float = 1e-11,
                   start_panels: int = 32,
                   max_panels: int = 4096,
                   panels: int | None = None) -> np.ndarray:
    """Integrals from 0 to ``upper[i]`` for every i, on one normalized grid.

    ``integrand`` maps an array of evaluation points, shaped like
    ``upper[:, None] * t[None, :]``, to integrand values of the same shape.
    When ``panels`` is given the node count is frozen (no convergence loop);
    otherwise panels double until the sup-change drops below ``tol`` times
    the result scale.
    """
    upper = np.asarray(upper, dtype=float)

    def evaluate(num_panels: int) -> np.ndarray:
        t, w = _simpson_weights(num_panels)
        sigma = upper[..., None] * t
        vals = integrand(sigma)
        return upper * (vals @ w)

    if panels is not None:
        return evaluate(panels)

    prev = evaluate(start_panels)
    p = start_panels * 2
    while p <= max_panels:
        cur = evaluate(p)
        scale = max(1.0, float(np.max(np.abs(cur))) if cur.size else 1.0)
        if float(np.max(np.abs(cur - prev))) <= tol * scale:
            return cur
        prev = cur
        p *= 2
    return prev
