"""Independent ground truth by nested central finite differences.

Everything here works on F^2 evaluated straight from the definition
F = |y| phi(r, s) in ambient coordinates, bypassing the closed forms for the
metric tensor, spray, and curvatures:

    g_il    = (F^2)_{y^i y^l} / 2                      (FD Hessian)
    G^i     = g^{il} ((F^2)_{x^k y^l} y^k - (F^2)_{x^l}) / 4
    B^i_jkl = d^3 G^i / dy^j dy^k dy^l                 (FD of the FD spray)
    R^i_j   = 2 G^i_{x^j} - y^k G^i_{x^k y^j} + 2 G^k G^i_{y^k y^j}
              - G^i_{y^k} G^k_{y^j}

Step sizes grow with the nesting depth: differences of differences amplify
the rounding noise of F^2 by 1/h^2 per level, so the spray used inside the
curvature stencils runs at a much larger step (with its own Richardson
extrapolation) than the one-shot public spray.  Near the cone boundary all
stencils shrink together; below h_min the computation reports a boundary
skip instead of returning junk.  Quadrature-backed phi values are evaluated
on a grid frozen per evaluator, so FD sees an analytic function.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .frame import frame_from_ambient
from .metricspec import MetricSpec, domain_check, phi_values

__all__ = [
    "FDConfig",
    "BoundarySkip",
    "AmbientEvaluator",
    "ambient_F",
    "fd_spray",
    "fd_berwald",
    "fd_riemann",
    "tensor_agreement",
]


class BoundarySkip(RuntimeError):
    """Stencil cannot fit inside the valid cone at a workable step size."""


@dataclass(frozen=True)
class FDConfig:
    """Step-size policy (all steps relative to max(1, |x|) or max(1, |y|)).

    spray_h   : one-shot spray stencil step
    nested_h  : step of the spray evaluations feeding curvature stencils
    berwald_h : outer step of the third y-derivatives
    riemann_h : outer step of the first/second derivatives of the spray
    richardson: extrapolation levels (0 or 1) applied at each stage
    panels    : frozen quadrature panel count for integral-defined phi
    """

    spray_h: float = 1e-3
    nested_h: float = 1e-2
    berwald_h: float = 8e-2
    riemann_h: float = 2e-2
    richardson: int = 1
    h_min: float = 1e-7
    panels: int = 192


class AmbientEvaluator:
    """Vectorized F^2 on batches of ambient points; the quadrature grid is
    frozen at construction so differences of results stay smooth."""

    def __init__(self, spec: MetricSpec, cfg: FDConfig | None = None):
        self.spec = spec
        self.cfg = cfg or FDConfig()

    def F2(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        r = np.linalg.norm(X, axis=1)
        u = np.linalg.norm(Y, axis=1)
        s = np.einsum("ij,ij->i", X, Y) / u
        phi = phi_values(self.spec, r, s, panels=self.cfg.panels)
        return (u * phi) ** 2


def ambient_F(spec: MetricSpec, x, y) -> float:
    """F straight from the definition (phi evaluated at jet degree zero)."""
    from .metric import finsler_value

    return finsler_value(spec, frame_from_ambient(x, y))


def _richardson(fn, levels: int):
    """fn(scale) is an O(h^2) approximation; one level removes the h^2 term."""
    d1 = fn(1.0)
    if levels <= 0:
        return d1
    d2 = fn(0.5)
    return (4.0 * d2 - d1) / 3.0


def _fit_steps(spec: MetricSpec, x, y, reach_x: float, reach_y: float,
               h_min: float) -> float:
    """Largest shrink factor in (0, 1] keeping proxy stencil corners valid."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    factor = 1.0
    while True:
        ok = True
        for sx, sy in itertools.product((-1.0, 1.0), repeat=2):
            xx = x * (1.0 + sx * factor * reach_x / max(1e-12, np.linalg.norm(x)))
            yy = y + sy * factor * reach_y * np.sign(y + 1e-300)
            try:
                if not domain_check(spec, frame_from_ambient(xx, yy)):
                    ok = False
                    break
            except Exception:
                ok = False
                break
        if ok:
            return factor
        factor /= 2.0
        if factor * min(reach_x, reach_y) < h_min:
            raise BoundarySkip("stencil cannot stay inside the admissible cone")


# -- spray ---------------------------------------------------------------------


def _spray_once(ev: AmbientEvaluator, x: np.ndarray, y: np.ndarray,
                hx: float, hy: float) -> np.ndarray:
    """One central-difference pass for G^i at (x, y)."""
    n = x.shape[0]
    X_list: list[np.ndarray] = []
    Y_list: list[np.ndarray] = []

    def push(xx, yy):
        X_list.append(xx)
        Y_list.append(yy)
        return len(X_list) - 1

    ex = np.eye(n)
    mixed_idx = {}
    for k in range(n):
        for l in range(n):
            mixed_idx[(k, l)] = (
                push(x + hx * ex[k], y + hy * ex[l]),
                push(x + hx * ex[k], y - hy * ex[l]),
                push(x - hx * ex[k], y + hy * ex[l]),
                push(x - hx * ex[k], y - hy * ex[l]),
            )
    xg_idx = {k: (push(x + hx * ex[k], y), push(x - hx * ex[k], y)) for k in range(n)}
    center = push(x, y)
    yh_idx = {}
    for i in range(n):
        yh_idx[(i, i)] = (push(x, y + hy * ex[i]), push(x, y - hy * ex[i]))
        for l in range(i + 1, n):
            yh_idx[(i, l)] = (
                push(x, y + hy * (ex[i] + ex[l])),
                push(x, y + hy * (ex[i] - ex[l])),
                push(x, y - hy * (ex[i] - ex[l])),
                push(x, y - hy * (ex[i] + ex[l])),
            )

    vals = ev.F2(np.array(X_list), np.array(Y_list))

    mixed = np.empty((n, n))
    for (k, l), (a, b, c, d) in mixed_idx.items():
        mixed[k, l] = (vals[a] - vals[b] - vals[c] + vals[d]) / (4 * hx * hy)
    xgrad = np.empty(n)
    for k, (a, b) in xg_idx.items():
        xgrad[k] = (vals[a] - vals[b]) / (2 * hx)
    g = np.empty((n, n))
    for (i, l), idx in yh_idx.items():
        if i == l:
            g[i, i] = (vals[idx[0]] - 2 * vals[center] + vals[idx[1]]) / (2 * hy**2)
        else:
            v = (vals[idx[0]] - vals[idx[1]] - vals[idx[2]] + vals[idx[3]]) / (8 * hy**2)
            g[i, l] = g[l, i] = v
    rhs = mixed.T @ y - xgrad
    return 0.25 * np.linalg.solve(g, rhs)


class _SprayOracle:
    """Richardson-extrapolated FD spray with caching, shared by the
    curvature stencils so every evaluation sees the same step policy."""

    def __init__(self, ev: AmbientEvaluator, hx: float, hy: float, levels: int):
        self.ev = ev
        self.hx = hx
        self.hy = hy
        self.levels = levels
        self._cache: dict[bytes, np.ndarray] = {}

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        key = x.tobytes() + y.tobytes()
        hit = self._cache.get(key)
        if hit is None:
            hit = _richardson(
                lambda f: _spray_once(self.ev, x, y, self.hx * f, self.hy * f),
                self.levels)
            self._cache[key] = hit
        return hit


def fd_spray(spec: MetricSpec, x, y, cfg: FDConfig | None = None) -> np.ndarray:
    """G^i from its definition, by central differences of F^2."""
    cfg = cfg or FDConfig()
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    hx = cfg.spray_h * max(1.0, float(np.linalg.norm(x)))
    hy = cfg.spray_h * max(1.0, float(np.linalg.norm(y)))
    f = _fit_steps(spec, x, y, 2 * hx, 2 * hy, cfg.h_min)
    oracle = _SprayOracle(AmbientEvaluator(spec, cfg), hx * f, hy * f, cfg.richardson)
    return oracle(x, y)


# -- Berwald ---------------------------------------------------------------------


def _stencil_1d(order: int, h: float) -> list[tuple[float, float]]:
    if order == 1:
        return [(h, 0.5 / h), (-h, -0.5 / h)]
    if order == 2:
        return [(h, 1.0 / h**2), (0.0, -2.0 / h**2), (-h, 1.0 / h**2)]
    if order == 3:
        w = 1.0 / (2.0 * h**3)
        return [(2 * h, w), (h, -2 * w), (-h, 2 * w), (-2 * h, -w)]
    raise ValueError(order)


def _mixed_stencil(axes: tuple[int, ...], h: float, n: int):
    """Tensor-product central stencil for the mixed partial along ``axes``
    (repeats allowed); yields (shift_vector, weight)."""
    counts: dict[int, int] = {}
    for a in axes:
        counts[a] = counts.get(a, 0) + 1
    per_axis = [(a, _stencil_1d(c, h)) for a, c in counts.items()]
    for combo in itertools.product(*[st for _, st in per_axis]):
        shift = np.zeros(n)
        weight = 1.0
        for (axis, _), (off, wgt) in zip(per_axis, combo):
            shift[axis] += off
            weight *= wgt
        yield shift, weight


def fd_berwald(spec: MetricSpec, x, y, cfg: FDConfig | None = None) -> np.ndarray:
    """B^i_jkl = third y-derivatives of the FD spray."""
    cfg = cfg or FDConfig()
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n = x.shape[0]
    yscale = max(1.0, float(np.linalg.norm(y)))
    xscale = max(1.0, float(np.linalg.norm(x)))
    h3 = cfg.berwald_h * yscale
    hn_x = cfg.nested_h * xscale
    hn_y = cfg.nested_h * yscale
    f = _fit_steps(spec, x, y, 2 * hn_x, 2 * h3 + 2 * hn_y, cfg.h_min)
    h3 *= f
    G = _SprayOracle(AmbientEvaluator(spec, cfg), hn_x * f, hn_y * f, cfg.richardson)

    def B_at(scale: float) -> np.ndarray:
        h = h3 * scale
        B = np.zeros((n, n, n, n))
        for j in range(n):
            for k in range(j, n):
                for l in range(k, n):
                    acc = np.zeros(n)
                    for shift, wgt in _mixed_stencil((j, k, l), h, n):
                        acc += wgt * G(x, y + shift)
                    for perm in set(itertools.permutations((j, k, l))):
                        B[:, perm[0], perm[1], perm[2]] = acc
        return B

    return _richardson(B_at, cfg.richardson)


# -- Riemann ---------------------------------------------------------------------


def fd_riemann(spec: MetricSpec, x, y, cfg: FDConfig | None = None) -> np.ndarray:
    """R^i_j from its definition, built out of FD derivatives of the spray."""
    cfg = cfg or FDConfig()
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n = x.shape[0]
    ho_x = cfg.riemann_h * max(1.0, float(np.linalg.norm(x)))
    ho_y = cfg.riemann_h * max(1.0, float(np.linalg.norm(y)))
    hn_x = cfg.nested_h * max(1.0, float(np.linalg.norm(x)))
    hn_y = cfg.nested_h * max(1.0, float(np.linalg.norm(y)))
    f = _fit_steps(spec, x, y, 2 * (ho_x + hn_x), 2 * (ho_y + hn_y), cfg.h_min)
    G = _SprayOracle(AmbientEvaluator(spec, cfg), hn_x * f, hn_y * f, cfg.richardson)
    ex = np.eye(n)

    def R_at(scale: float) -> np.ndarray:
        ax = ho_x * f * scale
        ay = ho_y * f * scale
        G0 = G(x, y)
        Gx = np.empty((n, n))
        Gy = np.empty((n, n))
        for j in range(n):
            Gx[:, j] = (G(x + ax * ex[j], y) - G(x - ax * ex[j], y)) / (2 * ax)
            Gy[:, j] = (G(x, y + ay * ex[j]) - G(x, y - ay * ex[j])) / (2 * ay)
        Gxy = np.empty((n, n, n))
        for k in range(n):
            for j in range(n):
                Gxy[:, k, j] = (G(x + ax * ex[k], y + ay * ex[j])
                                - G(x + ax * ex[k], y - ay * ex[j])
                                - G(x - ax * ex[k], y + ay * ex[j])
                                + G(x - ax * ex[k], y - ay * ex[j])) / (4 * ax * ay)
        Gyy = np.empty((n, n, n))
        for k in range(n):
            Gyy[:, k, k] = (G(x, y + ay * ex[k]) - 2 * G0 + G(x, y - ay * ex[k])) / ay**2
            for j in range(k + 1, n):
                v = (G(x, y + ay * (ex[k] + ex[j])) - G(x, y + ay * (ex[k] - ex[j]))
                     - G(x, y - ay * (ex[k] - ex[j]))
                     + G(x, y - ay * (ex[k] + ex[j]))) / (4 * ay**2)
                Gyy[:, k, j] = v
                Gyy[:, j, k] = v
        return (2.0 * Gx - np.einsum("k,ikj->ij", y, Gxy)
                + 2.0 * np.einsum("k,ikj->ij", G0, Gyy)
                - Gy @ Gy)

    return _richardson(R_at, cfg.richardson)


def tensor_agreement(a: np.ndarray, b: np.ndarray, floor: float) -> float:
    """Max-norm discrepancy relative to the dominant scale.

    ``floor`` is the characteristic magnitude of the quantity (e.g.
    u^2 max(1, phi^2) for the Riemann tensor): tensors that both vanish
    relative to it agree trivially, and nonzero tensors are compared on
    their dominant entries.
    """
    scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), floor)
    return float(np.max(np.abs(a - b))) / scale
