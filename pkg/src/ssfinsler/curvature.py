"""Berwald, Landsberg, and Riemann curvatures of F = u phi(r, s).

Everything here is algebra on the spray jets: the closed-form coefficient
functions of P, Q, and phi derivatives are assembled into the ambient
tensors on the basis built from delta, x, and yhat = y/u.  The residual
systems evaluated by ``residuals`` characterize

  * Berwald metrics:      sP_s - P = 0, P_ss = 0, sQ_ss - Q_s = 0, Q_sss = 0
  * Landsberg metrics:    L1 = 0, L2 = 0 (below)
  * constant flag curvature K (three equations, first reads R1 = K phi^2)
  * Einstein metrics:     (n-1) R1 + (r^2 - s^2) R3 = (n-1) K(r) phi^2
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .frame import RadialFrame
from .metric import SprayData, metric_tensor, spray_pq
from .metricspec import DEFAULT_DEGREE, MetricSpec, phi_jet

__all__ = [
    "BerwaldTensor",
    "LandsbergData",
    "RiemannData",
    "FlagCurvatureSample",
    "ResidualReport",
    "CurvatureReport",
    "berwald_tensor",
    "landsberg_tensor",
    "riemann_tensor",
    "flag_curvature",
    "residuals",
    "curvature_report",
]


# ---------------------------------------------------------------------------
# Berwald


@dataclass
class BerwaldTensor:
    """B^i_jkl (totally symmetric in jkl) plus the quadruple whose vanishing
    characterizes quadratic sprays: (sP_s - P, P_ss, sQ_ss - Q_s, Q_sss)."""

    B: np.ndarray = field(repr=False)
    residual: tuple[float, float, float, float]
    scale: float

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.B)))


def berwald_tensor(spray: SprayData, frame: RadialFrame | None = None) -> BerwaldTensor:
    if frame is None:
        frame = spray.frame
    s, u = frame.s, frame.u
    P = spray.P
    Ps = spray.p(0, 1)
    Pss = spray.p(0, 2)
    Psss = spray.p(0, 3)
    Q = spray.Q
    Qs = spray.q(0, 1)
    Qss = spray.q(0, 2)
    Qsss = spray.q(0, 3)

    x = frame.x
    yh = frame.y / u
    n = frame.n
    I = np.eye(n)

    def sym3_mixed(v: np.ndarray, w: np.ndarray) -> np.ndarray:
        # delta^i_j (v^k w^l + v^l w^k) + delta^i_k (...) + delta^i_l (...)
        vw = np.outer(v, w)
        vw = vw + vw.T
        return (np.einsum("ij,kl->ijkl", I, vw)
                + np.einsum("ik,jl->ijkl", I, vw)
                + np.einsum("il,jk->ijkl", I, vw))

    def sym3_same(v: np.ndarray) -> np.ndarray:
        vv = np.outer(v, v)
        return (np.einsum("ij,kl->ijkl", I, vv)
                + np.einsum("ik,jl->ijkl", I, vv)
                + np.einsum("il,jk->ijkl", I, vv))

    def head_dsym(h: np.ndarray, v: np.ndarray) -> np.ndarray:
        # h^i (delta_jk v^l + delta_jl v^k + delta_kl v^j)
        t = (np.einsum("jk,l->jkl", I, v)
             + np.einsum("jl,k->jkl", I, v)
             + np.einsum("kl,j->jkl", I, v))
        return np.einsum("i,jkl->ijkl", h, t)

    def head_vvw(h: np.ndarray, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        # h^i (v^j v^k w^l + v^j v^l w^k + v^k v^l w^j)
        t = (np.einsum("j,k,l->jkl", v, v, w)
             + np.einsum("j,l,k->jkl", v, v, w)
             + np.einsum("k,l,j->jkl", v, v, w))
        return np.einsum("i,jkl->ijkl", h, t)

    dd = (np.einsum("ij,kl->ijkl", I, I)
          + np.einsum("ik,jl->ijkl", I, I)
          + np.einsum("il,jk->ijkl", I, I))

    B = np.zeros((n, n, n, n))
    B += Pss * sym3_same(x)
    B += (P - s * Ps) * dd
    B += (-s * Pss) * sym3_mixed(x, yh)
    B += (-s * Pss) * head_dsym(yh, x)
    B += (Qs - s * Qss) * head_dsym(x, x)
    B += (s**2 * Pss + s * Ps - P) * sym3_same(yh)
    B += (s**2 * Pss + s * Ps - P) * head_dsym(yh, yh)
    B += (3 * P - s**3 * Psss - 6 * s**2 * Pss - 3 * s * Ps) * np.einsum(
        "i,j,k,l->ijkl", yh, yh, yh, yh)
    B += (s**2 * Psss + 3 * s * Pss) * head_vvw(yh, yh, x)
    B += Psss * np.einsum("i,j,k,l->ijkl", yh, x, x, x)
    B += (-(Pss + s * Psss)) * head_vvw(yh, x, yh)
    B += (s**2 * Qsss + s * Qss - Qs) * head_vvw(x, yh, x)
    B += (-s * Qsss) * head_vvw(x, x, yh)
    B += Qsss * np.einsum("i,j,k,l->ijkl", x, x, x, x)
    B += (s**2 * Qss - s * Qs) * head_dsym(x, yh)
    B += (3 * s * Qs - 3 * s**2 * Qss - s**3 * Qsss) * np.einsum(
        "i,j,k,l->ijkl", x, yh, yh, yh)
    B /= u

    scale = max(1.0, abs(P), abs(Q))
    residual = (s * Ps - P, Pss, s * Qss - Qs, Qsss)
    return BerwaldTensor(B=B, residual=residual, scale=scale)


# ---------------------------------------------------------------------------
# Landsberg


@dataclass
class LandsbergData:
    L1: float
    L2: float
    L3: float
    L4: float
    L5: float
    L6: float
    L: np.ndarray = field(repr=False)
    scale: float = 1.0

    @property
    def residual(self) -> tuple[float, float]:
        return (self.L1, self.L2)

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.L)))


def landsberg_tensor(spec: MetricSpec, spray: SprayData,
                     frame: RadialFrame | None = None) -> LandsbergData:
    """L_jkl and its six coefficients.

        L1 = 3 phi_s P_ss + phi P_sss + (s phi + (r^2-s^2) phi_s) Q_sss
        L2 = -s phi P_ss + phi_s (P - s P_s)
             + (s phi + (r^2-s^2) phi_s) (Q_s - s Q_ss)
        L3 = -s^3 L1 + 3 s L2,  L4 = -s L2,  L5 = -s L1,  L6 = s^2 L1 - L2

    The coefficient relations are exactly what makes y^j L_jkl = 0.
    The ``spec`` argument is only consulted when the spray's phi jet is too
    shallow for the third s-derivatives.
    """
    if frame is None:
        frame = spray.frame
    phi = spray.phi
    if phi.degree < 3:
        phi = phi_jet(spec, frame, DEFAULT_DEGREE)
        spray = spray_pq(spec, frame, phi=phi)
    s, u = frame.s, frame.u
    w = frame.r**2 - s**2
    ph = phi.value
    phs = phi.deriv(0, 1)
    P = spray.P
    Ps = spray.p(0, 1)
    Pss = spray.p(0, 2)
    Psss = spray.p(0, 3)
    Qs = spray.q(0, 1)
    Qss = spray.q(0, 2)
    Qsss = spray.q(0, 3)
    eta = s * ph + w * phs
    L1 = 3 * phs * Pss + ph * Psss + eta * Qsss
    L2 = -s * ph * Pss + phs * (P - s * Ps) + eta * (Qs - s * Qss)
    L3 = -(s**3) * L1 + 3 * s * L2
    L4 = -s * L2
    L5 = -s * L1
    L6 = s**2 * L1 - L2

    x = frame.x
    yh = frame.y / u
    n = frame.n
    I = np.eye(n)

    def dsym(v: np.ndarray) -> np.ndarray:
        return (np.einsum("j,kl->jkl", v, I)
                + np.einsum("k,jl->jkl", v, I)
                + np.einsum("l,jk->jkl", v, I))

    def vww(v: np.ndarray, wv: np.ndarray) -> np.ndarray:
        return (np.einsum("j,k,l->jkl", v, wv, wv)
                + np.einsum("k,j,l->jkl", v, wv, wv)
                + np.einsum("l,j,k->jkl", v, wv, wv))

    L = (L1 * np.einsum("j,k,l->jkl", x, x, x)
         + L2 * dsym(x)
         + L3 * np.einsum("j,k,l->jkl", yh, yh, yh)
         + L4 * dsym(yh)
         + L5 * vww(yh, x)
         + L6 * vww(x, yh))
    L *= -ph / 2.0

    scale = max(1.0, abs(ph) * abs(Pss))
    return LandsbergData(L1=L1, L2=L2, L3=L3, L4=L4, L5=L5, L6=L6,
                         L=L, scale=scale)


# ---------------------------------------------------------------------------
# Riemann


@dataclass
class RiemannData:
    R1: float
    R2: float
    R3: float
    R4: float
    R5: float
    Rij: np.ndarray = field(repr=False)
    ric: float

    def identity_defects(self, frame: RadialFrame) -> tuple[float, float]:
        """(R4 + s R3, R1 + R2 + s R5): algebraic identities of the closed
        forms, zero up to jet round-off for every metric."""
        s = frame.s
        return (self.R4 + s * self.R3, self.R1 + self.R2 + s * self.R5)


def riemann_tensor(spray: SprayData, frame: RadialFrame | None = None) -> RiemannData:
    if frame is None:
        frame = spray.frame
    r, s, u = frame.r, frame.s, frame.u
    w = r**2 - s**2
    P = spray.P
    Pr = spray.p(1, 0)
    Ps = spray.p(0, 1)
    Prs = spray.p(1, 1)
    Pss = spray.p(0, 2)
    Q = spray.Q
    Qr = spray.q(1, 0)
    Qs = spray.q(0, 1)
    Qrs = spray.q(1, 1)
    Qss = spray.q(0, 2)

    R1 = 2 * Q - s / r * Pr - Ps + 2 * w * Ps * Q + P**2 + 2 * s * P * Q
    R2 = (Ps - s / r * Pr + s**2 / r * Prs + s * Pss - 2 * Q + s * Qs
          - 2 * s * P * Ps - 4 * s * P * Q + 4 * s**2 * Ps * Q - P**2
          - 2 * s * w * Pss * Q + 3 * s * P * Ps + s**2 * P * Qs
          + w * s * Ps * Qs - 2 * r**2 * Ps * Q)
    R3 = (2 / r * Qr - Qss - s / r * Qrs + 2 * w * Q * Qss + 4 * Q**2
          - w * Qs**2 - 2 * s * Q * Qs)
    R4 = (-2 * s / r * Qr + s**2 / r * Qrs + s * Qss - 2 * w * s * Q * Qss
          + w * s * Qs**2 - 4 * s * Q**2 + 2 * s**2 * Q * Qs)
    R5 = (2 / r * Pr - s / r * Prs - Pss - Qs + 2 * P * Q - 2 * s * Ps * Q
          + 2 * w * Pss * Q - P * Ps - s * P * Qs - w * Ps * Qs)

    x = frame.x
    yh = frame.y / u
    n = frame.n
    Rij = u**2 * (R1 * np.eye(n) + R2 * np.outer(yh, yh) + R3 * np.outer(x, x)
                  + R4 * np.outer(x, yh) + R5 * np.outer(yh, x))
    ric = float(np.trace(Rij))
    return RiemannData(R1=R1, R2=R2, R3=R3, R4=R4, R5=R5, Rij=Rij, ric=ric)


# ---------------------------------------------------------------------------
# flag curvature


@dataclass
class FlagCurvatureSample:
    values: np.ndarray
    mean: float
    spread: float


def flag_curvature(spec: MetricSpec, riemann: RiemannData, frame: RadialFrame,
                   m: int = 4, rng: np.random.Generator | None = None,
                   metric=None) -> FlagCurvatureSample:
    """Per-flag curvature for m transverse directions drawn g-orthogonal to y.

        K(P, y) = g(v, R v) / (F^2 g(v, v) - g(y, v)^2)

    For a g-orthogonal v the denominator is F^2 g(v, v).
    """
    if m < 2:
        raise ValueError("need at least two transverse directions")
    if rng is None:
        rng = np.random.default_rng(0)
    if metric is None:
        metric = metric_tensor(spec, frame)
    g = metric.g
    y = frame.y
    n = frame.n
    F2 = float(y @ g @ y)
    vals = np.empty(m)
    k = 0
    while k < m:
        v = rng.normal(size=n)
        v = v - (v @ g @ y) / F2 * y
        nv = float(v @ g @ v)
        if nv < 1e-10:
            continue
        num = float(v @ g @ riemann.Rij @ v)
        vals[k] = num / (F2 * nv)
        k += 1
    return FlagCurvatureSample(values=vals, mean=float(np.mean(vals)),
                               spread=float(np.max(vals) - np.min(vals)))


# ---------------------------------------------------------------------------
# residual systems


@dataclass
class ResidualReport:
    """Normalized residuals of the four characterizing systems.

    berwald   : 4 values / max(1, |P|, |Q|)
    landsberg : 2 values / max(1, |phi| |P_ss|)
    cfc       : 3 values / phi^2 (needs a curvature constant K)
    einstein  : 1 value  / phi^2 (needs K as a function of r)
    """

    berwald: tuple[float, float, float, float]
    landsberg: tuple[float, float]
    cfc: tuple[float, float, float] | None
    einstein: float | None

    @property
    def berwald_max(self) -> float:
        return max(abs(t) for t in self.berwald)

    @property
    def landsberg_max(self) -> float:
        return max(abs(t) for t in self.landsberg)

    @property
    def cfc_max(self) -> float | None:
        return None if self.cfc is None else max(abs(t) for t in self.cfc)


def residuals(spec: MetricSpec, spray: SprayData, frame: RadialFrame | None = None,
              K: Union[float, Callable[[float], float], None] = None,
              dim: int | None = None) -> ResidualReport:
    if frame is None:
        frame = spray.frame
    if dim is None:
        dim = frame.n
    r, s = frame.r, frame.s
    w = r**2 - s**2
    phi = spray.phi
    ph = phi.value
    P = spray.P
    Pr = spray.p(1, 0)
    Ps = spray.p(0, 1)
    Prs = spray.p(1, 1)
    Pss = spray.p(0, 2)
    Psss = spray.p(0, 3)
    Q = spray.Q
    Qr = spray.q(1, 0)
    Qs = spray.q(0, 1)
    Qrs = spray.q(1, 1)
    Qss = spray.q(0, 2)
    Qsss = spray.q(0, 3)

    bscale = max(1.0, abs(P), abs(Q))
    berwald = tuple(t / bscale for t in (s * Ps - P, Pss, s * Qss - Qs, Qsss))

    phs = phi.deriv(0, 1)
    eta = s * ph + w * phs
    L1 = 3 * phs * Pss + ph * Psss + eta * Qsss
    L2 = -s * ph * Pss + phs * (P - s * Ps) + eta * (Qs - s * Qss)
    lscale = max(1.0, abs(ph) * abs(Pss))
    landsberg = (L1 / lscale, L2 / lscale)

    cfc = None
    einstein = None
    if K is not None:
        Kr = K(r) if callable(K) else float(K)
        eq1 = (2 * Q - s / r * Pr - Ps + 2 * w * Ps * Q + P**2 + 2 * s * P * Q
               - Kr * ph**2)
        eq2 = (Pr / (2 * r) - s / (2 * r) * Prs - Pss / 2 + P * Q - s * Ps * Q
               + w * Pss * Q)
        eq3 = (2 / r * Qr - Qss - s / r * Qrs + 2 * w * Q * Qss + 4 * Q**2
               - w * Qs**2 - 2 * s * Q * Qs)
        cfc = (eq1 / ph**2, eq2 / ph**2, eq3 / ph**2)
        R1 = eq1 + Kr * ph**2
        R3 = eq3
        einstein = ((dim - 1) * R1 + w * R3 - (dim - 1) * Kr * ph**2) / ((dim - 1) * ph**2)
    return ResidualReport(berwald=berwald, landsberg=landsberg, cfc=cfc,
                          einstein=einstein)


# ---------------------------------------------------------------------------
# one-stop report


@dataclass
class CurvatureReport:
    frame: RadialFrame
    F: float
    metric: object
    spray: SprayData
    berwald: BerwaldTensor
    landsberg: LandsbergData
    riemann: RiemannData
    flags: FlagCurvatureSample
    residual: ResidualReport
    K_from_R1: float


def curvature_report(spec: MetricSpec, frame: RadialFrame,
                     degree: int = DEFAULT_DEGREE, m_flags: int = 4,
                     K: Union[float, Callable[[float], float], None] = None,
                     rng: np.random.Generator | None = None) -> CurvatureReport:
    """Everything at one frame: tensors, scalars, flags, residuals."""
    phi = phi_jet(spec, frame, degree)
    spray = spray_pq(spec, frame, phi=phi)
    met = metric_tensor(spec, frame, phi=phi.truncated(min(4, degree)))
    berw = berwald_tensor(spray, frame)
    land = landsberg_tensor(spec, spray, frame)
    riem = riemann_tensor(spray, frame)
    K_est = riem.R1 / phi.value**2
    res = residuals(spec, spray, frame, K=K if K is not None else K_est)
    flags = flag_curvature(spec, riem, frame, m=m_flags, rng=rng, metric=met)
    return CurvatureReport(frame=frame, F=frame.u * phi.value, metric=met,
                           spray=spray, berwald=berw, landsberg=land,
                           riemann=riem, flags=flags, residual=res,
                           K_from_R1=K_est)
