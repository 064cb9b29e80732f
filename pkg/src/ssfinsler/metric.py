"""Metric tensor, its inverse, and the geodesic spray coefficients.

With rho = phi (phi - s phi_s) and its companions, the metric tensor of
F = u phi(r, s) is

    g_ij = rho d_ij + rho0 x_i x_j + rho1 (x_i y_j + x_j y_i)/u
           + rho2 y_i y_j / u^2,

its inverse has the rank-two-corrected closed form below, and the spray is
G^i = u P y^i + u^2 Q x^i with

    Q = (-phi_r + s phi_rs + r phi_ss) / (2r (phi - s phi_s + (r^2-s^2) phi_ss))
    P = -(s phi + (r^2-s^2) phi_s) Q / phi + (s phi_r + r phi_s) / (2 r phi).

P and Q are assembled in jet arithmetic from the phi jet, so their own
(r, s)-derivatives fall out alongside the values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .frame import RadialFrame
from .jet import Jet
from .metricspec import DEFAULT_DEGREE, MetricSpec, phi_jet

__all__ = [
    "MetricTensorData",
    "SprayData",
    "DegenerateMetricError",
    "metric_tensor",
    "spray_pq",
    "finsler_value",
]

# |rho2| below this times |rho| counts as the quadratic (Riemannian-type)
# degeneracy where eps = rho1/rho2 is meaningless
RHO2_DEGENERACY = 1e-12


class DegenerateMetricError(ArithmeticError):
    pass


@dataclass
class MetricTensorData:
    rho: float
    rho0: float
    rho1: float
    rho2: float
    g: np.ndarray
    g_inv: np.ndarray
    analytic_ok: bool
    # inverse-formula intermediates; None in the degenerate rho2 ~ 0 case
    eps: float | None = None
    delta: float | None = None
    mu: float | None = None
    tau: float | None = None
    lam: float | None = None
    Y2: float | None = None
    eta: float | None = None
    analytic_inverse: np.ndarray | None = field(default=None, repr=False)
    inverse_deviation: float = 0.0


def metric_tensor(spec: MetricSpec, frame: RadialFrame,
                  degree: int = 4, phi: Jet | None = None) -> MetricTensorData:
    """Assemble g and its inverse at a frame.

    The analytic inverse is used whenever rho2 is non-degenerate and is
    always cross-checked against direct matrix inversion; on degeneracy the
    direct inverse is returned and the intermediate fields stay None.
    """
    if phi is None:
        phi = phi_jet(spec, frame, degree)
    r, s, u = frame.r, frame.s, frame.u
    ph = phi.value
    ph_s = phi.deriv(0, 1)
    ph_ss = phi.deriv(0, 2)
    rho = ph * (ph - s * ph_s)
    rho0 = ph_s**2 + ph * ph_ss
    rho1 = (ph - s * ph_s) * ph_s - s * ph * ph_ss
    rho2 = s**2 * ph * ph_ss - s * (ph - s * ph_s) * ph_s

    x = frame.x
    yh = frame.y / u
    n = frame.n
    g = (rho * np.eye(n) + rho0 * np.outer(x, x)
         + rho1 * (np.outer(x, yh) + np.outer(yh, x))
         + rho2 * np.outer(yh, yh))
    g = 0.5 * (g + g.T)

    try:
        direct = np.linalg.inv(g)
    except np.linalg.LinAlgError as exc:
        raise DegenerateMetricError(f"metric tensor is singular: {exc}") from exc
    direct = 0.5 * (direct + direct.T)

    data = MetricTensorData(rho=rho, rho0=rho0, rho1=rho1, rho2=rho2,
                            g=g, g_inv=direct, analytic_ok=False)
    if abs(rho2) <= RHO2_DEGENERACY * max(abs(rho), 1e-300):
        return data

    eps = rho1 / rho2
    delta = (rho0 - eps**2 * rho2) / rho
    mu = rho2 / rho
    tau = delta / (1.0 + delta * r**2)
    lam = (eps - delta * s) / (1.0 + delta * r**2)
    Y2 = 1.0 + (lam + eps) * s + lam * eps * r**2
    eta = mu / (1.0 + Y2 * mu)
    Y = yh + lam * x
    analytic = (np.eye(n) - tau * np.outer(x, x) - eta * np.outer(Y, Y)) / rho
    deviation = float(np.max(np.abs(analytic - direct))) / max(1.0, float(np.max(np.abs(direct))))

    data.eps, data.delta, data.mu = eps, delta, mu
    data.tau, data.lam, data.Y2, data.eta = tau, lam, Y2, eta
    data.analytic_inverse = analytic
    data.inverse_deviation = deviation
    data.analytic_ok = deviation < 1e-8
    if data.analytic_ok:
        data.g_inv = analytic
    return data


@dataclass
class SprayData:
    frame: RadialFrame
    phi: Jet
    P_jet: Jet
    Q_jet: Jet
    G: np.ndarray

    @property
    def P(self) -> float:
        return self.P_jet.value

    @property
    def Q(self) -> float:
        return self.Q_jet.value

    def p(self, i: int, j: int) -> float:
        """Partial derivative of P: i in r, j in s."""
        return self.P_jet.deriv(i, j)

    def q(self, i: int, j: int) -> float:
        return self.Q_jet.deriv(i, j)


def spray_pq(spec: MetricSpec, frame: RadialFrame,
             degree: int = DEFAULT_DEGREE, phi: Jet | None = None) -> SprayData:
    """P, Q and their jets; the assembled spray vector G^i = u P y^i + u^2 Q x^i."""
    if phi is None:
        phi = phi_jet(spec, frame, degree)
    base = phi.base
    d = phi.degree
    rj = Jet.variable("r", base, d)
    sj = Jet.variable("s", base, d)
    phr = phi.dr()
    phs = phi.ds()
    phrs = phr.ds()
    phss = phs.ds()
    w = rj * rj - sj * sj
    den = phi - sj * phs + w * phss
    if abs(den.value) < 1e-14 * max(1.0, abs(phi.value)):
        raise DegenerateMetricError(
            "strong convexity fails: phi - s phi_s + (r^2 - s^2) phi_ss vanishes")
    Q = (-phr + sj * phrs + rj * phss) / (2.0 * rj * den)
    P = -(sj * phi + w * phs) / phi * Q + (sj * phr + rj * phs) / (2.0 * rj * phi)
    u = frame.u
    G = u * P.value * frame.y + u**2 * Q.value * frame.x
    return SprayData(frame=frame, phi=phi, P_jet=P, Q_jet=Q, G=G)


def finsler_value(spec: MetricSpec, frame: RadialFrame) -> float:
    """F(x, y) = |y| phi(r, s)."""
    return frame.u * phi_jet(spec, frame, degree=0).value
