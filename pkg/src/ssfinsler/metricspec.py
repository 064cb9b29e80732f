"""Metric descriptions and the evaluation of phi(r, s) in jet arithmetic.

A spherically symmetric metric F = |y| phi(|x|, <x,y>/|y|) is described by
one of four spec kinds:

  * ClosedFormSpec      -- phi given outright as an expression in (r, s).
  * BerwaldFamilySpec   -- phi = psi(s^2/(g + s^2 I)) * s * E(r), the general
                           solution of the radial transport equation behind
                           quadratic-spray metrics; g, E, I are exponential /
                           running integrals of the input coefficient c2(r).
  * LogDerivativeSpec   -- phi specified through d(ln phi)/ds and
                           d(ln phi)/dr plus the normalization c0(r) =
                           phi(r, 0); phi = c0 * exp(int_0^s ...).
  * CatalogSpec         -- a named entry with parameters.

phi_jet() returns the full truncated Taylor expansion of phi at a frame, so
a single evaluation feeds every downstream derivative (metric tensor, spray,
curvature).  phi_values() is the vectorized value-only path used by the
finite-difference oracle; its quadrature grid can be frozen so that results
are analytic functions of (r, s).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .expr import Expr, ExprDomainError, domain_margin, parse_expr
from .frame import RadialFrame
from .jet import Jet, JetDomainError, eval_jet, integrate_r
from .quadrature import batch_integral, integrate

__all__ = [
    "ClosedFormSpec",
    "BerwaldFamilySpec",
    "LogDerivativeSpec",
    "CatalogSpec",
    "MetricSpec",
    "DomainStatus",
    "DEFAULT_DEGREE",
    "phi_jet",
    "phi_value",
    "phi_values",
    "domain_check",
    "spec_to_json",
    "spec_from_json",
]

DEFAULT_DEGREE = 7
CONE_MARGIN = 1e-6


@dataclass
class ClosedFormSpec:
    phi: Expr

    @classmethod
    def from_source(cls, source: str) -> "ClosedFormSpec":
        return cls(parse_expr(source, ("r", "s")))


@dataclass
class BerwaldFamilySpec:
    """psi is an expression in t, c2 an expression in r.

    The three r-integrals start at r_base (g(r_base) = E(r_base) = 1,
    I(r_base) = 0); a different base point only reparametrizes psi and
    rescales phi, which the family absorbs.
    """

    psi: Expr
    c2: Expr
    r_base: float = 1.0
    quad_tol: float = 1e-12
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_source(cls, psi: str, c2: str, r_base: float = 1.0) -> "BerwaldFamilySpec":
        return cls(parse_expr(psi, ("t",)), parse_expr(c2, ("r",)), r_base)

    # integrand values as plain callables of r
    def _w(self, rr: float) -> float:
        return 2.0 / rr - 2.0 * rr**3 * self.c2.eval({"r": rr})

    def _e(self, rr: float) -> float:
        return 2.0 / rr - rr**3 * self.c2.eval({"r": rr})

    def _g_value(self, rr: float) -> float:
        return math.exp(integrate(self._w, self.r_base, rr, self.quad_tol).value)

    def integral_values(self, r0: float) -> tuple[float, float, float]:
        """(W_g, W_e, I) at r0: the two exponent integrals and the psi-argument
        correction integral, cached per radius."""
        hit = self._cache.get(r0)
        if hit is not None:
            return hit
        wg = integrate(self._w, self.r_base, r0, self.quad_tol).value
        we = integrate(self._e, self.r_base, r0, self.quad_tol).value
        ival = integrate(lambda t: 2.0 * t * self.c2.eval({"r": t}) * self._g_value(t),
                         self.r_base, r0, self.quad_tol).value
        self._cache[r0] = (wg, we, ival)
        return wg, we, ival


@dataclass
class LogDerivativeSpec:
    """phi through its log-derivatives; c0 is phi(r, 0) as an expression in r
    or a plain callable (the construction pipeline recovers it by quadrature).

    branch is bookkeeping: catalog generators bake the sign into the
    expressions, so evaluation never consults it.

    consistency_tol, when set, cross-checks the mixed Taylor coefficients
    coming from the two expressions against each other; an inconsistent pair
    does not define a function and is rejected.
    """

    dlnphi_ds: Expr
    dlnphi_dr: Expr
    c0: Union[Expr, Callable[[float], float]]
    branch: int = 1
    consistency_tol: float | None = 1e-5
    quad_tol: float = 1e-12

    @classmethod
    def from_source(cls, ds: str, dr: str, c0: str, branch: int = 1,
                    consistency_tol: float | None = 1e-5) -> "LogDerivativeSpec":
        return cls(parse_expr(ds, ("r", "s")), parse_expr(dr, ("r", "s")),
                   parse_expr(c0, ("r",)), branch, consistency_tol)

    def c0_value(self, r0: float) -> float:
        if isinstance(self.c0, Expr):
            return float(self.c0.eval({"r": r0}))
        return float(self.c0(r0))


@dataclass
class CatalogSpec:
    id: str
    params: dict = field(default_factory=dict)

    def resolve(self):
        from .catalog import catalog_get

        return catalog_get(self.id, self.params).spec


MetricSpec = Union[ClosedFormSpec, BerwaldFamilySpec, LogDerivativeSpec, CatalogSpec]


# ---------------------------------------------------------------------------
# jet evaluation


def _as_base(frame_or_point) -> tuple[float, float]:
    if isinstance(frame_or_point, RadialFrame):
        return frame_or_point.base
    r0, s0 = frame_or_point
    return float(r0), float(s0)


def phi_jet(spec: MetricSpec, frame_or_point, degree: int = DEFAULT_DEGREE) -> Jet:
    """The (r, s)-jet of phi at a frame (or bare (r, s) pair)."""
    base = _as_base(frame_or_point)
    if isinstance(spec, CatalogSpec):
        return phi_jet(spec.resolve(), base, degree)
    if isinstance(spec, ClosedFormSpec):
        return eval_jet(spec.phi, base, degree)
    if isinstance(spec, BerwaldFamilySpec):
        return _berwald_phi_jet(spec, base, degree)
    if isinstance(spec, LogDerivativeSpec):
        return _logderiv_phi_jet(spec, base, degree)
    raise TypeError(f"not a metric spec: {spec!r}")


def _berwald_phi_jet(spec: BerwaldFamilySpec, base: tuple[float, float],
                     degree: int) -> Jet:
    r0, s0 = base
    if r0 <= 0.0:
        raise ExprDomainError("r must be positive")
    wg0, we0, i0 = spec.integral_values(r0)
    # one extra degree: integrate_r consumes the top coefficient
    rj = Jet.variable("r", base, degree)
    sj = Jet.variable("s", base, degree)
    c2j = spec.c2.eval({"r": rj})
    if not isinstance(c2j, Jet):
        c2j = Jet.constant(float(c2j), base, degree)
    w_j = 2.0 / rj - 2.0 * rj.pow(3) * c2j
    e_j = 2.0 / rj - rj.pow(3) * c2j
    g_j = integrate_r(w_j.truncated(degree - 1), wg0).exp()
    E_j = (-integrate_r(e_j.truncated(degree - 1), we0)).exp()
    i_integrand = (2.0 * rj * c2j * g_j).truncated(degree - 1)
    I_j = integrate_r(i_integrand, i0)
    xi = sj * sj / (g_j + sj * sj * I_j)
    psi_val = spec.psi.eval({"t": xi})
    if not isinstance(psi_val, Jet):
        psi_val = Jet.constant(float(psi_val), base, degree)
    return psi_val * sj * E_j


def _logderiv_phi_jet(spec: LogDerivativeSpec, base: tuple[float, float],
                      degree: int) -> Jet:
    r0, s0 = base
    ds_jet = eval_jet(spec.dlnphi_ds, base, degree)
    dr_jet = eval_jet(spec.dlnphi_dr, base, degree)
    c0v = spec.c0_value(r0)
    if not (c0v > 0.0 and math.isfinite(c0v)):
        raise ExprDomainError("normalization phi(r,0) must be positive")
    sval = integrate(lambda t: float(spec.dlnphi_ds.eval({"r": r0, "s": t})),
                     0.0, s0, spec.quad_tol).value
    L = np.zeros((degree + 1, degree + 1))
    L[0, 0] = math.log(c0v) + sval
    for j in range(1, degree + 1):
        L[0, j] = ds_jet.coeffs[0, j - 1] / j
    for i in range(1, degree + 1):
        for j in range(0, degree + 1 - i):
            L[i, j] = dr_jet.coeffs[i - 1, j] / i
    if spec.consistency_tol is not None:
        scale = max(1.0, float(np.max(np.abs(L))))
        worst = 0.0
        for i in range(1, degree + 1):
            for j in range(1, degree + 1 - i):
                alt = ds_jet.coeffs[i, j - 1] / j
                worst = max(worst, abs(alt - L[i, j]))
        if worst > spec.consistency_tol * scale:
            raise ExprDomainError(
                f"log-derivative pair is inconsistent: mixed-coefficient defect "
                f"{worst:.3e} exceeds {spec.consistency_tol:.1e} * {scale:.3e}")
    return Jet(base, degree, L).exp()


def phi_value(spec: MetricSpec, frame_or_point) -> float:
    return phi_jet(spec, frame_or_point, degree=0).value


# ---------------------------------------------------------------------------
# vectorized value path


def phi_values(spec: MetricSpec, r: np.ndarray, s: np.ndarray,
               panels: int | None = None) -> np.ndarray:
    """phi at many (r, s) pairs.  ``panels``, when given, freezes the
    quadrature grids so the map is analytic in its inputs."""
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    if isinstance(spec, CatalogSpec):
        return phi_values(spec.resolve(), r, s, panels)
    if isinstance(spec, ClosedFormSpec):
        return np.asarray(spec.phi.eval({"r": r, "s": s}), dtype=float)
    if isinstance(spec, LogDerivativeSpec):
        rr = r[..., None]
        lns = batch_integral(lambda sigma: spec.dlnphi_ds.eval({"r": rr, "s": sigma}),
                             s, panels=panels)
        if isinstance(spec.c0, Expr):
            c0v = np.asarray(spec.c0.eval({"r": r}), dtype=float)
        else:
            c0v = np.array([spec.c0(t) for t in np.atleast_1d(r)])
            c0v = c0v.reshape(r.shape)
        return c0v * np.exp(lns)
    if isinstance(spec, BerwaldFamilySpec):
        return _berwald_phi_values(spec, r, s, panels)
    raise TypeError(f"not a metric spec: {spec!r}")


def _berwald_phi_values(spec: BerwaldFamilySpec, r: np.ndarray, s: np.ndarray,
                        panels: int | None) -> np.ndarray:
    rb = spec.r_base

    def wfun(rho):
        return 2.0 / rho - 2.0 * rho**3 * spec.c2.eval({"r": rho})

    def efun(rho):
        return 2.0 / rho - rho**3 * spec.c2.eval({"r": rho})

    def offset(fun, upper):
        # integral from r_base to upper, batched over the shifted variable
        return batch_integral(lambda t: fun(rb + t), upper - rb, panels=panels)

    wg = offset(wfun, r)
    we = offset(efun, r)

    def i_integrand(t):
        rho = rb + t
        inner = batch_integral(lambda tt: wfun(rb + tt),
                               (rho - rb).reshape(-1), panels=panels or 256)
        g_inner = np.exp(inner).reshape(rho.shape)
        return 2.0 * rho * spec.c2.eval({"r": rho}) * g_inner

    ival = batch_integral(i_integrand, r - rb, panels=panels)
    g = np.exp(wg)
    E = np.exp(-we)
    xi = s**2 / (g + s**2 * ival)
    return np.asarray(spec.psi.eval({"t": xi}), dtype=float) * s * E


# ---------------------------------------------------------------------------
# admissibility


@dataclass(frozen=True)
class DomainStatus:
    valid: bool
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.valid


def _expr_margin(e: Expr, r0: float, s0: float) -> float:
    return domain_margin(e, {"r": r0, "s": s0})


def domain_check(spec: MetricSpec, frame: RadialFrame,
                 margin: float = CONE_MARGIN) -> DomainStatus:
    """Total admissibility check: positive norms, the open cone |s| < r with
    a relative margin, every radicand/denominator bounded away from zero
    (including along the quadrature paths of integral-defined specs), and a
    positive phi."""
    if frame.u <= 0.0 or frame.r <= 0.0:
        return DomainStatus(False, "zero base point or tangent vector")
    r0, s0 = frame.r, frame.s
    if abs(s0) > r0 * (1.0 - margin):
        return DomainStatus(False, "frame on the singular cone boundary |s| = r")
    if isinstance(spec, CatalogSpec):
        return domain_check(spec.resolve(), frame, margin)
    try:
        if isinstance(spec, ClosedFormSpec):
            if _expr_margin(spec.phi, r0, s0) <= margin:
                return DomainStatus(False, "radicand or denominator within margin of zero")
        elif isinstance(spec, LogDerivativeSpec):
            for sig in np.linspace(0.0, s0, 17):
                m = min(_expr_margin(spec.dlnphi_ds, r0, float(sig)),
                        _expr_margin(spec.dlnphi_dr, r0, float(sig)))
                if m <= margin:
                    return DomainStatus(
                        False, "radicand or denominator within margin of zero "
                               "on the s-integration path")
        elif isinstance(spec, BerwaldFamilySpec):
            for rho in np.linspace(spec.r_base, r0, 17):
                if abs(rho) < margin:
                    return DomainStatus(False, "r-integration path crosses the origin")
                if domain_margin(spec.c2, {"r": float(rho)}) <= margin:
                    return DomainStatus(False, "c2 singular on the r-integration path")
        val = phi_value(spec, frame)
    except (ExprDomainError, JetDomainError) as exc:
        return DomainStatus(False, str(exc))
    if not (val > 0.0 and math.isfinite(val)):
        return DomainStatus(False, "phi is not positive at the frame")
    return DomainStatus(True, None)


# ---------------------------------------------------------------------------
# JSON wire format


def spec_to_json(spec: MetricSpec) -> dict:
    if isinstance(spec, ClosedFormSpec):
        return {"kind": "expr", "phi": spec.phi.to_source()}
    if isinstance(spec, BerwaldFamilySpec):
        return {"kind": "berwald_family", "psi": spec.psi.to_source(),
                "c2": spec.c2.to_source()}
    if isinstance(spec, LogDerivativeSpec):
        if not isinstance(spec.c0, Expr):
            raise ValueError("callable-normalized specs have no JSON form")
        return {"kind": "log_derivative",
                "dlnphi_ds": spec.dlnphi_ds.to_source(),
                "dlnphi_dr": spec.dlnphi_dr.to_source(),
                "c0": spec.c0.to_source(),
                "branch": "+" if spec.branch >= 0 else "-"}
    if isinstance(spec, CatalogSpec):
        return {"kind": "catalog", "id": spec.id, "params": dict(spec.params)}
    raise TypeError(f"not a metric spec: {spec!r}")


def spec_from_json(obj: Union[str, dict]) -> MetricSpec:
    if isinstance(obj, str):
        obj = json.loads(obj)
    kind = obj.get("kind")
    if kind == "expr":
        return ClosedFormSpec.from_source(obj["phi"])
    if kind == "berwald_family":
        return BerwaldFamilySpec.from_source(obj["psi"], obj["c2"])
    if kind == "log_derivative":
        branch = 1 if obj.get("branch", "+") in ("+", 1, "+1") else -1
        return LogDerivativeSpec.from_source(
            obj["dlnphi_ds"], obj["dlnphi_dr"], obj["c0"], branch)
    if kind == "catalog":
        return CatalogSpec(obj["id"], obj.get("params", {}))
    raise ValueError(f"unknown spec kind {kind!r}")
