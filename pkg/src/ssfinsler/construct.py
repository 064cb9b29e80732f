"""Four-step construction of non-projective constant-flag-curvature metrics.

Step 1  pick Q: with the quadratic ansatz Q = c1(r) + b(r) s^2, the radial
        curvature equation forces b = (c1' + 2 r c1^2)/(r - 2 r^3 c1).
Step 2  solve the transport equation for Theta = P - s P_s, then recover
        P = g_free(r) s + Pi with Pi - s Pi_s = Theta.  Closed forms exist
        for the two coefficient families c1 = -1/r and c1 = -2; any other Q
        goes through the method-of-characteristics solver (values only).
Step 3  the flag curvature drops out of the first curvature equation:
        R1(P, Q) = K phi^2.
Step 4  invert the definitions U = (s phi + (r^2-s^2) phi_s)/phi and
        W = (s phi_r + r phi_s)/phi to recover the metric from (P, Q):

            U  = (s + (2r^2 - s^2) P - s (r^2-s^2) P_s)
                 / (1 + s P - 2 (r^2-s^2) Q + s (r^2-s^2) Q_s)
            W  = 2 r (P + U Q)
            (ln phi)_s = (U - s)/(r^2 - s^2)
            (ln phi)_r = (W - r (ln phi)_s)/s      (limit via jets at s = 0)

        then check that the recovered metric's own spray reproduces (P, Q):
        that consistency plus the cross-derivative (integrability) check is
        what certifies existence.

Plugging the coupled system for (U, W) into the spray formulas and
eliminating the derivative terms makes the U-equation *linear* in U, which
is why the inversion above is algebraic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .expr import Const, Expr, Var, parse_expr
from .jet import Jet, divide_by_s, eval_jet
from .metric import spray_pq
from .metricspec import LogDerivativeSpec, domain_check, phi_jet
from .frame import RadialFrame, random_frame
from .quadrature import integrate

__all__ = [
    "ConstructError",
    "ThetaSolution",
    "UWData",
    "IntegrabilityResult",
    "ConstructVerdict",
    "ConstructState",
    "q_from_c1",
    "theta_solve",
    "p_from_theta",
    "uw_invert",
    "integrability_check",
    "phi_recover",
    "classify_constructed",
    "run_pipeline",
]

_R = Var("r")
_S = Var("s")


class ConstructError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


# ---------------------------------------------------------------------------
# step 1


def radial_curvature_residual(Q: Expr, r0: float, s0: float) -> float:
    """The purely radial equation every admissible Q must satisfy:
    2 Q_r / r - Q_ss - s Q_rs / r + 2 (r^2-s^2) Q Q_ss + 4 Q^2
    - (r^2-s^2) Q_s^2 - 2 s Q Q_s."""
    qj = eval_jet(Q, (r0, s0), 3)
    Qv = qj.value
    Qr = qj.deriv(1, 0)
    Qs = qj.deriv(0, 1)
    Qrs = qj.deriv(1, 1)
    Qss = qj.deriv(0, 2)
    w = r0**2 - s0**2
    return (2.0 / r0 * Qr - Qss - s0 / r0 * Qrs + 2.0 * w * Qv * Qss
            + 4.0 * Qv**2 - w * Qs**2 - 2.0 * s0 * Qv * Qs)


def q_from_c1(c1: Expr | str, r_range: tuple[float, float] = (0.5, 2.0),
              check: bool = True) -> Expr:
    """Q = c1 + (c1' + 2 r c1^2)/(r - 2 r^3 c1) * s^2.

    Verifies the quadratic-ansatz solution against the radial curvature
    equation on a sample grid, errors if the denominator vanishes on the
    working interval, and rejects the projective case Q == 0.
    """
    if isinstance(c1, str):
        c1 = parse_expr(c1, ("r",))
    c1p = c1.diff("r")
    num = c1p + 2.0 * _R * c1 * c1
    den = _R - 2.0 * _R**3 * c1
    Q = c1 + (num / den) * _S**2

    rs = np.linspace(r_range[0], r_range[1], 17)
    for rv in rs:
        dv = float(den.eval({"r": float(rv)}))
        if abs(dv) < 1e-9 * max(1.0, float(rv)):
            raise ConstructError(
                "q_from_c1", f"denominator r - 2 r^3 c1 vanishes near r = {rv:.4f}")
    qmax = max(abs(float(Q.eval({"r": float(rv), "s": 0.6 * float(rv)}))) for rv in rs)
    if qmax < 1e-14:
        raise ConstructError(
            "q_from_c1", "Q vanishes identically: the metric would be projective, "
                         "which this pipeline does not construct")
    if check:
        worst = 0.0
        for rv in rs[::2]:
            for sf in (-0.7, -0.3, 0.2, 0.5, 0.8):
                worst = max(worst, abs(radial_curvature_residual(Q, float(rv), sf * float(rv))))
        if worst > 1e-9 * max(1.0, qmax**2):
            raise ConstructError(
                "q_from_c1", f"radial curvature residual {worst:.3e} out of tolerance")
    return Q


# ---------------------------------------------------------------------------
# step 2


@dataclass
class ThetaSolution:
    """Theta = P - s P_s: closed-form when the coefficient family is one of
    the two solvable ones, otherwise a characteristics-based evaluator."""

    c: float
    expr: Expr | None
    particular: Expr | None  # Pi with Pi - s Pi_s = Theta (closed forms only)
    family: str | None
    evaluator: Callable[[float, float], float]

    @property
    def closed_form(self) -> bool:
        return self.expr is not None

    def __call__(self, r0: float, s0: float) -> float:
        return self.evaluator(r0, s0)


def _match_c1(c1: Expr, target: Callable[[float], float],
              r_range: tuple[float, float]) -> bool:
    for rv in np.linspace(r_range[0], r_range[1], 9):
        a = float(c1.eval({"r": float(rv)}))
        b = target(float(rv))
        if abs(a - b) > 1e-11 * max(1.0, abs(b)):
            return False
    return True


def _closed_theta(c1: Expr, c: float,
                  r_range: tuple[float, float]) -> tuple[Expr, Expr, str] | None:
    if _match_c1(c1, lambda rv: -1.0 / rv, r_range):
        rad = _R + 4.0 * _R**2 - 4.0 * _S**2
        theta = c * Call_sqrt(_R / rad)
        pi = c * Call_sqrt(_R * rad) / (_R * (1.0 + 4.0 * _R))
        return theta, pi, "inverse_radius"
    if _match_c1(c1, lambda rv: -2.0, r_range):
        A = 1.0 + 4.0 * _R**2
        B = A - 4.0 * _S**2
        theta = c * Call_sqrt(A / B)
        pi = c * Call_sqrt(B / A)
        return theta, pi, "constant"
    return None


def Call_sqrt(e: Expr) -> Expr:
    from .expr import Call

    return Call("sqrt", e)


def theta_solve(Q: Expr, c1: Expr | str | None = None, c: float = 1.0,
                initial_sq: Callable[[float], float] | None = None,
                r0: float = 1.0,
                r_range: tuple[float, float] = (0.5, 2.0)) -> ThetaSolution:
    """Solve the transport equation
        (1/2r) Theta_r + Theta Q - ((r^2-s^2)/s) Theta_s Q + (1/2s) Theta_s = 0
    for Theta = P - s P_s.

    Closed forms are returned for the two solvable coefficient families
    (detected from c1 numerically).  Otherwise the linear first-order PDE is
    integrated along characteristics.  In the variables (rho, sigma) =
    (r^2, s^2) these obey

        d sigma / d rho = 1 - 2 Q (rho - sigma),    d ln Theta / d rho = -Q,

    which is smooth through s = 0; traced backward from an interior point a
    characteristic may dip through the axis into sigma < 0, where the
    quadratic ansatz Q = c1(r) + b(r) s^2 continues analytically.  The
    numeric path therefore requires that ansatz, and initial data on the
    line r = r0 is supplied as a function of sigma = s^2 (even-in-s data;
    default: the constant slice Theta = c).  Values only, accuracy ~1e-8.
    """
    if isinstance(c1, str):
        c1 = parse_expr(c1, ("r",))
    if c1 is not None:
        hit = _closed_theta(c1, c, r_range)
        if hit is not None:
            theta, pi, fam = hit
            return ThetaSolution(
                c=c, expr=theta, particular=pi, family=fam,
                evaluator=lambda rv, sv: float(theta.eval({"r": rv, "s": sv})))

    if initial_sq is None:
        initial_sq = lambda sigma: c

    def q_sigma(rho: float, sigma: float) -> float:
        # Q(r, s) = c1(r) + b(r) s^2 continued to sigma = s^2 < 0
        rv = math.sqrt(rho)
        try:
            q0 = float(Q.eval({"r": rv, "s": 0.0}))
            h1 = 0.5 * rv
            beta = (float(Q.eval({"r": rv, "s": h1})) - q0) / h1**2
        except ArithmeticError as exc:
            raise ConstructError(
                "theta_solve", f"Q undefined along the characteristic at r = {rv:.4f}: "
                               f"{exc}") from exc
        return q0 + beta * sigma

    # the numeric path is only valid for the quadratic ansatz; verify
    for rv in np.linspace(r_range[0], r_range[1], 5):
        q_quad = q_sigma(rv * rv, (0.3 * rv) ** 2)
        q_true = float(Q.eval({"r": float(rv), "s": 0.3 * float(rv)}))
        if abs(q_quad - q_true) > 1e-9 * max(1.0, abs(q_true)):
            raise ConstructError(
                "theta_solve", "numeric characteristics need Q quadratic in s "
                               "(the step-1 ansatz)")

    def evaluator(rt: float, st: float, steps: int = 512) -> float:
        rho_t = rt * rt
        rho_0 = r0 * r0
        sigma = st * st
        acc = 0.0  # integral of -Q d rho from rho_t to rho_0
        h = (rho_0 - rho_t) / steps
        rho = rho_t

        def rhs(rr, sig):
            qv = q_sigma(rr, sig)
            return 1.0 - 2.0 * qv * (rr - sig), -qv

        for _ in range(steps):
            k1s, k1a = rhs(rho, sigma)
            k2s, k2a = rhs(rho + h / 2, sigma + h * k1s / 2)
            k3s, k3a = rhs(rho + h / 2, sigma + h * k2s / 2)
            k4s, k4a = rhs(rho + h, sigma + h * k3s)
            sigma += h * (k1s + 2 * k2s + 2 * k3s + k4s) / 6.0
            acc += h * (k1a + 2 * k2a + 2 * k3a + k4a) / 6.0
            rho += h
            if not (math.isfinite(sigma) and abs(sigma) < 1e6 and rho > 0.0):
                raise ConstructError(
                    "theta_solve",
                    f"the characteristic through (r, s) = ({rt:.4f}, {st:.4f}) "
                    f"escapes before reaching the initial line r = {r0:g}: the "
                    f"point lies outside that line's domain of determinacy")
        return initial_sq(sigma) * math.exp(-acc)

    return ThetaSolution(c=c, expr=None, particular=None, family=None,
                         evaluator=evaluator)


def theta_residual(theta: Expr, Q: Expr, r0: float, s0: float) -> float:
    """Residual of the transport equation for a closed-form Theta."""
    tj = eval_jet(theta, (r0, s0), 2)
    qv = float(Q.eval({"r": r0, "s": s0}))
    w = r0**2 - s0**2
    return (tj.deriv(1, 0) / (2 * r0) + tj.value * qv
            - (w / s0) * tj.deriv(0, 1) * qv + tj.deriv(0, 1) / (2 * s0))


def p_from_theta(theta: ThetaSolution, g_free: Expr | str,
                 s_anchor: float = 0.35) -> Expr | Callable[[float, float], float]:
    """P = g_free(r) s + Pi(r, s) with Pi - s Pi_s = Theta.

    Closed-form families return an expression.  The numeric branch returns a
    value evaluator built from Pi(r, s) = s (Theta(r, s0)/s0
    - int_{s0}^{s} Theta(r, t)/t^2 dt), anchored at s0 = s_anchor > 0 (the
    homogeneous ambiguity g(r) s is exactly the g_free degree of freedom).
    """
    if isinstance(g_free, str):
        g_free = parse_expr(g_free, ("r",))
    if theta.closed_form:
        return g_free * _S + theta.particular

    def evaluator(rv: float, sv: float) -> float:
        if sv <= 0:
            raise ConstructError(
                "p_from_theta", "numeric particular solution is anchored at s > 0")
        core = integrate(lambda t: theta(rv, t) / t**2, s_anchor, sv, 1e-9).value
        pi = sv * (theta(rv, s_anchor) / s_anchor - core)
        return float(g_free.eval({"r": rv})) * sv + pi

    return evaluator


# ---------------------------------------------------------------------------
# step 4 machinery


@dataclass
class UWData:
    P: Expr
    Q: Expr
    U: Expr
    W: Expr
    dlnphi_ds: Expr
    dlnphi_dr: Expr  # (W - r (ln phi)_s)/s; evaluate at s=0 through jets

    def dr_on_axis(self, r0: float, degree: int = 5) -> float:
        """(ln phi)_r at s = 0 via the series limit of (W - r D_s)/s."""
        num = self.W - _R * self.dlnphi_ds
        nj = eval_jet(num, (r0, 0.0), degree)
        return divide_by_s(nj, tol=1e-7).value

    def pair_jets(self, r0: float, s0: float, degree: int) -> tuple[Jet, Jet]:
        ds = eval_jet(self.dlnphi_ds, (r0, s0), degree)
        if abs(s0) < 1e-12:
            num = eval_jet(self.W - _R * self.dlnphi_ds, (r0, s0), degree + 1)
            dr = divide_by_s(num, tol=1e-7)
        else:
            dr = eval_jet(self.dlnphi_dr, (r0, s0), degree)
        return ds, dr


def uw_invert(P: Expr, Q: Expr) -> UWData:
    """Solve the spray relations for U, W and the metric log-derivatives.

    Substituting W = 2r(P + UQ) into the coupled (U, W) system cancels every
    U_s and W_s term, leaving a linear equation for U; no root finding is
    needed.
    """
    Ps = P.diff("s")
    Qs = Q.diff("s")
    w = _R * _R - _S * _S
    U = (_S + (2.0 * _R * _R - _S * _S) * P - _S * w * Ps) / \
        (1.0 + _S * P - 2.0 * w * Q + _S * w * Qs)
    W = 2.0 * _R * (P + U * Q)
    Ds = (U - _S) / w
    Dr = (W - _R * Ds) / _S
    return UWData(P=P, Q=Q, U=U, W=W, dlnphi_ds=Ds, dlnphi_dr=Dr)


@dataclass
class IntegrabilityResult:
    passed: bool
    max_defect: float
    scale: float
    tol: float

    def __bool__(self) -> bool:
        return self.passed


def integrability_check(uw: UWData, grid: list[tuple[float, float]],
                        tol: float = 1e-7) -> IntegrabilityResult:
    """max over the grid of |d/dr (ln phi)_s - d/ds (ln phi)_r|, scaled by
    the larger of 1 and the pair's own magnitude."""
    worst = 0.0
    scale = 1.0
    for (r0, s0) in grid:
        ds, dr = uw.pair_jets(r0, s0, degree=3)
        defect = abs(ds.deriv(1, 0) - dr.deriv(0, 1))
        worst = max(worst, defect)
        scale = max(scale, abs(ds.value), abs(dr.value),
                    abs(ds.deriv(1, 0)), abs(dr.deriv(0, 1)))
    return IntegrabilityResult(passed=worst <= tol * scale, max_defect=worst,
                               scale=scale, tol=tol)


def phi_recover(uw: UWData, r_ref: float = 1.0, phi_ref: float = 1.0,
                quad_tol: float = 1e-11) -> LogDerivativeSpec:
    """Metric spec from the recovered log-derivative pair.

    The radial normalization c0(r) = phi(r, 0) integrates the on-axis limit
    of (ln phi)_r from r_ref, anchored at phi(r_ref, 0) = phi_ref.  New radii
    chain from the nearest already-computed anchor, so grids of radii cost
    one short quadrature each.
    """
    if phi_ref <= 0:
        raise ConstructError("phi_recover", "phi_ref must be positive")
    cache: dict[float, float] = {r_ref: math.log(phi_ref)}

    def axis(t: float) -> float:
        return uw.dr_on_axis(t, degree=2)

    def c0(rv: float) -> float:
        hit = cache.get(rv)
        if hit is None:
            anchor = min(cache, key=lambda a: abs(a - rv))
            hit = cache[anchor] + integrate(axis, anchor, rv, quad_tol).value
            cache[rv] = hit
        return math.exp(hit)

    return LogDerivativeSpec(dlnphi_ds=uw.dlnphi_ds, dlnphi_dr=uw.dlnphi_dr,
                             c0=c0, branch=1, consistency_tol=None)


# ---------------------------------------------------------------------------
# step 3 + verdict


def first_equation_lhs(uw: UWData, r0: float, s0: float) -> float:
    """Left side of the flag-curvature equation: equals K phi^2."""
    pj = eval_jet(uw.P, (r0, s0), 2)
    qj = eval_jet(uw.Q, (r0, s0), 2)
    w = r0**2 - s0**2
    P, Pr, Ps = pj.value, pj.deriv(1, 0), pj.deriv(0, 1)
    Qv = qj.value
    return 2 * Qv - s0 / r0 * Pr - Ps + 2 * w * Ps * Qv + P**2 + 2 * s0 * P * Qv


@dataclass
class ConstructVerdict:
    K: float | None
    K_spread: float
    spray_deviation: float
    cfc_residual_max: float
    phi2_match: float | None  # direct phi^2 = LHS/K vs recovered, when K != 0
    passed: bool


def classify_constructed(spec: LogDerivativeSpec, uw: UWData,
                         K_hypothesis: float | None,
                         grid: list[tuple[float, float]],
                         dim: int = 3,
                         spray_tol: float = 1e-7) -> ConstructVerdict:
    """Step-4 consistency (the recovered metric's spray must reproduce the
    pipeline's P, Q) plus the flag-curvature verdict on the grid."""
    from .curvature import residuals

    rng = np.random.default_rng(12345)
    sdev = 0.0
    kvals = []
    cfc_max = 0.0
    phi2_dev = None
    for (r0, s0) in grid:
        frame = random_frame(rng, dim, r0, s0 / r0)
        sp = spray_pq(spec, frame)
        pv = float(uw.P.eval({"r": r0, "s": s0}))
        qv = float(uw.Q.eval({"r": r0, "s": s0}))
        scale = max(1.0, abs(pv), abs(qv))
        sdev = max(sdev, abs(sp.P - pv) / scale, abs(sp.Q - qv) / scale)
        ph2 = sp.phi.value ** 2
        lhs = first_equation_lhs(uw, r0, s0)
        kvals.append(lhs / ph2)
        if K_hypothesis is not None:
            rep = residuals(spec, sp, frame, K=K_hypothesis, dim=dim)
            cfc_max = max(cfc_max, rep.cfc_max)
            if K_hypothesis != 0.0:
                direct = lhs / K_hypothesis
                dev = abs(direct - ph2) / max(1e-12, abs(ph2))
                phi2_dev = dev if phi2_dev is None else max(phi2_dev, dev)
    kvals = np.asarray(kvals)
    K_est = float(np.median(kvals))
    spread = float(np.max(kvals) - np.min(kvals))
    passed = sdev <= spray_tol and (K_hypothesis is None or cfc_max <= 1e-6)
    return ConstructVerdict(K=K_est, K_spread=spread, spray_deviation=sdev,
                            cfc_residual_max=cfc_max, phi2_match=phi2_dev,
                            passed=passed)


# ---------------------------------------------------------------------------
# the pipeline


@dataclass
class ConstructState:
    c1: Expr
    Q: Expr
    theta: ThetaSolution
    g_free: Expr
    P: Expr
    uw: UWData
    integrability: IntegrabilityResult
    spec: LogDerivativeSpec | None
    verdict: ConstructVerdict | None
    c0_samples: list[tuple[float, float]] = field(default_factory=list)
    K: float | None = None


def _auto_g_free(family: str, c: float) -> Expr:
    """The free coefficient that makes the recovered pair integrable, as a
    function of the transport constant c (valid for c in {+-1, +-2})."""
    c2 = c * c
    if family == "inverse_radius":
        return parse_expr(
            f"2*(({c2!r} - 10)*r - 3) / (3*r*(2*r + 1)*(4*r + 1))", ("r",))
    if family == "constant":
        return parse_expr(f"2*({c2!r} - 4) / (3*(1 + 4*r^2))", ("r",))
    raise ConstructError(
        "p_from_theta", "g_free='auto' needs one of the closed-form families")


def _grid(cfg: dict) -> list[tuple[float, float]]:
    g = cfg.get("grid", {})
    rlo, rhi, nr = g.get("r", [0.6, 1.6, 8])
    slo, shi, ns = g.get("s_frac", [0.1, 0.7, 8])
    pts = []
    for rv in np.linspace(rlo, rhi, int(nr)):
        for sf in np.linspace(slo, shi, int(ns)):
            pts.append((float(rv), float(rv) * float(sf)))
    return pts


def run_pipeline(config: dict) -> ConstructState:
    """Execute the construction from a config dict:

        {"c1": expr, "g_free": expr | "auto", "c": float,
         "branch": "+" | "-", "K_hypothesis": float | None,
         "grid": {"r": [lo, hi, n], "s_frac": [lo, hi, n]},
         "r_ref": float, "phi_ref": float | "auto"}

    The branch sign multiplies the transport constant c.  phi_ref="auto"
    normalizes the recovered metric so the first curvature equation gives
    exactly K_hypothesis (the usual curvature normalization); flat targets
    keep phi(r_ref, 0) = 1.
    """
    c1 = parse_expr(str(config["c1"]), ("r",))
    branch = -1.0 if str(config.get("branch", "+")).startswith("-") else 1.0
    c = float(config.get("c", 1.0)) * branch
    K_hyp = config.get("K_hypothesis", None)
    K_hyp = None if K_hyp is None else float(K_hyp)
    grid = _grid(config)
    r_range = (min(p[0] for p in grid), max(p[0] for p in grid))

    Q = q_from_c1(c1, r_range=r_range)
    theta = theta_solve(Q, c1=c1, c=c, r_range=r_range)
    if not theta.closed_form:
        raise ConstructError(
            "theta_solve",
            "no closed-form transport solution for this coefficient choice; "
            "the characteristics solver provides Theta and P values only, "
            "not the full metric recovery")

    g_cfg = config.get("g_free", "auto")
    if g_cfg == "auto":
        g_free = _auto_g_free(theta.family, c)
    else:
        g_free = parse_expr(str(g_cfg), ("r",))
    P = p_from_theta(theta, g_free)

    # transport residuals certify steps 1-2
    worst = 0.0
    for (r0, s0) in grid[:: max(1, len(grid) // 25)]:
        worst = max(worst, abs(theta_residual(theta.expr, Q, r0, s0)))
    if worst > 1e-7:
        raise ConstructError("theta_solve", f"transport residual {worst:.3e}")

    uw = uw_invert(P, Q)
    integ = integrability_check(uw, grid)
    state = ConstructState(c1=c1, Q=Q, theta=theta, g_free=g_free, P=P,
                           uw=uw, integrability=integ, spec=None, verdict=None)
    if not integ:
        return state

    r_ref = float(config.get("r_ref", 1.0))
    phi_ref_cfg = config.get("phi_ref", "auto")
    if phi_ref_cfg == "auto":
        if K_hyp:
            lhs = first_equation_lhs(uw, r_ref, 0.0)
            val = lhs / K_hyp
            if val <= 0:
                raise ConstructError(
                    "classify", f"first curvature equation gives phi^2 = {val:.3e} "
                                f"at the reference radius; wrong K sign")
            phi_ref = math.sqrt(val)
        else:
            phi_ref = 1.0
    else:
        phi_ref = float(phi_ref_cfg)

    spec = phi_recover(uw, r_ref=r_ref, phi_ref=phi_ref)
    state.spec = spec
    state.c0_samples = [(rv, spec.c0_value(rv))
                        for rv in np.linspace(r_range[0], r_range[1], 9)]
    state.verdict = classify_constructed(spec, uw, K_hyp, grid)
    state.K = state.verdict.K
    return state
