"""Numerical toolkit for spherically symmetric Finsler metrics on R^n.

Evaluates F = |y| phi(|x|, <x,y>/|y|) and its metric tensor, geodesic spray,
and Berwald / Landsberg / Riemann curvatures through truncated Taylor-jet
arithmetic; classifies metrics by the residuals of the characterizing PDE
systems; ships a catalog of named metrics; runs the four-step construction
of non-projective constant-flag-curvature metrics; and cross-validates all
closed forms against a finite-difference oracle.
"""

from .expr import Expr, ExprDomainError, ExprError, parse_expr
from .frame import RadialFrame, frame_from_ambient, random_frame
from .jet import Jet, JetDomainError, eval_jet
from .metric import (
    DegenerateMetricError,
    MetricTensorData,
    SprayData,
    finsler_value,
    metric_tensor,
    spray_pq,
)
from .metricspec import (
    BerwaldFamilySpec,
    CatalogSpec,
    ClosedFormSpec,
    DomainStatus,
    LogDerivativeSpec,
    domain_check,
    phi_jet,
    phi_value,
    phi_values,
    spec_from_json,
    spec_to_json,
)
from .quadrature import QuadratureError, QuadratureResult, integrate

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
