"""Named metrics with admissible domains and expected classifications.

Each entry packages a MetricSpec, the sampling box on which it is strongly
convex, and the classification the verification suite must reproduce.  The
two flat metrics and the two curvature -1 metrics come in +/- branches that
differ by the sign of the odd-in-s term (equivalently s -> -s).

The log-derivative entries store d(ln phi)/ds and d(ln phi)/dr directly
rather than the integral form of phi: jets then come out exactly, and
quadrature is only needed for the value of phi itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .metricspec import (
    BerwaldFamilySpec,
    ClosedFormSpec,
    LogDerivativeSpec,
    MetricSpec,
)

__all__ = ["Expected", "CatalogEntry", "catalog_get", "catalog_ids", "CatalogError"]


class CatalogError(KeyError):
    pass


@dataclass(frozen=True)
class Expected:
    """Classification targets; None means 'not asserted'."""

    berwald: bool | None = None
    landsberg: bool | None = None
    K: float | None = None
    einstein: bool | None = None
    projective: bool | None = None


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    spec: MetricSpec
    r_range: tuple[float, float]
    s_frac_range: tuple[float, float]
    expected: Expected
    note: str
    params: dict = field(default_factory=dict)


def _branch_sign(params: dict) -> int:
    b = params.get("branch", "+")
    if b in ("+", "+1", 1, 1.0):
        return 1
    if b in ("-", "-1", -1, -1.0):
        return -1
    raise CatalogError(f"branch must be '+' or '-', got {b!r}")


def _fmt(value: float) -> str:
    # embed a possibly-negative constant into the grammar safely
    return f"({value!r})" if value < 0 else repr(float(value))


# -- entry builders ----------------------------------------------------------


def _euclidean(params: dict) -> CatalogEntry:
    return CatalogEntry(
        id="euclidean",
        spec=ClosedFormSpec.from_source("1"),
        r_range=(0.5, 2.0),
        s_frac_range=(-0.9, 0.9),
        expected=Expected(berwald=True, landsberg=True, K=0.0, einstein=True,
                          projective=True),
        note="flat reference metric, phi = 1",
        params=dict(params),
    )


def _riemannian_quadratic(params: dict) -> CatalogEntry:
    a = float(params.get("c1", 1.0))
    b = float(params.get("c2", 0.5))
    if b <= 0.0 or a < 0.0:
        raise CatalogError("riemannian_quadratic needs c2 > 0 and c1 >= 0")
    return CatalogEntry(
        id="riemannian_quadratic",
        spec=ClosedFormSpec.from_source(f"sqrt({_fmt(a)}*s^2 + 2*{_fmt(b)})"),
        r_range=(0.5, 2.0),
        s_frac_range=(-0.9, 0.9),
        expected=Expected(berwald=True, landsberg=True),
        note="quadratic norm sqrt(c1 s^2 + 2 c2) with constant coefficients",
        params={"c1": a, "c2": b},
    )


def _berwald_family(params: dict) -> CatalogEntry:
    psi = params.get("psi", "1/sqrt(t)")
    c2 = params.get("c2", "0")
    spec = BerwaldFamilySpec.from_source(psi, c2)
    return CatalogEntry(
        id="berwald_family",
        spec=spec,
        # psi profiles of the t^(-1/2) kind are positive only for s > 0
        r_range=(0.6, 1.8),
        s_frac_range=(0.1, 0.85),
        expected=Expected(berwald=True, landsberg=True),
        note="quadratic-spray family: phi = psi(s^2/(g + s^2 I)) s E(r); "
             "spray is P = -s/r^2, Q = c2 s^2/2 + 1/(2 r^2)",
        params={"psi": psi, "c2": c2},
    )


_UNICORN_DS = ("(2*{c2}*sqrt(r^2 - s^2))"
               " / (r^2 + 2*{c2}*s*sqrt(r^2 - s^2))")
_UNICORN_DR = ("(s*sqrt(r^2 - s^2)*(0 - 2*{c2}))"
               " / (r*(r^2 + 2*{c2}*s*sqrt(r^2 - s^2)))")


def _unicorn(params: dict) -> CatalogEntry:
    sg = _branch_sign(params)
    c1 = float(params.get("c1", 0.0))
    c2 = float(params.get("c2", 1.0)) * sg
    c3 = float(params.get("c3", 0.0))
    if c1 != 0.0 or c3 != 0.0:
        # cross-derivative consistency of the defining pair forces these to
        # vanish for constant coefficients; reject rather than build a
        # non-metric
        raise CatalogError(
            "unicorn_candidate with constant coefficients requires c1 = c3 = 0 "
            "(no radial normalization makes the defining pair integrable "
            "otherwise)")
    if c2 == 0.0:
        raise CatalogError("c2 = 0 degenerates to a Berwald metric")
    ds = _UNICORN_DS.format(c2=_fmt(c2))
    dr = _UNICORN_DR.format(c2=_fmt(c2))
    spec = LogDerivativeSpec.from_source(ds, dr, "1", branch=sg)
    # the pair is singular where r^2 + 2 c2 s sqrt(r^2-s^2) = 0, i.e. at
    # |s| = r/sqrt(2) when |c2| = 1; stay well inside
    cap = 0.55 if abs(c2) <= 1.0 else 0.35
    return CatalogEntry(
        id="unicorn_candidate",
        spec=spec,
        r_range=(0.6, 1.6),
        s_frac_range=(-cap, cap),
        expected=Expected(berwald=False, landsberg=True),
        note="almost-regular metric whose Landsberg curvature vanishes while "
             "the Berwald curvature does not; spray P = c2 sqrt(r^2-s^2)/r^2, "
             "Q = -c2 s sqrt(r^2-s^2)/r^4",
        params={"c1": c1, "c2": float(params.get("c2", 1.0)), "c3": c3,
                "branch": "+" if sg > 0 else "-"},
    )


_E61_DS = ("(4*{sg}*r*(r + 4*r^2 - 2*s^2) - 4*s*(1 + 2*r)*sqrt(r*(r + 4*r^2 - 4*s^2)))"
           " / ((r + 4*r^2 - 4*s^2)*(2*{sg}*r*s + (1 + 2*r)*sqrt(r*(r + 4*r^2 - 4*s^2))))")
_E61_DR = ("(2*sqrt(r*(r + 4*r^2 - 4*s^2))*(s^2 + 8*r^2*s^2 + 14*r*s^2 + 8*r^4 - 2*r^3 - r^2)"
           " - 4*{sg}*(5*r^3*s + 20*r^4*s - 12*r^2*s^3 + r*s^3))"
           " / (r*(1 + 4*r)*(r + 4*r^2 - 4*s^2)*(2*{sg}*r*s + (1 + 2*r)*sqrt(r*(r + 4*r^2 - 4*s^2))))")
_E61_C0 = "(2*r + 1)^2 / (4*r + 1)^(3/2)"


def _example_6_1(params: dict) -> CatalogEntry:
    sg = _branch_sign(params)
    spec = LogDerivativeSpec.from_source(
        _E61_DS.format(sg=_fmt(sg)), _E61_DR.format(sg=_fmt(sg)), _E61_C0, branch=sg)
    return CatalogEntry(
        id="example_6_1",
        spec=spec,
        r_range=(0.5, 2.0),
        s_frac_range=(-0.85, 0.85),
        expected=Expected(berwald=False, landsberg=False, K=0.0, einstein=True,
                          projective=False),
        note="flat metric from the inverse-radius quadratic spray "
             "(Q = -(r^2-s^2)/r^3); normalization (2r+1)^2/(4r+1)^(3/2)",
        params={"branch": "+" if sg > 0 else "-"},
    )


_E62_PHI = ("sqrt(1/(4*r + 1)"
            " + {sg}*4*sqrt(r*(r + 4*r^2 - 4*s^2))*s/(r*(2*r + 1)*(4*r + 1)^2)"
            " - 4*(4*r^2 + 3*r + 1)*s^2/(r*(2*r + 1)^2*(4*r + 1)^2))")


def _example_6_2(params: dict) -> CatalogEntry:
    sg = _branch_sign(params)
    return CatalogEntry(
        id="example_6_2",
        spec=ClosedFormSpec.from_source(_E62_PHI.format(sg=_fmt(sg))),
        r_range=(0.5, 2.0),
        s_frac_range=(-0.85, 0.85),
        expected=Expected(berwald=False, landsberg=False, K=-1.0, einstein=True,
                          projective=False),
        note="curvature -1 metric over the inverse-radius quadratic spray; "
             "non-projective (Q = -(r^2-s^2)/r^3 != 0)",
        params={"branch": "+" if sg > 0 else "-"},
    )


_E64_DS = ("4*({sg}*(1 + 4*r^2 - 2*s^2)"
           " - s*sqrt((1 + 4*r^2)*(1 + 4*r^2 - 4*s^2)))"
           " / ((1 + 4*r^2 - 4*s^2)*(sqrt((1 + 4*r^2)*(1 + 4*r^2 - 4*s^2)) + 2*{sg}*s))")
_E64_DR = ("8*r*(1 + 4*r^2 - 2*s^2)*(sqrt((1 + 4*r^2)*(1 + 4*r^2 - 4*s^2)) - 2*{sg}*s)"
           " / ((1 + 4*r^2)*(1 + 4*r^2 - 4*s^2)"
           "*(sqrt((1 + 4*r^2)*(1 + 4*r^2 - 4*s^2)) + 2*{sg}*s))")
_E64_C0 = "1 + 4*r^2"


def _example_6_4(params: dict) -> CatalogEntry:
    sg = _branch_sign(params)
    spec = LogDerivativeSpec.from_source(
        _E64_DS.format(sg=_fmt(sg)), _E64_DR.format(sg=_fmt(sg)), _E64_C0, branch=sg)
    return CatalogEntry(
        id="example_6_4",
        spec=spec,
        r_range=(0.5, 2.0),
        s_frac_range=(-0.85, 0.85),
        expected=Expected(berwald=False, landsberg=False, K=0.0, einstein=True,
                          projective=False),
        note="flat metric from the constant-coefficient quadratic spray "
             "(Q = -2 + 8 s^2/(1+4r^2)); normalization 1 + 4 r^2",
        params={"branch": "+" if sg > 0 else "-"},
    )


_E65_PHI = ("sqrt((16*r^4 + 8*r^2 - 16*r^2*s^2 + 1"
            " + {sg}*4*s*sqrt((1 + 4*r^2)*(1 + 4*r^2 - 4*s^2))) / (1 + 4*r^2)^2)")


def _example_6_5(params: dict) -> CatalogEntry:
    sg = _branch_sign(params)
    return CatalogEntry(
        id="example_6_5",
        spec=ClosedFormSpec.from_source(_E65_PHI.format(sg=_fmt(sg))),
        r_range=(0.5, 2.0),
        s_frac_range=(-0.85, 0.85),
        expected=Expected(berwald=False, landsberg=False, K=-1.0, einstein=True,
                          projective=False),
        note="curvature -1 metric over the constant-coefficient quadratic "
             "spray; non-projective (Q = -2 + 8 s^2/(1+4r^2) != 0)",
        params={"branch": "+" if sg > 0 else "-"},
    )


_BUILDERS = {
    "euclidean": _euclidean,
    "riemannian_quadratic": _riemannian_quadratic,
    "berwald_family": _berwald_family,
    "unicorn_candidate": _unicorn,
    "example_6_1": _example_6_1,
    "example_6_2": _example_6_2,
    "example_6_4": _example_6_4,
    "example_6_5": _example_6_5,
}


def catalog_ids() -> list[str]:
    return sorted(_BUILDERS)


def catalog_get(entry_id: str, params: dict | None = None) -> CatalogEntry:
    """Look up a named metric; ``params`` carries the branch sign and any
    family parameters (psi/c2 expressions, constants)."""
    builder = _BUILDERS.get(entry_id)
    if builder is None:
        raise CatalogError(
            f"unknown catalog id {entry_id!r}; known: {', '.join(catalog_ids())}")
    try:
        return builder(dict(params or {}))
    except CatalogError:
        raise
    except Exception as exc:  # bad expressions, bad constants
        raise CatalogError(f"invalid parameters for {entry_id!r}: {exc}") from exc
