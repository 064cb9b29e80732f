"""Truncated bivariate Taylor jets: the derivative carrier of the toolkit.

A Jet holds the Taylor coefficients of a scalar function of (r, s) about a
base point, up to a total degree D:

    coeffs[i, j] = d^{i+j} f / dr^i ds^j / (i! j!),   i + j <= D.

All arithmetic is exact truncation: the result's coefficients are the true
Taylor coefficients of the composite function through degree D.  sqrt, exp,
ln, and fractional powers go through the Maclaurin series of the outer
function applied to w = f/f0 - 1, which has zero constant term, so the
truncated Horner sum is again exact.

Jets are immutable after construction and all operations are pure.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable

import numpy as np

from .expr import Expr

__all__ = ["Jet", "JetDomainError", "eval_jet", "integrate_r", "divide_by_s"]


class JetDomainError(ArithmeticError):
    """sqrt/ln/division demanded an invalid constant term."""


def _mask(degree: int) -> np.ndarray:
    i = np.arange(degree + 1)
    return (i[:, None] + i[None, :]) <= degree


class Jet:
    __slots__ = ("base", "degree", "coeffs")

    def __init__(self, base: tuple[float, float], degree: int, coeffs: np.ndarray):
        self.base = (float(base[0]), float(base[1]))
        self.degree = int(degree)
        c = np.asarray(coeffs, dtype=float)
        if c.shape != (degree + 1, degree + 1):
            raise ValueError("coefficient array shape mismatch")
        c = np.where(_mask(degree), c, 0.0)
        c.flags.writeable = False
        self.coeffs = c

    # the duck-typing marker expr.py dispatches on
    @property
    def jet_coeffs(self) -> np.ndarray:
        return self.coeffs

    # -- constructors ------------------------------------------------------

    @classmethod
    def constant(cls, value: float, base: tuple[float, float], degree: int) -> "Jet":
        c = np.zeros((degree + 1, degree + 1))
        c[0, 0] = value
        return cls(base, degree, c)

    @classmethod
    def variable(cls, which: str, base: tuple[float, float], degree: int) -> "Jet":
        """The coordinate function 'r' or 's' as a jet."""
        c = np.zeros((degree + 1, degree + 1))
        if which == "r":
            c[0, 0] = base[0]
            if degree >= 1:
                c[1, 0] = 1.0
        elif which == "s":
            c[0, 0] = base[1]
            if degree >= 1:
                c[0, 1] = 1.0
        else:
            raise ValueError("variable must be 'r' or 's'")
        return cls(base, degree, c)

    # -- basic queries -----------------------------------------------------

    @property
    def value(self) -> float:
        return float(self.coeffs[0, 0])

    @property
    def num_coefficients(self) -> int:
        return (self.degree + 1) * (self.degree + 2) // 2

    def deriv(self, i: int, j: int) -> float:
        """The partial derivative d^{i+j} f / dr^i ds^j at the base point."""
        if i + j > self.degree:
            raise JetDomainError(
                f"derivative order ({i},{j}) exceeds jet degree {self.degree}")
        return float(self.coeffs[i, j]) * math.factorial(i) * math.factorial(j)

    def truncated(self, degree: int) -> "Jet":
        if degree > self.degree:
            raise ValueError("cannot extend a jet")
        return Jet(self.base, degree, self.coeffs[: degree + 1, : degree + 1])

    def dr(self) -> "Jet":
        """Jet of df/dr (one degree lower)."""
        d = self.degree - 1
        if d < 0:
            raise JetDomainError("jet too shallow to differentiate")
        i = np.arange(1, d + 2)
        c = self.coeffs[1:, : d + 1] * i[:, None]
        return Jet(self.base, d, c)

    def ds(self) -> "Jet":
        d = self.degree - 1
        if d < 0:
            raise JetDomainError("jet too shallow to differentiate")
        j = np.arange(1, d + 2)
        c = self.coeffs[: d + 1, 1:] * j[None, :]
        return Jet(self.base, d, c)

    # -- arithmetic --------------------------------------------------------

    def _coerce(self, other) -> "Jet | None":
        if isinstance(other, Jet):
            if other.base != self.base:
                raise ValueError("jets based at different points")
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Jet.constant(float(other), self.base, self.degree)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        d = min(self.degree, o.degree)
        return Jet(self.base, d,
                   self.coeffs[: d + 1, : d + 1] + o.coeffs[: d + 1, : d + 1])

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.base, self.degree, -self.coeffs)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        d = min(self.degree, o.degree)
        a = self.coeffs
        b = o.coeffs
        out = np.zeros((d + 1, d + 1))
        for i in range(d + 1):
            row = a[i]
            for j in range(d + 1 - i):
                c = row[j]
                if c != 0.0:
                    ni = d + 1 - i
                    nj = d + 1 - j
                    out[i:, j:] += c * b[:ni, :nj]
        return Jet(self.base, d, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self * o.reciprocal()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o * self.reciprocal()

    def __pow__(self, exponent):
        if isinstance(exponent, (int, np.integer)):
            return self.pow(Fraction(int(exponent)))
        if isinstance(exponent, Fraction):
            return self.pow(exponent)
        return NotImplemented

    # -- series compositions -------------------------------------------------

    def _series(self, series: Callable[[int], float], scale: float) -> "Jet":
        """scale * sum_k series(k) * w^k with w = self - value (nilpotent)."""
        d = self.degree
        w = self - self.value
        acc = Jet.constant(series(d), self.base, d)
        for k in range(d - 1, -1, -1):
            acc = acc * w + series(k)
        return acc * scale

    def reciprocal(self) -> "Jet":
        a0 = self.value
        if a0 == 0.0:
            raise JetDomainError("division by a jet with zero constant term")
        w = self * (1.0 / a0) - 1.0
        acc = Jet.constant((-1.0) ** self.degree, self.base, self.degree)
        for k in range(self.degree - 1, -1, -1):
            acc = acc * w + (-1.0) ** k
        return acc * (1.0 / a0)

    def sqrt(self) -> "Jet":
        return self.pow(Fraction(1, 2))

    def exp(self) -> "Jet":
        a0 = self.value
        d = self.degree
        w = self - a0
        acc = Jet.constant(1.0 / math.factorial(d), self.base, d)
        for k in range(d - 1, -1, -1):
            acc = acc * w + 1.0 / math.factorial(k)
        return acc * math.exp(a0)

    def ln(self) -> "Jet":
        a0 = self.value
        if a0 <= 0.0:
            raise JetDomainError("ln of a jet with non-positive constant term")
        w = self * (1.0 / a0) - 1.0
        d = self.degree
        acc = Jet.constant(0.0 if d == 0 else (-1.0) ** (d + 1) / d, self.base, d)
        for k in range(d - 1, 0, -1):
            acc = acc * w + (-1.0) ** (k + 1) / k
        acc = acc * w  # the series has no constant term
        return acc + math.log(a0)

    def pow(self, q: Fraction) -> "Jet":
        if q.denominator == 1:
            n = q.numerator
            if n == 0:
                return Jet.constant(1.0, self.base, self.degree)
            if n < 0:
                return self.reciprocal().pow(Fraction(-n))
            # repeated squaring keeps zero constant terms legal (e.g. s^2)
            result = None
            square = self
            m = n
            while m:
                if m & 1:
                    result = square if result is None else result * square
                m >>= 1
                if m:
                    square = square * square
            return result
        a0 = self.value
        if a0 <= 0.0:
            raise JetDomainError(
                "fractional power of a jet with non-positive constant term")
        alpha = float(q)

        def binom(k: int) -> float:
            out = 1.0
            for t in range(k):
                out *= (alpha - t) / (t + 1)
            return out

        w = self * (1.0 / a0) - 1.0
        d = self.degree
        acc = Jet.constant(binom(d), self.base, d)
        for k in range(d - 1, -1, -1):
            acc = acc * w + binom(k)
        return acc * (a0 ** alpha)


# ---------------------------------------------------------------------------


def eval_jet(e: Expr, base: tuple[float, float], degree: int,
             symbols: tuple[str, str] = ("r", "s")) -> Jet:
    """Evaluate an expression in jet arithmetic about ``base``.

    Every partial derivative of ``e`` through total order ``degree`` comes out
    of this single evaluation, exact up to round-off.
    """
    env = {
        symbols[0]: Jet.variable("r", base, degree),
        symbols[1]: Jet.variable("s", base, degree),
    }
    out = e.eval(env)
    if not isinstance(out, Jet):
        out = Jet.constant(float(out), base, degree)
    return out


def integrate_r(h: Jet, value: float) -> Jet:
    """Jet of an r-antiderivative of ``h`` whose value at the base is ``value``.

    Only meaningful for s-independent jets; the s-columns are required to
    vanish and the result's mixed coefficients are zero.
    """
    d = h.degree + 1
    if h.degree >= 1 and np.max(np.abs(h.coeffs[:, 1:])) > 0.0:
        raise ValueError("integrate_r needs an s-independent jet")
    c = np.zeros((d + 1, d + 1))
    c[0, 0] = value
    for i in range(1, d + 1):
        c[i, 0] = h.coeffs[i - 1, 0] / i
    return Jet(h.base, d, c)


def divide_by_s(num: Jet, tol: float = 1e-8) -> Jet:
    """num / (s - s0) for a jet with a removable zero along s = s0.

    Requires the pure-r column of ``num`` to vanish (relative to the largest
    coefficient); the quotient loses one degree.
    """
    scale = max(1.0, float(np.max(np.abs(num.coeffs))))
    resid = float(np.max(np.abs(num.coeffs[:, 0])))
    if resid > tol * scale:
        raise JetDomainError(
            f"jet is not divisible by s: constant column {resid:.3e} (scale {scale:.3e})")
    d = num.degree - 1
    return Jet(num.base, d, num.coeffs[: d + 1, 1: d + 2])
