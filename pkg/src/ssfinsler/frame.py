"""Reduction of ambient (x, y) pairs to the radial coordinates (r, u, v, s)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["RadialFrame", "frame_from_ambient", "random_frame"]


@dataclass(frozen=True)
class RadialFrame:
    """A base point x and tangent vector y together with r=|x|, u=|y|,
    v=<x,y>, s=v/u.  Both vectors are nonzero and |s| <= r by Cauchy-Schwarz.
    """

    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    r: float
    u: float
    v: float
    s: float

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def base(self) -> tuple[float, float]:
        """(r, s): the base point for jet evaluations."""
        return (self.r, self.s)


def frame_from_ambient(x, y) -> RadialFrame:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be equal-length vectors")
    if x.shape[0] < 2:
        raise ValueError("dimension must be at least 2")
    r = float(np.linalg.norm(x))
    u = float(np.linalg.norm(y))
    if r == 0.0:
        raise ValueError("x must be nonzero (the origin is excluded)")
    if u == 0.0:
        raise ValueError("y must be nonzero (the zero section is excluded)")
    v = float(x @ y)
    s = v / u
    # clamp round-off overshoot of Cauchy-Schwarz
    if abs(s) > r:
        s = r if s > 0 else -r
    x_c = x.copy()
    y_c = y.copy()
    x_c.flags.writeable = False
    y_c.flags.writeable = False
    return RadialFrame(x=x_c, y=y_c, r=r, u=u, v=v, s=s)


def random_frame(rng: np.random.Generator, dim: int, r: float,
                 s_frac: float) -> RadialFrame:
    """A frame with |x| = r and <x,y>/|y| = s_frac * r, |y| = 1, random
    orientation.  s_frac in (-1, 1)."""
    xd = rng.normal(size=dim)
    xd /= np.linalg.norm(xd)
    perp = rng.normal(size=dim)
    perp -= (perp @ xd) * xd
    norm = np.linalg.norm(perp)
    while norm < 1e-12:
        perp = rng.normal(size=dim)
        perp -= (perp @ xd) * xd
        norm = np.linalg.norm(perp)
    perp /= norm
    y = s_frac * xd + np.sqrt(max(0.0, 1.0 - s_frac**2)) * perp
    return frame_from_ambient(r * xd, y)
