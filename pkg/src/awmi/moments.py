"""Geometric moments, central moments and differential moments (DMs).

All integrals are discretized as unit-weight sums over pixel centers,
matching the brute-force oracle exactly so that expansion-vs-oracle tests
can demand near-machine agreement.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffops import DerivativeStack
from .raster import Raster


class ZeroMassError(ValueError):
    """Raised when the centroid of an all-zero raster is requested."""


def geometric_moment(raster: Raster, p: int, q: int) -> float:
    """Raw moment: sum of x^p y^q f over pixel centers."""
    if p < 0 or q < 0:
        raise ValueError("moment orders must be nonnegative")
    xs, ys = raster.coords()
    return float(np.sum(xs ** p * ys ** q * raster.pixels))


def centroid(raster: Raster) -> tuple[float, float]:
    m00 = raster.mass()
    if m00 <= 0.0:
        raise ZeroMassError("centroid undefined for zero-mass raster")
    return (geometric_moment(raster, 1, 0) / m00,
            geometric_moment(raster, 0, 1) / m00)


def central_moment(raster: Raster, p: int, q: int,
                   center: tuple[float, float] | None = None) -> float:
    """Moment about the intensity centroid."""
    if p < 0 or q < 0:
        raise ValueError("moment orders must be nonnegative")
    if center is None:
        center = centroid(raster)
    xs, ys = raster.coords()
    return float(np.sum((xs - center[0]) ** p * (ys - center[1]) ** q * raster.pixels))


class MomentTable:
    """Cached central geometric moments of one raster."""

    def __init__(self, raster: Raster):
        self.raster = raster
        self.m00 = raster.mass()
        if self.m00 <= 0.0:
            raise ZeroMassError("moment table requires positive image mass")
        self.centroid = centroid(raster)
        self._xc = None
        self._cache: dict[tuple[int, int], float] = {}

    def _centered(self):
        if self._xc is None:
            xs, ys = self.raster.coords()
            self._xc = xs - self.centroid[0]
            self._yc = ys - self.centroid[1]
        return self._xc, self._yc

    def u(self, p: int, q: int) -> float:
        key = (p, q)
        if key not in self._cache:
            if p < 0 or q < 0:
                raise ValueError("moment orders must be nonnegative")
            xc, yc = self._centered()
            self._cache[key] = float(np.sum(xc ** p * yc ** q * self.raster.pixels))
        return self._cache[key]


@dataclass(frozen=True, order=True)
class DMKey:
    """Index of one differential moment.

    p, q are coordinate powers; m, n are powers of the first derivatives
    fx, fy; r, s, t are powers of the second derivatives fxx, fyy, fxy.
    First-order DMs have r = s = t = 0.
    """

    p: int
    q: int
    m: int = 0
    n: int = 0
    r: int = 0
    s: int = 0
    t: int = 0

    def __post_init__(self):
        if min(self.p, self.q, self.m, self.n, self.r, self.s, self.t) < 0:
            raise ValueError("DM indices must be nonnegative")

    @property
    def is_first_order(self) -> bool:
        return self.r == 0 and self.s == 0 and self.t == 0


class DMTable:
    """Cached differential moments of one raster and its derivative stack."""

    def __init__(self, raster: Raster, stack: DerivativeStack):
        if stack.shape != raster.pixels.shape:
            raise ValueError("derivative stack does not match raster dimensions")
        self.raster = raster
        self.stack = stack
        self.m00 = raster.mass()
        if self.m00 <= 0.0:
            raise ZeroMassError("DM table requires positive image mass")
        self.centroid = centroid(raster)
        xs, ys = raster.coords()
        self._xc = xs - self.centroid[0]
        self._yc = ys - self.centroid[1]
        self._cache: dict[DMKey, float] = {}

    def value(self, key: DMKey) -> float:
        if key not in self._cache:
            st = self.stack
            term = self._xc ** key.p * self._yc ** key.q * self.raster.pixels
            for power, fld in ((key.m, st.fx), (key.n, st.fy), (key.r, st.fxx),
                               (key.s, st.fyy), (key.t, st.fxy)):
                if power:
                    term = term * fld ** power
            self._cache[key] = float(np.sum(term))
        return self._cache[key]


def dm_first(raster: Raster, stack: DerivativeStack, key: DMKey) -> float:
    """First-order DM: sum of xc^p yc^q fx^m fy^n f."""
    if not key.is_first_order:
        raise ValueError("dm_first requires r = s = t = 0")
    return DMTable(raster, stack).value(key)


def dm_second(raster: Raster, stack: DerivativeStack, key: DMKey) -> float:
    """Second-order DM, including fxx^r fyy^s fxy^t factors."""
    return DMTable(raster, stack).value(key)
