"""Projectable sets: balls, boxes, {0}, finite sets, second-order cones and products.

Every set exposes ``project``, ``distance`` and ``squared_distance``; the
module-level functions of the same names dispatch to them. Sets are immutable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, UnsupportedSetForDefaultY

#: Bound used for default multiplier boxes.
DEFAULT_Y_BOUND = 1e12


class ConstraintSet:
    """Base class. ``dim`` is ``None`` for sets that adapt to any dimension."""

    dim: Optional[int] = None
    convex: bool = True

    def project(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def squared_distance(self, x: np.ndarray) -> float:
        x = self._check(x)
        d = x - self.project(x)
        return float(d @ d)

    def distance(self, x: np.ndarray) -> float:
        return math.sqrt(self.squared_distance(x))

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        return self.distance(x) <= tol

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise DimensionMismatch(f"expected a 1-D vector, got shape {x.shape}")
        if self.dim is not None and x.shape[0] != self.dim:
            raise DimensionMismatch(
                f"{type(self).__name__} has dimension {self.dim}, got vector of length {x.shape[0]}")
        return x


@dataclass(frozen=True, eq=False)
class WholeSpace(ConstraintSet):
    """All of R^n; ``dim`` may be left open."""

    dim: Optional[int] = None

    def project(self, x):
        return self._check(x).copy()

    def squared_distance(self, x):
        self._check(x)
        return 0.0


@dataclass(frozen=True, eq=False)
class Zero(ConstraintSet):
    """The singleton ``{0}``; ``dim`` may be left open."""

    dim: Optional[int] = None

    def project(self, x):
        return np.zeros_like(self._check(x))

    def squared_distance(self, x):
        x = self._check(x)
        return float(x @ x)


@dataclass(frozen=True, eq=False)
class Ball2(ConstraintSet):
    radius: float = 1.0
    center: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError(f"Ball2 radius must be positive and finite, got {self.radius}")
        if self.center is not None:
            c = np.asarray(self.center, dtype=float).copy()
            c.setflags(write=False)
            object.__setattr__(self, "center", c)

    @property
    def dim(self):
        return None if self.center is None else self.center.shape[0]

    def project(self, x):
        x = self._check(x)
        d = x if self.center is None else x - self.center
        nrm = math.sqrt(d @ d)
        if nrm <= self.radius:
            return x.copy()
        scaled = d * (self.radius / nrm)
        return scaled if self.center is None else scaled + self.center

    def squared_distance(self, x):
        x = self._check(x)
        d = x if self.center is None else x - self.center
        excess = math.sqrt(d @ d) - self.radius
        return excess * excess if excess > 0 else 0.0


def _bound(b, fill):
    if isinstance(b, (list, tuple)):
        b = [fill if v is None else v for v in b]
    return np.atleast_1d(np.asarray(b, dtype=float))


@dataclass(frozen=True, eq=False)
class Rectangle(ConstraintSet):
    """Box ``lower <= x <= upper``; ``None`` or infinite entries mean unbounded."""

    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.lower is None and self.upper is None:
            raise ValueError("Rectangle needs at least one of lower/upper")
        lo = None if self.lower is None else _bound(self.lower, -np.inf)
        hi = None if self.upper is None else _bound(self.upper, np.inf)
        n = (lo if lo is not None else hi).shape[0]
        lo = np.full(n, -np.inf) if lo is None else lo.copy()
        hi = np.full(n, np.inf) if hi is None else hi.copy()
        if lo.shape != hi.shape:
            raise ValueError(f"bound shapes differ: {lo.shape} vs {hi.shape}")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise ValueError("Rectangle bounds must not be NaN")
        if np.any(lo > hi):
            raise ValueError("Rectangle requires lower <= upper")
        if np.all(np.isneginf(lo)) and np.all(np.isposinf(hi)):
            raise ValueError("all bounds infinite; use WholeSpace")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self):
        return self.lower.shape[0]

    def project(self, x):
        return np.clip(self._check(x), self.lower, self.upper)


@dataclass(frozen=True, eq=False)
class BallInf(ConstraintSet):
    """``{x : ||x - center||_inf <= radius}``, projected as a box."""

    radius: float = 1.0
    center: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError(f"BallInf radius must be positive and finite, got {self.radius}")
        if self.center is not None:
            c = np.asarray(self.center, dtype=float).copy()
            c.setflags(write=False)
            object.__setattr__(self, "center", c)

    @property
    def dim(self):
        return None if self.center is None else self.center.shape[0]

    def as_rectangle(self, n: Optional[int] = None) -> Rectangle:
        c = self.center if self.center is not None else np.zeros(n if n is not None else 1)
        return Rectangle(c - self.radius, c + self.radius)

    def project(self, x):
        x = self._check(x)
        if self.center is None:
            return np.clip(x, -self.radius, self.radius)
        return np.clip(x, self.center - self.radius, self.center + self.radius)


@dataclass(frozen=True, eq=False)
class FiniteSet(ConstraintSet):
    """A finite (nonconvex) set of points; ties resolve to the lowest index."""

    points: Sequence = ()
    convex = False

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.size == 0:
            raise ValueError("FiniteSet needs at least one point")
        if pts.ndim != 2:
            raise ValueError("FiniteSet points must be vectors of equal dimension")
        if len({row.tobytes() for row in pts}) != pts.shape[0]:
            raise ValueError("FiniteSet points must be pairwise distinct")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def dim(self):
        return self.points.shape[1]

    def _nearest(self, x):
        d2 = np.sum((self.points - x) ** 2, axis=1)
        k = int(np.argmin(d2))  # argmin returns the first minimiser
        return k, float(d2[k])

    def project(self, x):
        k, _ = self._nearest(self._check(x))
        return self.points[k].copy()

    def squared_distance(self, x):
        return self._nearest(self._check(x))[1]


@dataclass(frozen=True, eq=False)
class SecondOrderCone(ConstraintSet):
    """``{(z, t) : ||z|| <= alpha * t}``; ``t`` is the last coordinate."""

    alpha: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    def project(self, x):
        x = self._check(x)
        if x.shape[0] < 2:
            raise DimensionMismatch("second-order cone needs dimension >= 2")
        z, t = x[:-1], x[-1]
        a = self.alpha
        nz = math.sqrt(z @ z)
        if nz <= a * t:
            return x.copy()
        if a * nz <= -t:
            return np.zeros_like(x)
        v = (a * nz + t) / (a * a + 1.0)
        out = np.empty_like(x)
        out[:-1] = z * (a * v / nz)
        out[-1] = v
        return out


@dataclass(frozen=True, eq=False)
class CartesianProduct(ConstraintSet):
    """Product of sets over consecutive segments.

    ``segments`` is a list of ``(end_index, set)`` with strictly increasing
    exclusive end indices; segment ``i`` covers ``x[end_{i-1}:end_i]``.
    """

    segments: Sequence = ()

    def __post_init__(self):
        segs = tuple((int(e), s) for e, s in self.segments)
        if not segs:
            raise ValueError("CartesianProduct needs at least one segment")
        start = 0
        for end, s in segs:
            if end <= start:
                raise ValueError("segment end indices must be strictly increasing")
            if s.dim is not None and s.dim != end - start:
                raise ValueError(
                    f"segment [{start}, {end}) has length {end - start} but set has dim {s.dim}")
            start = end
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "convex", all(s.convex for _, s in segs))

    @property
    def dim(self):
        return self.segments[-1][0]

    def _slices(self):
        start = 0
        for end, s in self.segments:
            yield slice(start, end), s
            start = end

    def project(self, x):
        x = self._check(x)
        out = np.empty_like(x)
        for sl, s in self._slices():
            out[sl] = s.project(x[sl])
        return out

    def squared_distance(self, x):
        x = self._check(x)
        return float(sum(s.squared_distance(x[sl]) for sl, s in self._slices()))


def project(set_: ConstraintSet, x) -> np.ndarray:
    return set_.project(x)


def distance(set_: ConstraintSet, x) -> float:
    return set_.distance(x)


def squared_distance(set_: ConstraintSet, x) -> float:
    return set_.squared_distance(x)


def default_y_set(set_c: ConstraintSet, n1: int, bound: float = DEFAULT_Y_BOUND) -> Rectangle:
    """Compact multiplier box ``Y`` inside the domain of the support function of ``C``.

    Per coordinate of a box: two finite bounds give ``[-M, M]``, a finite lower
    bound only gives ``[-M, 0]``, a finite upper bound only gives ``[0, M]``.
    ``{0}`` and bounded balls give ``[-M, M]``.
    """
    lo, hi = _default_y_bounds(set_c, n1, bound)
    return Rectangle(lo, hi)


def _default_y_bounds(s, n, M):
    if s.dim is not None and s.dim != n:
        raise DimensionMismatch(f"set has dimension {s.dim}, expected {n}")
    if isinstance(s, (Zero, Ball2, BallInf)):
        return np.full(n, -M), np.full(n, M)
    if isinstance(s, Rectangle):
        fin_lo = np.isfinite(s.lower)
        fin_hi = np.isfinite(s.upper)
        lo = np.where(fin_lo & ~fin_hi, -M, np.where(fin_hi & ~fin_lo, 0.0, -M))
        hi = np.where(fin_lo & ~fin_hi, 0.0, np.where(fin_hi & ~fin_lo, M, M))
        free = ~fin_lo & ~fin_hi
        # unbounded in both directions: the only admissible multiplier is 0
        lo[free] = 0.0
        hi[free] = 0.0
        return lo, hi
    if isinstance(s, CartesianProduct):
        los, his = [], []
        for sl, seg in s._slices():
            lo, hi = _default_y_bounds(seg, sl.stop - sl.start, M)
            los.append(lo)
            his.append(hi)
        return np.concatenate(los), np.concatenate(his)
    raise UnsupportedSetForDefaultY(
        f"cannot derive a default multiplier set for {type(s).__name__}; supply set_y")
