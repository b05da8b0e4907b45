"""Study windows, geofence perimeter shapes, areas, and containment tests.

All shapes are closed regions: points exactly on the boundary count as
inside. Geofences are never clipped to the study window; a perimeter that
overhangs the window keeps its full drawn extent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import InvalidAngleError, InvalidPolygonError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"point coordinates must be finite, got ({self.x}, {self.y})")


@dataclass(frozen=True)
class StudyWindow:
    """Axis-aligned rectangular jurisdiction with positive area."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        for v in (self.x_min, self.y_min, self.x_max, self.y_max):
            if not math.isfinite(v):
                raise ValueError("window bounds must be finite")
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise ValueError(
                f"window must have positive extent, got "
                f"[{self.x_min}, {self.x_max}] x [{self.y_min}, {self.y_max}]"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def area(self) -> float:
        return self.width * self.height

    def hypotenuse(self) -> float:
        return math.hypot(self.width, self.height)

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


@dataclass(frozen=True)
class Circle:
    r: float

    def __post_init__(self):
        if not (math.isfinite(self.r) and self.r > 0):
            raise ValueError(f"circle radius must be positive, got {self.r}")


@dataclass(frozen=True)
class Sector:
    """Circular sector: radius, central angle, and orientation of one edge.

    Membership means lying within the radius and at an angular offset from
    `orientation` (counterclockwise) between 0 and `theta`.
    """

    r: float
    theta: float
    orientation: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.r) and self.r > 0):
            raise ValueError(f"sector radius must be positive, got {self.r}")
        if not (math.isfinite(self.theta) and 0.0 < self.theta <= TWO_PI):
            raise InvalidAngleError(f"central angle must lie in (0, 2*pi], got {self.theta}")
        if not (math.isfinite(self.orientation) and 0.0 <= self.orientation < TWO_PI):
            raise InvalidAngleError(f"orientation must lie in [0, 2*pi), got {self.orientation}")


@dataclass(frozen=True)
class RegularPolygon:
    """Regular p-gon described by its circumradius and a rotation shift."""

    r: float
    p: int
    gamma: float = 0.0

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 3:
            raise InvalidPolygonError(f"polygon needs at least 3 sides, got {self.p}")
        if not (math.isfinite(self.r) and self.r > 0):
            raise ValueError(f"circumradius must be positive, got {self.r}")
        if not (math.isfinite(self.gamma) and 0.0 <= self.gamma < TWO_PI):
            raise InvalidAngleError(f"rotation shift must lie in [0, 2*pi), got {self.gamma}")


Shape = Union[Circle, Sector, RegularPolygon]


@dataclass(frozen=True)
class Geofence:
    """A perimeter shape anchored at a focal site."""

    center: Point
    shape: Shape

    @property
    def circumradius(self) -> float:
        """Radius of the smallest center-anchored circle covering the shape."""
        return self.shape.r


def area(g: Geofence) -> float:
    """Closed-form area of a geofence.

    Circle: pi*r^2. Sector: the theta/(2*pi) share of the full circle, so a
    full-turn sector equals the circle exactly. Regular p-gon:
    (p*r^2/2)*sin(2*pi/p) with r the circumradius.
    """
    s = g.shape
    if isinstance(s, Circle):
        return math.pi * s.r * s.r
    if isinstance(s, Sector):
        return math.pi * s.r * s.r * (s.theta / TWO_PI)
    if isinstance(s, RegularPolygon):
        return 0.5 * s.p * s.r * s.r * math.sin(TWO_PI / s.p)
    raise TypeError(f"unknown shape {type(s).__name__}")


def polygon_vertices(center: Point, r: float, p: int, gamma: float = 0.0) -> list[Point]:
    """Vertices of the regular p-gon inscribed in the circle of radius r.

    Vertex i sits at angle 2*pi*i/p + gamma, for i = 0..p-1, counterclockwise.
    The ring closes implicitly; no duplicate closing vertex is emitted.
    """
    if int(p) != p or p < 3:
        raise InvalidPolygonError(f"polygon needs at least 3 sides, got {p}")
    if not (math.isfinite(r) and r > 0):
        raise ValueError(f"circumradius must be positive, got {r}")
    out = []
    for i in range(int(p)):
        ang = TWO_PI * i / p + gamma
        out.append(Point(math.cos(ang) * r + center.x, math.sin(ang) * r + center.y))
    return out


def _polygon_vertex_arrays(g: Geofence) -> tuple[np.ndarray, np.ndarray]:
    s = g.shape
    i = np.arange(s.p, dtype=np.float64)
    ang = TWO_PI * i / s.p + s.gamma
    return np.cos(ang) * s.r + g.center.x, np.sin(ang) * s.r + g.center.y


def contains_many(g: Geofence, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized closed-region membership test for a batch of points."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    dx = xs - g.center.x
    dy = ys - g.center.y
    s = g.shape
    if isinstance(s, Circle):
        return dx * dx + dy * dy <= s.r * s.r
    if isinstance(s, Sector):
        d2 = dx * dx + dy * dy
        within = d2 <= s.r * s.r
        offset = np.mod(np.arctan2(dy, dx) - s.orientation, TWO_PI)
        # The center has no defined angle but belongs to every sector.
        return within & ((offset <= s.theta) | (d2 == 0.0))
    if isinstance(s, RegularPolygon):
        vx, vy = _polygon_vertex_arrays(g)
        inside = np.ones(np.broadcast(dx, dy).shape, dtype=bool)
        for i in range(s.p):
            j = (i + 1) % s.p
            ex, ey = vx[j] - vx[i], vy[j] - vy[i]
            cross = ex * (ys - vy[i]) - ey * (xs - vx[i])
            inside &= cross >= 0.0
        return inside
    raise TypeError(f"unknown shape {type(s).__name__}")


def contains(g: Geofence, q: Point) -> bool:
    """True iff q lies in the closed region of g."""
    return bool(contains_many(g, np.array([q.x]), np.array([q.y]))[0])


def random_point_in_window(w: StudyWindow, rng: np.random.Generator) -> Point:
    """One uniformly distributed point in the window."""
    return Point(rng.uniform(w.x_min, w.x_max), rng.uniform(w.y_min, w.y_max))


def random_points_in_window(w: StudyWindow, n: int, rng: np.random.Generator) -> np.ndarray:
    """(n, 2) array of i.i.d. uniform points in the window."""
    return rng.uniform((w.x_min, w.y_min), (w.x_max, w.y_max), size=(int(n), 2))
