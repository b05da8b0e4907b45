"""Plug-in estimators mapping a privacy constraint to perimeter dimensions.

Five estimators, from least to most informed:

* window:   r = sqrt(area * k / (n * pi)), from the total population and
            jurisdiction area only. The circle covers the k/n share of the
            window.
* focal:    r = sqrt(k / (pi * lambda)), from the local density at the
            site. The expected count inside the circle equals k.
* sector:   r = sqrt(2k / (lambda * theta)) for a circular sector of
            central angle theta; reduces to focal at theta = 2*pi.
* polygon:  circumradius r = sqrt(2k / (lambda * p * sin(2*pi/p))) for a
            regular p-gon; converges to focal as p grows.
* lambda:   numeric search against a full density raster, minimizing the
            squared gap between the expected count inside the circle and k.

k is a real-valued expected count; fractional constraints are allowed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import (
    ConstraintUnreachableError,
    DegenerateDensityError,
    InvalidAngleError,
    InvalidPolygonError,
    SingularInformationError,
    UndefinedDensityError,
)
from .geometry import TWO_PI, Circle, Geofence, Point
from .point_process import IntensityField, intensity_measure


@dataclass(frozen=True)
class PrivacyConstraint:
    """Expected number of captured individuals a perimeter may reach."""

    k: float

    def __post_init__(self):
        if not (math.isfinite(self.k) and self.k > 0):
            raise ValueError(f"privacy constraint must be positive and finite, got {self.k}")


ConstraintLike = Union[PrivacyConstraint, float, int]


def _k_value(k: ConstraintLike) -> float:
    kv = k.k if isinstance(k, PrivacyConstraint) else float(k)
    if not (math.isfinite(kv) and kv > 0):
        raise ValueError(f"privacy constraint must be positive and finite, got {kv}")
    return kv


@dataclass(frozen=True)
class RadiusEstimate:
    """An estimated radius plus search diagnostics (lambda estimator only)."""

    r: float
    estimator_tag: str
    objective: Optional[float] = None
    iterations: Optional[int] = None

    def __post_init__(self):
        if not (math.isfinite(self.r) and self.r > 0):
            raise ValueError(f"estimated radius must be positive and finite, got {self.r}")


@dataclass(frozen=True)
class FocalMleDiagnostics:
    """Information matrix over (density, radius) and its scaled inverse."""

    information: np.ndarray
    asymptotic_covariance: np.ndarray


def radius_window(window_area: float, n: float, k: ConstraintLike) -> RadiusEstimate:
    """Radius whose circle covers the k/n share of the window area."""
    kv = _k_value(k)
    if n == 0:
        raise UndefinedDensityError("window estimator undefined with zero individuals")
    if n < 0 or not math.isfinite(n):
        raise ValueError(f"population must be positive and finite, got {n}")
    if not (math.isfinite(window_area) and window_area > 0):
        raise ValueError(f"window area must be positive, got {window_area}")
    if kv > n:
        warnings.warn(
            f"privacy constraint {kv} exceeds the population {n}; "
            "the estimated circle is larger than a window-filling one",
            stacklevel=2,
        )
    return RadiusEstimate(math.sqrt(window_area * kv / (n * math.pi)), "window")


def radius_focal(lambda_at_site: float, k: ConstraintLike) -> RadiusEstimate:
    """Radius at which a locally uniform density yields k expected captures."""
    kv = _k_value(k)
    if not (math.isfinite(lambda_at_site) and lambda_at_site > 0):
        raise DegenerateDensityError(
            f"focal estimator needs a positive local density, got {lambda_at_site}"
        )
    return RadiusEstimate(math.sqrt(kv / (math.pi * lambda_at_site)), "focal")


def radius_sector(lambda_at_site: float, k: ConstraintLike, theta: float) -> RadiusEstimate:
    """Radius of the central-angle sector holding k expected captures."""
    kv = _k_value(k)
    if not (math.isfinite(theta) and 0.0 < theta <= TWO_PI):
        raise InvalidAngleError(f"central angle must lie in (0, 2*pi], got {theta}")
    if not (math.isfinite(lambda_at_site) and lambda_at_site > 0):
        raise DegenerateDensityError(
            f"sector estimator needs a positive local density, got {lambda_at_site}"
        )
    return RadiusEstimate(math.sqrt(2.0 * kv / (lambda_at_site * theta)), "sector")


def radius_polygon(lambda_at_site: float, k: ConstraintLike, p: int) -> RadiusEstimate:
    """Circumradius of the regular p-gon holding k expected captures."""
    kv = _k_value(k)
    if int(p) != p or p < 3:
        raise InvalidPolygonError(f"polygon needs at least 3 sides, got {p}")
    if not (math.isfinite(lambda_at_site) and lambda_at_site > 0):
        raise DegenerateDensityError(
            f"polygon estimator needs a positive local density, got {lambda_at_site}"
        )
    r = math.sqrt(2.0 * kv / (lambda_at_site * p * math.sin(TWO_PI / p)))
    return RadiusEstimate(r, "polygon-circumradius")


def polygon_apothem(r_circum: float, p: int) -> float:
    """Center-to-edge distance of the regular p-gon with circumradius r."""
    if int(p) != p or p < 3:
        raise InvalidPolygonError(f"polygon needs at least 3 sides, got {p}")
    if not (math.isfinite(r_circum) and r_circum > 0):
        raise ValueError(f"circumradius must be positive, got {r_circum}")
    return r_circum * math.cos(math.pi / p)


def polygon_side(r_circum: float, p: int) -> float:
    """Side length of the regular p-gon with circumradius r."""
    if int(p) != p or p < 3:
        raise InvalidPolygonError(f"polygon needs at least 3 sides, got {p}")
    if not (math.isfinite(r_circum) and r_circum > 0):
        raise ValueError(f"circumradius must be positive, got {r_circum}")
    return 2.0 * math.sin(math.pi / p) * r_circum


def default_lambda_tolerance(k: ConstraintLike) -> float:
    """Default stopping gap for the raster search: max(0.01 k, 0.05)."""
    return max(0.01 * _k_value(k), 0.05)


def radius_lambda(
    field: IntensityField,
    site: Point,
    k: ConstraintLike,
    tolerance: Optional[float] = None,
    max_iterations: int = 200,
) -> RadiusEstimate:
    """Radius minimizing the squared gap between the raster's expected count
    inside the circle and the privacy constraint.

    The search seeds at the locally uniform radius r0 = sqrt(k / (pi *
    lambda(site))) and covers (0, 3*r0], the seed buffered by offsets in
    (-r0, 2*r0]. The expected count is weakly monotone in the radius, so a
    bisection on count(r) - k brackets the optimum; a grid scan backs it up
    when the tolerance cannot be met. Raises ConstraintUnreachableError when
    even the largest radius falls short of k by more than the tolerance.
    """
    kv = _k_value(k)
    if not field.window.contains(site.x, site.y):
        raise ValueError(f"site ({site.x}, {site.y}) lies outside the raster window")
    lam0 = field.value_at(site.x, site.y)
    if lam0 <= 0:
        raise DegenerateDensityError(
            f"raster density at the site is {lam0}; the search needs a positive seed"
        )
    tol = default_lambda_tolerance(kv) if tolerance is None else float(tolerance)
    if not (math.isfinite(tol) and tol > 0):
        raise ValueError(f"tolerance must be positive, got {tolerance}")

    r0 = math.sqrt(kv / (math.pi * lam0))
    r_hi = 3.0 * r0
    evals = 0

    def mass(r: float) -> float:
        nonlocal evals
        evals += 1
        return intensity_measure(field, Geofence(site, Circle(r)))

    m_hi = mass(r_hi)
    best_r, best_gap = r_hi, abs(m_hi - kv)
    if m_hi < kv - tol:
        raise ConstraintUnreachableError(
            f"expected count reaches only {m_hi:.6g} < k = {kv:.6g} at the search "
            f"bound r = {r_hi:.6g}",
            best_radius=r_hi,
            best_mass=m_hi,
        )

    lo, hi = 0.0, r_hi
    while best_gap > tol and evals < max_iterations and (hi - lo) > 1e-12 * r_hi:
        mid = 0.5 * (lo + hi)
        m = mass(mid)
        gap = abs(m - kv)
        if gap < best_gap and mid > 0:
            best_r, best_gap = mid, gap
        if m < kv:
            lo = mid
        else:
            hi = mid

    if best_gap > tol:
        # Quadrature turns the count into a step function of r; when a jump
        # straddles k the bisection bottoms out, so scan for the best step.
        for r in np.linspace(r_hi / 256.0, r_hi, 256):
            gap = abs(mass(float(r)) - kv)
            if gap < best_gap:
                best_r, best_gap = float(r), gap

    return RadiusEstimate(best_r, "lambda", objective=best_gap**2, iterations=evals)


def focal_mle_diagnostics(lam: float, r: float, n: int) -> FocalMleDiagnostics:
    """Information matrix of the joint (density, radius) likelihood.

    Per-observation information [[1/lam, 2*pi*n*r], [2*pi*n*r,
    2*n*lam*pi + 2*lam/r^2]]; the asymptotic covariance is its numerical
    inverse scaled by 1/n.
    """
    if not (math.isfinite(lam) and lam > 0):
        raise DegenerateDensityError(f"density must be positive, got {lam}")
    if not (math.isfinite(r) and r > 0):
        raise ValueError(f"radius must be positive, got {r}")
    if n < 1:
        raise ValueError(f"sample size must be at least 1, got {n}")
    off = 2.0 * math.pi * n * r
    info = np.array(
        [[1.0 / lam, off], [off, 2.0 * n * lam * math.pi + 2.0 * lam / (r * r)]]
    )
    if not np.all(np.isfinite(info)) or np.linalg.cond(info) > 1e14:
        raise SingularInformationError("information matrix is singular or nearly so")
    try:
        cov = np.linalg.inv(info) / n
    except np.linalg.LinAlgError as exc:
        raise SingularInformationError(f"information matrix is not invertible: {exc}") from exc
    return FocalMleDiagnostics(information=info, asymptotic_covariance=cov)
