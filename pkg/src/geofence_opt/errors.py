"""Exception types shared across the library."""


class GeofenceOptError(Exception):
    """Base class for all library-specific errors."""


class InvalidPolygonError(GeofenceOptError, ValueError):
    """Regular polygon requested with fewer than three sides."""


class InvalidAngleError(GeofenceOptError, ValueError):
    """Sector angle outside the half-open interval (0, 2*pi]."""


class DegenerateDensityError(GeofenceOptError, ValueError):
    """Local density is zero or negative where a positive value is required."""


class UndefinedDensityError(GeofenceOptError, ValueError):
    """Global density undefined because the window holds no individuals."""


class ConstraintUnreachableError(GeofenceOptError):
    """No radius in the search interval reaches the target expected count."""

    def __init__(self, message, best_radius=None, best_mass=None):
        super().__init__(message)
        self.best_radius = best_radius
        self.best_mass = best_mass


class EmptyMapError(GeofenceOptError, ValueError):
    """Density raster has no positive cells to build a radii map from."""


class FactorizationError(GeofenceOptError, ArithmeticError):
    """Covariance factorization failed; matrix not positive definite."""


class SingularInformationError(GeofenceOptError, ArithmeticError):
    """Information matrix is singular and cannot be inverted."""
