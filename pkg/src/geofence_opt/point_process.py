"""Point patterns, gridded density rasters, samplers, and the intensity measure.

Rasters are piecewise-constant densities on a square-cell grid covering the
study window. The intensity measure of a geofence discretizes the integral
of the density over the region with per-cell quadrature weights: each cell
contributes value * cell_area * coverage, where coverage is the fraction of
a fixed 4x4 sub-centroid lattice that falls inside the region. This bounds
the boundary error of the piecewise-constant discretization cheaply.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .errors import FactorizationError
from .geometry import Circle, Geofence, StudyWindow, contains_many

GRF_MAX_CELLS = 4096


@dataclass(frozen=True, eq=False)
class PointPattern:
    """A finite set of points observed inside a study window."""

    points: np.ndarray  # (n, 2) float64
    window: StudyWindow

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64).reshape(-1, 2))
        object.__setattr__(self, "points", pts)
        if pts.size:
            w = self.window
            if (
                pts[:, 0].min() < w.x_min
                or pts[:, 0].max() > w.x_max
                or pts[:, 1].min() < w.y_min
                or pts[:, 1].max() > w.y_max
            ):
                raise ValueError("pattern contains points outside the window")

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def xs(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def ys(self) -> np.ndarray:
        return self.points[:, 1]


@dataclass(frozen=True, eq=False)
class IntensityField:
    """Raster of densities (points per unit area) on square cells.

    `values` has shape (n_rows, n_cols); row 0 is the southernmost row, so
    values[iy, ix] covers x in [x_min + ix*cell, x_min + (ix+1)*cell) and
    the analogous y band. The grid must cover the window to within one cell.
    """

    window: StudyWindow
    n_cols: int
    n_rows: int
    cell_size: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        object.__setattr__(self, "values", vals)
        if self.n_cols < 1 or self.n_rows < 1:
            raise ValueError("grid must have at least one cell per axis")
        if vals.shape != (self.n_rows, self.n_cols):
            raise ValueError(f"values shape {vals.shape} != ({self.n_rows}, {self.n_cols})")
        if not (math.isfinite(self.cell_size) and self.cell_size > 0):
            raise ValueError(f"cell size must be positive, got {self.cell_size}")
        if not np.all(np.isfinite(vals)) or vals.min() < 0:
            raise ValueError("density values must be finite and non-negative")
        if abs(self.n_cols * self.cell_size - self.window.width) > self.cell_size or abs(
            self.n_rows * self.cell_size - self.window.height
        ) > self.cell_size:
            raise ValueError("grid does not cover the window to within one cell")

    @property
    def cell_area(self) -> float:
        return self.cell_size * self.cell_size

    def total_mass(self) -> float:
        """Expected number of points over the whole raster."""
        return float(self.values.sum() * self.cell_area)

    def x_centers(self) -> np.ndarray:
        return self.window.x_min + (np.arange(self.n_cols) + 0.5) * self.cell_size

    def y_centers(self) -> np.ndarray:
        return self.window.y_min + (np.arange(self.n_rows) + 0.5) * self.cell_size

    def value_at(self, x: float, y: float) -> float:
        """Density of the cell containing (x, y); edges clip to the grid."""
        ix = min(max(int((x - self.window.x_min) / self.cell_size), 0), self.n_cols - 1)
        iy = min(max(int((y - self.window.y_min) / self.cell_size), 0), self.n_rows - 1)
        return float(self.values[iy, ix])

    def with_values(self, values: np.ndarray) -> "IntensityField":
        return IntensityField(self.window, self.n_cols, self.n_rows, self.cell_size, values)


@dataclass(frozen=True)
class GrfConfig:
    """Parameters of a log-Gaussian density field with Matern covariance."""

    psill: float
    range: float
    nugget: float = 0.0
    beta: float = 0.0
    smoothness: float = 1.5

    def __post_init__(self):
        if not (self.psill >= 0 and math.isfinite(self.psill)):
            raise ValueError(f"psill must be non-negative, got {self.psill}")
        if not (self.range > 0 and math.isfinite(self.range)):
            raise ValueError(f"range must be positive, got {self.range}")
        if not (self.nugget >= 0 and math.isfinite(self.nugget)):
            raise ValueError(f"nugget must be non-negative, got {self.nugget}")


def grid_for_window(window: StudyWindow, n_cols: int) -> tuple[int, float]:
    """Square-cell grid dimensions: cell size from the width, rows to match."""
    cell = window.width / n_cols
    n_rows = max(1, round(window.height / cell))
    return n_rows, cell


def constant_field(window: StudyWindow, lam: float, n_cols: int = 64) -> IntensityField:
    n_rows, cell = grid_for_window(window, n_cols)
    return IntensityField(window, n_cols, n_rows, cell, np.full((n_rows, n_cols), float(lam)))


def field_from_function(
    window: StudyWindow, fn: Callable[[np.ndarray, np.ndarray], np.ndarray], n_cols: int = 64
) -> IntensityField:
    """Raster built by evaluating a density function at cell centroids."""
    n_rows, cell = grid_for_window(window, n_cols)
    xc = window.x_min + (np.arange(n_cols) + 0.5) * cell
    yc = window.y_min + (np.arange(n_rows) + 0.5) * cell
    xg, yg = np.meshgrid(xc, yc)
    return IntensityField(window, n_cols, n_rows, cell, np.asarray(fn(xg, yg), dtype=np.float64))


# --- samplers -----------------------------------------------------------------


def sample_binomial(window: StudyWindow, n: int, rng: np.random.Generator) -> PointPattern:
    """Exactly n i.i.d. uniform points in the window."""
    if n < 0:
        raise ValueError(f"count must be non-negative, got {n}")
    pts = rng.uniform((window.x_min, window.y_min), (window.x_max, window.y_max), size=(int(n), 2))
    return PointPattern(pts, window)


def sample_poisson_homogeneous(
    window: StudyWindow, lam: float, rng: np.random.Generator
) -> PointPattern:
    """Stationary Poisson pattern: total count ~ Poisson(lam * area)."""
    if lam < 0:
        raise ValueError(f"density must be non-negative, got {lam}")
    n = int(rng.poisson(lam * window.area()))
    return sample_binomial(window, n, rng)


def sample_poisson_inhomogeneous(field: IntensityField, rng: np.random.Generator) -> PointPattern:
    """Per-cell Poisson counts with uniform placement within each cell.

    Cells are independent, matching the piecewise-constant raster exactly.
    """
    w = field.window
    means = field.values * field.cell_area
    counts = rng.poisson(means)
    total = int(counts.sum())
    if total == 0:
        return PointPattern(np.empty((0, 2)), w)
    flat = counts.ravel()
    idx = np.repeat(np.arange(flat.size), flat)
    iy, ix = np.divmod(idx, field.n_cols)
    offs = rng.uniform(0.0, 1.0, size=(total, 2))
    xs = w.x_min + (ix + offs[:, 0]) * field.cell_size
    ys = w.y_min + (iy + offs[:, 1]) * field.cell_size
    # Guard the window invariant against cells that overhang by float drift.
    xs = np.minimum(xs, w.x_max)
    ys = np.minimum(ys, w.y_max)
    return PointPattern(np.column_stack([xs, ys]), w)


def _matern_correlation(d: np.ndarray, corr_range: float, smoothness: float) -> np.ndarray:
    t = d / corr_range
    if smoothness == 0.5:
        return np.exp(-t)
    if smoothness == 1.5:
        s = math.sqrt(3.0) * t
        return (1.0 + s) * np.exp(-s)
    if smoothness == 2.5:
        s = math.sqrt(5.0) * t
        return (1.0 + s + s * s / 3.0) * np.exp(-s)
    raise ValueError(f"smoothness must be one of 0.5, 1.5, 2.5; got {smoothness}")


def generate_grf_field(
    window: StudyWindow,
    grid: tuple[int, int],
    cfg: GrfConfig,
    rng: np.random.Generator,
) -> IntensityField:
    """Density raster exp(Z) with Z a Gaussian field draw at cell centroids.

    Z has mean beta and covariance psill * matern(d / range) plus a nugget
    on the diagonal. Dense Cholesky factorization caps the grid at
    GRF_MAX_CELLS cells; a 1e-10 diagonal jitter guards the factorization.
    """
    n_cols, n_rows = grid
    cell = window.width / n_cols
    if abs(n_rows * cell - window.height) > cell:
        raise ValueError("grid aspect does not match the window (cells must be square)")
    n_cells = n_cols * n_rows
    if n_cells > GRF_MAX_CELLS:
        raise ValueError(f"grid has {n_cells} cells; dense factorization caps at {GRF_MAX_CELLS}")

    if cfg.psill == 0.0:
        z = np.full(n_cells, cfg.beta)
        if cfg.nugget > 0.0:
            z = z + math.sqrt(cfg.nugget) * rng.standard_normal(n_cells)
    else:
        xc = window.x_min + (np.arange(n_cols) + 0.5) * cell
        yc = window.y_min + (np.arange(n_rows) + 0.5) * cell
        xg, yg = np.meshgrid(xc, yc)
        coords = np.column_stack([xg.ravel(), yg.ravel()])
        diff = coords[:, None, :] - coords[None, :, :]
        dist = np.sqrt((diff * diff).sum(axis=2))
        cov = cfg.psill * _matern_correlation(dist, cfg.range, cfg.smoothness)
        cov[np.diag_indices(n_cells)] += cfg.nugget + 1e-10
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise FactorizationError(f"covariance is not positive definite: {exc}") from exc
        z = cfg.beta + chol @ rng.standard_normal(n_cells)

    values = np.exp(z).reshape(n_rows, n_cols)
    return IntensityField(window, n_cols, n_rows, cell, values)


# --- measures and counts --------------------------------------------------------


def intensity_measure(field: IntensityField, g: Geofence) -> float:
    """Expected count inside a geofence under the raster density.

    Quadrature: sum over cells of value * cell_area * coverage with coverage
    the 4x4 sub-centroid fraction inside the region. Circles go through the
    compiled kernel; other shapes use the generic vectorized membership test.
    """
    w = field.window
    if isinstance(g.shape, Circle):
        return float(
            kernels.circle_mass(
                field.values,
                w.x_min,
                w.y_min,
                field.cell_size,
                g.center.x,
                g.center.y,
                g.shape.r,
            )
        )
    r = g.circumradius
    cell = field.cell_size
    ix0 = max(int(math.floor((g.center.x - r - w.x_min) / cell)), 0)
    ix1 = min(int(math.floor((g.center.x + r - w.x_min) / cell)), field.n_cols - 1)
    iy0 = max(int(math.floor((g.center.y - r - w.y_min) / cell)), 0)
    iy1 = min(int(math.floor((g.center.y + r - w.y_min) / cell)), field.n_rows - 1)
    if ix1 < ix0 or iy1 < iy0:
        return 0.0
    sub = cell / 4.0
    offs = (np.arange(4) + 0.5) * sub
    sx = w.x_min + np.arange(ix0, ix1 + 1)[:, None] * cell + offs[None, :]
    sy = w.y_min + np.arange(iy0, iy1 + 1)[:, None] * cell + offs[None, :]
    xs = np.broadcast_to(sx[None, :, None, :], (iy1 - iy0 + 1, ix1 - ix0 + 1, 4, 4))
    ys = np.broadcast_to(sy[:, None, :, None], (iy1 - iy0 + 1, ix1 - ix0 + 1, 4, 4))
    inside = contains_many(g, xs.ravel(), ys.ravel())
    frac = inside.reshape(iy1 - iy0 + 1, ix1 - ix0 + 1, 16).sum(axis=2) / 16.0
    block = field.values[iy0 : iy1 + 1, ix0 : ix1 + 1]
    return float((block * frac).sum() * field.cell_area)


def count_points(pattern: PointPattern, g: Geofence) -> int:
    """Number of pattern points inside the closed region of g."""
    if len(pattern) == 0:
        return 0
    return int(contains_many(g, pattern.xs, pattern.ys).sum())


# --- raster file format ----------------------------------------------------------
#
# ASCII grid: one header line "ncols nrows xmin ymin cellsize", then n_rows
# lines of n_cols space-separated densities, row-major starting from the TOP
# (northernmost) row. Written at full precision so files round-trip exactly.


def write_raster(field: IntensityField, path) -> None:
    with open(path, "w") as fh:
        w = field.window
        fh.write(f"{field.n_cols} {field.n_rows} {w.x_min!r} {w.y_min!r} {field.cell_size!r}\n")
        for iy in range(field.n_rows - 1, -1, -1):
            fh.write(" ".join(repr(float(v)) for v in field.values[iy]) + "\n")


def read_raster(path) -> IntensityField:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 5:
            raise ValueError(f"bad raster header in {path}: expected 5 fields, got {len(header)}")
        n_cols, n_rows = int(header[0]), int(header[1])
        x_min, y_min, cell = float(header[2]), float(header[3]), float(header[4])
        rows = []
        for _ in range(n_rows):
            line = fh.readline()
            if not line:
                raise ValueError(f"raster {path} ended early: expected {n_rows} rows")
            rows.append(np.array(line.split(), dtype=np.float64))
    values = np.flipud(np.vstack(rows))
    window = StudyWindow(x_min, y_min, x_min + n_cols * cell, y_min + n_rows * cell)
    return IntensityField(window, n_cols, n_rows, cell, values)
