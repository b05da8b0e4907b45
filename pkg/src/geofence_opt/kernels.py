"""Hot numeric inner loops with two interchangeable backends.

The default backend compiles the loops with numba when it is importable; a
pure-numpy twin of every kernel exists for environments without numba and
for cross-checking. Selection happens once at import time via the
GEOFENCE_OPT_BACKEND environment variable: "numba", "numpy", or "auto"
(the default). `benchmarks/bench_kernels.py` times the two side by side.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    from numba import njit

    _NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised via the numpy backend tests
    njit = None
    _NUMBA_AVAILABLE = False


def _pick_backend() -> str:
    choice = os.environ.get("GEOFENCE_OPT_BACKEND", "auto").strip().lower()
    if choice in ("", "auto"):
        return "numba" if _NUMBA_AVAILABLE else "numpy"
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        if not _NUMBA_AVAILABLE:
            raise RuntimeError("GEOFENCE_OPT_BACKEND=numba but numba is not installed")
        return "numba"
    raise RuntimeError(f"unknown GEOFENCE_OPT_BACKEND {choice!r} (use numba, numpy, or auto)")


BACKEND = _pick_backend()


# --- circle quadrature mass -------------------------------------------------
#
# Sum of value * cell_area * coverage over the grid cells touched by a circle,
# where coverage is the fraction of a fixed 4x4 sub-centroid lattice falling
# inside the circle. values is (n_rows, n_cols) with row 0 the southernmost
# row; (x0, y0) is the window's lower-left corner and cell the cell size.


def _circle_mass_numpy(values, x0, y0, cell, cx, cy, r):
    n_rows, n_cols = values.shape
    ix0 = max(int(math.floor((cx - r - x0) / cell)), 0)
    ix1 = min(int(math.floor((cx + r - x0) / cell)), n_cols - 1)
    iy0 = max(int(math.floor((cy - r - y0) / cell)), 0)
    iy1 = min(int(math.floor((cy + r - y0) / cell)), n_rows - 1)
    if ix1 < ix0 or iy1 < iy0:
        return 0.0
    sub = cell / 4.0
    offs = (np.arange(4) + 0.5) * sub
    sx = x0 + np.arange(ix0, ix1 + 1)[:, None] * cell + offs[None, :]
    sy = y0 + np.arange(iy0, iy1 + 1)[:, None] * cell + offs[None, :]
    dx2 = (sx - cx) ** 2  # (w, 4)
    dy2 = (sy - cy) ** 2  # (h, 4)
    inside = dy2[:, None, :, None] + dx2[None, :, None, :] <= r * r
    frac = inside.reshape(iy1 - iy0 + 1, ix1 - ix0 + 1, 16).sum(axis=2) / 16.0
    block = values[iy0 : iy1 + 1, ix0 : ix1 + 1]
    return float((block * frac).sum() * (cell * cell))


def _circle_mass_loop(values, x0, y0, cell, cx, cy, r):
    n_rows, n_cols = values.shape
    ix0 = max(int(math.floor((cx - r - x0) / cell)), 0)
    ix1 = min(int(math.floor((cx + r - x0) / cell)), n_cols - 1)
    iy0 = max(int(math.floor((cy - r - y0) / cell)), 0)
    iy1 = min(int(math.floor((cy + r - y0) / cell)), n_rows - 1)
    if ix1 < ix0 or iy1 < iy0:
        return 0.0
    sub = cell / 4.0
    r2 = r * r
    cell_area = cell * cell
    total = 0.0
    for iy in range(iy0, iy1 + 1):
        base_y = y0 + iy * cell
        for ix in range(ix0, ix1 + 1):
            v = values[iy, ix]
            if v == 0.0:
                continue
            base_x = x0 + ix * cell
            cnt = 0
            for sy in range(4):
                dy = base_y + (sy + 0.5) * sub - cy
                dy2 = dy * dy
                for sx in range(4):
                    dx = base_x + (sx + 0.5) * sub - cx
                    if dx * dx + dy2 <= r2:
                        cnt += 1
            total += v * cell_area * (cnt / 16.0)
    return total


# --- random walk interaction bias -------------------------------------------
#
# Per agent: the mean unit vector toward neighbors closer than `radius`,
# scaled by agent_strength, plus the unit vector toward the nearest target,
# scaled by target_strength. Coincident points contribute nothing.


def _walk_bias_numpy(px, py, tx, ty, radius, agent_strength, target_strength):
    n = px.size
    bx = np.zeros(n)
    by = np.zeros(n)
    if agent_strength != 0.0 and radius > 0.0 and n > 1:
        r2 = radius * radius
        chunk = max(1, int(2_000_000 // max(n, 1)))
        for lo in range(0, n, chunk):
            hi = min(lo + chunk, n)
            dx = px[None, :] - px[lo:hi, None]
            dy = py[None, :] - py[lo:hi, None]
            d2 = dx * dx + dy * dy
            mask = (d2 <= r2) & (d2 > 0.0)
            d = np.sqrt(np.where(mask, d2, 1.0))
            ux = np.where(mask, dx / d, 0.0)
            uy = np.where(mask, dy / d, 0.0)
            cnt = mask.sum(axis=1)
            good = cnt > 0
            scale = np.zeros(hi - lo)
            scale[good] = agent_strength / cnt[good]
            bx[lo:hi] = ux.sum(axis=1) * scale
            by[lo:hi] = uy.sum(axis=1) * scale
    if target_strength != 0.0 and tx.size > 0:
        ddx = tx[None, :] - px[:, None]
        ddy = ty[None, :] - py[:, None]
        dd2 = ddx * ddx + ddy * ddy
        j = np.argmin(dd2, axis=1)
        rows = np.arange(n)
        best_dx = ddx[rows, j]
        best_dy = ddy[rows, j]
        d = np.sqrt(dd2[rows, j])
        nz = d > 0.0
        bx[nz] += target_strength * best_dx[nz] / d[nz]
        by[nz] += target_strength * best_dy[nz] / d[nz]
    return bx, by


def _walk_bias_loop(px, py, tx, ty, radius, agent_strength, target_strength):
    n = px.size
    bx = np.zeros(n)
    by = np.zeros(n)
    r2 = radius * radius
    nt = tx.size
    for i in range(n):
        if agent_strength != 0.0 and radius > 0.0:
            ax = 0.0
            ay = 0.0
            cnt = 0
            for j in range(n):
                if j == i:
                    continue
                dx = px[j] - px[i]
                dy = py[j] - py[i]
                d2 = dx * dx + dy * dy
                if d2 <= r2 and d2 > 0.0:
                    d = math.sqrt(d2)
                    ax += dx / d
                    ay += dy / d
                    cnt += 1
            if cnt > 0:
                bx[i] = agent_strength * ax / cnt
                by[i] = agent_strength * ay / cnt
        if target_strength != 0.0 and nt > 0:
            best = np.inf
            bdx = 0.0
            bdy = 0.0
            for t in range(nt):
                dx = tx[t] - px[i]
                dy = ty[t] - py[i]
                d2 = dx * dx + dy * dy
                if d2 < best:
                    best = d2
                    bdx = dx
                    bdy = dy
            if best > 0.0 and math.isfinite(best):
                d = math.sqrt(best)
                bx[i] += target_strength * bdx / d
                by[i] += target_strength * bdy / d
    return bx, by


# --- gaussian kernel density on a grid ---------------------------------------
#
# Unnormalized sums exp(-d^2 / (2 h^2)) of every agent against every cell
# centroid; the caller rescales total mass afterwards.


def _kde_grid_numpy(px, py, gx, gy, bandwidth):
    inv = -0.5 / (bandwidth * bandwidth)
    out = np.zeros((gy.size, gx.size))
    chunk = max(1, int(4_000_000 // max(gx.size * gy.size, 1)))
    ex_all = gx[None, :]
    ey_all = gy[None, :]
    for lo in range(0, px.size, chunk):
        hi = min(lo + chunk, px.size)
        wx = np.exp(inv * (ex_all - px[lo:hi, None]) ** 2)  # (m, n_cols)
        wy = np.exp(inv * (ey_all - py[lo:hi, None]) ** 2)  # (m, n_rows)
        out += np.einsum("mr,mc->rc", wy, wx)
    return out


def _kde_grid_loop(px, py, gx, gy, bandwidth):
    inv = -0.5 / (bandwidth * bandwidth)
    n_rows = gy.size
    n_cols = gx.size
    out = np.zeros((n_rows, n_cols))
    m = px.size
    wx = np.empty((m, n_cols))
    wy = np.empty((m, n_rows))
    for a in range(m):
        for c in range(n_cols):
            d = gx[c] - px[a]
            wx[a, c] = math.exp(inv * d * d)
        for r in range(n_rows):
            d = gy[r] - py[a]
            wy[a, r] = math.exp(inv * d * d)
    for r in range(n_rows):
        for c in range(n_cols):
            s = 0.0
            for a in range(m):
                s += wy[a, r] * wx[a, c]
            out[r, c] = s
    return out


if _NUMBA_AVAILABLE:
    _circle_mass_numba = njit(cache=True)(_circle_mass_loop)
    _walk_bias_numba = njit(cache=True)(_walk_bias_loop)
    _kde_grid_numba = njit(cache=True)(_kde_grid_loop)

if BACKEND == "numba":
    circle_mass = _circle_mass_numba
    walk_bias = _walk_bias_numba
    kde_grid = _kde_grid_numba
else:
    circle_mass = _circle_mass_numpy
    walk_bias = _walk_bias_numpy
    kde_grid = _kde_grid_numpy
