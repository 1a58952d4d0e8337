"""Spherical sinusoidal projection, nearest-neighbour reprojection and subsetting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from tcprecip.grid_io import GEOGRAPHIC, SINUSOIDAL, Grid

EARTH_RADIUS_KM = 6371.0


@dataclass(frozen=True)
class SinusoidalParams:
    sphere_radius_km: float = EARTH_RADIUS_KM

    def __post_init__(self):
        if not self.sphere_radius_km > 0:
            raise ValueError("sphere_radius_km must be positive")


@dataclass(frozen=True)
class GeoBounds:
    west: float
    east: float
    south: float
    north: float

    def __post_init__(self):
        if not (-180.0 <= self.west < self.east <= 180.0):
            raise ValueError(f"invalid longitude bounds [{self.west}, {self.east}]")
        if not (-90.0 <= self.south < self.north <= 90.0):
            raise ValueError(f"invalid latitude bounds [{self.south}, {self.north}]")

    @classmethod
    def from_dict(cls, d: dict) -> "GeoBounds":
        return cls(float(d["west"]), float(d["east"]), float(d["south"]), float(d["north"]))


def sinu_forward(lat, lon, params: SinusoidalParams = SinusoidalParams()):
    """Geographic degrees to sinusoidal ``(x, y)`` in km. Accepts arrays."""
    phi = np.radians(lat)
    lam = np.radians(lon)
    r = params.sphere_radius_km
    x = r * lam * np.cos(phi)
    y = r * phi
    if np.ndim(x) == 0:
        return float(x), float(y)
    return x, y


def sinu_inverse(x, y, params: SinusoidalParams = SinusoidalParams()):
    """Sinusoidal km to geographic ``(lat, lon)`` degrees.

    Longitude is reported as 0 at the poles. Raises ``ValueError`` when
    ``|y|`` exceeds the pole ordinate ``R*pi/2``.
    """
    r = params.sphere_radius_km
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    half = r * math.pi / 2
    if np.any(np.abs(y) > half * (1 + 1e-12)):
        raise ValueError(f"|y| exceeds the pole ordinate {half:.6f} km")
    phi = np.clip(y / r, -math.pi / 2, math.pi / 2)
    cos_phi = np.cos(phi)
    at_pole = np.abs(np.abs(phi) - math.pi / 2) < 1e-15
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.where(at_pole, 0.0, x / (r * np.where(at_pole, 1.0, cos_phi)))
    lat = np.degrees(phi)
    lat = np.where(at_pole, np.sign(phi) * 90.0, lat)
    lon = np.degrees(lam)
    if lat.ndim == 0:
        return float(lat), float(lon)
    return lat, lon


def cell_center(grid: Grid, row: int, col: int) -> tuple[float, float]:
    """Center ``(lat, lon)`` of cell ``(row, col)``; row 0 is northernmost."""
    if not (0 <= row < grid.nrows and 0 <= col < grid.ncols):
        raise IndexError(f"cell ({row}, {col}) outside {grid.nrows}x{grid.ncols} grid")
    lon = grid.xll + (col + 0.5) * grid.cellsize
    lat = grid.yll + (grid.nrows - row - 0.5) * grid.cellsize
    return lat, lon


def reproject_to_geographic(
    src: Grid,
    target: GeoBounds,
    cellsize: float,
    params: SinusoidalParams = SinusoidalParams(),
) -> Grid:
    """Resample a sinusoidal grid onto a regular lat/lon grid.

    Each target cell takes the value of the source cell containing the
    projected target cell center. Target cells projecting outside the
    source become nodata.
    """
    if src.projection != SINUSOIDAL:
        raise ValueError("source grid is not declared sinusoidal")
    if not cellsize > 0:
        raise ValueError("cellsize must be positive")
    if src.ncols * src.cellsize <= 0 or src.nrows * src.cellsize <= 0:
        raise ValueError("degenerate source extent")
    ncols = int(round((target.east - target.west) / cellsize))
    nrows = int(round((target.north - target.south) / cellsize))
    if ncols < 1 or nrows < 1:
        raise ValueError("target bounds smaller than one cell")

    lats = target.south + (nrows - np.arange(nrows) - 0.5) * cellsize
    lons = target.west + (np.arange(ncols) + 0.5) * cellsize
    lat2d, lon2d = np.meshgrid(lats, lons, indexing="ij")
    x, y = sinu_forward(lat2d, lon2d, params)

    col = np.floor((x - src.xll) / src.cellsize).astype(np.int64)
    row_from_south = np.floor((y - src.yll) / src.cellsize).astype(np.int64)
    row = src.nrows - 1 - row_from_south
    inside = (col >= 0) & (col < src.ncols) & (row >= 0) & (row < src.nrows)

    out = np.full((nrows, ncols), src.nodata, dtype=np.float64)
    out[inside] = src.values[row[inside], col[inside]]
    return Grid(ncols, nrows, target.west, target.south, cellsize, out, src.nodata, GEOGRAPHIC)


def subset(grid: Grid, bounds: GeoBounds) -> Grid:
    """Rows and columns whose cell centers fall inside ``bounds`` (edges inclusive)."""
    eps = 1e-9 * grid.cellsize
    lats = grid.georef.lats()
    lons = grid.georef.lons()
    rows = np.flatnonzero((lats >= bounds.south - eps) & (lats <= bounds.north + eps))
    cols = np.flatnonzero((lons >= bounds.west - eps) & (lons <= bounds.east + eps))
    if rows.size == 0 or cols.size == 0:
        raise ValueError("bounds do not intersect the grid")
    r0, r1 = int(rows[0]), int(rows[-1]) + 1
    c0, c1 = int(cols[0]), int(cols[-1]) + 1
    if (r0, r1, c0, c1) == (0, grid.nrows, 0, grid.ncols):
        return grid
    return Grid(
        c1 - c0,
        r1 - r0,
        grid.xll + c0 * grid.cellsize,
        grid.yll + (grid.nrows - r1) * grid.cellsize,
        grid.cellsize,
        grid.values[r0:r1, c0:c1],
        grid.nodata,
        grid.projection,
    )
