"""Rainfall and area statistics over extracted clusters and administrative zones."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date
from typing import Optional, Sequence

import numpy as np

from tcprecip.cluster import BinaryMask, Cluster
from tcprecip.grid_io import GeoRef, Grid, PolygonSet

EARTH_RADIUS_KM = 6371.0
SPHERICAL = "spherical"
FLAT = "flat"


@dataclass(frozen=True)
class AreaModel:
    """How a cell's ground area is computed.

    ``spherical`` integrates the cell on a sphere, so cells shrink towards
    the poles. ``flat`` treats every cell as a square of side
    ``R * cellsize`` regardless of latitude.
    """

    sphere_radius_km: float = EARTH_RADIUS_KM
    mode: str = SPHERICAL

    def __post_init__(self):
        if not self.sphere_radius_km > 0:
            raise ValueError("sphere_radius_km must be positive")
        if self.mode not in (SPHERICAL, FLAT):
            raise ValueError(f"area mode must be 'spherical' or 'flat', got {self.mode!r}")


def cell_area(lat_center, cellsize: float, model: AreaModel = AreaModel()):
    """Area in km² of a ``cellsize``-degree cell centred at ``lat_center``.

    Accepts a scalar or an array of latitudes.
    """
    lat = np.asarray(lat_center, dtype=np.float64)
    half = cellsize / 2.0
    if np.any(np.abs(lat) + half > 90.0 + 1e-9):
        raise ValueError("cell extends beyond a pole")
    r = model.sphere_radius_km
    dlam = math.radians(cellsize)
    if model.mode == FLAT:
        area = np.full(lat.shape, (r * dlam) ** 2)
    else:
        top = np.radians(np.minimum(lat + half, 90.0))
        bottom = np.radians(np.maximum(lat - half, -90.0))
        area = r * r * dlam * (np.sin(top) - np.sin(bottom))
    return float(area) if area.ndim == 0 else area


def row_areas(georef: GeoRef, model: AreaModel = AreaModel()) -> np.ndarray:
    """Cell area for each grid row, north first."""
    return cell_area(georef.lats(), georef.cellsize, model)


@dataclass(frozen=True, eq=False)
class ZoneMap:
    """Per-cell zone index into ``zone_names``; -1 marks cells in no zone."""

    georef: GeoRef
    indices: np.ndarray
    zone_names: tuple[str, ...]

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int32)
        if idx.shape != self.georef.shape:
            raise ValueError("zone map shape does not match georeferencing")
        if idx.size and (idx.min() < -1 or idx.max() >= len(self.zone_names)):
            raise ValueError("zone index out of range")
        idx.flags.writeable = False
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "zone_names", tuple(self.zone_names))

    @classmethod
    def empty(cls, georef: GeoRef) -> "ZoneMap":
        return cls(georef, np.full(georef.shape, -1, dtype=np.int32), ())


def _polygon_edges(rings) -> np.ndarray:
    """Edges as rows ``(x_low, y_low, x_high, y_high)`` with ``y_low <= y_high``.

    Ordering each edge by latitude makes the crossing computation identical
    for clockwise and counter-clockwise rings.
    """
    parts = []
    for ring in rings:
        v = np.asarray(ring, dtype=np.float64)
        a, b = v[:-1], v[1:]
        swap = a[:, 1] > b[:, 1]
        lo = np.where(swap[:, None], b, a)
        hi = np.where(swap[:, None], a, b)
        parts.append(np.column_stack([lo, hi]))
    return np.vstack(parts) if parts else np.empty((0, 4))


def _rasterize_polygon(rings, lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
    """Even-odd containment of every cell center, scanning one row at a time.

    An edge is crossed by the eastward ray from a point at latitude ``y``
    when exactly one endpoint lies strictly north of ``y``.
    """
    inside = np.zeros((lats.size, lons.size), dtype=bool)
    edges = _polygon_edges(rings)
    edges = edges[edges[:, 1] != edges[:, 3]]
    if edges.size == 0:
        return inside
    x1, y1, x2, y2 = edges.T
    ymin, ymax = y1.min(), y2.max()
    for i in np.flatnonzero((lats >= ymin) & (lats < ymax)):
        y = lats[i]
        hit = (y1 <= y) & (y < y2)
        if not hit.any():
            continue
        xs = x1[hit] + (y - y1[hit]) * (x2[hit] - x1[hit]) / (y2[hit] - y1[hit])
        xs.sort()
        crossings = xs.size - np.searchsorted(xs, lons, side="right")
        inside[i] = (crossings & 1).astype(bool)
    return inside


def assign_zones(grid, polys: PolygonSet) -> ZoneMap:
    """Rasterize ``polys`` onto the cell centers of ``grid``.

    Cells inside several zones go to the first zone in file order.
    ``grid`` may be a :class:`Grid` or a :class:`GeoRef`.
    """
    georef = grid.georef if isinstance(grid, Grid) else grid
    lats, lons = georef.lats(), georef.lons()
    idx = np.full(georef.shape, -1, dtype=np.int32)
    for z, zone in enumerate(polys.zones):
        covered = np.zeros(georef.shape, dtype=bool)
        for poly in zone.polygons:
            covered |= _rasterize_polygon(poly, lats, lons)
        idx[covered & (idx == -1)] = z
    return ZoneMap(georef, idx, tuple(polys.names))


@dataclass(frozen=True)
class ZoneStats:
    day_id: str
    date: Optional[date]
    zone: str
    mean_mm: Optional[float]
    max_mm: Optional[float]
    max_point: Optional[tuple[float, float]]
    significant_pixel_count: int
    area_km2: float


def _significant(grid: Grid, trace_mm: float) -> np.ndarray:
    return grid.valid & (grid.values > trace_mm)


def cluster_mean(cluster_grid: Grid, trace_mm: float = 0.1) -> tuple[Optional[float], int]:
    """Simple mean over cells above ``trace_mm``; ``(None, 0)`` when there are none."""
    vals = cluster_grid.values[_significant(cluster_grid, trace_mm)]
    if vals.size == 0:
        return None, 0
    return float(vals.mean()), int(vals.size)


def region_stats(
    cluster_grid: Grid,
    region: np.ndarray,
    zone: str,
    trace_mm: float = 0.1,
    model: AreaModel = AreaModel(),
    day_id: str = "",
    day: Optional[date] = None,
    areas: Optional[np.ndarray] = None,
) -> ZoneStats:
    """Statistics over significant cells of ``cluster_grid`` inside boolean ``region``."""
    select = _significant(cluster_grid, trace_mm) & region
    count = int(np.count_nonzero(select))
    if count == 0:
        return ZoneStats(day_id, day, zone, None, None, None, 0, 0.0)
    if areas is None:
        areas = row_areas(cluster_grid.georef, model)
    rows, cols = np.nonzero(select)
    vals = cluster_grid.values[rows, cols]
    k = int(np.argmax(vals))
    georef = cluster_grid.georef
    max_point = (float(georef.lats()[rows[k]]), float(georef.lons()[cols[k]]))
    return ZoneStats(
        day_id,
        day,
        zone,
        float(vals.mean()),
        float(vals[k]),
        max_point,
        count,
        float(areas[rows].sum()),
    )


def zonal_stats(
    cluster_grid: Grid,
    zone_map: ZoneMap,
    trace_mm: float = 0.1,
    model: AreaModel = AreaModel(),
    day_id: str = "",
    day: Optional[date] = None,
) -> list[ZoneStats]:
    """One :class:`ZoneStats` per zone, in zone order.

    Max-point ties resolve to the first cell in row-major order. Area sums
    the cell areas of the significant cells.
    """
    if zone_map.georef.shape != cluster_grid.georef.shape:
        raise ValueError(
            f"zone map shape {zone_map.georef.shape} does not match grid {cluster_grid.georef.shape}"
        )
    areas = row_areas(cluster_grid.georef, model)
    return [
        region_stats(cluster_grid, zone_map.indices == z, name, trace_mm, model, day_id, day, areas)
        for z, name in enumerate(zone_map.zone_names)
    ]


def cluster_centroid(cluster: Cluster, grid: Grid) -> tuple[float, float]:
    """Unweighted mean ``(lat, lon)`` of the cluster's pixel centers."""
    georef = grid.georef
    lats = georef.lats()[cluster.pixels[:, 0]]
    lons = georef.lons()[cluster.pixels[:, 1]]
    return float(lats.mean()), float(lons.mean())


@dataclass(frozen=True, eq=False)
class Footprint:
    georef: GeoRef
    bits: np.ndarray
    day_ids: tuple[str, ...] = field(default_factory=tuple)

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def as_mask(self) -> BinaryMask:
        return BinaryMask(self.georef, self.bits)


def union_footprint(
    daily_clusters: Sequence[BinaryMask], day_ids: Optional[Sequence[str]] = None
) -> Footprint:
    """Per-cell OR of daily cluster masks."""
    masks = list(daily_clusters)
    if not masks:
        raise ValueError("no masks to unite")
    if day_ids is None:
        day_ids = [str(i) for i in range(len(masks))]
    if len(day_ids) != len(masks):
        raise ValueError("day_ids and masks differ in length")
    georef = masks[0].georef
    bits = np.zeros(georef.shape, dtype=bool)
    for m in masks:
        if m.georef != georef:
            raise ValueError("georeferencing mismatch between daily masks")
        bits |= m.bits
    bits.flags.writeable = False
    return Footprint(georef, bits, tuple(day_ids))


@dataclass(frozen=True)
class FootprintArea:
    total_km2: float
    per_zone_km2: dict


def footprint_area(
    footprint: Footprint, zone_map: ZoneMap, model: AreaModel = AreaModel()
) -> FootprintArea:
    """Footprint area in km², overall and per zone."""
    if zone_map.georef.shape != footprint.georef.shape:
        raise ValueError("zone map shape does not match footprint")
    areas = row_areas(footprint.georef, model)
    rows, cols = np.nonzero(footprint.bits)
    cell = areas[rows]
    zones = zone_map.indices[rows, cols]
    per_zone = {
        name: float(cell[zones == z].sum()) for z, name in enumerate(zone_map.zone_names)
    }
    return FootprintArea(float(cell.sum()), per_zone)
