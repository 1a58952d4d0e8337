"""Thresholding, connected-component labeling and cyclone cluster selection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from tcprecip.grid_io import GeoRef, Grid

EARTH_RADIUS_KM = 6371.0


class NoClusterError(ValueError):
    """The mask for a day holds no connected component."""


@dataclass(frozen=True)
class MaskConfig:
    threshold_mm: float = 0.9
    trace_mm: float = 0.1
    connectivity: int = 4

    def __post_init__(self):
        if not self.threshold_mm > 0:
            raise ValueError("threshold_mm must be positive")
        if self.trace_mm < 0:
            raise ValueError("trace_mm must be non-negative")
        if self.connectivity not in (4, 8):
            raise ValueError(f"connectivity must be 4 or 8, got {self.connectivity}")


@dataclass(frozen=True, eq=False)
class BinaryMask:
    georef: GeoRef
    bits: np.ndarray

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool)
        if bits.shape != self.georef.shape:
            raise ValueError(f"mask shape {bits.shape} does not match georef {self.georef.shape}")
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.georef == other.georef and np.array_equal(self.bits, other.bits)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class LabeledGrid:
    """Component labels: 0 is background, components are 1..component_count.

    ``component_sizes[k]`` is the pixel count of label ``k``; entry 0 is 0.
    """

    georef: GeoRef
    labels: np.ndarray
    component_count: int
    component_sizes: np.ndarray


@dataclass(frozen=True, eq=False)
class Cluster:
    label: int
    pixels: np.ndarray  # (n, 2) array of (row, col), row-major order
    source_day: str = ""

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.int64).reshape(-1, 2)
        if pixels.shape[0] == 0:
            raise ValueError("cluster has no pixels")
        pixels.flags.writeable = False
        object.__setattr__(self, "pixels", pixels)

    @property
    def size(self) -> int:
        return int(self.pixels.shape[0])

    def to_mask(self, georef: GeoRef) -> BinaryMask:
        bits = np.zeros(georef.shape, dtype=bool)
        bits[self.pixels[:, 0], self.pixels[:, 1]] = True
        return BinaryMask(georef, bits)


def make_mask(grid: Grid, threshold_mm: float) -> BinaryMask:
    """True where the cell holds a measurement strictly above ``threshold_mm``."""
    return BinaryMask(grid.georef, grid.valid & (grid.values > threshold_mm))


def _find(parent: list[int], i: int) -> int:
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


def label_components(mask: BinaryMask, connectivity: int = 4) -> LabeledGrid:
    """Label connected components of ``mask``.

    Two passes over horizontal runs of true pixels. The first pass gives
    every run a provisional label and records equivalences with the runs it
    touches in the row above in a union-find forest. The second pass
    resolves each run to its root and renumbers roots 1..K in row-major
    order of first appearance.
    """
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    bits = mask.bits
    nrows, ncols = bits.shape
    width = ncols + 2

    padded = np.zeros((nrows, ncols + 2), dtype=np.int8)
    padded[:, 1:-1] = bits
    edges = np.diff(padded, axis=1)
    run_row, run_start = np.nonzero(edges == 1)
    _, run_end = np.nonzero(edges == -1)
    nruns = run_row.size
    labels = np.zeros((nrows, ncols), dtype=np.int32)
    if nruns == 0:
        return LabeledGrid(mask.georef, labels, 0, np.zeros(1, dtype=np.int64))

    # Keys order runs globally; a run in row r only reaches runs of row r-1.
    start_key = run_row * width + run_start
    end_key = run_row * width + run_end
    reach = 1 if connectivity == 8 else 0
    above = (run_row - 1) * width
    lo = np.searchsorted(end_key, above + run_start - reach, side="right")
    hi = np.searchsorted(start_key, above + run_end + reach, side="left")
    lo[run_row == 0] = 0
    hi[run_row == 0] = 0
    n_links = np.maximum(hi - lo, 0)

    parent = list(range(nruns))
    if n_links.any():
        src = np.repeat(np.arange(nruns), n_links)
        offsets = np.arange(src.size) - np.repeat(np.cumsum(n_links) - n_links, n_links)
        dst = np.repeat(lo, n_links) + offsets
        for a, b in zip(src.tolist(), dst.tolist()):
            ra, rb = _find(parent, a), _find(parent, b)
            if ra != rb:
                if ra < rb:
                    parent[rb] = ra
                else:
                    parent[ra] = rb

    final = np.empty(nruns, dtype=np.int32)
    renumber: dict[int, int] = {}
    for i in range(nruns):
        root = _find(parent, i)
        if root not in renumber:
            renumber[root] = len(renumber) + 1
        final[i] = renumber[root]
    count = len(renumber)

    flat = np.zeros(nrows * ncols + 1, dtype=np.int64)
    np.add.at(flat, run_row * ncols + run_start, final)
    np.add.at(flat, run_row * ncols + run_end, -final)
    labels = np.cumsum(flat[:-1]).astype(np.int32).reshape(nrows, ncols)

    sizes = np.zeros(count + 1, dtype=np.int64)
    np.add.at(sizes, final, run_end - run_start)
    return LabeledGrid(mask.georef, labels, count, sizes)


def haversine_km(lat1, lon1, lat2, lon2, radius_km: float = EARTH_RADIUS_KM):
    """Great-circle distance on a sphere. Accepts arrays."""
    p1 = np.radians(lat1)
    p2 = np.radians(lat2)
    dphi = p2 - p1
    dlam = np.radians(np.asarray(lon2) - np.asarray(lon1))
    a = np.sin(dphi / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlam / 2) ** 2
    return 2 * radius_km * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def _fix_coords(fix) -> tuple[float, float]:
    if hasattr(fix, "lat"):
        return float(fix.lat), float(fix.lon)
    lat, lon = fix
    return float(lat), float(lon)


def select_cyclone_cluster(
    labeled: LabeledGrid,
    fix,
    grid: Grid,
    radius_km: float = EARTH_RADIUS_KM,
    day_id: str = "",
) -> Cluster:
    """Pick the component attributed to the cyclone center ``fix``.

    The component under the fix wins. Otherwise the component whose nearest
    pixel center is closest to the fix by great-circle distance is taken;
    ties go to the larger component, then to the smaller label.

    Parameters
    ----------
    labeled : LabeledGrid
    fix : TrackPoint or (lat, lon)
    grid : Grid
        Grid the labeling was derived from; supplies georeferencing.
    """
    if labeled.component_count == 0:
        raise NoClusterError("no precipitation cluster on this day")
    lat, lon = _fix_coords(fix)
    labels = labeled.labels

    col = math.floor((lon - grid.xll) / grid.cellsize)
    row = grid.nrows - 1 - math.floor((lat - grid.yll) / grid.cellsize)
    chosen = 0
    if 0 <= row < grid.nrows and 0 <= col < grid.ncols:
        chosen = int(labels[row, col])

    if chosen == 0:
        rows, cols = np.nonzero(labels)
        georef = grid.georef
        dist = haversine_km(lat, lon, georef.lats()[rows], georef.lons()[cols], radius_km)
        best = np.full(labeled.component_count + 1, np.inf)
        np.minimum.at(best, labels[rows, cols], dist)
        dmin = best.min()
        tied = np.flatnonzero(best == dmin)
        sizes = labeled.component_sizes[tied]
        chosen = int(tied[sizes == sizes.max()].min())

    rows, cols = np.nonzero(labels == chosen)
    return Cluster(chosen, np.column_stack([rows, cols]), day_id)


def extract_cluster_grid(grid: Grid, cluster: Cluster) -> Grid:
    """Copy of ``grid`` keeping only cluster pixels; everything else is nodata."""
    r, c = cluster.pixels[:, 0], cluster.pixels[:, 1]
    if r.min() < 0 or c.min() < 0 or r.max() >= grid.nrows or c.max() >= grid.ncols:
        raise ValueError("cluster pixels fall outside the grid")
    out = np.full(grid.values.shape, grid.nodata, dtype=np.float64)
    out[r, c] = grid.values[r, c]
    return grid.with_values(out)


def pixel_counts(mask: BinaryMask, cluster: Cluster) -> tuple[int, int]:
    """``(mask pixel count, cluster pixel count)``."""
    return mask.count, cluster.size
