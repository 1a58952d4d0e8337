"""Synthetic Gaussian precipitation fields with known blob membership."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from datetime import date, timedelta
from pathlib import Path
from typing import Sequence

import numpy as np

from tcprecip.grid_io import GeoRef, Grid, read_ascii_grid, write_ascii_grid


@dataclass(frozen=True)
class BlobSpec:
    center: tuple[float, float]  # (lat, lon)
    amplitude_mm: float
    sigma_deg: float
    id: str = ""

    def __post_init__(self):
        if not self.amplitude_mm > 0:
            raise ValueError("amplitude_mm must be positive")
        if not self.sigma_deg > 0:
            raise ValueError("sigma_deg must be positive")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    def disk_radius(self, threshold_mm: float) -> float:
        """Radius in degrees of the lone-blob region above ``threshold_mm``."""
        if threshold_mm >= self.amplitude_mm:
            return 0.0
        return self.sigma_deg * math.sqrt(2.0 * math.log(self.amplitude_mm / threshold_mm))

    @classmethod
    def from_dict(cls, d: dict) -> "BlobSpec":
        return cls(tuple(d["center"]), float(d["amplitude_mm"]), float(d["sigma_deg"]), str(d.get("id", "")))


def render_field(blobs: Sequence[BlobSpec], georef: GeoRef, nodata: float = -9999.0):
    """Sum of Gaussian blobs sampled at cell centers.

    Distances are planar, in degrees. Returns the grid and an integer array
    giving, per cell, the index of the blob contributing the most.
    """
    if not blobs:
        raise ValueError("need at least one blob")
    lat = georef.lats()[:, None]
    lon = georef.lons()[None, :]
    contrib = np.empty((len(blobs),) + georef.shape)
    for i, b in enumerate(blobs):
        d2 = (lat - b.center[0]) ** 2 + (lon - b.center[1]) ** 2
        contrib[i] = b.amplitude_mm * np.exp(-d2 / (2.0 * b.sigma_deg**2))
    field = contrib.sum(axis=0)
    owner = np.argmax(contrib, axis=0).astype(np.int32)
    grid = Grid(
        georef.ncols, georef.nrows, georef.xll, georef.yll, georef.cellsize,
        field, nodata, georef.projection,
    )
    return grid, owner


def truth_sidecar(
    blobs: Sequence[BlobSpec], grid: Grid, owner: np.ndarray, threshold_mm: float
) -> dict:
    """Ground truth per blob: owned cells and the cells above ``threshold_mm``."""
    above = grid.valid & (grid.values > threshold_mm)
    per_blob = {}
    for i, b in enumerate(blobs):
        mine = owner == i
        vals = grid.values[mine & above]
        per_blob[b.id or str(i)] = {
            "owned_pixels": int(np.count_nonzero(mine)),
            "above_threshold_pixels": int(vals.size),
            "above_threshold_sum_mm": float(vals.sum()),
            "above_threshold_max_mm": float(vals.max()) if vals.size else None,
        }
    return {
        "grid": asdict(grid.georef),
        "threshold_mm": threshold_mm,
        "blobs": [
            {"id": b.id or str(i), "center": list(b.center), "amplitude_mm": b.amplitude_mm,
             "sigma_deg": b.sigma_deg}
            for i, b in enumerate(blobs)
        ],
        "truth": per_blob,
    }


def write_synthetic(
    blobs: Sequence[BlobSpec], georef: GeoRef, grid_path: Path, threshold_mm: float = 0.9
) -> dict:
    """Write a rendered grid and its ``.truth.json`` sidecar.

    Truth counts are taken from the grid as re-read from disk, so they match
    what a reader of the file sees after rounding.
    """
    grid, owner = render_field(blobs, georef)
    text = write_ascii_grid(grid)
    grid_path = Path(grid_path)
    grid_path.write_text(text)
    truth = truth_sidecar(blobs, read_ascii_grid(text), owner, threshold_mm)
    sidecar_path(grid_path).write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n")
    return truth


def sidecar_path(grid_path: Path) -> Path:
    grid_path = Path(grid_path)
    return grid_path.with_name(grid_path.stem + ".truth.json")


def _rect(west, south, east, north):
    return [[west, south], [east, south], [east, north], [west, north], [west, south]]


def make_demo_scenario(
    out_dir: Path,
    ndays: int = 3,
    size: int = 400,
    start: date = date(2023, 6, 13),
) -> Path:
    """Write a multi-day synthetic scenario and return its config path.

    The grid covers 60-100E, 0-40N at ``40/size`` degrees. A cyclone blob
    travels along a straight track sampled at 03 UTC and a stationary
    distractor blob sits far to the south-east. Two rectangular zones
    ("West", "East") split the land part of the domain.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cellsize = 40.0 / size
    georef = GeoRef(size, size, 60.0, 0.0, cellsize)
    threshold = 0.9

    start_fix = (15.0, 66.0)
    end_fix = (23.3, 70.6)
    days = []
    track_lines = ["timestamp,lat,lon,label"]
    for k in range(ndays):
        w = k / max(ndays - 1, 1)
        lat = start_fix[0] + w * (end_fix[0] - start_fix[0])
        lon = start_fix[1] + w * (end_fix[1] - start_fix[1])
        day = start + timedelta(days=k)
        day_id = f"D{k + 1}"
        blobs = [
            BlobSpec((lat, lon), 60.0 - 10.0 * k, 1.5, "cyclone"),
            BlobSpec((5.0, 90.0), 20.0, 1.0, "distractor"),
        ]
        grid_path = out_dir / f"{day_id}.asc"
        write_synthetic(blobs, georef, grid_path, threshold)
        track_lines.append(f"{day.isoformat()}T03:00Z,{lat:.4f},{lon:.4f},SYN")
        days.append({"day_id": day_id, "date": day.isoformat(), "grid_path": grid_path.name})

    (out_dir / "track.csv").write_text("\n".join(track_lines) + "\n")
    boundaries = {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "properties": {"name": name},
                "geometry": {"type": "Polygon", "coordinates": [_rect(*box)]},
            }
            for name, box in (("West", (64.0, 16.0, 68.0, 30.0)), ("East", (68.0, 16.0, 76.0, 30.0)))
        ],
    }
    (out_dir / "boundaries.geojson").write_text(json.dumps(boundaries, indent=2) + "\n")
    config = {
        "days": days,
        "track_path": "track.csv",
        "boundaries_path": "boundaries.geojson",
        "study_bounds": {"west": 60.0, "east": 100.0, "south": 0.0, "north": 40.0},
        "trace_mm": 0.1,
        "default_threshold_mm": threshold,
    }
    config_path = out_dir / "config.json"
    config_path.write_text(json.dumps(config, indent=2) + "\n")
    return config_path
