"""Config-driven multi-day extraction run."""

from __future__ import annotations

import json
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Optional

import numpy as np

from tcprecip import report
from tcprecip.cluster import (
    BinaryMask,
    NoClusterError,
    extract_cluster_grid,
    label_components,
    make_mask,
    select_cyclone_cluster,
)
from tcprecip.geo_project import GeoBounds, SinusoidalParams, reproject_to_geographic, subset
from tcprecip.grid_io import (
    SINUSOIDAL,
    GeoRef,
    Grid,
    PolygonSet,
    Track,
    TrackPoint,
    read_ascii_grid,
    read_geojson_polygons,
    read_track_csv,
    write_ascii_grid,
)
from tcprecip.zonal import (
    AreaModel,
    FootprintArea,
    ZoneMap,
    ZoneStats,
    assign_zones,
    cluster_centroid,
    footprint_area,
    region_stats,
    row_areas,
    union_footprint,
    zonal_stats,
)

log = logging.getLogger(__name__)


class ConfigError(Exception):
    """Bad configuration or missing input; maps to exit status 2."""


@dataclass(frozen=True)
class DayConfig:
    day_id: str
    date: date
    grid_path: Path
    threshold_mm: float
    grid_path_text: str = ""


@dataclass(frozen=True)
class RunConfig:
    days: tuple[DayConfig, ...]
    track_path: Path
    boundaries_path: Optional[Path] = None
    study_bounds: Optional[GeoBounds] = None
    trace_mm: float = 0.1
    default_threshold_mm: float = 0.9
    reproject: bool = False
    sphere_radius_km: float = 6371.0
    target_cellsize_deg: float = 0.1
    connectivity: int = 4
    area_mode: str = "spherical"
    echo: dict = field(default_factory=dict, compare=False)


def _resolve(base: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def load_config(path, area_mode=None, connectivity=None) -> RunConfig:
    """Read and validate a JSON run configuration.

    Relative paths resolve against the config file's directory. ``area_mode``
    and ``connectivity`` override the config file when given.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    base = path.parent

    try:
        default_threshold = float(raw.get("default_threshold_mm", 0.9))
        trace = float(raw.get("trace_mm", 0.1))
        radius = float(raw.get("sphere_radius_km", 6371.0))
        target_cellsize = float(raw.get("target_cellsize_deg", 0.1))
        conn = int(connectivity if connectivity is not None else raw.get("connectivity", 4))
        mode = area_mode or raw.get("area_mode", "spherical")
        AreaModel(radius, mode)
        if conn not in (4, 8):
            raise ValueError(f"connectivity must be 4 or 8, got {conn}")
        if not default_threshold > 0:
            raise ValueError("default_threshold_mm must be positive")

        if "track_path" not in raw:
            raise ConfigError("config is missing track_path")
        track_path = _resolve(base, raw["track_path"])
        if not track_path.is_file():
            raise ConfigError(f"track file not found: {track_path}")
        boundaries_path = None
        if raw.get("boundaries_path"):
            boundaries_path = _resolve(base, raw["boundaries_path"])
            if not boundaries_path.is_file():
                raise ConfigError(f"boundaries file not found: {boundaries_path}")
        bounds = GeoBounds.from_dict(raw["study_bounds"]) if raw.get("study_bounds") else None

        days = []
        for entry in raw.get("days") or []:
            grid_path = _resolve(base, entry["grid_path"])
            if not grid_path.is_file():
                raise ConfigError(f"grid file for {entry['day_id']} not found: {grid_path}")
            threshold = float(entry.get("threshold_mm", default_threshold))
            if not threshold > 0:
                raise ValueError(f"threshold_mm for {entry['day_id']} must be positive")
            days.append(DayConfig(
                str(entry["day_id"]), date.fromisoformat(entry["date"]), grid_path, threshold,
                entry["grid_path"],
            ))
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from None

    if not days:
        raise ConfigError("config lists no days")
    ids = [d.day_id for d in days]
    if len(set(ids)) != len(ids):
        raise ConfigError("day_id values must be unique")
    if any(a.date >= b.date for a, b in zip(days, days[1:])):
        raise ConfigError("day dates must be strictly increasing")

    echo = {
        "days": [
            {"day_id": d.day_id, "date": d.date.isoformat(), "grid_path": d.grid_path_text,
             "threshold_mm": d.threshold_mm}
            for d in days
        ],
        "track_path": raw["track_path"],
        "boundaries_path": raw.get("boundaries_path"),
        "study_bounds": raw.get("study_bounds"),
        "trace_mm": trace,
        "default_threshold_mm": default_threshold,
        "reproject": bool(raw.get("reproject", False)),
        "sphere_radius_km": radius,
        "target_cellsize_deg": target_cellsize,
        "connectivity": conn,
        "area_mode": mode,
    }
    return RunConfig(
        tuple(days), track_path, boundaries_path, bounds, trace, default_threshold,
        bool(raw.get("reproject", False)), radius, target_cellsize, conn, mode, echo,
    )


@dataclass
class DayResult:
    day_id: str
    date: date
    status: str  # "ok", "no_cluster" or "failed"
    message: Optional[str] = None
    mask_pixels: int = 0
    cluster_pixels: int = 0
    centroid: Optional[tuple[float, float]] = None
    fix: Optional[TrackPoint] = None
    cluster_stats: Optional[ZoneStats] = None
    region_stats: Optional[ZoneStats] = None
    zone_stats: list = field(default_factory=list)
    cluster_grid: Optional[Grid] = None
    cluster_mask: Optional[BinaryMask] = None


@dataclass
class RunResult:
    days: list[DayResult]
    zone_names: tuple[str, ...]
    config: dict
    footprint_area: Optional[FootprintArea] = None
    footprint_grid: Optional[Grid] = None
    errors: list[str] = field(default_factory=list)

    @property
    def stats_rows(self) -> list[ZoneStats]:
        rows = []
        for d in self.days:
            if d.cluster_stats is not None:
                rows.append(d.cluster_stats)
                rows.append(d.region_stats)
                rows.extend(d.zone_stats)
        return rows

    @property
    def failed(self) -> bool:
        return bool(self.errors) or any(d.status == "failed" for d in self.days)


class _ZoneMaps:
    """Zone rasters shared across days, built once per georeferencing."""

    def __init__(self, polys: Optional[PolygonSet]):
        self.polys = polys
        self._cache: dict[GeoRef, ZoneMap] = {}
        self._lock = threading.Lock()

    def get(self, georef: GeoRef) -> ZoneMap:
        with self._lock:
            if georef not in self._cache:
                if self.polys is None:
                    self._cache[georef] = ZoneMap.empty(georef)
                else:
                    self._cache[georef] = assign_zones(georef, self.polys)
            return self._cache[georef]


def preprocess(grid: Grid, cfg: RunConfig) -> Grid:
    """Optional reprojection, then subsetting to the study bounds."""
    if grid.projection == SINUSOIDAL:
        if not cfg.reproject:
            raise ValueError("grid is sinusoidal; set reproject to true to resample it")
        if cfg.study_bounds is None:
            raise ValueError("reprojection needs study_bounds")
        grid = reproject_to_geographic(
            grid, cfg.study_bounds, cfg.target_cellsize_deg, SinusoidalParams(cfg.sphere_radius_km)
        )
    if cfg.study_bounds is not None:
        grid = subset(grid, cfg.study_bounds)
    return grid


def process_day(day: DayConfig, cfg: RunConfig, track: Track, zones: _ZoneMaps) -> DayResult:
    """Run one day through mask, label, select, extract and stats.

    Never raises: failures come back as a ``failed`` result naming the stage.
    """
    result = DayResult(day.day_id, day.date, "failed")
    stage = "read"
    try:
        grid = read_ascii_grid(day.grid_path.read_bytes())
        stage = "preprocess"
        grid = preprocess(grid, cfg)
        stage = "mask"
        mask = make_mask(grid, day.threshold_mm)
        result.mask_pixels = mask.count
        stage = "label"
        labeled = label_components(mask, cfg.connectivity)
        stage = "track"
        fix = track.fix_for_date(day.date)
        result.fix = fix
        stage = "zones"
        zone_map = zones.get(grid.georef)
        model = AreaModel(cfg.sphere_radius_km, cfg.area_mode)
        areas = row_areas(grid.georef, model)
        stage = "select"
        try:
            cluster = select_cyclone_cluster(labeled, fix, grid, cfg.sphere_radius_km, day.day_id)
        except NoClusterError as exc:
            result.status = "no_cluster"
            result.message = str(exc)
            cluster_grid = grid.with_values(np.full(grid.values.shape, grid.nodata))
        else:
            result.status = "ok"
            result.cluster_pixels = cluster.size
            result.centroid = cluster_centroid(cluster, grid)
            result.cluster_mask = cluster.to_mask(grid.georef)
            stage = "extract"
            cluster_grid = extract_cluster_grid(grid, cluster)
        result.cluster_grid = cluster_grid
        stage = "stats"
        everything = np.ones(grid.georef.shape, dtype=bool)
        result.cluster_stats = region_stats(
            cluster_grid, everything, report.CLUSTER_ZONE, cfg.trace_mm, model, day.day_id, day.date, areas
        )
        result.region_stats = region_stats(
            cluster_grid, zone_map.indices >= 0, report.REGION_ZONE, cfg.trace_mm, model,
            day.day_id, day.date, areas,
        )
        result.zone_stats = zonal_stats(cluster_grid, zone_map, cfg.trace_mm, model, day.day_id, day.date)
    except Exception as exc:  # isolate one bad day from the rest of the run
        result.status = "failed"
        result.message = f"{stage}: {exc}"
        log.debug("day %s failed", day.day_id, exc_info=True)
    return result


def run(cfg: RunConfig, threads: int = 1) -> RunResult:
    """Process every configured day, then the multi-day footprint.

    Raises :class:`ConfigError` when the track or boundaries cannot be read.
    Output is independent of ``threads``.
    """
    try:
        track = read_track_csv(cfg.track_path.read_bytes())
    except ValueError as exc:
        raise ConfigError(f"cannot read track {cfg.track_path}: {exc}") from None
    polys = None
    if cfg.boundaries_path is not None:
        try:
            polys = read_geojson_polygons(cfg.boundaries_path.read_bytes())
        except ValueError as exc:
            raise ConfigError(f"cannot read boundaries {cfg.boundaries_path}: {exc}") from None
        clash = {report.CLUSTER_ZONE, report.REGION_ZONE} & set(polys.names)
        if clash:
            raise ConfigError(f"zone names {sorted(clash)} are reserved")
    zones = _ZoneMaps(polys)
    zone_names = tuple(polys.names) if polys else ()

    workers = threads if threads > 0 else (os.cpu_count() or 1)
    if workers == 1:
        days = [process_day(d, cfg, track, zones) for d in cfg.days]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            days = list(pool.map(lambda d: process_day(d, cfg, track, zones), cfg.days))

    result = RunResult(days, zone_names, cfg.echo)
    masks = [d.cluster_mask for d in days if d.cluster_mask is not None]
    if masks:
        try:
            fp = union_footprint(masks, [d.day_id for d in days if d.cluster_mask is not None])
            zone_map = zones.get(fp.georef)
            result.footprint_area = footprint_area(
                fp, zone_map, AreaModel(cfg.sphere_radius_km, cfg.area_mode)
            )
            g = fp.georef
            result.footprint_grid = Grid(
                g.ncols, g.nrows, g.xll, g.yll, g.cellsize,
                np.where(fp.bits, 1.0, -9999.0), -9999.0, g.projection,
            )
        except ValueError as exc:
            result.errors.append(f"footprint: {exc}")
    else:
        result.footprint_area = FootprintArea(0.0, {name: 0.0 for name in zone_names})
    return result


def _mean_or_zero(stats: Optional[ZoneStats]) -> float:
    return stats.mean_mm if stats is not None and stats.mean_mm is not None else 0.0


def write_outputs(result: RunResult, out_dir) -> list[Path]:
    """Write CSV tables, summary JSON, cluster grids and SVG charts."""
    out = Path(out_dir)
    (out / "clusters").mkdir(parents=True, exist_ok=True)
    written = []

    def put(name: str, text: str):
        p = out / name
        p.write_text(text)
        written.append(p)

    put("stats.csv", report.write_stats_csv(result.stats_rows))
    put("pixel_counts.csv", report.write_pixel_counts_csv(result.days))
    if result.footprint_area is not None:
        put("footprint.csv", report.write_footprint_csv(result.footprint_area))
    put("summary.json", report.write_summary_json(result))
    for d in result.days:
        if d.cluster_grid is not None:
            put(f"clusters/{d.day_id}.asc", write_ascii_grid(d.cluster_grid))
    if result.footprint_grid is not None:
        put("footprint.asc", write_ascii_grid(result.footprint_grid))

    day_ids = [d.day_id for d in result.days]
    put("pixel_counts.svg", report.render_bar_chart_svg(
        {
            "Mask": [(d.day_id, d.mask_pixels) for d in result.days],
            "Extracted cluster": [(d.day_id, d.cluster_pixels) for d in result.days],
        },
        "Pixel count of mask and extracted cluster", "pixels",
    ))
    put("daily_mean_rainfall.svg", report.render_bar_chart_svg(
        {
            "Cluster": [(d.day_id, _mean_or_zero(d.cluster_stats)) for d in result.days],
            "Zones": [(d.day_id, _mean_or_zero(d.region_stats)) for d in result.days],
        },
        "Average daily rainfall", "mm per 24 h",
    ))
    if result.zone_names:
        put("zone_rainfall.svg", report.render_bar_chart_svg(
            {
                name: [
                    (d.day_id, _mean_or_zero(d.zone_stats[z]) if d.zone_stats else 0.0)
                    for d in result.days
                ]
                for z, name in enumerate(result.zone_names)
            },
            "Rainfall per zone", "mm per 24 h",
        ))
    put("daily_area.svg", report.render_bar_chart_svg(
        {
            "Cluster": [(i, d.cluster_stats.area_km2 if d.cluster_stats else 0.0)
                        for i, d in zip(day_ids, result.days)],
            "Zones": [(i, d.region_stats.area_km2 if d.region_stats else 0.0)
                      for i, d in zip(day_ids, result.days)],
        },
        "Area with significant rainfall", "km2",
    ))
    if result.footprint_area is not None:
        fa = result.footprint_area
        bars = list(fa.per_zone_km2.items())
        bars.append((report.REGION_ZONE, sum(fa.per_zone_km2.values())))
        bars.append((report.CLUSTER_ZONE, fa.total_km2))
        put("footprint_area.svg", report.render_bar_chart_svg(
            bars, "Total area covered by the extracted clusters", "km2"
        ))
    return written
