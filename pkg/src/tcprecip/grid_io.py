"""Readers and writers for precipitation grids, best tracks and zone boundaries.

Grids use a plain-text ASCII raster layout::

    NCOLS        400
    NROWS        400
    XLLCORNER    60.0
    YLLCORNER    0.0
    CELLSIZE     0.1
    NODATA_VALUE -9999
    PRECISION    6
    <NROWS lines of NCOLS values, north row first>

Header keys are case-insensitive. ``PRECISION`` (significant digits used for
values) is optional and defaults to 6. An optional ``PROJECTION`` key takes
``GEOGRAPHIC`` (default) or ``SINUSOIDAL``; sinusoidal grids carry their
corner and cell size in kilometres.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from typing import IO, Iterable, Sequence, Union

import numpy as np

DEFAULT_NODATA = -9999.0
DEFAULT_PRECISION = 6
GEOGRAPHIC = "geographic"
SINUSOIDAL = "sinusoidal"

TextSource = Union[str, bytes, IO[str], IO[bytes]]


class GridFormatError(ValueError):
    """Raised when an on-disk artifact does not follow its format."""


def _as_text(source: TextSource) -> str:
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    return source


@dataclass(frozen=True)
class GeoRef:
    """Georeferencing of a raster, without the values."""

    ncols: int
    nrows: int
    xll: float
    yll: float
    cellsize: float
    projection: str = GEOGRAPHIC

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    def lats(self) -> np.ndarray:
        """Cell-center latitudes, one per row, north first."""
        return self.yll + (self.nrows - np.arange(self.nrows) - 0.5) * self.cellsize

    def lons(self) -> np.ndarray:
        """Cell-center longitudes, one per column."""
        return self.xll + (np.arange(self.ncols) + 0.5) * self.cellsize


@dataclass(frozen=True, eq=False)
class Grid:
    """A north-up regular raster of precipitation values.

    ``values[0]`` is the northernmost row. Cells equal to ``nodata`` carry
    no measurement. The value array is stored read-only.
    """

    ncols: int
    nrows: int
    xll: float
    yll: float
    cellsize: float
    values: np.ndarray
    nodata: float = DEFAULT_NODATA
    projection: str = GEOGRAPHIC

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if self.ncols <= 0 or self.nrows <= 0:
            raise ValueError(f"grid dimensions must be positive, got {self.nrows}x{self.ncols}")
        if values.size != self.ncols * self.nrows:
            raise ValueError(
                f"expected {self.ncols * self.nrows} values for a {self.nrows}x{self.ncols} grid, "
                f"got {values.size}"
            )
        values = values.reshape(self.nrows, self.ncols)
        if not self.cellsize > 0:
            raise ValueError(f"cellsize must be positive, got {self.cellsize}")
        if self.projection not in (GEOGRAPHIC, SINUSOIDAL):
            raise ValueError(f"unknown projection {self.projection!r}")
        if self.projection == GEOGRAPHIC:
            if not -180.0 <= self.xll < 180.0:
                raise ValueError(f"xll {self.xll} outside [-180, 180)")
            if self.yll < -90.0 - 1e-9 or self.yll + self.nrows * self.cellsize > 90.0 + 1e-9:
                raise ValueError("grid extends beyond the poles")
        valid = values != self.nodata
        if np.isnan(values[valid]).any():
            raise ValueError("grid contains NaN values that are not the nodata sentinel")
        if (values[valid] < 0).any():
            raise ValueError("precipitation values must be non-negative")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def georef(self) -> GeoRef:
        return GeoRef(self.ncols, self.nrows, self.xll, self.yll, self.cellsize, self.projection)

    @property
    def valid(self) -> np.ndarray:
        """Boolean array, true where a cell holds a measurement."""
        return self.values != self.nodata

    def with_values(self, values: np.ndarray) -> "Grid":
        return Grid(
            self.ncols, self.nrows, self.xll, self.yll, self.cellsize,
            values, self.nodata, self.projection,
        )

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return (
            self.georef == other.georef
            and self.nodata == other.nodata
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


_HEADER_KEYS = {
    "ncols", "nrows", "xllcorner", "yllcorner", "cellsize",
    "nodata_value", "precision", "projection",
}
_REQUIRED_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize")


def _is_numeric(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def read_ascii_grid(text: TextSource) -> Grid:
    """Parse an ASCII grid.

    Parameters
    ----------
    text : str, bytes or file object
        Grid document.

    Returns
    -------
    Grid

    Raises
    ------
    GridFormatError
        On unknown or malformed header keys, wrong row lengths, wrong row
        counts or non-numeric tokens. Messages carry 1-based line numbers.
    """
    lines = _as_text(text).splitlines()
    header: dict[str, str] = {}
    lineno = 0
    for lineno, line in enumerate(lines, start=1):
        parts = line.split()
        if not parts:
            continue
        if _is_numeric(parts[0]):
            lineno -= 1
            break
        if len(parts) != 2:
            raise GridFormatError(f"malformed header line at line {lineno}: {line.strip()!r}")
        key = parts[0].lower()
        if key not in _HEADER_KEYS:
            raise GridFormatError(f"unknown header key {parts[0]!r} at line {lineno}")
        if key in header:
            raise GridFormatError(f"duplicate header key {parts[0]!r} at line {lineno}")
        header[key] = parts[1]
        header[f"_line_{key}"] = str(lineno)
    else:
        lineno = len(lines)

    for key in _REQUIRED_KEYS:
        if key not in header:
            raise GridFormatError(f"missing header key {key.upper()}")

    def _num(key, cast):
        try:
            return cast(header[key])
        except ValueError:
            raise GridFormatError(
                f"bad value {header[key]!r} for {key.upper()} at line {header['_line_' + key]}"
            ) from None

    ncols = _num("ncols", int)
    nrows = _num("nrows", int)
    xll = _num("xllcorner", float)
    yll = _num("yllcorner", float)
    cellsize = _num("cellsize", float)
    nodata = _num("nodata_value", float) if "nodata_value" in header else DEFAULT_NODATA
    if "precision" in header:
        precision = _num("precision", int)
        if precision <= 0:
            raise GridFormatError(f"PRECISION must be positive at line {header['_line_precision']}")
    projection = header.get("projection", GEOGRAPHIC).lower()
    if projection not in (GEOGRAPHIC, SINUSOIDAL):
        raise GridFormatError(
            f"unknown PROJECTION {header['projection']!r} at line {header['_line_projection']}"
        )

    rows = []
    for offset, line in enumerate(lines[lineno:], start=lineno + 1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != ncols:
            raise GridFormatError(f"row length mismatch at line {offset}")
        try:
            rows.append(np.array(tokens, dtype=np.float64))
        except ValueError:
            bad = next(t for t in tokens if not _is_numeric(t))
            raise GridFormatError(f"non-numeric token {bad!r} at line {offset}") from None
    if len(rows) != nrows:
        raise GridFormatError(f"value count mismatch: NROWS is {nrows} but found {len(rows)} rows")

    try:
        return Grid(ncols, nrows, xll, yll, cellsize, np.vstack(rows), nodata, projection)
    except ValueError as exc:
        raise GridFormatError(str(exc)) from None


def _format_header_number(value: float) -> str:
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def write_ascii_grid(grid: Grid, precision: int = DEFAULT_PRECISION) -> str:
    """Serialize ``grid``; values keep ``precision`` significant digits."""
    out = io.StringIO()
    out.write(f"NCOLS {grid.ncols}\n")
    out.write(f"NROWS {grid.nrows}\n")
    out.write(f"XLLCORNER {_format_header_number(grid.xll)}\n")
    out.write(f"YLLCORNER {_format_header_number(grid.yll)}\n")
    out.write(f"CELLSIZE {_format_header_number(grid.cellsize)}\n")
    nodata_text = _format_header_number(grid.nodata)
    out.write(f"NODATA_VALUE {nodata_text}\n")
    out.write(f"PRECISION {precision}\n")
    if grid.projection != GEOGRAPHIC:
        out.write(f"PROJECTION {grid.projection.upper()}\n")
    fmt = f".{precision}g"
    nodata = grid.nodata
    for row in grid.values:
        out.write(" ".join(nodata_text if v == nodata else format(v, fmt) for v in row.tolist()))
        out.write("\n")
    return out.getvalue()


@dataclass(frozen=True)
class TrackPoint:
    timestamp: datetime
    lat: float
    lon: float
    label: str = ""


@dataclass(frozen=True)
class Track:
    """Time-ordered cyclone center fixes."""

    points: tuple[TrackPoint, ...]

    def __post_init__(self):
        points = tuple(self.points)
        if not points:
            raise ValueError("no track points")
        for i, p in enumerate(points):
            if not (-90.0 <= p.lat <= 90.0 and -180.0 <= p.lon <= 180.0):
                raise ValueError(f"track point {i} has out-of-range coordinates ({p.lat}, {p.lon})")
            if i and p.timestamp <= points[i - 1].timestamp:
                raise ValueError(f"track point {i} is not later than point {i - 1}")
        object.__setattr__(self, "points", points)

    def fix_at(self, when: datetime) -> TrackPoint:
        """Position at ``when``, linearly interpolated between fixes.

        Raises ``ValueError`` when ``when`` lies outside the track's time span.
        """
        pts = self.points
        if when < pts[0].timestamp or when > pts[-1].timestamp:
            raise ValueError(
                f"no track fix for {when.isoformat()}: track spans "
                f"{pts[0].timestamp.isoformat()} to {pts[-1].timestamp.isoformat()}"
            )
        for a, b in zip(pts, pts[1:] + (pts[-1],)):
            if a.timestamp == when:
                return a
            if a.timestamp < when < b.timestamp:
                w = (when - a.timestamp) / (b.timestamp - a.timestamp)
                return TrackPoint(
                    when, a.lat + w * (b.lat - a.lat), a.lon + w * (b.lon - a.lon), a.label
                )
        return pts[-1]

    def fix_for_date(self, day: date, hour: int = 3) -> TrackPoint:
        """The fix valid at ``hour`` UTC on ``day`` (03 UTC by default)."""
        when = datetime(day.year, day.month, day.day, hour, tzinfo=timezone.utc)
        return self.fix_at(when)


def parse_timestamp(text: str) -> datetime:
    """Parse an RFC 3339 timestamp and return it in UTC."""
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    stamp = datetime.fromisoformat(text)
    if stamp.tzinfo is None:
        raise ValueError(f"timestamp {text!r} lacks a UTC offset")
    return stamp.astimezone(timezone.utc)


_TRACK_COLUMNS = ["timestamp", "lat", "lon", "label"]


def read_track_csv(text: TextSource) -> Track:
    """Parse a best-track CSV with columns ``timestamp,lat,lon,label``."""
    reader = csv.reader(io.StringIO(_as_text(text)))
    rows = [(n, r) for n, r in enumerate(reader, start=1) if any(c.strip() for c in r)]
    if not rows:
        raise GridFormatError("no track points")
    header = [c.strip().lower() for c in rows[0][1]]
    if header[:3] != _TRACK_COLUMNS[:3]:
        raise GridFormatError(f"track header must be {','.join(_TRACK_COLUMNS)}, got {','.join(header)}")
    points = []
    for lineno, row in rows[1:]:
        if len(row) < 3:
            raise GridFormatError(f"track row {lineno} has {len(row)} fields, expected 4")
        try:
            stamp = parse_timestamp(row[0])
        except ValueError:
            raise GridFormatError(f"unparseable timestamp {row[0]!r} in row {lineno}") from None
        try:
            lat, lon = float(row[1]), float(row[2])
        except ValueError:
            raise GridFormatError(f"non-numeric coordinate in row {lineno}") from None
        if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
            raise GridFormatError(f"out-of-range coordinates ({lat}, {lon}) in row {lineno}")
        if points and stamp <= points[-1].timestamp:
            raise GridFormatError(f"timestamps not increasing at row {lineno} ({row[0].strip()})")
        label = row[3].strip() if len(row) > 3 else ""
        points.append(TrackPoint(stamp, lat, lon, label))
    if not points:
        raise GridFormatError("no track points")
    return Track(tuple(points))


Ring = tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class Zone:
    """A named zone made of one or more polygons.

    Each polygon is a tuple of rings, the first being the outer boundary and
    the rest holes. Vertices are ``(lon, lat)`` pairs.
    """

    name: str
    polygons: tuple[tuple[Ring, ...], ...]

    @property
    def rings(self) -> list[Ring]:
        return [ring for poly in self.polygons for ring in poly]


@dataclass(frozen=True)
class PolygonSet:
    zones: tuple[Zone, ...]

    def __post_init__(self):
        zones = tuple(self.zones)
        seen = set()
        for zone in zones:
            if zone.name in seen:
                raise ValueError(f"duplicate zone name {zone.name!r}")
            seen.add(zone.name)
            for ring in zone.rings:
                _check_ring(ring, zone.name)
        object.__setattr__(self, "zones", zones)

    @property
    def names(self) -> list[str]:
        return [z.name for z in self.zones]


def _check_ring(ring: Sequence, name: str):
    if len(ring) < 4:
        raise ValueError(f"ring of zone {name!r} has {len(ring)} vertices, need at least 4")
    if tuple(ring[0]) != tuple(ring[-1]):
        raise ValueError(f"unclosed ring in zone {name!r}")


def _parse_polygon(coords, name) -> tuple[Ring, ...]:
    rings = []
    for ring in coords:
        verts = tuple((float(p[0]), float(p[1])) for p in ring)
        try:
            _check_ring(verts, name)
        except ValueError as exc:
            raise GridFormatError(str(exc)) from None
        rings.append(verts)
    if not rings:
        raise GridFormatError(f"polygon without rings in zone {name!r}")
    return tuple(rings)


def read_geojson_polygons(text: TextSource) -> PolygonSet:
    """Parse a GeoJSON FeatureCollection of named Polygon/MultiPolygon features."""
    try:
        doc = json.loads(_as_text(text))
    except json.JSONDecodeError as exc:
        raise GridFormatError(f"invalid JSON: {exc}") from None
    if doc.get("type") != "FeatureCollection":
        raise GridFormatError("expected a GeoJSON FeatureCollection")
    zones = []
    for i, feature in enumerate(doc.get("features", [])):
        name = (feature.get("properties") or {}).get("name")
        if not isinstance(name, str) or not name:
            raise GridFormatError(f"feature {i} has no 'name' property")
        geom = feature.get("geometry") or {}
        kind = geom.get("type")
        if kind == "Polygon":
            polygons = (_parse_polygon(geom["coordinates"], name),)
        elif kind == "MultiPolygon":
            polygons = tuple(_parse_polygon(p, name) for p in geom["coordinates"])
        else:
            raise GridFormatError(f"feature {name!r}: unsupported geometry type {kind!r}")
        zones.append(Zone(name, polygons))
    try:
        return PolygonSet(tuple(zones))
    except ValueError as exc:
        raise GridFormatError(str(exc)) from None


@dataclass(frozen=True)
class DayEntry:
    day_id: str
    date: date
    grid: Grid


@dataclass(frozen=True)
class DaySeries:
    entries: tuple[DayEntry, ...] = field(default_factory=tuple)

    def __post_init__(self):
        entries = tuple(self.entries)
        ids = [e.day_id for e in entries]
        if len(set(ids)) != len(ids):
            raise ValueError("day ids must be unique")
        for a, b in zip(entries, entries[1:]):
            if not a.date < b.date:
                raise ValueError(f"dates must increase: {a.day_id} {a.date} then {b.day_id} {b.date}")
        object.__setattr__(self, "entries", entries)


def accumulate_daily(rate_grids: Iterable[Grid], step_hours: float) -> Grid:
    """Sum rate grids (mm/hr) times ``step_hours`` into one total (mm).

    A cell is nodata in the result only when it is nodata in every input;
    otherwise nodata inputs contribute nothing. Per-cell terms are summed in
    sorted order so the result does not depend on input order.
    """
    grids = list(rate_grids)
    if not grids:
        raise ValueError("no grids to accumulate")
    if not step_hours > 0:
        raise ValueError(f"step_hours must be positive, got {step_hours}")
    ref = grids[0]
    for g in grids[1:]:
        if g.georef != ref.georef:
            raise ValueError("georeferencing mismatch between rate grids")
    stack = np.stack([g.values for g in grids])
    valid = np.stack([g.valid for g in grids])
    terms = np.where(valid, stack * step_hours, 0.0)
    terms.sort(axis=0)
    total = terms.sum(axis=0)
    total[~valid.any(axis=0)] = ref.nodata
    return ref.with_values(total)


def day_window(day: date, hour: int = 3) -> tuple[datetime, datetime]:
    """The 24 h accumulation window ending at ``hour`` UTC on ``day``."""
    end = datetime(day.year, day.month, day.day, hour, tzinfo=timezone.utc)
    return end - timedelta(hours=24), end
