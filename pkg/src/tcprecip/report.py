"""CSV tables, JSON summary and SVG bar charts for a pipeline run.

All floats are written with 6 significant digits.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Mapping, Optional, Sequence
from xml.sax.saxutils import escape

from tcprecip.zonal import ZoneStats

SIG_DIGITS = 6
STATS_HEADER = [
    "day_id", "date", "zone", "mean_mm", "max_mm", "max_lat", "max_lon",
    "significant_pixels", "area_km2",
]
# Pseudo-zone rows emitted per day next to the real zones.
CLUSTER_ZONE = "ALL"
REGION_ZONE = "ALL_ZONES"


def fmt(value: Optional[float]) -> str:
    if value is None:
        return ""
    return format(float(value), f".{SIG_DIGITS}g")


def rounded(value: Optional[float]) -> Optional[float]:
    if value is None:
        return None
    return float(fmt(value))


def _csv_text(header, rows) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return out.getvalue()


def write_stats_csv(rows: Sequence[ZoneStats]) -> str:
    """Daily zone statistics; absent values become empty fields."""
    ordered = sorted(rows, key=lambda s: (s.date.isoformat() if s.date else "", s.zone))
    body = []
    for s in ordered:
        lat, lon = s.max_point if s.max_point else (None, None)
        body.append([
            s.day_id,
            s.date.isoformat() if s.date else "",
            s.zone,
            fmt(s.mean_mm),
            fmt(s.max_mm),
            fmt(lat),
            fmt(lon),
            str(s.significant_pixel_count),
            fmt(s.area_km2),
        ])
    return _csv_text(STATS_HEADER, body)


def read_stats_csv(text: str) -> list[dict]:
    """Parse :func:`write_stats_csv` output back into dicts of typed values."""
    rows = []
    for r in csv.DictReader(io.StringIO(text)):
        rows.append({
            "day_id": r["day_id"],
            "date": r["date"],
            "zone": r["zone"],
            "mean_mm": float(r["mean_mm"]) if r["mean_mm"] else None,
            "max_mm": float(r["max_mm"]) if r["max_mm"] else None,
            "max_lat": float(r["max_lat"]) if r["max_lat"] else None,
            "max_lon": float(r["max_lon"]) if r["max_lon"] else None,
            "significant_pixels": int(r["significant_pixels"]),
            "area_km2": float(r["area_km2"]),
        })
    return rows


def write_pixel_counts_csv(days) -> str:
    body = [
        [d.day_id, d.date.isoformat(), d.status, str(d.mask_pixels), str(d.cluster_pixels),
         fmt(d.centroid[0]) if d.centroid else "", fmt(d.centroid[1]) if d.centroid else ""]
        for d in days
    ]
    return _csv_text(
        ["day_id", "date", "status", "mask_pixels", "cluster_pixels", "centroid_lat", "centroid_lon"],
        body,
    )


def write_footprint_csv(area) -> str:
    """Footprint area per zone, then the total as zone ``ALL``."""
    body = [[name, fmt(km2)] for name, km2 in area.per_zone_km2.items()]
    body.append([REGION_ZONE, fmt(sum(area.per_zone_km2.values()))])
    body.append([CLUSTER_ZONE, fmt(area.total_km2)])
    return _csv_text(["zone", "area_km2"], body)


def _mean_of_means(stats: Sequence[Optional[ZoneStats]]) -> Optional[float]:
    means = [s.mean_mm for s in stats if s is not None and s.mean_mm is not None]
    return sum(means) / len(means) if means else None


def _pooled(stats: Sequence[Optional[ZoneStats]]) -> Optional[float]:
    used = [s for s in stats if s is not None and s.significant_pixel_count > 0]
    n = sum(s.significant_pixel_count for s in used)
    if n == 0:
        return None
    return sum(s.mean_mm * s.significant_pixel_count for s in used) / n


def summary_dict(run) -> dict:
    """Summary of a finished run as a JSON-ready dict.

    ``run`` needs ``days`` (per-day results), ``footprint_area`` and ``config``.
    Daily means are averaged over days that have a defined mean.
    """
    cluster = [d.cluster_stats for d in run.days]
    region = [d.region_stats for d in run.days]
    area = run.footprint_area
    per_zone = {k: rounded(v) for k, v in area.per_zone_km2.items()} if area else {}
    return {
        "area_mode": run.config.get("area_mode"),
        "mean_of_daily_means_mm": {
            "cluster": rounded(_mean_of_means(cluster)),
            "study_region": rounded(_mean_of_means(region)),
        },
        "pooled_mean_mm": {
            "cluster": rounded(_pooled(cluster)),
            "study_region": rounded(_pooled(region)),
        },
        "days_with_rain": {
            "cluster": sum(1 for s in cluster if s is not None and s.mean_mm is not None),
            "study_region": sum(1 for s in region if s is not None and s.mean_mm is not None),
        },
        "total_footprint_km2": rounded(area.total_km2) if area else 0.0,
        "study_region_footprint_km2": rounded(sum(area.per_zone_km2.values())) if area else 0.0,
        "per_zone_footprint_km2": per_zone,
        "per_day": [
            {
                "day_id": d.day_id,
                "date": d.date.isoformat(),
                "status": d.status,
                "message": d.message,
                "mask_pixels": d.mask_pixels,
                "cluster_pixels": d.cluster_pixels,
                "centroid": [rounded(c) for c in d.centroid] if d.centroid else None,
            }
            for d in run.days
        ],
        "config": run.config,
    }


def write_summary_json(run) -> str:
    return json.dumps(summary_dict(run), indent=2, sort_keys=True) + "\n"


SUMMARY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": [
        "area_mode", "mean_of_daily_means_mm", "pooled_mean_mm", "days_with_rain",
        "total_footprint_km2", "study_region_footprint_km2", "per_zone_footprint_km2",
        "per_day", "config",
    ],
    "properties": {
        "area_mode": {"enum": ["spherical", "flat", None]},
        "mean_of_daily_means_mm": {"$ref": "#/$defs/scopes"},
        "pooled_mean_mm": {"$ref": "#/$defs/scopes"},
        "days_with_rain": {
            "type": "object",
            "required": ["cluster", "study_region"],
            "additionalProperties": {"type": "integer", "minimum": 0},
        },
        "total_footprint_km2": {"type": "number", "minimum": 0},
        "study_region_footprint_km2": {"type": "number", "minimum": 0},
        "per_zone_footprint_km2": {
            "type": "object",
            "additionalProperties": {"type": "number", "minimum": 0},
        },
        "per_day": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["day_id", "date", "status", "mask_pixels", "cluster_pixels", "centroid"],
                "properties": {
                    "day_id": {"type": "string"},
                    "date": {"type": "string", "pattern": r"^\d{4}-\d{2}-\d{2}$"},
                    "status": {"enum": ["ok", "no_cluster", "failed"]},
                    "message": {"type": ["string", "null"]},
                    "mask_pixels": {"type": "integer", "minimum": 0},
                    "cluster_pixels": {"type": "integer", "minimum": 0},
                    "centroid": {
                        "oneOf": [
                            {"type": "null"},
                            {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                        ]
                    },
                },
            },
        },
        "config": {"type": "object"},
    },
    "$defs": {
        "scopes": {
            "type": "object",
            "required": ["cluster", "study_region"],
            "additionalProperties": {"type": ["number", "null"]},
        }
    },
}


PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"]


def _nice_step(span: float, max_intervals: int = 10) -> float:
    raw = span / max_intervals
    magnitude = 10 ** math.floor(math.log10(raw))
    for m in (1, 2, 2.5, 5, 10):
        if m * magnitude >= raw * (1 - 1e-12):
            return m * magnitude
    return 10 * magnitude


def _tick_label(v: float) -> str:
    text = format(v, ".6g")
    return "0" if text == "-0" else text


def render_bar_chart_svg(
    series,
    title: str,
    y_label: str,
    width: int = 720,
    height: int = 420,
) -> str:
    """Render a bar chart as a standalone SVG 1.1 document.

    Parameters
    ----------
    series : list of (label, value), or mapping of name -> list of (label, value)
        A mapping draws grouped bars with a legend; all series share the
        category labels of the first one.
    title, y_label : str

    The value axis spans ``[min(0, data), max(0, data)]`` so the tallest bar
    fills the plot height. Ticks fall on round multiples, at most 10 intervals.
    """
    if isinstance(series, Mapping):
        named = [(str(k), list(v)) for k, v in series.items()]
    else:
        named = [("", list(series))]
    if not named or not named[0][1]:
        raise ValueError("need at least one bar")
    categories = [str(label) for label, _ in named[0][1]]
    for name, points in named:
        if [str(label) for label, _ in points] != categories:
            raise ValueError(f"series {name!r} has different categories")
        for label, v in points:
            if not math.isfinite(float(v)):
                raise ValueError(f"non-finite value for {label!r}")

    values = [float(v) for _, points in named for _, v in points]
    vmax = max(max(values), 0.0)
    vmin = min(min(values), 0.0)
    span = vmax - vmin if vmax > vmin else 1.0
    if vmax == vmin:
        vmax = vmin + span

    left, right, top, bottom = 72, 24, 48, 72
    if len(named) > 1:
        right = 150
    plot_w = width - left - right
    plot_h = height - top - bottom

    def y_of(v: float) -> float:
        return top + (vmax - v) / span * plot_h

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
        f'<text x="{width / 2:.2f}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{escape(title)}</text>',
    ]

    step = _nice_step(span)
    k = math.ceil(vmin / step - 1e-9)
    while k * step <= vmax + 1e-9 * span:
        t = k * step
        y = y_of(t)
        parts.append(
            f'<line x1="{left}" y1="{y:.2f}" x2="{left + plot_w}" y2="{y:.2f}" '
            f'stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{left - 6}" y="{y + 4:.2f}" text-anchor="end" font-family="sans-serif" '
            f'font-size="11">{escape(_tick_label(t))}</text>'
        )
        k += 1

    ncat = len(categories)
    slot = plot_w / ncat
    bar_w = slot * 0.8 / len(named)
    zero_y = y_of(0.0)
    for s, (name, points) in enumerate(named):
        color = PALETTE[s % len(PALETTE)]
        for i, (label, v) in enumerate(points):
            v = float(v)
            x = left + i * slot + slot * 0.1 + s * bar_w
            y = min(y_of(v), zero_y)
            h = abs(y_of(v) - zero_y)
            parts.append(
                f'<rect class="bar" x="{x:.2f}" y="{y:.2f}" width="{bar_w:.2f}" height="{h:.2f}" '
                f'fill="{color}" data-label="{escape(str(label), {chr(34): "&quot;"})}" '
                f'data-value="{fmt(v)}"/>'
            )
    for i, label in enumerate(categories):
        x = left + (i + 0.5) * slot
        parts.append(
            f'<text x="{x:.2f}" y="{top + plot_h + 18:.2f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{escape(label)}</text>'
        )

    parts.append(
        f'<line x1="{left}" y1="{zero_y:.2f}" x2="{left + plot_w}" y2="{zero_y:.2f}" '
        f'stroke="#000000" stroke-width="1"/>'
    )
    parts.append(
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="#000000" stroke-width="1"/>'
    )
    cy = top + plot_h / 2
    parts.append(
        f'<text x="16" y="{cy:.2f}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {cy:.2f})">{escape(y_label)}</text>'
    )
    if len(named) > 1:
        for s, (name, _) in enumerate(named):
            ly = top + 8 + s * 20
            lx = left + plot_w + 12
            parts.append(
                f'<rect x="{lx}" y="{ly}" width="12" height="12" fill="{PALETTE[s % len(PALETTE)]}"/>'
            )
            parts.append(
                f'<text x="{lx + 18}" y="{ly + 10}" font-family="sans-serif" font-size="11">'
                f"{escape(name)}</text>"
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
