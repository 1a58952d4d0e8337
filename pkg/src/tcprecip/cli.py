"""Command line entry point: ``tcprecip <subcommand>``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from datetime import date
from pathlib import Path

import numpy as np

from tcprecip import fetch as fetch_mod
from tcprecip import pipeline, report, synth
from tcprecip.cluster import (
    BinaryMask,
    NoClusterError,
    extract_cluster_grid,
    label_components,
    make_mask,
    pixel_counts,
    select_cyclone_cluster,
)
from tcprecip.grid_io import (
    GeoRef,
    GridFormatError,
    accumulate_daily,
    read_ascii_grid,
    read_geojson_polygons,
    read_track_csv,
    write_ascii_grid,
)
from tcprecip.zonal import (
    AreaModel,
    ZoneMap,
    assign_zones,
    cluster_centroid,
    footprint_area,
    region_stats,
    union_footprint,
    zonal_stats,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PROCESSING = 3

TOKEN_ENV = "TCPRECIP_TOKEN"


class InputError(Exception):
    pass


def _global_options(parser: argparse.ArgumentParser, suppress: bool):
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", default=default(None), help="JSON run configuration")
    parser.add_argument("--area-mode", choices=["spherical", "flat"], default=default(None))
    parser.add_argument("--connectivity", type=int, choices=[4, 8], default=default(None))
    parser.add_argument("--threads", type=int, default=default(1), help="worker threads, 0 = auto")
    parser.add_argument("--out-dir", default=default(None), help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tcprecip",
        description="Extract cyclone precipitation clusters from daily rainfall grids.",
    )
    _global_options(parser, suppress=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        _global_options(p, suppress=True)
        return p

    add("run", "run the full multi-day pipeline from --config")

    p = add("fetch", "download every URL listed in a manifest")
    p.add_argument("manifest", help="text file with one URL per line")
    p.add_argument("--dest", help="destination directory (default: --out-dir or .)")
    p.add_argument("--token", help=f"bearer token (default: ${TOKEN_ENV})")
    p.add_argument("--backoff", type=float, default=1.0, help="initial retry delay in seconds")

    p = add("synth", "write synthetic blob grids with ground-truth sidecars")
    p.add_argument("--spec", help="JSON with 'grid', 'blobs' and optional 'threshold_mm'")
    p.add_argument("--out", help="output grid path for --spec")
    p.add_argument("--demo", metavar="DIR", help="write a complete multi-day demo scenario to DIR")
    p.add_argument("--days", type=int, default=3)
    p.add_argument("--size", type=int, default=400)

    p = add("accumulate", "sum half-hourly rate grids into a daily total")
    p.add_argument("grids", nargs="+")
    p.add_argument("--step-hours", type=float, default=0.5)
    p.add_argument("--out", required=True)

    p = add("extract", "extract the cyclone cluster from one daily grid")
    p.add_argument("--grid", required=True)
    p.add_argument("--threshold", type=float, default=0.9)
    p.add_argument("--track", help="best-track CSV; needs --date")
    p.add_argument("--date", help="YYYY-MM-DD; the 03 UTC fix is used")
    p.add_argument("--fix", help="LAT,LON instead of --track/--date")
    p.add_argument("--day-id", default="")
    p.add_argument("--out", help="write the cluster grid here")

    p = add("stats", "zone statistics of an extracted cluster grid")
    p.add_argument("--cluster-grid", required=True)
    p.add_argument("--boundaries")
    p.add_argument("--trace", type=float, default=0.1)
    p.add_argument("--day-id", default="")
    p.add_argument("--date")
    p.add_argument("--out", help="CSV path (default: stdout)")

    p = add("footprint", "union footprint area of several cluster grids")
    p.add_argument("grids", nargs="+")
    p.add_argument("--boundaries")
    p.add_argument("--out", help="CSV path (default: stdout)")
    return parser


def _read_text(path) -> str:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"file not found: {p}")
    return p.read_text()


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _area_model(args, radius=6371.0) -> AreaModel:
    return AreaModel(radius, args.area_mode or "spherical")


def cmd_run(args) -> int:
    if not args.config:
        raise InputError("run needs --config")
    cfg = pipeline.load_config(args.config, args.area_mode, args.connectivity)
    result = pipeline.run(cfg, args.threads)
    out_dir = Path(args.out_dir) if args.out_dir else Path(args.config).parent / "out"
    pipeline.write_outputs(result, out_dir)
    for d in result.days:
        if d.status == "failed":
            print(f"{d.day_id} ({d.date}): failed at {d.message}", file=sys.stderr)
        elif d.status == "no_cluster":
            print(f"{d.day_id} ({d.date}): {d.message}", file=sys.stderr)
    for err in result.errors:
        print(err, file=sys.stderr)
    print(f"wrote outputs to {out_dir}")
    return EXIT_PROCESSING if result.failed else EXIT_OK


def cmd_fetch(args) -> int:
    manifest = _read_text(args.manifest)
    token = args.token or os.environ.get(TOKEN_ENV)
    dest = args.dest or args.out_dir or "."
    rep = fetch_mod.fetch(manifest, token, dest, backoff=args.backoff)
    print(f"downloaded {len(rep.downloaded)}, skipped {len(rep.skipped)}, failed {len(rep.errors)}")
    for url, err in rep.errors.items():
        print(f"FAILED {url}: {err}", file=sys.stderr)
    return EXIT_OK if rep.ok else EXIT_PROCESSING


def cmd_synth(args) -> int:
    if args.demo:
        cfg = synth.make_demo_scenario(Path(args.demo), ndays=args.days, size=args.size)
        print(f"wrote demo scenario; config at {cfg}")
        return EXIT_OK
    if not (args.spec and args.out):
        raise InputError("synth needs --demo DIR, or --spec and --out")
    spec = json.loads(_read_text(args.spec))
    g = spec["grid"]
    georef = GeoRef(int(g["ncols"]), int(g["nrows"]), float(g["xll"]), float(g["yll"]), float(g["cellsize"]))
    blobs = [synth.BlobSpec.from_dict(b) for b in spec["blobs"]]
    synth.write_synthetic(blobs, georef, Path(args.out), float(spec.get("threshold_mm", 0.9)))
    print(f"wrote {args.out} and {synth.sidecar_path(Path(args.out))}")
    return EXIT_OK


def cmd_accumulate(args) -> int:
    grids = [read_ascii_grid(_read_text(p)) for p in args.grids]
    total = accumulate_daily(grids, args.step_hours)
    Path(args.out).write_text(write_ascii_grid(total))
    return EXIT_OK


def cmd_extract(args) -> int:
    grid = read_ascii_grid(_read_text(args.grid))
    if args.fix:
        lat, lon = (float(v) for v in args.fix.split(","))
        fix = (lat, lon)
    elif args.track and args.date:
        fix = read_track_csv(_read_text(args.track)).fix_for_date(date.fromisoformat(args.date))
    else:
        raise InputError("extract needs --fix LAT,LON or --track with --date")
    mask = make_mask(grid, args.threshold)
    labeled = label_components(mask, args.connectivity or 4)
    try:
        cluster = select_cyclone_cluster(labeled, fix, grid, day_id=args.day_id)
    except NoClusterError as exc:
        print(json.dumps({"day_id": args.day_id, "mask_pixels": mask.count, "cluster_pixels": 0,
                          "status": str(exc)}))
        return EXIT_OK
    out_grid = extract_cluster_grid(grid, cluster)
    if args.out:
        Path(args.out).write_text(write_ascii_grid(out_grid))
    mask_n, cluster_n = pixel_counts(mask, cluster)
    lat, lon = cluster_centroid(cluster, grid)
    print(json.dumps({
        "day_id": args.day_id,
        "label": cluster.label,
        "components": labeled.component_count,
        "mask_pixels": mask_n,
        "cluster_pixels": cluster_n,
        "centroid": [report.rounded(lat), report.rounded(lon)],
    }, sort_keys=True))
    return EXIT_OK


def _zone_map(grid, boundaries) -> ZoneMap:
    if not boundaries:
        return ZoneMap.empty(grid.georef)
    return assign_zones(grid, read_geojson_polygons(_read_text(boundaries)))


def cmd_stats(args) -> int:
    grid = read_ascii_grid(_read_text(args.cluster_grid))
    zone_map = _zone_map(grid, args.boundaries)
    model = _area_model(args)
    day = date.fromisoformat(args.date) if args.date else None

    rows = [
        region_stats(grid, np.ones(grid.georef.shape, dtype=bool), report.CLUSTER_ZONE,
                     args.trace, model, args.day_id, day),
        region_stats(grid, zone_map.indices >= 0, report.REGION_ZONE, args.trace, model,
                     args.day_id, day),
    ]
    rows.extend(zonal_stats(grid, zone_map, args.trace, model, args.day_id, day))
    _emit(report.write_stats_csv(rows), args.out)
    return EXIT_OK


def cmd_footprint(args) -> int:
    grids = [read_ascii_grid(_read_text(p)) for p in args.grids]
    masks = [BinaryMask(g.georef, g.valid) for g in grids]
    fp = union_footprint(masks, [Path(p).stem for p in args.grids])
    area = footprint_area(fp, _zone_map(grids[0], args.boundaries), _area_model(args))
    _emit(report.write_footprint_csv(area), args.out)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "fetch": cmd_fetch,
    "synth": cmd_synth,
    "accumulate": cmd_accumulate,
    "extract": cmd_extract,
    "stats": cmd_stats,
    "footprint": cmd_footprint,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (pipeline.ConfigError, InputError, GridFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROCESSING


if __name__ == "__main__":
    sys.exit(main())
