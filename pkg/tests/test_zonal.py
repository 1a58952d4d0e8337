import math
from datetime import date

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import cell_area_loop, point_segment_distance, winding_number, zone_stats_loop
from tcprecip.cluster import BinaryMask, Cluster
from tcprecip.grid_io import GeoRef, Grid, PolygonSet, Zone
from tcprecip.zonal import (
    AreaModel,
    ZoneMap,
    assign_zones,
    cell_area,
    cluster_centroid,
    cluster_mean,
    footprint_area,
    union_footprint,
    zonal_stats,
)

R = 6371.0
NODATA = -9999.0


def grid_of(values, xll=0.0, yll=0.0, cellsize=1.0):
    values = np.asarray(values, dtype=float)
    return Grid(values.shape[1], values.shape[0], xll, yll, cellsize, values)


def rect_ring(w, s, e, n):
    return ((w, s), (e, s), (e, n), (w, n), (w, s))


def rect_zone(name, w, s, e, n):
    return Zone(name, ((rect_ring(w, s, e, n),),))


class TestCellArea:
    def test_equator_tenth_degree(self):
        expected = R * R * math.radians(0.1) * 2 * math.sin(math.radians(0.05))
        assert cell_area(0.0, 0.1) == pytest.approx(expected, rel=1e-12)
        assert cell_area(0.0, 0.1) == pytest.approx(123.64, abs=0.01)

    def test_shrinks_towards_pole(self):
        lats = np.arange(0.05, 90.0, 0.1)
        areas = cell_area(lats, 0.1)
        assert np.all(np.diff(areas) < 0)
        assert areas[-1] < 0.01 * areas[0]

    def test_flat_mode_constant(self):
        flat = AreaModel(mode="flat")
        for lat in (0.0, 23.3, -60.0, 89.95):
            assert cell_area(lat, 0.1, flat) == pytest.approx(123.64, abs=0.01)
        assert cell_area(0.0, 0.1, flat) == pytest.approx((6371 * 0.0017453293) ** 2, rel=1e-7)

    def test_pole_overflow(self):
        with pytest.raises(ValueError):
            cell_area(89.99, 0.1)

    def test_band_sums_to_zone_area(self):
        lats = np.arange(-89.5, 90, 1.0)
        total = cell_area(lats, 1.0).sum() * 360
        assert total == pytest.approx(4 * math.pi * R * R, rel=1e-9)

    def test_bad_model(self):
        with pytest.raises(ValueError):
            AreaModel(mode="weird")


def convex_hull(points):
    pts = sorted(set(points))
    if len(pts) < 3:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


class TestAssignZones:
    def test_unit_square(self):
        g = grid_of(np.zeros((1, 2)))
        zm = assign_zones(g, PolygonSet((rect_zone("Z", 0, 0, 1, 1),)))
        assert zm.indices.tolist() == [[0, -1]]
        assert zm.zone_names == ("Z",)

    def test_random_convex_matches_winding_number(self):
        rng = np.random.default_rng(10)
        georef = GeoRef(40, 30, 60.0, 10.0, 0.25)
        lats, lons = georef.lats(), georef.lons()
        checked = 0
        for _ in range(25):
            pts = [(float(x), float(y)) for x, y in zip(rng.uniform(60, 70, 8), rng.uniform(10, 17.5, 8))]
            hull = convex_hull(pts)
            ring = tuple(hull + [hull[0]])
            zm = assign_zones(georef, PolygonSet((Zone("C", ((ring,),)),)))
            for r, lat in enumerate(lats):
                for c, lon in enumerate(lons):
                    edge_d = min(
                        point_segment_distance(lon, lat, *a, *b) for a, b in zip(ring[:-1], ring[1:])
                    )
                    if edge_d < 1e-9:
                        continue
                    inside = winding_number(lon, lat, ring) != 0
                    assert (zm.indices[r, c] == 0) == inside
                    checked += 1
        assert checked > 20000

    def test_orientation_independent(self):
        rng = np.random.default_rng(11)
        georef = GeoRef(30, 30, 0.0, 0.0, 1.0)
        for _ in range(10):
            pts = [(float(x), float(y)) for x, y in rng.uniform(0, 30, (7, 2))]
            hull = convex_hull(pts)
            ccw = tuple(hull + [hull[0]])
            cw = ccw[::-1]
            a = assign_zones(georef, PolygonSet((Zone("A", ((ccw,),)),)))
            b = assign_zones(georef, PolygonSet((Zone("A", ((cw,),)),)))
            assert np.array_equal(a.indices, b.indices)

    def test_hole_excluded(self):
        outer = rect_ring(0, 0, 6, 6)
        hole = rect_ring(2, 2, 4, 4)
        zm = assign_zones(GeoRef(6, 6, 0.0, 0.0, 1.0), PolygonSet((Zone("H", ((outer, hole),)),)))
        assert zm.indices[2, 2] == -1 and zm.indices[3, 3] == -1
        assert zm.indices[0, 0] == 0
        assert np.count_nonzero(zm.indices == 0) == 32

    def test_multipolygon_and_overlap_first_wins(self):
        a = Zone("A", ((rect_ring(0, 0, 2, 2),), (rect_ring(4, 0, 6, 2),)))
        b = Zone("B", ((rect_ring(1, 0, 5, 2),),))
        zm = assign_zones(GeoRef(6, 2, 0.0, 0.0, 1.0), PolygonSet((a, b)))
        assert zm.indices.tolist() == [[0, 0, 1, 1, 0, 0]] * 2

    def test_shared_edge_counts_once(self):
        # Cell centers sit exactly on the shared edge x = 2.5.
        a = rect_zone("A", 0, 0, 2.5, 3)
        b = rect_zone("B", 2.5, 0, 5, 3)
        zm = assign_zones(GeoRef(5, 3, 0.0, 0.0, 1.0), PolygonSet((a, b)))
        assert (zm.indices >= 0).all()
        assert np.count_nonzero(zm.indices == 0) + np.count_nonzero(zm.indices == 1) == 15


class TestClusterMean:
    def test_trace_cutoff(self):
        g = grid_of([[0.05, 0.2, 5.0]])
        mean, count = cluster_mean(g, 0.1)
        assert count == 2
        assert mean == pytest.approx(2.6, rel=1e-15)

    def test_all_trace_is_absent(self):
        assert cluster_mean(grid_of([[0.05, 0.1, NODATA]]), 0.1) == (None, 0)

    def test_boundary_strict(self):
        g = grid_of([[0.05, 0.1, 0.100001, 0.2]])
        mean, count = cluster_mean(g, 0.1)
        assert count == 2
        assert mean == (0.100001 + 0.2) / 2


def random_cluster_grid(rng, n=16):
    values = rng.gamma(0.7, 6.0, size=(n, n))
    values[rng.random((n, n)) < 0.3] = NODATA
    values[rng.random((n, n)) < 0.1] = 0.05
    return values


class TestZonalStats:
    def test_single_covering_zone_equals_cluster_mean(self):
        rng = np.random.default_rng(12)
        values = random_cluster_grid(rng)
        g = grid_of(values, xll=60.0, yll=10.0, cellsize=0.1)
        zm = ZoneMap(g.georef, np.zeros(g.georef.shape, dtype=np.int32), ("ALL",))
        (s,) = zonal_stats(g, zm, 0.1)
        mean, count = cluster_mean(g, 0.1)
        assert s.mean_mm == mean and s.significant_pixel_count == count

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            values = random_cluster_grid(rng)
            xll, yll, cs = 60.0, 15.0, 0.1
            g = grid_of(values, xll, yll, cs)
            rects = []
            for k in range(3):
                w, e = sorted(rng.uniform(xll, xll + 1.6, 2))
                s, n = sorted(rng.uniform(yll, yll + 1.6, 2))
                rects.append((f"Z{k}", w, s, e, n))
            polys = PolygonSet(tuple(rect_zone(*r) for r in rects))
            zm = assign_zones(g, polys)

            idx = np.full(values.shape, -1)
            for r in range(16):
                lat = yll + (16 - r - 0.5) * cs
                for c in range(16):
                    lon = xll + (c + 0.5) * cs
                    for z, (_, w, s, e, n) in enumerate(rects):
                        if w < lon < e and s < lat < n:
                            idx[r, c] = z
                            break
            assert np.array_equal(zm.indices, idx)

            stats = zonal_stats(g, zm, 0.1, day_id="D1", day=date(2023, 6, 7))
            for z, st_ in enumerate(stats):
                mean, mx, pt, count, area = zone_stats_loop(values, NODATA, idx, z, 0.1, xll, yll, cs)
                assert st_.zone == f"Z{z}"
                assert st_.significant_pixel_count == count
                if count == 0:
                    assert st_.mean_mm is None and st_.max_point is None and st_.area_km2 == 0
                    continue
                assert st_.mean_mm == pytest.approx(mean, rel=1e-9)
                assert st_.max_mm == mx
                assert st_.max_point == pt
                assert st_.area_km2 == pytest.approx(area, rel=1e-9)
                assert st_.mean_mm <= st_.max_mm

    def test_max_point_tie_row_major(self):
        g = grid_of([[1.0, 9.0], [9.0, 9.0]])
        zm = ZoneMap(g.georef, np.zeros((2, 2), dtype=np.int32), ("Z",))
        (s,) = zonal_stats(g, zm, 0.1)
        assert s.max_point == (1.5, 1.5)

    def test_shape_mismatch(self):
        g = grid_of(np.ones((2, 2)))
        zm = ZoneMap.empty(GeoRef(3, 2, 0.0, 0.0, 1.0))
        with pytest.raises(ValueError, match="shape"):
            zonal_stats(g, zm)


class TestCentroid:
    def test_single_pixel(self):
        g = grid_of(np.zeros((3, 3)), xll=60, yll=10, cellsize=0.1)
        assert cluster_centroid(Cluster(1, [(1, 2)]), g) == pytest.approx((10.15, 60.25))

    def test_symmetric_block(self):
        g = grid_of(np.zeros((5, 5)))
        pixels = [(r, c) for r in range(1, 4) for c in range(1, 4)]
        assert cluster_centroid(Cluster(1, pixels), g) == pytest.approx((2.5, 2.5), abs=1e-12)

    def test_random_matches_loop(self):
        rng = np.random.default_rng(14)
        g = grid_of(np.zeros((50, 60)), xll=61.3, yll=-4.2, cellsize=0.1)
        pixels = rng.integers(0, [50, 60], size=(200, 2))
        lat = sum(-4.2 + (50 - r - 0.5) * 0.1 for r, _ in pixels.tolist()) / 200
        lon = sum(61.3 + (c + 0.5) * 0.1 for _, c in pixels.tolist()) / 200
        got = cluster_centroid(Cluster(1, pixels), g)
        assert got[0] == pytest.approx(lat, abs=1e-12)
        assert got[1] == pytest.approx(lon, abs=1e-12)


GEO = GeoRef(12, 10, 60.0, 0.0, 0.1)
mask_bits = st.lists(st.booleans(), min_size=120, max_size=120).map(lambda b: np.array(b).reshape(10, 12))


def as_mask(bits):
    return BinaryMask(GEO, bits)


class TestFootprint:
    def test_single_day(self):
        bits = np.random.default_rng(15).random((10, 12)) < 0.3
        fp = union_footprint([as_mask(bits)], ["D1"])
        assert np.array_equal(fp.bits, bits)
        assert fp.day_ids == ("D1",)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(mask_bits, min_size=1, max_size=5), mask_bits)
    def test_union_properties(self, days, extra):
        masks = [as_mask(b) for b in days]
        fp = union_footprint(masks)
        grown = union_footprint(masks + [as_mask(extra)])
        assert np.all(grown.bits >= fp.bits)
        assert np.array_equal(union_footprint(masks + masks).bits, fp.bits)
        assert np.array_equal(union_footprint(masks[::-1]).bits, fp.bits)
        ref = sum(1 for i in range(120) if any(b.ravel()[i] for b in days))
        assert fp.count == ref

    def test_georef_mismatch(self):
        other = BinaryMask(GeoRef(12, 10, 61.0, 0.0, 0.1), np.zeros((10, 12), bool))
        with pytest.raises(ValueError, match="georeferencing"):
            union_footprint([as_mask(np.zeros((10, 12), bool)), other])

    def test_empty_area(self):
        fp = union_footprint([as_mask(np.zeros((10, 12), bool))])
        zm = ZoneMap(GEO, np.zeros((10, 12), dtype=np.int32), ("Z",))
        area = footprint_area(fp, zm)
        assert area.total_km2 == 0 and area.per_zone_km2 == {"Z": 0.0}

    def test_flat_area_is_k_cells(self):
        bits = np.random.default_rng(16).random((10, 12)) < 0.4
        fp = union_footprint([as_mask(bits)])
        k = int(bits.sum())
        area = footprint_area(fp, ZoneMap.empty(GEO), AreaModel(mode="flat"))
        assert area.total_km2 == pytest.approx(k * 123.64, abs=0.01 * k)

    def test_zone_split(self):
        bits = np.ones((10, 12), bool)
        idx = np.full((10, 12), -1, dtype=np.int32)
        idx[:, :4] = 0
        idx[:, 4:6] = 1
        zm = ZoneMap(GEO, idx, ("A", "B"))
        area = footprint_area(union_footprint([as_mask(bits)]), zm)
        lat_area = [cell_area_loop(lat, 0.1) for lat in GEO.lats()]
        assert area.per_zone_km2["A"] == pytest.approx(4 * sum(lat_area), rel=1e-12)
        assert area.per_zone_km2["B"] == pytest.approx(2 * sum(lat_area), rel=1e-12)
        assert area.total_km2 == pytest.approx(12 * sum(lat_area), rel=1e-12)
