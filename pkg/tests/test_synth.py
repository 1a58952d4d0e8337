import json
import math

import numpy as np
import pytest

from oracles import bfs_label
from tcprecip.cluster import label_components, make_mask, select_cyclone_cluster
from tcprecip.grid_io import GeoRef, read_ascii_grid
from tcprecip.synth import BlobSpec, make_demo_scenario, render_field, sidecar_path, write_synthetic
from tcprecip.zonal import cluster_centroid


def test_blob_center_equals_amplitude():
    georef = GeoRef(21, 21, 9.95, -1.05, 0.1)
    grid, owner = render_field([BlobSpec((0.0, 11.0), 42.0, 0.5, "a")], georef)
    assert grid.values[10, 10] == pytest.approx(42.0, rel=1e-12)
    assert (owner == 0).all()


def test_monotone_in_distance():
    georef = GeoRef(41, 41, -2.05, -2.05, 0.1)
    grid, _ = render_field([BlobSpec((0.0, 0.0), 10.0, 0.7)], georef)
    row = grid.values[20, 20:]
    assert np.all(np.diff(row) < 0)


def test_two_separated_blobs_give_two_components():
    rng = np.random.default_rng(20)
    georef = GeoRef(200, 120, 60.0, 0.0, 0.1)
    for _ in range(10):
        sigma = rng.uniform(0.4, 0.8)
        a = (rng.uniform(4, 8), rng.uniform(63, 66))
        angle = rng.uniform(-0.5, 0.5)
        sep = 8 * sigma + rng.uniform(0, 1)
        b = (a[0] + sep * math.sin(angle), a[1] + sep * math.cos(angle))
        amp = 30.0
        grid, _ = render_field([BlobSpec(a, amp, sigma), BlobSpec(b, amp, sigma)], georef)
        bits = make_mask(grid, amp / 2).bits
        _, n = bfs_label(bits, 4)
        assert n == 2
        assert label_components(make_mask(grid, amp / 2)).component_count == 2


def test_single_blob_centroid_near_center():
    rng = np.random.default_rng(21)
    georef = GeoRef(160, 160, 60.0, 0.0, 0.1)
    for _ in range(10):
        center = (rng.uniform(5, 11), rng.uniform(65, 71))
        grid, _ = render_field([BlobSpec(center, 25.0, rng.uniform(0.5, 1.5))], georef)
        lab = label_components(make_mask(grid, 0.9))
        cluster = select_cyclone_cluster(lab, center, grid)
        lat, lon = cluster_centroid(cluster, grid)
        assert math.hypot(lat - center[0], lon - center[1]) <= 0.1


def test_blob_validation():
    with pytest.raises(ValueError):
        BlobSpec((0, 0), 0.0, 1.0)
    with pytest.raises(ValueError):
        BlobSpec((0, 0), 1.0, -1.0)
    with pytest.raises(ValueError):
        render_field([], GeoRef(2, 2, 0.0, 0.0, 1.0))


def test_disk_radius():
    b = BlobSpec((0, 0), 10.0, 2.0)
    assert b.disk_radius(10.0 / math.e**0.5) == pytest.approx(2.0)
    assert b.disk_radius(20.0) == 0.0


def test_sidecar_counts_match_grid_on_disk(tmp_path):
    georef = GeoRef(100, 80, 60.0, 0.0, 0.1)
    blobs = [BlobSpec((4.0, 63.0), 30.0, 0.6, "cyclone"), BlobSpec((4.0, 68.0), 10.0, 0.4, "other")]
    path = tmp_path / "g.asc"
    truth = write_synthetic(blobs, georef, path, threshold_mm=0.9)
    grid = read_ascii_grid(path.read_text())
    _, owner = render_field(blobs, georef)
    above = grid.values > 0.9
    for i, b in enumerate(blobs):
        t = truth["truth"][b.id]
        assert t["above_threshold_pixels"] == int(np.count_nonzero(above & (owner == i)))
        assert t["owned_pixels"] == int(np.count_nonzero(owner == i))
    assert json.loads(sidecar_path(path).read_text()) == truth


def test_demo_scenario_files(tmp_path):
    cfg = make_demo_scenario(tmp_path, ndays=2, size=100)
    conf = json.loads(cfg.read_text())
    assert [d["day_id"] for d in conf["days"]] == ["D1", "D2"]
    for d in conf["days"]:
        assert (tmp_path / d["grid_path"]).is_file()
    assert (tmp_path / "track.csv").read_text().count("T03:00Z") == 2
