"""Acceptance suite: one test per release criterion, each printing a
one-line verdict. Tolerances are fixed here, not calibrated elsewhere.

Run with `pytest tests/test_acceptance.py -v -s` to see the verdict lines.
"""

import time

import numpy as np
import pytest

from normal_forge import (
    CameraIntrinsics,
    ConfusionCounts,
    DepthImage,
    GradientFilter,
    NeighborhoodSpec,
    PlaneScene,
    SphereScene,
    aae,
    angular_error,
    confusion,
    default_road_scene,
    estimate_normals,
    normal_freespace,
    oracle_normal_map,
    scores,
    synth_plane,
    synth_road,
    synth_sphere,
)
from normal_forge import io as nfio
from normal_forge.cli import main

INTR = CameraIntrinsics(fx=500.0, fy=500.0, xo=320.0, yo=240.0)


def verdict(name):
    print(f"criterion={name} status=PASS")


def random_visible_plane(rng):
    """Unit normal within ~60 deg of the optical axis, visible at 640x480."""
    while True:
        tilt = rng.uniform(0.0, np.deg2rad(60.0))
        azim = rng.uniform(0.0, 2 * np.pi)
        normal = (
            np.sin(tilt) * np.cos(azim),
            np.sin(tilt) * np.sin(azim),
            -np.cos(tilt),
        )
        d = rng.uniform(3.0, 30.0)
        scene = PlaneScene(normal=normal, d=d, width=640, height=480, intrinsics=INTR)
        bundle = synth_plane(scene)
        if bundle.depth.valid.mean() >= 0.3:
            return scene, bundle


def test_plane_exactness():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    for _ in range(20):
        scene, bundle = random_visible_plane(rng)
        nm = estimate_normals(bundle.depth, INTR)
        err = aae(bundle.normals, nm)
        assert err.e_aae < np.deg2rad(0.5)
        assert err.errors[err.valid].max() < np.deg2rad(2.0)
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    verdict("plane_exactness")


def test_curved_surface_accuracy():
    scene = SphereScene(center=(0, 0, 10.0), radius=2.0, width=640, height=480, intrinsics=INTR)
    bundle = synth_sphere(scene)
    nm = estimate_normals(bundle.depth, INTR)
    om = oracle_normal_map(bundle.depth, INTR, window=5)
    sne_err = aae(bundle.normals, nm)
    assert np.median(sne_err.errors[sne_err.valid]) < np.deg2rad(1.0)
    orc_err = aae(bundle.normals, om)
    assert np.median(orc_err.errors[orc_err.valid]) < np.deg2rad(1.0)
    cross = aae(om, nm)
    assert np.median(cross.errors[cross.valid]) < np.deg2rad(2.0)
    verdict("curved_surface_accuracy")


def test_depth_scale_invariance():
    scenes = [
        synth_plane(PlaneScene(normal=(0.2, -0.75, -0.63), d=5.0, width=640, height=480, intrinsics=INTR)),
        synth_sphere(SphereScene(center=(0, 0, 10.0), radius=2.0, width=640, height=480, intrinsics=INTR)),
        synth_road(default_road_scene()),
    ]
    for bundle in scenes:
        base = estimate_normals(bundle.depth, INTR)
        for c in (0.5, 2.0, 10.0):
            scaled = estimate_normals(DepthImage(bundle.depth.data * c, bundle.depth.valid), INTR)
            joint = base.valid & scaled.valid
            assert np.abs(base.normals[joint] - scaled.normals[joint]).max() < 1e-6
    verdict("depth_scale_invariance")


def test_degenerate_conventions():
    flat = DepthImage(np.full((48, 64), 5.0))
    nm = estimate_normals(flat, CameraIntrinsics(100, 100, 32, 24))
    got = nm.normals[nm.valid]
    assert got.shape[0] > 0
    assert np.array_equal(got, np.tile([0.0, 0.0, -1.0], (got.shape[0], 1)))

    # all probed neighbors iso-depth while the gradient stencil sees variation
    row = np.array([5.0, 4.0, 5.0, 6.0, 5.0])
    z = DepthImage(np.tile(row, (3, 1)))
    nbhd = NeighborhoodSpec(((-2, 0), (2, 0)))
    nm = estimate_normals(z, CameraIntrinsics(100, 100, 2, 1), GradientFilter.central(), nbhd)
    assert nm.valid[1, 2]
    fallback = nm.normals[1, 2]
    assert fallback[2] == 0.0
    assert abs(np.linalg.norm(fallback) - 1.0) < 1e-9
    verdict("degenerate_conventions")


def test_metric_formula_oracle():
    s = scores(ConfusionCounts(n_tp=3, n_fp=1, n_fn=1, n_tn=5))
    assert (s.accuracy, s.precision, s.recall, s.fscore, s.iou) == (0.8, 0.75, 0.75, 0.75, 0.6)

    rng = np.random.default_rng(99)
    checked = 0
    while checked < 1000:
        tp, tn, fp, fn = (int(v) for v in rng.integers(0, 1000, 4))
        if tp + tn + fp + fn == 0:
            continue
        s = scores(ConfusionCounts(tp, tn, fp, fn))
        total = tp + tn + fp + fn
        expected = (
            (tp + tn) / total,
            None if tp + fp == 0 else tp / (tp + fp),
            None if tp + fn == 0 else tp / (tp + fn),
            None if 2 * tp * tp + tp * (fp + fn) == 0
            else 2 * tp * tp / (2 * tp * tp + tp * (fp + fn)),
            None if tp + fp + fn == 0 else tp / (tp + fp + fn),
        )
        for got, want in zip((s.accuracy, s.precision, s.recall, s.fscore, s.iou), expected):
            if want is None:
                assert got is None
            else:
                assert abs(got - want) < 1e-12
        checked += 1
    verdict("metric_formula_oracle")


def test_aae_oracle():
    rng = np.random.default_rng(7)
    u = rng.normal(size=(100000, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    v = rng.normal(size=(100000, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    impl = angular_error(u, v)
    brute = np.arctan2(np.linalg.norm(np.cross(u, v), axis=1), np.sum(u * v, axis=1))
    assert np.abs(impl - brute).max() < 1e-9
    verdict("aae_oracle")


def test_freespace_pipeline():
    start = time.perf_counter()
    scene = default_road_scene()
    bundle = synth_road(scene)
    nm = estimate_normals(bundle.depth, scene.intrinsics)
    mask = normal_freespace(
        nm, np.array([0.0, -1.0, 0.0]), np.deg2rad(15.0), largest_component=True
    )
    s = scores(confusion(mask, bundle.freespace, bundle.depth.valid))
    elapsed = time.perf_counter() - start
    assert s.iou > 0.95
    assert elapsed < 2.0
    verdict("freespace_pipeline")


def test_determinism_and_formats(tmp_path):
    # byte-reproducible CLI runs
    def synth_args(outdir):
        return [
            "synth", "--kind", "default-road", "--width", "160", "--height", "120",
            "--noise", "0.005", "--seed", "21", "--outdir", str(outdir),
        ]

    assert main(synth_args(tmp_path / "a")) == 0
    assert main(synth_args(tmp_path / "b")) == 0
    for name in ("depth.png", "normals_gt.png", "freespace_gt.png", "calib.txt", "scene.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    for out in ("n1.png", "n2.png"):
        assert main([
            "estimate", "--depth", str(tmp_path / "a" / "depth.png"),
            "--calib", str(tmp_path / "a" / "calib.txt"), "--out", str(tmp_path / out),
        ]) == 0
    assert (tmp_path / "n1.png").read_bytes() == (tmp_path / "n2.png").read_bytes()

    # io round trips: bytes for the exact containers
    for name in ("depth.png", "freespace_gt.png"):
        src = tmp_path / "a" / name
        dst = tmp_path / ("rt_" + name)
        if name.endswith("depth.png"):
            nfio.write_depth_png(nfio.read_depth_png(src), dst)
        else:
            nfio.write_mask_png(nfio.read_mask_png(src), dst)
        assert src.read_bytes() == dst.read_bytes()
    calib = nfio.read_calib(tmp_path / "a" / "calib.txt")
    nfio.write_calib(calib, tmp_path / "rt_calib.txt")
    assert nfio.read_calib(tmp_path / "rt_calib.txt") == calib
    spec = nfio.read_scene_spec(tmp_path / "a" / "scene.txt")
    nfio.write_scene_spec(spec, tmp_path / "rt_scene.txt")
    assert nfio.read_scene_spec(tmp_path / "rt_scene.txt") == spec

    # multi-thread output equals single-thread bit-exactly
    bundle = synth_road(default_road_scene())
    nm1 = estimate_normals(bundle.depth, INTR, threads=1)
    nm4 = estimate_normals(bundle.depth, INTR, threads=4)
    assert np.array_equal(nm1.normals, nm4.normals)
    assert np.array_equal(nm1.valid, nm4.valid)
    verdict("determinism_and_formats")


def test_performance_budget():
    bundle = synth_road(default_road_scene())
    estimate_normals(bundle.depth, INTR, threads=1)  # warm the jit cache
    times = []
    for _ in range(50):
        t0 = time.perf_counter()
        estimate_normals(bundle.depth, INTR, threads=1)
        times.append(time.perf_counter() - t0)
    median_ms = float(np.median(times) * 1000.0)
    print(f"estimate_normals 640x480 median_ms={median_ms:.2f}")
    assert median_ms < 100.0
    verdict("performance_budget")
