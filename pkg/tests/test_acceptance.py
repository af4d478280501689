"""Headline acceptance criteria, one test each.

Every test records a PASS/FAIL line (with the measured numbers) that the
terminal summary prints at the end of the run.
"""

import re
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from panolayout import io
from panolayout.cli import main
from panolayout.coords import azimuth_to_direction
from panolayout.density import DensityLogitMap, Plane, segment_opacity, sigmoid
from panolayout.layout import LayoutPolygon
from panolayout.objective import LayoutObjective, gt_weights_batch
from panolayout.pipeline import RenderConfig, reconstruct
from panolayout.polygons import iou2d, merge_mst, sample_interior, union
from panolayout.render import SamplingConfig, primary_polygon, render_depths, secondary_polygons
from panolayout.synth import (SyntheticScene, checker_panorama, occluded_l_room, oracle_depth,
                              random_room, rasterize_density, rectangle)
from panolayout.warp import (CameraHeight, CircularShift, Flip, PanoStretch, RandomPerturb, layout_warp,
                             solve_edge_transform, transform_layout)

KINDS = ("square", "rectangle", "l_shape", "star")

pytestmark = pytest.mark.slow


def record(name, ok, detail):
    ACCEPTANCE[name] = (bool(ok), detail)
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def rooms():
    rng = np.random.default_rng(2024)
    return [LayoutPolygon(random_room(rng, KINDS[k % 4]), 2.8) for k in range(20)]


@pytest.fixture(scope="module")
def room_maps(rooms):
    start = time.perf_counter()
    maps = [rasterize_density(SyntheticScene(r, (512, 1024), l0=20.0)) for r in rooms]
    return maps, time.perf_counter() - start


def test_rendering_fidelity(rooms, room_maps):
    maps, raster_time = room_maps
    start = time.perf_counter()
    ious = [iou2d(primary_polygon(m), r.vertices) for r, m in zip(rooms, maps)]
    elapsed = raster_time + time.perf_counter() - start
    med, low = float(np.median(ious)), float(np.min(ious))
    nverts = sorted({len(r.vertices) for r in rooms})
    record("rendering fidelity", med >= 0.97 and low >= 0.95 and elapsed < 30,
           f"median IoU {med:.4f} (>= 0.97), min {low:.4f} (>= 0.95), {elapsed:.1f} s (< 30), "
           f"vertex counts {nverts}")


def test_oracle_depth_agreement(rooms, room_maps):
    # Rays leave the scene camera (origin) at random azimuths and use uniform
    # secondary-ray sampling. The criterion is read as a mean over rays; the
    # worst single ray and rays from random interior cameras are reported too.
    maps, _ = room_maps
    rng = np.random.default_rng(7)
    per_room = 50
    counts = (128, 256, 512, 1024)
    errs = {n: [] for n in counts}
    interior = []
    for k, (room, dmap) in enumerate(zip(rooms, maps)):
        d = azimuth_to_direction(rng.uniform(-np.pi, np.pi, per_room))
        o = np.zeros_like(d)
        ref = oracle_depth(o, d, room.vertices)
        for n in counts:
            depth, _ = render_depths(dmap, Plane.FLOOR, o, d, SamplingConfig(n, 16.0))
            errs[n].append(np.abs(depth - ref) / ref)
        oi = sample_interior(room.vertices, per_room, margin=0.1, seed=k)
        ref = oracle_depth(oi, d, room.vertices)
        depth, _ = render_depths(dmap, Plane.FLOOR, oi, d, SamplingConfig(1024, 16.0))
        interior.append(np.abs(depth - ref) / ref)
    rel = {n: np.concatenate(v) for n, v in errs.items()}
    means = [float(rel[n].mean()) for n in counts]
    decreasing = all(a > b for a, b in zip(means, means[1:]))
    record("oracle depth agreement", means[-1] < 0.01 and decreasing,
           f"{len(rel[1024])} rays from the camera: mean rel err {means[-1]:.3%} at 1024 samples (< 1%); "
           f"mean 128/256/512/1024 = {', '.join(f'{m:.3%}' for m in means)} (strictly decreasing); "
           f"info: worst ray {rel[1024].max():.2%}, random interior cameras mean "
           f"{np.concatenate(interior).mean():.3%}")


def test_differentiability(tmp_path, capsys):
    lay = tmp_path / "square.json"
    io.write_layout_json(lay, LayoutPolygon(rectangle(-2, -2, 2, 2), 2.8))
    dlm = tmp_path / "fixture.dlm"
    assert main(["synth", str(lay), "--size", "64x128", "--dlm", str(dlm)]) == 0
    capsys.readouterr()
    start = time.perf_counter()
    code = main(["gradcheck", str(dlm), str(lay), "--n-probes", "200", "--h", "1e-4"])
    elapsed = time.perf_counter() - start
    out = capsys.readouterr().out
    err = float(re.search(r"max relative error: (\S+)", out).group(1))
    record("differentiability", code == 0 and err < 1e-4 and elapsed < 5,
           f"max rel err {err:.2e} over 200 probes (< 1e-4), {elapsed:.2f} s (< 5), exit {code}")


def test_gt_weight_exactness():
    rng = np.random.default_rng(0)
    n_pairs, worst, escape_ok, bracketed = 0, 0.0, True, 0
    for _ in range(100):
        k = int(rng.integers(2, 200))
        t = np.cumsum(rng.uniform(1e-3, 1.0, k))
        d = rng.uniform(t[0], t[-1] * 1.3, 1000)
        w = gt_weights_batch(t, d)
        n_pairs += len(d)
        inside = d <= t[-1]
        bracketed += int(inside.sum())
        blended = w[inside, :-1] @ t
        worst = max(worst, float(np.max(np.abs(blended - d[inside]))))
        esc = w[~inside]
        expected = np.zeros(k + 1)
        expected[-1] = 1.0
        escape_ok &= bool(np.all(esc == expected))
    record("gt-weight exactness", n_pairs == 100_000 and worst <= 1e-12 and escape_ok,
           f"{n_pairs} pairs ({bracketed} bracketed): max |blend - d*| {worst:.1e} (<= 1e-12); "
           f"escape rows exactly one-hot on W_K+1: {escape_ok}")


def test_binary_reduction():
    x = np.linspace(-30, 30, 100)
    delta = np.geomspace(1e-3, 10, 100)
    xx, dd = np.meshgrid(x, delta)
    lhs = segment_opacity(xx, dd)
    rhs = 1 - sigmoid(-xx) ** dd
    chain = float(np.max(np.abs(lhs - rhs)))
    h = 512
    pixel = segment_opacity(x, (np.pi / h) * h / np.pi)
    reduced = float(np.max(np.abs(pixel - sigmoid(x))))
    record("binary reduction", chain < 1e-9 and reduced < 1e-9,
           f"{xx.size} grid points: max |1-exp(-softplus*D) - (1-sigmoid(-x)^D)| {chain:.1e}; "
           f"one-pixel opacity vs sigmoid {reduced:.1e} (< 1e-9)")


def test_height_inference():
    rng = np.random.default_rng(3)
    results = []
    for h in (2.2, 2.8, 3.4):
        for kind in ("square", "rectangle", "l_shape"):
            gt = LayoutPolygon(random_room(rng, kind), h)
            dmap = rasterize_density(SyntheticScene(gt, (512, 1024)))
            est = reconstruct(dmap, RenderConfig(merge="none")).layout.height
            results.append((h, kind, est))
    worst = max(abs(est - h) for h, _, est in results)
    record("height inference", worst <= 0.05,
           f"max |h - h*| {worst:.4f} m over h* in {{2.2, 2.8, 3.4}} x 3 rooms (<= 0.05)")


def test_occlusion_recovery():
    gt = LayoutPolygon(occluded_l_room(), 2.8)
    dmap = rasterize_density(SyntheticScene(gt, (512, 1024)))
    prim = primary_polygon(dmap)
    secs = secondary_polygons(dmap, prim, 32, seed=0, m=256)
    i_prim = iou2d(prim, gt.vertices)
    i_union = iou2d(union([prim] + secs), gt.vertices)
    i_mst = iou2d(merge_mst(prim, secs).footprint, gt.vertices)
    record("occlusion recovery", i_mst - i_prim > 0 and i_mst >= i_union,
           f"IoU primary {i_prim:.4f}, union {i_union:.4f}, mst {i_mst:.4f} "
           f"(mst - primary > 0, mst >= union)")


def test_layout_warp():
    room = LayoutPolygon(random_room(np.random.default_rng(8), "l_shape"), 2.8)
    img = checker_panorama(room, (512, 1024), softness=0.3)
    ident, _ = layout_warp(img, room, PanoStretch(1.0, 1.0))
    shifts = []
    for k in (1, 7, 300, -45):
        out, _ = layout_warp(img, room, CircularShift(2 * np.pi * k / 1024))
        shifts.append(np.array_equal(out, np.roll(img, -k, axis=1)))
    f1, lay1 = layout_warp(img, room, Flip())
    f2, _ = layout_warp(f1, lay1, Flip())
    up, lay_up = layout_warp(img, room, CameraHeight(1.2))
    back, _ = layout_warp(up, lay_up, CameraHeight(1 / 1.2))
    mse = np.mean((back.astype(float) - img.astype(float)) ** 2)
    psnr = 10 * np.log10(255.0**2 / mse)

    rng = np.random.default_rng(9)
    table = 0.0
    for _ in range(200):
        v = rng.normal(size=(int(rng.integers(3, 12)), 2)) * 3
        lay = LayoutPolygon(v, rng.uniform(2, 4))
        th, (sx, sy), s = rng.uniform(-np.pi, np.pi), rng.uniform(0.5, 2, 2), rng.uniform(0.5, 2)
        rot = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
        sk = rng.uniform(0.8, 1.25, len(v))
        checks = [
            (transform_layout(lay, CircularShift(th)), (rot @ v.T).T, lay.height),
            (transform_layout(lay, PanoStretch(sx, sy)), v @ np.diag([sx, sy]), lay.height),
            (transform_layout(lay, CameraHeight(s)), s * v, s * lay.height),
            (transform_layout(lay, RandomPerturb(scales=tuple(sk))), sk[:, None] * v, lay.height),
        ]
        flipped = transform_layout(lay, Flip())
        # the mirror keeps vertex 0 and reverses the order to preserve winding
        mirror = v @ np.diag([-1.0, 1.0])
        checks.append((flipped, np.concatenate([mirror[:1], mirror[:0:-1]]), lay.height))
        for out, verts, h in checks:
            table = max(table, float(np.max(np.abs(out.vertices - verts))), abs(out.height - h))
    ok = (np.array_equal(ident, img) and all(shifts) and np.array_equal(f1, img[:, ::-1])
          and np.array_equal(f2, img) and psnr > 35 and table <= 1e-12)
    record("layoutwarp", ok,
           f"identity exact {np.array_equal(ident, img)}, integral shifts exact {all(shifts)}, "
           f"flip∘flip exact {np.array_equal(f2, img)}, camera-height round trip {psnr:.2f} dB (> 35), "
           f"table rows max err {table:.1e} (<= 1e-12)")


def test_edge_transform_solution():
    rng = np.random.default_rng(10)
    src = rng.uniform(-5, 5, size=(1000, 2, 2))
    dst = rng.uniform(-5, 5, size=(1000, 2, 2))
    # keep pairs well away from degenerate (edge through the camera)
    cross = dst[:, 0, 0] * dst[:, 1, 1] - dst[:, 0, 1] * dst[:, 1, 0]
    redo = np.abs(cross) < 0.5
    while np.any(redo):
        dst[redo] = rng.uniform(-5, 5, size=(int(redo.sum()), 2, 2))
        cross = dst[:, 0, 0] * dst[:, 1, 1] - dst[:, 0, 1] * dst[:, 1, 0]
        redo = np.abs(cross) < 0.5
    abcd = solve_edge_transform(src, dst)
    worst = 0.0
    for s, d, (a, b, c, e) in zip(src, dst, abcd):
        m = np.array([[d[0, 0], d[0, 1], 0, 0], [0, 0, d[0, 0], d[0, 1]],
                      [d[1, 0], d[1, 1], 0, 0], [0, 0, d[1, 0], d[1, 1]]])
        rhs = np.array([s[0, 0], s[0, 1], s[1, 0], s[1, 1]])
        worst = max(worst, float(np.max(np.abs(m @ np.array([a, b, c, e]) - rhs))))
    record("edge-transform solution", worst < 1e-10,
           f"max residual {worst:.1e} over 1000 random edge pairs (< 1e-10)")


def test_optimization_smoke():
    gt = LayoutPolygon(rectangle(-2, -2, 2, 2), 2.8)
    start = time.perf_counter()
    obj = LayoutObjective(gt, (64, 128))
    x = np.zeros((64, 128))
    for _ in range(500):
        x -= 0.5 * obj(x).grad
    iou = iou2d(primary_polygon(DensityLogitMap(x)), gt.vertices)
    elapsed = time.perf_counter() - start
    record("optimization smoke test", iou > 0.9 and elapsed < 60,
           f"primary IoU {iou:.4f} after 500 steps of 0.5 (> 0.9), {elapsed:.1f} s (< 60)")


def test_determinism(tmp_path):
    lay = tmp_path / "room.json"
    io.write_layout_json(lay, LayoutPolygon(occluded_l_room(), 2.8))
    dlm = tmp_path / "room.dlm"
    assert main(["synth", str(lay), "--size", "128x256", "--dlm", str(dlm)]) == 0
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}.json"
        assert main(["render", str(dlm), "-o", str(out), "--seed", "11"]) == 0
        outs.append(out.read_bytes())
    record("determinism", outs[0] == outs[1],
           f"two render runs with seed 11: byte-identical {outs[0] == outs[1]} ({len(outs[0])} bytes)")
