import numpy as np
import pytest

from panolayout.coords import azimuth_to_direction, pixel_to_angles
from panolayout.density import Plane
from panolayout.errors import GeometryError, ValidationError
from panolayout.layout import LayoutPolygon
from panolayout.objective import gt_weights
from panolayout.polygons import is_simple, point_in_polygon
from panolayout.render import SamplingConfig, render_depths, uniform_depths
from panolayout.synth import (SyntheticScene, gt_masks, occluded_l_room, oracle_depth, random_room,
                              rasterize_density, rectangle, solid_angle_mc)

SQ = rectangle(-2, -2, 2, 2)


def test_oracle_depth_examples():
    assert oracle_depth((0.0, 0.0), (1.0, 0.0), SQ) == pytest.approx(2.0)
    d = np.array([1.0, 1.0]) / np.sqrt(2)
    assert oracle_depth((0.0, 0.0), d, SQ) == pytest.approx(2 * np.sqrt(2))


def test_oracle_depth_miss_raises():
    with pytest.raises(GeometryError):
        oracle_depth((5.0, 5.0), (1.0, 0.0), SQ)


def test_oracle_depth_scale_equivariant():
    rng = np.random.default_rng(0)
    f = random_room(rng, "star")
    dirs = azimuth_to_direction(rng.uniform(-np.pi, np.pi, 50))
    o = np.zeros_like(dirs)
    # powers of two scale without rounding, so equality is exact
    for s in (0.5, 2.0, 4.0):
        assert np.array_equal(oracle_depth(o, dirs, f * s), s * oracle_depth(o, dirs, f))
    assert np.allclose(oracle_depth(o, dirs, f * 1.7), 1.7 * oracle_depth(o, dirs, f), rtol=1e-14)


def test_oracle_matches_gt_weight_blend():
    t = uniform_depths(1024, 16.0)
    rng = np.random.default_rng(1)
    dirs = azimuth_to_direction(rng.uniform(-np.pi, np.pi, 100))
    for d in oracle_depth(np.zeros_like(dirs), dirs, SQ):
        w = gt_weights(t, d)
        assert np.dot(w[:-1], t) == pytest.approx(d, abs=1e-12)


def test_rasterize_signs(square_gt):
    scene = SyntheticScene(square_gt, (64, 128))
    m = rasterize_density(scene)
    # straight down is floor inside the room, the horizon is far outside
    assert m.logits[-1, 0] == -20.0
    assert m.logits[32, 0] == 20.0
    assert np.array_equal(m.logits > 0, gt_masks(scene) == 1)
    frac = np.mean(gt_masks(scene) == 0)
    assert 0 < frac < 1


def test_scene_validation(square_gt):
    with pytest.raises(ValidationError):
        SyntheticScene(LayoutPolygon(SQ + 5, 2.8))
    with pytest.raises(ValidationError):
        SyntheticScene(square_gt, (63, 128))
    with pytest.raises(ValidationError):
        SyntheticScene(square_gt, l0=0)


def test_floor_mask_solid_angle(square_gt):
    h, w = 512, 1024
    scene = SyntheticScene(LayoutPolygon(occluded_l_room(), 2.8), (h, w))
    mask = gt_masks(scene)
    rows = np.arange(h // 2, h)
    _, v = pixel_to_angles(rows, np.zeros_like(rows), h, w)
    pix = np.cos(v) * (2 * np.pi / w) * (np.pi / h)
    area = np.sum((mask[h // 2:] == 0) * pix[:, None])
    ref = solid_angle_mc(occluded_l_room(), 1.6, n=2_000_000, seed=0)
    assert area == pytest.approx(ref, rel=0.02)


def test_random_rooms_valid():
    rng = np.random.default_rng(2)
    for kind in ("square", "rectangle", "l_shape", "star"):
        for _ in range(10):
            f = random_room(rng, kind)
            assert 3 <= len(f) <= 10
            assert is_simple(f)
            assert point_in_polygon((0.0, 0.0), f)
    with pytest.raises(ValueError):
        random_room(rng, "hexagon")


def test_l0_sharpening_converges():
    # Past L0 ~ 10 the remaining gap to the oracle is the raster's own
    # half-pixel quantisation, which does not shrink with L0; convergence is
    # therefore checked against the hard (L0 -> inf) limit of the same raster.
    gt = LayoutPolygon(rectangle(-2.2, -1.7, 1.9, 2.4), 2.8)
    rng = np.random.default_rng(3)
    o = rng.uniform(-1, 1, size=(64, 2))
    d = azimuth_to_direction(rng.uniform(-np.pi, np.pi, 64))
    ref = oracle_depth(o, d, gt.vertices)
    cfg = SamplingConfig(1024, 16.0)

    def render(l0):
        m = rasterize_density(SyntheticScene(gt, (512, 1024), l0=l0))
        return render_depths(m, Plane.FLOOR, o, d, cfg)[0]

    hard = render(1000.0)
    depths = {l0: render(l0) for l0 in (5.0, 10.0, 20.0)}
    to_hard = [np.mean(np.abs(depths[l0] - hard)) for l0 in (5.0, 10.0, 20.0)]
    assert to_hard[0] > to_hard[1] > to_hard[2], to_hard
    to_oracle = [np.mean(np.abs(depths[l0] - ref) / ref) for l0 in (5.0, 10.0, 20.0)]
    assert to_oracle[0] > to_oracle[1]
    assert to_oracle[2] < 0.01
