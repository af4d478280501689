import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from panolayout.density import (DensityLogitMap, Plane, bilinear_stencil, interp, segment_opacity,
                                sigmoid, softplus, to_binary_seg_logit)
from panolayout.errors import DomainError


def make_map(h=8, w=16, seed=0):
    return DensityLogitMap(np.random.default_rng(seed).normal(size=(h, w)))


def test_softplus_values():
    assert softplus(0.0) == pytest.approx(np.log(2.0), abs=1e-15)
    assert softplus(-50.0) < 1e-21
    assert abs(softplus(50.0) - 50.0) < 1e-12


def test_softplus_threshold_error_small():
    for x in (29.999, 30.0, 30.001, -30.0):
        ref = float(np.logaddexp(0.0, x))
        assert abs(softplus(x) - ref) < 1e-13


@settings(max_examples=200, deadline=None)
@given(st.floats(-700, 700), st.floats(-700, 700))
def test_softplus_monotone_and_bounded(a, b):
    lo, hi = min(a, b), max(a, b)
    assert softplus(lo) <= softplus(hi)
    gap = softplus(a) - max(a, 0.0)
    assert -1e-12 <= gap <= np.log(2) + 1e-12


def test_sigmoid_no_overflow():
    x = np.array([-1000.0, 0.0, 1000.0])
    assert np.allclose(sigmoid(x), [0.0, 0.5, 1.0])


def test_map_validation():
    with pytest.raises(ValueError):
        DensityLogitMap(np.zeros((3, 4)))
    with pytest.raises(ValueError):
        DensityLogitMap(np.zeros(4))
    with pytest.raises(ValueError):
        DensityLogitMap(np.full((2, 2), np.nan))
    with pytest.raises(ValueError):
        DensityLogitMap(np.zeros((2, 2)), z_floor=-1.0)


def test_map_is_immutable_copy():
    raw = np.zeros((2, 4))
    m = DensityLogitMap(raw)
    raw[0, 0] = 5
    assert m.logits[0, 0] == 0
    with pytest.raises(ValueError):
        m.logits[0, 0] = 1


def test_interp_at_pixel_center_exact():
    m = make_map()
    for i, j in [(4, 0), (7, 15), (5, 3)]:
        assert interp(i, j, m, Plane.FLOOR) == m.logits[i, j]
    for i, j in [(0, 0), (3, 9)]:
        assert interp(i, j, m, Plane.CEILING) == m.logits[i, j]


def test_interp_midpoint_and_wrap():
    m = make_map()
    assert interp(5, 2.5, m, Plane.FLOOR) == pytest.approx(0.5 * (m.logits[5, 2] + m.logits[5, 3]))
    w = m.width
    expected = 0.75 * m.logits[5, w - 1] + 0.25 * m.logits[5, 0]
    assert interp(5, w - 0.75, m, Plane.FLOOR) == pytest.approx(expected)
    # col W - 0.25 lies between the last and first column
    expected = 0.25 * m.logits[5, w - 1] + 0.75 * m.logits[5, 0]
    assert interp(5, w - 0.25, m, Plane.FLOOR) == pytest.approx(expected)


def test_interp_seam_continuity():
    m = make_map()
    w = m.width
    left = interp(6.3, w - 0.5 - 1e-10, m, Plane.FLOOR)
    right = interp(6.3, -0.5 + 1e-10, m, Plane.FLOOR)
    assert left == pytest.approx(right, abs=1e-9)


def test_rows_clamp_within_half():
    m = make_map()
    h2 = m.height // 2
    # just below the horizon on the floor side reads only the first floor row
    assert interp(h2 - 0.4, 3, m, Plane.FLOOR) == m.logits[h2, 3]
    assert interp(h2 - 0.6, 3, m, Plane.CEILING) == m.logits[h2 - 1, 3]
    assert interp(m.height - 0.6, 3, m, Plane.FLOOR) == m.logits[-1, 3]


def test_wrong_half_rejected():
    m = make_map()
    with pytest.raises(DomainError):
        interp(1.0, 0.0, m, Plane.FLOOR)
    with pytest.raises(DomainError):
        interp(6.0, 0.0, m, Plane.CEILING)


def test_stencil_weights_sum_to_one():
    rows = np.random.default_rng(0).uniform(4, 7.4, 100)
    cols = np.random.default_rng(1).uniform(-3, 20, 100)
    idx, w = bilinear_stencil(rows, cols, 8, 16, Plane.FLOOR)
    assert np.allclose(w.sum(-1), 1.0)
    assert idx.min() >= 4 * 16 and idx.max() < 8 * 16


def test_binary_reduction_at_zero():
    assert float(segment_opacity(0.0, 1.0)) == pytest.approx(0.5, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.floats(-60, 60), st.floats(1e-3, 10))
def test_opacity_chain(x, delta):
    lhs = float(segment_opacity(x, delta))
    rhs = 1.0 - sigmoid(-x) ** delta
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_one_pixel_opacity_is_sigmoid():
    x = np.linspace(-30, 30, 1001)
    h = 512
    delta = np.pi / h
    alpha = segment_opacity(x, delta * h / np.pi)
    assert np.max(np.abs(alpha - sigmoid(x))) < 1e-9
    assert np.max(np.abs(1 - sigmoid(-x) - sigmoid(x))) < 1e-12


def test_to_binary_seg_logit_is_identity_copy():
    m = make_map()
    out = to_binary_seg_logit(m)
    assert np.array_equal(out, m.logits)
    out[0, 0] = 99
    assert m.logits[0, 0] != 99


def test_roll_columns():
    m = make_map()
    r = m.roll_columns(3)
    assert np.array_equal(r.logits[:, 3], m.logits[:, 0])
