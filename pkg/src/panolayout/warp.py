"""LayoutWarp: geometric panorama augmentation by transforming the 3D layout.

The ground-truth polygon and height are transformed, and the panorama is
backward-warped: every destination pixel is lifted to the transformed room
surface, mapped to the source room by the owning wall's 2x2 edge transform
(plus a height rule for z), and projected back into the source image.
"""

import re
import warnings
from dataclasses import dataclass

import numpy as np

from .coords import (angles_to_pixel, angles_to_world, azimuth_to_direction, column_azimuth,
                     pixel_to_angles)
from .errors import GeometryError
from .layout import LayoutPolygon
from .polygons import ray_polygon_intersection

FLOOR, WALL, CEILING = 0, 1, 2


@dataclass(frozen=True)
class CircularShift:
    """Rotate the floor plan by ``theta`` (counter-clockwise); pans the panorama."""

    theta: float

    def vertices(self, v):
        c, s = np.cos(self.theta), np.sin(self.theta)
        return v @ np.array([[c, s], [-s, c]])

    def height(self, h):
        return h


@dataclass(frozen=True)
class Flip:
    """Left-right mirror: ``x -> -x``."""

    def vertices(self, v):
        return v * np.array([-1.0, 1.0])

    def height(self, h):
        return h


@dataclass(frozen=True)
class PanoStretch:
    sx: float
    sy: float

    def __post_init__(self):
        if not (self.sx > 0 and self.sy > 0):
            raise ValueError("stretch factors must be positive")

    def vertices(self, v):
        return v * np.array([self.sx, self.sy])

    def height(self, h):
        return h


@dataclass(frozen=True)
class CameraHeight:
    """Scale the room (floor plan and height) by ``s``: the camera looks ``1/s`` as high."""

    s: float

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError("camera height scale must be positive")

    def vertices(self, v):
        return v * self.s

    def height(self, h):
        return h * self.s


@dataclass(frozen=True)
class RandomPerturb:
    """Scale each vertex by its own factor, drawn log-uniformly from ``[low, high]``.

    Pass ``scales`` to fix the factors instead of drawing them from ``seed``.
    """

    seed: int = 0
    low: float = 0.8
    high: float = 1.25
    scales: tuple = None

    def __post_init__(self):
        if not 0 < self.low <= self.high:
            raise ValueError("need 0 < low <= high")

    def factors(self, n):
        if self.scales is not None:
            s = np.asarray(self.scales, dtype=np.float64)
            if s.shape != (n,):
                raise ValueError(f"need {n} scale factors, got {s.shape}")
            if np.any(s <= 0):
                raise ValueError("scale factors must be positive")
            return s
        rng = np.random.default_rng(self.seed)
        return np.exp(rng.uniform(np.log(self.low), np.log(self.high), size=n))

    def vertices(self, v):
        return v * self.factors(len(v))[:, None]

    def height(self, h):
        return h


def _mapped(layout, t):
    v = np.asarray(layout.vertices, dtype=np.float64)
    vd = t.vertices(v)
    same = np.all(vd == np.roll(vd, -1, axis=0), axis=1)
    if np.any(same):
        raise GeometryError(f"transform collapses edge {int(np.argmax(same))}")
    return v, vd, float(t.height(layout.height))


def transform_layout(layout, t):
    """Apply ``t`` to the polygon and height. Mirror transforms re-reverse the
    vertex order (keeping vertex 0) so the winding is preserved."""
    v, vd, h = _mapped(layout, t)
    if isinstance(t, Flip):
        vd = np.concatenate([vd[:1], vd[:0:-1]])
    return LayoutPolygon(vd, h, layout.camera_height)


def solve_edge_transform(src_edge, dst_edge):
    """Closed-form ``(a, b, c, d)`` with ``[[a, b], [c, d]] @ dst_k = src_k`` for both endpoints.

    Edges are ``(2, 2)`` arrays ``[v_k, v_{k+1}]`` or stacks ``(..., 2, 2)``.
    """
    s = np.asarray(src_edge, dtype=np.float64)
    t = np.asarray(dst_edge, dtype=np.float64)
    x0, y0, x1, y1 = s[..., 0, 0], s[..., 0, 1], s[..., 1, 0], s[..., 1, 1]
    p0, q0, p1, q1 = t[..., 0, 0], t[..., 0, 1], t[..., 1, 0], t[..., 1, 1]
    den = q1 * p0 - q0 * p1
    scale = np.maximum(np.hypot(p0, q0) * np.hypot(p1, q1), 1e-300)
    if np.any(np.abs(den) <= 1e-14 * scale):
        raise GeometryError("destination edge is collinear with the camera; edge transform undefined")
    a = (q1 * x0 - q0 * x1) / den
    b = (p1 * x0 - p0 * x1) / -den
    c = (q1 * y0 - q0 * y1) / den
    d = (p1 * y0 - p0 * y1) / -den
    out = np.stack([a, b, c, d], axis=-1)
    return tuple(out) if out.ndim == 1 else out


def pixel_region_and_depth(u, v, layout, z_floor=None):
    """Region (0 floor, 1 wall, 2 ceiling), depth and hit edge for viewing angles ``(u, v)``.

    The ray at azimuth ``u`` meets the polygon at distance ``r``; elevations
    beyond the floor/ceiling boundary angles belong to those planes.
    Boundary elevations count as wall.
    """
    z_floor = layout.camera_height if z_floor is None else z_floor
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    u, v = np.broadcast_arrays(u, v)
    # one ray cast per distinct azimuth
    uniq, inv = np.unique(u, return_inverse=True)
    dirs = azimuth_to_direction(uniq)
    r, edge = ray_polygon_intersection(np.zeros_like(dirs), dirs, layout.vertices)
    if not np.all(np.isfinite(r)):
        raise GeometryError("camera lies outside the layout polygon")
    r = r[inv].reshape(u.shape)
    edge = edge[inv].reshape(u.shape)
    zc = z_floor - layout.height
    v_floor = np.arctan2(z_floor, r)
    v_ceil = np.arctan2(zc, r)
    region = np.where(v > v_floor, FLOOR, np.where(v < v_ceil, CEILING, WALL))
    with np.errstate(divide="ignore", invalid="ignore"):
        depth = np.where(region == FLOOR, z_floor / np.sin(v),
                         np.where(region == CEILING, zc / np.sin(v), r / np.cos(v)))
    return region, depth, edge


def bilinear_sample(img, rows, cols):
    """Sample ``img (H, W, C)`` at continuous positions; rows clamp, columns wrap."""
    h, w = img.shape[:2]
    # snap round-off so integral sources copy pixels exactly
    rows = _snap(np.clip(rows, 0, h - 1))
    cols = _snap(cols)
    r0 = np.floor(rows).astype(np.int64)
    r1 = np.minimum(r0 + 1, h - 1)
    fr = (rows - r0)[..., None]
    c0f = np.floor(cols)
    fc = (cols - c0f)[..., None]
    c0 = np.mod(c0f.astype(np.int64), w)
    c1 = np.mod(c0 + 1, w)
    src = img.astype(np.float64)
    top = src[r0, c0] * (1 - fc) + src[r0, c1] * fc
    bot = src[r1, c0] * (1 - fc) + src[r1, c1] * fc
    return top * (1 - fr) + bot * fr


def _snap(x, tol=1e-9):
    r = np.round(x)
    return np.where(np.abs(x - r) < tol, r, x)


def source_coordinates(layout, t, shape):
    """Continuous source pixel ``(rows, cols)`` for every destination pixel center."""
    h_img, w_img = shape
    v_src, v_dst, h_dst = _mapped(layout, t)
    dst_layout = LayoutPolygon(v_dst, h_dst, layout.camera_height)
    zf = layout.camera_height
    u_col = column_azimuth(np.arange(w_img), w_img)
    ii = np.arange(h_img)
    _, v_row = pixel_to_angles(ii, np.zeros_like(ii), h_img, w_img)
    uu, vv = np.meshgrid(u_col, v_row)
    region, depth, edge = pixel_region_and_depth(uu, vv, dst_layout, zf)
    x, y, z = angles_to_world(uu, vv, depth)
    k = np.unique(edge)
    src_e = np.stack([v_src[k], v_src[(k + 1) % len(v_src)]], axis=1)
    dst_e = np.stack([v_dst[k], v_dst[(k + 1) % len(v_dst)]], axis=1)
    abcd = np.zeros((len(v_src), 4))
    abcd[k] = solve_edge_transform(src_e, dst_e)
    m = abcd[edge]
    xs = m[..., 0] * x + m[..., 1] * y
    ys = m[..., 2] * x + m[..., 3] * y
    zs = zf - (layout.height / h_dst) * (zf - z)
    on_axis = (xs == 0) & (ys == 0)
    us = np.where(on_axis, uu, np.arctan2(xs, np.where(on_axis, 1.0, ys)))
    vs = np.arctan2(zs, np.hypot(xs, ys))
    rows, cols = angles_to_pixel(us, vs, h_img, w_img)
    return rows, cols


def layout_warp(img, layout, t):
    """Warp panorama ``img`` and its layout by transform ``t``.

    ``uint8`` images come back as ``uint8`` (rounded); float images stay float.
    Returns ``(warped_image, transformed_layout)``.
    """
    img = np.asarray(img)
    squeeze = img.ndim == 2
    if squeeze:
        img = img[..., None]
    h_img, w_img = img.shape[:2]
    if w_img != 2 * h_img:
        warnings.warn(f"panorama is {h_img}x{w_img}; equirectangular images are usually 1:2", stacklevel=2)
    rows, cols = source_coordinates(layout, t, (h_img, w_img))
    out = bilinear_sample(img, rows, cols)
    if img.dtype == np.uint8:
        out = np.clip(np.round(out), 0, 255).astype(np.uint8)
    if squeeze:
        out = out[..., 0]
    return out, transform_layout(layout, t)


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


def parse_transform(text):
    """Parse ``camheight:1.2``, ``shift:0.5rad``, ``shift:30deg``, ``stretch:1.3,0.8``,
    ``flip`` or ``perturb:seed=7[,low=0.8,high=1.25]``."""
    name, _, arg = text.strip().partition(":")
    name = name.lower()
    try:
        if name == "flip" and not arg:
            return Flip()
        if name == "camheight":
            return CameraHeight(float(arg))
        if name == "shift":
            m = re.fullmatch(rf"({_NUM})\s*(rad|deg)?", arg.strip())
            if not m:
                raise ValueError(arg)
            val = float(m.group(1))
            return CircularShift(np.deg2rad(val) if m.group(2) == "deg" else val)
        if name == "stretch":
            sx, sy = (float(s) for s in arg.split(","))
            return PanoStretch(sx, sy)
        if name == "perturb":
            opts = {}
            for item in filter(None, arg.split(",")):
                key, _, val = item.partition("=")
                opts[key.strip()] = val.strip()
            unknown = set(opts) - {"seed", "low", "high"}
            if unknown:
                raise ValueError(f"unknown perturb option(s) {sorted(unknown)}")
            return RandomPerturb(seed=int(opts.get("seed", 0)),
                                 low=float(opts.get("low", 0.8)),
                                 high=float(opts.get("high", 1.25)))
    except ValueError as exc:
        raise ValueError(f"bad transform spec {text!r}: {exc}") from None
    raise ValueError(f"unknown transform spec {text!r}")
