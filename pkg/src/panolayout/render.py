"""Flattened volume rendering of layout depth on a density logit map.

A 2D ray on the floor (or temporary ceiling) plane is sampled at depths
``t_i``; each sample is projected into the panorama, its logit is
bilinearly interpolated and activated with softplus, and the alpha-blended
sample depths give the expected distance to the room boundary.

Segment lengths ``delta`` are angles on the unit sphere. Opacity uses them in
units of pixel heights (``delta * H / pi``), so a one-pixel vertical segment
of logit ``x`` has opacity ``sigmoid(x)``.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .coords import azimuth_to_direction, column_azimuth, eq_proj
from .density import Plane, bilinear_stencil, softplus
from .errors import DomainError, GeometryError
from .polygons import as_footprint, polygon_area, sample_interior

log = logging.getLogger(__name__)

THREADS_ENV = "SEG2REG_THREADS"


@dataclass(frozen=True)
class SamplingConfig:
    """Uniform sampling used for rays that do not start at the panorama center."""

    n_samples: int = 1024
    t_far: float = 16.0

    def __post_init__(self):
        if self.n_samples < 2:
            raise DomainError("need at least 2 samples per ray")
        if not self.t_far > 0:
            raise DomainError("t_far must be positive")


@dataclass(frozen=True)
class Ray2D:
    origin: tuple
    direction: tuple

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64)
        if abs(np.hypot(*d) - 1.0) > 1e-9:
            raise DomainError(f"ray direction must be a unit vector, got {tuple(d)}")


@dataclass
class RaySamples:
    """Rendered samples of one ray or a batch of rays (leading dimensions)."""

    t: np.ndarray
    delta: np.ndarray
    alpha: np.ndarray
    trans: np.ndarray

    @property
    def weights(self):
        return self.trans[..., :-1] * self.alpha

    @property
    def escape(self):
        return self.trans[..., -1]


def default_threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def uniform_depths(n, t_far):
    return np.arange(1, n + 1, dtype=np.float64) * (t_far / n)


def segment_bounds(t, t_far):
    """Segment endpoints around each sample: midpoints between samples, 0 and ``t_far`` at the ends."""
    t = np.asarray(t, dtype=np.float64)
    mid = 0.5 * (t[..., 1:] + t[..., :-1])
    lo = np.concatenate([np.zeros_like(t[..., :1]), mid], axis=-1)
    hi = np.concatenate([mid, np.full_like(t[..., :1], t_far)], axis=-1)
    return lo, hi


def arc_lengths(origins, dirs, plane_z, lo, hi):
    """Great-circle angle between the unit-sphere images of ``o + lo d`` and ``o + hi d``."""
    o = np.asarray(origins, dtype=np.float64)[..., None, :]
    d = np.asarray(dirs, dtype=np.float64)[..., None, :]
    p = o + lo[..., None] * d
    q = o + hi[..., None] * d
    z2 = plane_z * plane_z
    dot = np.sum(p * q, axis=-1) + z2
    # |p x q| with both lifted to z = plane_z
    cx = (p[..., 1] - q[..., 1]) * plane_z
    cy = (q[..., 0] - p[..., 0]) * plane_z
    cz = p[..., 0] * q[..., 1] - p[..., 1] * q[..., 0]
    return np.arctan2(np.sqrt(cx * cx + cy * cy + cz * cz), dot)


def sample_secondary_ray(origins, dirs, plane_z, n=1024, t_far=16.0):
    """Uniform samples ``t_i = i * t_far / n`` and their arc lengths.

    ``origins``/``dirs`` are ``(2,)`` or ``(R, 2)``; returns ``t`` of shape
    ``(n,)`` and ``delta`` of shape ``(n,)`` or ``(R, n)``.
    """
    SamplingConfig(n, t_far)
    t = uniform_depths(n, t_far)
    lo, hi = segment_bounds(t, t_far)
    return t, arc_lengths(origins, dirs, plane_z, lo, hi)


def column_depths(height, plane_z, plane):
    """Plane depths of the pixel centers of one image half, ascending.

    Returns ``(rows, t)``; ``rows[k]`` is the image row of sample ``k``.
    """
    h2 = height // 2
    rows = np.arange(height - 1, h2 - 1, -1) if plane is Plane.FLOOR else np.arange(0, h2)
    v = ((rows + 0.5) / height - 0.5) * np.pi
    return rows, abs(plane_z) / np.tan(np.abs(v))


def column_ray_samples(col, dmap, plane):
    """Ray through the center of image column ``col`` sampled at that column's pixel centers."""
    if not 0 <= col < dmap.width:
        raise DomainError(f"column {col} outside [0, {dmap.width})")
    u = column_azimuth(col, dmap.width)
    ray = Ray2D((0.0, 0.0), tuple(azimuth_to_direction(u)))
    _, t = column_depths(dmap.height, dmap.plane_z(plane), plane)
    return ray, t, np.full_like(t, np.pi / dmap.height)


def sample_stencil(dmap, plane, origins, dirs, t):
    """Bilinear stencils of the projected sample points ``o + t d`` on the plane."""
    o = np.asarray(origins, dtype=np.float64)[..., None, :]
    d = np.asarray(dirs, dtype=np.float64)[..., None, :]
    pts = o + np.asarray(t, dtype=np.float64)[..., None] * d
    i, j = eq_proj(pts[..., 0], pts[..., 1], dmap.plane_z(plane), dmap.height, dmap.width)
    return bilinear_stencil(i, j, dmap.height, dmap.width, plane)


def composite(sigma):
    """Opacities and transmittances from optical thicknesses ``sigma`` (last axis = samples)."""
    alpha = -np.expm1(-sigma)
    cum = np.cumsum(sigma, axis=-1)
    trans = np.exp(-np.concatenate([np.zeros_like(cum[..., :1]), cum], axis=-1))
    return alpha, trans


def render_opacities(dmap, plane, origins, dirs, t, delta, delta_scale=None):
    """Opacity and transmittance at every sample (post-activation interpolation).

    ``delta_scale`` converts arc lengths to density units and defaults to
    ``H / pi``.
    """
    if delta_scale is None:
        delta_scale = dmap.height / np.pi
    idx, w = sample_stencil(dmap, plane, origins, dirs, t)
    logit = np.sum(dmap.logits.ravel()[idx] * w, axis=-1)
    sigma = softplus(logit) * (np.asarray(delta) * delta_scale)
    alpha, trans = composite(sigma)
    tt = np.broadcast_to(np.asarray(t, dtype=np.float64), alpha.shape)
    return RaySamples(t=tt, delta=np.broadcast_to(delta, alpha.shape), alpha=alpha, trans=trans)


def alpha_blend_depth(rs):
    """Expected stopping depth; escaped transmittance contributes nothing."""
    return np.sum(rs.weights * rs.t, axis=-1)


def render_depths(dmap, plane, origins, dirs, sampling=None):
    """Rendered depth for a batch of rays.

    ``sampling=None`` selects column sampling, which requires rays from the
    origin along pixel-column azimuths. Returns ``(depth, escape)``.
    """
    origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
    dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    origins, dirs = np.broadcast_arrays(origins, dirs)
    z = dmap.plane_z(plane)
    if sampling is None:
        _, t = column_depths(dmap.height, z, plane)
        delta = np.full_like(t, np.pi / dmap.height)
        rs = render_opacities(dmap, plane, origins, dirs, t, delta)
        return alpha_blend_depth(rs), rs.escape
    depth = np.empty(len(origins))
    escape = np.empty(len(origins))
    # bound the working set to ~1M samples
    step = max(1, (1 << 20) // sampling.n_samples)
    for s in range(0, len(origins), step):
        o, d = origins[s:s + step], dirs[s:s + step]
        t, delta = sample_secondary_ray(o, d, z, sampling.n_samples, sampling.t_far)
        rs = render_opacities(dmap, plane, o, d, t, delta)
        depth[s:s + step] = alpha_blend_depth(rs)
        escape[s:s + step] = rs.escape
    return depth, escape


def hit(ray, dmap, plane=Plane.FLOOR, sampling=SamplingConfig()):
    """Expected ray/boundary intersection ``origin + d * direction``."""
    o = np.asarray(ray.origin, dtype=np.float64)
    d = np.asarray(ray.direction, dtype=np.float64)
    depth, _ = render_depths(dmap, plane, o, d, sampling)
    return o + depth[0] * d


def polygon_azimuths(m):
    """Azimuths of ``m`` evenly spaced directions; matches pixel-column centers when ``m = W``."""
    return column_azimuth(np.arange(m), m)


@dataclass
class RenderedPolygon:
    vertices: np.ndarray
    depth: np.ndarray
    escape: np.ndarray
    center: np.ndarray = field(default_factory=lambda: np.zeros(2))

    @property
    def escaped(self):
        """Number of rays with more than half of their transmittance escaping."""
        return int(np.count_nonzero(self.escape > 0.5))


def rend_poly(center, m, dmap, sampling=SamplingConfig(), plane=Plane.FLOOR, full=False):
    """Render an ``m``-vertex polygon from ``center`` by hitting ``m`` evenly spaced rays.

    ``sampling=None`` uses the image-column samples (only valid for
    ``center = (0, 0)`` and ``m = W``).
    """
    if m < 3:
        raise DomainError("polygon needs at least 3 rays")
    c = np.asarray(center, dtype=np.float64)
    if sampling is None and (m != dmap.width or np.any(c != 0)):
        raise DomainError("column sampling needs center (0, 0) and m = W")
    dirs = azimuth_to_direction(polygon_azimuths(m))
    depth, escape = render_depths(dmap, plane, np.broadcast_to(c, dirs.shape), dirs, sampling)
    poly = RenderedPolygon(c + depth[:, None] * dirs, depth, escape, c)
    if poly.escaped:
        log.info("%d of %d rays escaped more than half their transmittance", poly.escaped, m)
    return poly if full else poly.vertices


def primary_polygon(dmap, plane=Plane.FLOOR, full=False):
    """``W``-vertex polygon rendered from the panorama center with column sampling."""
    return rend_poly((0.0, 0.0), dmap.width, dmap, None, plane, full=full)


def secondary_polygons(dmap, primary, n_cams, seed=0, sampling=SamplingConfig(), m=None,
                       margin=0.1, threads=None, full=False):
    """Polygons rendered from ``n_cams`` cameras sampled inside ``primary``."""
    primary = as_footprint(primary)
    if polygon_area(primary) < 1e-9:
        raise GeometryError("primary polygon is degenerate (zero area)")
    if n_cams <= 0:
        return []
    centers = sample_interior(primary, n_cams, margin=margin, seed=seed)
    m = m or dmap.width
    threads = threads or default_threads()

    def one(c):
        return rend_poly(c, m, dmap, sampling, Plane.FLOOR, full=full)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, centers))
    return [one(c) for c in centers]


def infer_height(floor, ceiling, z_floor=1.6, z_ceiling=-1.0):
    """Layout height from least-squares scale between ceiling and floor radii."""
    pf = np.linalg.norm(np.asarray(floor, dtype=np.float64), axis=-1)
    pc = np.linalg.norm(np.asarray(ceiling, dtype=np.float64), axis=-1)
    if pf.shape != pc.shape:
        raise DomainError("floor and ceiling polygons need the same number of vertices")
    denom = float(np.sum(pc * pc))
    if denom == 0.0:
        raise GeometryError("ceiling polygon collapsed to the origin")
    scale = float(np.sum(pf * pc)) / denom
    return z_floor - z_ceiling * scale
