"""Synthetic ground-truth scenes and closed-form oracles.

Nothing here goes through the volume renderer: depths come from exact
ray/segment intersection and masks from exact point-in-polygon tests, so the
results can be used to check the renderer.
"""

from dataclasses import dataclass

import numpy as np

from .coords import azimuth_to_direction, pixel_to_angles
from .density import Z_CEILING_TEMP, DensityLogitMap, Plane
from .errors import GeometryError, ValidationError
from .layout import LayoutPolygon
from .polygons import as_footprint, point_in_polygon, ray_polygon_intersection


@dataclass(frozen=True)
class SyntheticScene:
    gt: LayoutPolygon
    shape: tuple = (512, 1024)
    l0: float = 20.0
    z_ceiling: float = Z_CEILING_TEMP

    def __post_init__(self):
        self.gt.validate()
        if self.l0 <= 0:
            raise ValidationError("logit magnitude must be positive")
        if not point_in_polygon((0.0, 0.0), self.gt.vertices):
            raise ValidationError("camera (origin) must lie inside the layout")
        h, w = self.shape
        if h % 2 or h < 2 or w < 1:
            raise ValidationError(f"bad raster shape {self.shape}")

    def plane_footprint(self, plane):
        if plane is Plane.FLOOR:
            return np.asarray(self.gt.vertices)
        return self.gt.ceiling_footprint(self.z_ceiling)


def oracle_depth(origins, dirs, footprint):
    """Exact distance from ``origins`` along ``dirs`` to the first polygon edge.

    Works on single rays or ``(R, 2)`` batches; raises if any ray misses.
    """
    t, _ = ray_polygon_intersection(origins, dirs, as_footprint(footprint))
    if not np.all(np.isfinite(t)):
        raise GeometryError("ray does not intersect the polygon (origin outside or open polygon)")
    return float(t[0]) if np.ndim(origins) == 1 and np.ndim(dirs) == 1 else t


def _plane_points(shape, plane, z_plane):
    """Floor-plan coordinates of every pixel center of one half, projected to its plane."""
    h, w = shape
    rows = np.arange(h // 2, h) if plane is Plane.FLOOR else np.arange(0, h // 2)
    ii, jj = np.meshgrid(rows, np.arange(w), indexing="ij")
    u, v = pixel_to_angles(ii, jj, h, w)
    r = z_plane / np.tan(v)
    return rows, r[..., None] * azimuth_to_direction(u)


def gt_masks(scene):
    """``H x W`` uint8 mask: 1 where the pixel's plane point is outside the layout."""
    h, w = scene.shape
    mask = np.zeros((h, w), dtype=np.uint8)
    for plane, z in ((Plane.FLOOR, scene.gt.camera_height), (Plane.CEILING, scene.z_ceiling)):
        rows, pts = _plane_points(scene.shape, plane, z)
        inside = point_in_polygon(pts.reshape(-1, 2), scene.plane_footprint(plane))
        mask[rows] = (~inside).reshape(len(rows), w)
    return mask


def rasterize_density(scene):
    """Hard logit map: ``+l0`` outside the layout, ``-l0`` inside."""
    mask = gt_masks(scene).astype(np.float64)
    return DensityLogitMap(scene.l0 * (2.0 * mask - 1.0),
                           z_floor=scene.gt.camera_height, z_ceiling=scene.z_ceiling)


def regular_polygon(n, radius, phase=0.0):
    k = np.arange(n)
    ang = phase + 2 * np.pi * k / n
    return np.stack([radius * np.cos(ang), radius * np.sin(ang)], axis=1)


def rectangle(x0, y0, x1, y1):
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=np.float64)


def l_shape(x0, y0, x1, y1, cx, cy):
    """L-shaped room: the box ``[x0, x1] x [y0, y1]`` minus the corner ``(cx, x1] x (cy, y1]``."""
    return np.array([[x0, y0], [x1, y0], [x1, cy], [cx, cy], [cx, y1], [x0, y1]], dtype=np.float64)


def random_room(rng, kind=None):
    """Random simple room fully visible from the origin.

    ``kind`` is one of ``square``, ``rectangle``, ``l_shape``, ``star`` (random if None).
    Stars have 3-10 vertices; L-shapes keep the origin in the shared corner
    square so every wall is visible.
    """
    kinds = ("square", "rectangle", "l_shape", "star")
    kind = kind or kinds[rng.integers(len(kinds))]
    if kind == "square":
        s = rng.uniform(1.5, 3.0)
        ox, oy = rng.uniform(-0.5, 0.5, size=2) * s
        return rectangle(-s - ox, -s - oy, s - ox, s - oy)
    if kind == "rectangle":
        x0, y0 = -rng.uniform(1.0, 3.0, size=2)
        x1, y1 = rng.uniform(1.0, 3.0, size=2)
        return rectangle(x0, y0, x1, y1)
    if kind == "l_shape":
        # origin sits in the overlap of the two arms
        cx, cy = rng.uniform(0.3, 0.8, size=2)
        x0, y0 = -rng.uniform(0.5, 1.0, size=2)
        x1, y1 = cx + rng.uniform(1.2, 2.5), cy + rng.uniform(1.2, 2.5)
        return l_shape(x0, y0, x1, y1, cx, cy)
    if kind == "star":
        n = int(rng.integers(3, 11))
        while True:
            ang = np.sort(rng.uniform(0, 2 * np.pi, size=n))
            gaps = np.diff(np.concatenate([ang, ang[:1] + 2 * np.pi]))
            # origin strictly inside needs every angular gap below pi
            if gaps.max() < 0.9 * np.pi and gaps.min() > 0.15:
                break
        r = rng.uniform(1.2, 3.2, size=n)
        return np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1)
    raise ValueError(f"unknown room kind {kind!r}")


def occluded_l_room():
    """L-room with the camera low in the vertical arm; the far end of the
    horizontal arm is hidden behind the inner corner at (1, 1.5)."""
    return np.array([[-1.0, -1.5], [1.0, -1.5], [1.0, 1.5], [4.0, 1.5], [4.0, 3.0], [-1.0, 3.0]])


def surface_points(layout, shape, z_ceiling_plane=None):
    """Region label and 3D surface point seen through every pixel center.

    Returns ``(region, xyz)`` where region is 0 floor, 1 wall, 2 ceiling.
    """
    h, w = shape
    fp = as_footprint(layout.vertices)
    ii, jj = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    u, v = pixel_to_angles(ii, jj, h, w)
    d2 = azimuth_to_direction(u[0])
    r = oracle_depth(np.zeros_like(d2), d2, fp)[None, :]
    zf = layout.camera_height
    zc = layout.camera_height - layout.height
    # distance along the floor plan to where the pixel's ray meets floor/ceiling
    tv = np.tan(v)
    with np.errstate(divide="ignore"):
        r_floor = np.where(tv > 0, zf / np.where(tv > 0, tv, 1.0), np.inf)
        r_ceil = np.where(tv < 0, zc / np.where(tv < 0, tv, -1.0), np.inf)
    region = np.ones((h, w), dtype=np.uint8)
    region[r_floor < r] = 0
    region[r_ceil < r] = 2
    rho = np.where(region == 0, r_floor, np.where(region == 2, r_ceil, r))
    z = np.where(region == 0, zf, np.where(region == 2, zc, rho * tv))
    xy = rho[..., None] * azimuth_to_direction(u)
    return region, np.concatenate([xy, z[..., None]], axis=-1)


def checker_panorama(layout, shape, cell=0.5, softness=0.08):
    """Grey-level checkerboard painted onto the room surfaces (smooth edges).

    Floor and ceiling use (x, y); walls use (arc length along the outline, z).
    """
    region, xyz = surface_points(layout, shape)
    a, b = _surface_params(layout, region, xyz)
    sa = np.tanh(np.sin(np.pi * a / cell) / softness)
    sb = np.tanh(np.sin(np.pi * b / cell) / softness)
    g = 0.5 + 0.4 * sa * sb
    img = np.round(np.clip(g, 0, 1) * 255).astype(np.uint8)
    return np.repeat(img[..., None], 3, axis=2)


def coordinate_panorama(layout, shape):
    """Float panorama whose channels hold each visible surface point's (x, y, z)."""
    _, xyz = surface_points(layout, shape)
    return xyz


def coordinate_panorama_png(layout, shape, extent=8.0):
    """8-bit rendering of :func:`coordinate_panorama`: x, y and z mapped from ``[-extent, extent]``."""
    xyz = coordinate_panorama(layout, shape)
    return np.round(np.clip((xyz / extent + 1) / 2, 0, 1) * 255).astype(np.uint8)


def _surface_params(layout, region, xyz):
    fp = np.asarray(layout.vertices)
    seg = np.roll(fp, -1, axis=0) - fp
    lengths = np.linalg.norm(seg, axis=1)
    starts = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    wall = region == 1
    pts = xyz[wall][:, :2]
    # arc-length coordinate of each wall point along its nearest edge
    rel = pts[:, None, :] - fp[None]
    s = np.clip(np.einsum("mkd,kd->mk", rel, seg) / lengths**2, 0, 1)
    dist = np.linalg.norm(rel - s[..., None] * seg[None], axis=-1)
    k = np.argmin(dist, axis=1)
    arc = starts[k] + s[np.arange(len(k)), k] * lengths[k]
    a = xyz[..., 0].copy()
    b = xyz[..., 1].copy()
    a[wall] = arc
    b[wall] = xyz[wall][:, 2]
    return a, b


def solid_angle_mc(footprint, z_plane, n=2_000_000, seed=0):
    """Monte-Carlo solid angle of a plane polygon seen from the origin."""
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    toward = d[:, 2] * np.sign(z_plane) > 0
    d = d[toward]
    pts = d[:, :2] * (z_plane / d[:, 2])[:, None]
    inside = point_in_polygon(pts, footprint)
    return 4 * np.pi * np.count_nonzero(inside) / n
