"""Floor-plan polygon algebra.

Footprints are plain ``(N, 2)`` float arrays of ordered vertices in meters.
Boolean operations go through shapely; everything the merging algorithm and
the renderer rely on (ray casting, point-in-polygon, Kruskal, tree diameter)
is implemented here directly.
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import shapely
from shapely.geometry import LinearRing, MultiPolygon, Polygon

from .errors import GeometryError

log = logging.getLogger(__name__)

# Above this many vertices the MST candidate edges come from a Delaunay
# triangulation (the Euclidean MST is a subgraph of it) instead of all pairs.
COMPLETE_GRAPH_MAX_VERTICES = 3000

_EPS = 1e-12


def as_footprint(vertices):
    f = np.asarray(vertices, dtype=np.float64)
    if f.ndim != 2 or f.shape[1] != 2:
        raise GeometryError(f"footprint must have shape (N, 2), got {f.shape}")
    if len(f) < 3:
        raise GeometryError(f"footprint needs at least 3 vertices, got {len(f)}")
    if not np.all(np.isfinite(f)):
        raise GeometryError("footprint has non-finite coordinates")
    return f


def signed_area(f):
    """Shoelace area; positive for counter-clockwise vertex order."""
    f = np.asarray(f, dtype=np.float64)
    x, y = f[:, 0], f[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_area(f):
    return abs(signed_area(f))


def centroid(f):
    f = np.asarray(f, dtype=np.float64)
    x, y = f[:, 0], f[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = cross.sum() / 2.0
    if abs(a) < _EPS:
        return f.mean(axis=0)
    return np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6.0 * a)


def ccw(f):
    """Return ``f`` ordered counter-clockwise, keeping vertex 0 first."""
    f = np.asarray(f, dtype=np.float64)
    if signed_area(f) < 0:
        return np.concatenate([f[:1], f[:0:-1]])
    return f


def segment_distance(points, a, b):
    """Distance from ``points (M, 2)`` to each segment ``a[k] -> b[k]``; shape ``(M, K)``."""
    p = np.asarray(points, dtype=np.float64)[:, None, :]
    ab = b - a
    denom = np.einsum("kd,kd->k", ab, ab)
    denom = np.where(denom > 0, denom, 1.0)
    s = np.clip(np.einsum("mkd,kd->mk", p - a, ab) / denom, 0.0, 1.0)
    closest = a + s[..., None] * ab
    return np.linalg.norm(p - closest, axis=-1)


def edge_clearance(points, f):
    """Distance from each point to the nearest edge of ``f``."""
    f = as_footprint(f)
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    ring = LinearRing(f)
    return shapely.distance(ring, shapely.points(points))


def point_in_polygon(p, f):
    """Even-odd containment test; points on the boundary count as inside.

    ``p`` may be a single ``(x, y)`` or an ``(M, 2)`` array.
    """
    f = as_footprint(f)
    pts = np.asarray(p, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    tol = 1e-12 * max(1.0, float(np.abs(f).max()))
    poly = Polygon(f)
    if poly.is_valid:
        shapely.prepare(poly)
        inside = shapely.contains_xy(poly, pts[:, 0], pts[:, 1])
        near = ~inside
        if np.any(near):
            ring = poly.exterior
            inside[near] = shapely.distance(ring, shapely.points(pts[near])) <= tol
        out = inside
    else:
        out = _even_odd(pts, f, tol)
    return bool(out[0]) if single else out


def _even_odd(pts, f, tol):
    xi, yi = f[:, 0], f[:, 1]
    xj, yj = np.roll(xi, -1), np.roll(yi, -1)
    out = np.empty(len(pts), dtype=bool)
    for s in range(0, len(pts), 4096):
        px = pts[s:s + 4096, 0:1]
        py = pts[s:s + 4096, 1:2]
        straddle = (yi > py) != (yj > py)
        dy = np.where(yj != yi, yj - yi, 1.0)
        x_cross = (xj - xi) * (py - yi) / dy + xi
        inside = np.count_nonzero(straddle & (px < x_cross), axis=1) % 2 == 1
        on_edge = segment_distance(pts[s:s + 4096], f, np.roll(f, -1, axis=0)).min(axis=1)
        out[s:s + 4096] = inside | (on_edge <= tol)
    return out


def ray_polygon_intersection(origins, dirs, f):
    """First positive hit of rays ``origins + t * dirs`` against the closed polygon.

    Returns ``(t, edge)``: distances (``inf`` where a ray misses) and the index
    ``k`` of the hit edge ``f[k] -> f[k+1]``. Equal distances resolve to the
    lower edge index.
    """
    f = as_footprint(f)
    o = np.atleast_2d(np.asarray(origins, dtype=np.float64))
    d = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    o, d = np.broadcast_arrays(o, d)
    a = f
    e = np.roll(f, -1, axis=0) - f
    # o + t d = a + s e
    denom = d[:, None, 0] * e[None, :, 1] - d[:, None, 1] * e[None, :, 0]
    ao = a[None] - o[:, None]
    safe = np.where(np.abs(denom) > 1e-300, denom, 1.0)
    t = (ao[..., 0] * e[None, :, 1] - ao[..., 1] * e[None, :, 0]) / safe
    s = (ao[..., 0] * d[:, None, 1] - ao[..., 1] * d[:, None, 0]) / safe
    tol = 1e-12
    ok = (np.abs(denom) > 1e-300) & (t > tol) & (s >= -tol) & (s <= 1 + tol)
    t = np.where(ok, t, np.inf)
    edge = np.argmin(t, axis=1)
    return t[np.arange(len(t)), edge], edge


def is_simple(f):
    """True if the closed outline has no repeated vertices and no self-intersections."""
    f = as_footprint(f)
    if np.any(np.all(f == np.roll(f, -1, axis=0), axis=1)):
        return False
    return bool(LinearRing(f).is_simple)


def _to_shapely(f):
    poly = Polygon(as_footprint(f))
    if not poly.is_valid:
        poly = shapely.make_valid(poly)
    return poly


def _polygon_parts(geom):
    if isinstance(geom, Polygon):
        return [geom] if not geom.is_empty else []
    if isinstance(geom, MultiPolygon):
        return [g for g in geom.geoms if not g.is_empty]
    if hasattr(geom, "geoms"):
        out = []
        for g in geom.geoms:
            out.extend(_polygon_parts(g))
        return out
    return []


def union(footprints):
    """Boolean union of overlapping footprints, returned as its outer boundary (CCW).

    Holes are dropped with a warning. Disjoint pieces raise :class:`GeometryError`.
    """
    footprints = [as_footprint(f) for f in footprints]
    if not footprints:
        raise GeometryError("union of an empty list")
    merged = shapely.union_all([_to_shapely(f) for f in footprints])
    parts = _polygon_parts(merged)
    total = sum(p.area for p in parts)
    # slivers from numerically self-touching inputs are not real components
    parts = [p for p in parts if p.area > 1e-9 * max(total, 1.0)]
    if not parts:
        raise GeometryError("union has zero area")
    if len(parts) > 1:
        desc = "; ".join(f"#{k}: area={p.area:.6g} bounds={tuple(round(b, 4) for b in p.bounds)}"
                         for k, p in enumerate(parts))
        raise GeometryError(f"union has {len(parts)} disjoint components: {desc}")
    poly = parts[0]
    if len(poly.interiors):
        warnings.warn(f"union has {len(poly.interiors)} hole(s); discarding them", stacklevel=2)
    ring = np.asarray(poly.exterior.coords)[:-1]
    return ccw(ring)


def iou2d(a, b):
    pa, pb = _to_shapely(a), _to_shapely(b)
    u = pa.union(pb).area
    if u <= 0:
        raise GeometryError("IoU undefined for zero-area union")
    return float(pa.intersection(pb).area / u)


def iou3d(a, b):
    """Volumetric IoU of two extruded layouts sharing the floor plane.

    ``a`` and ``b`` are :class:`~panolayout.layout.LayoutPolygon` instances.
    """
    pa, pb = _to_shapely(a.vertices), _to_shapely(b.vertices)
    inter = pa.intersection(pb).area * min(a.height, b.height)
    uni = pa.area * a.height + pb.area * b.height - inter
    if uni <= 0:
        raise GeometryError("IoU undefined for zero-volume union")
    return float(inter / uni)


def sample_interior(f, n, margin=0.1, seed=0, max_rejections=1000):
    """``n`` points uniformly inside ``f`` with at least ``margin`` clearance to every edge.

    Rejection sampling over the bounding box. If ``max_rejections`` draws in a
    row fail, the remaining points fall back to the polygon centroid.
    """
    f = as_footprint(f)
    rng = np.random.default_rng(seed)
    if n <= 0:
        return np.zeros((0, 2))
    lo, hi = f.min(axis=0), f.max(axis=0)
    out = []
    misses = 0
    batch = max(64, 2 * n)
    while len(out) < n:
        cand = rng.uniform(lo, hi, size=(batch, 2))
        ok = point_in_polygon(cand, f) & (edge_clearance(cand, f) >= margin)
        for c, good in zip(cand, ok):
            if good:
                out.append(c)
                misses = 0
                if len(out) == n:
                    break
            else:
                misses += 1
                if misses >= max_rejections:
                    break
        if misses >= max_rejections:
            log.warning("interior sampling exhausted %d rejections; using centroid", max_rejections)
            c = centroid(f)
            out.extend([c] * (n - len(out)))
    return np.array(out)


@dataclass
class MergedLayout:
    """Merged footprint; ``provenance[k]`` is -1 for primary vertices, else the secondary index."""

    footprint: np.ndarray
    provenance: np.ndarray
    simple: bool


def kruskal(n, a, b, w):
    """Minimum spanning forest by Kruskal's algorithm.

    Ties in ``w`` break on ``(a, b)`` lexicographically. Returns the accepted
    edge indices in acceptance order.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    order = np.lexsort((b, a, w))
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    chosen = []
    for e in order.tolist():
        ra, rb = find(int(a[e])), find(int(b[e]))
        if ra != rb:
            parent[ra] = rb
            chosen.append(e)
            if len(chosen) == n - 1:
                break
    return np.array(chosen, dtype=np.int64)


def tree_diameter_path(n, a, b, w):
    """Longest weighted path in a tree, found with two depth-first searches."""
    adj = [[] for _ in range(n)]
    for x, y, c in zip(a.tolist(), b.tolist(), w.tolist()):
        adj[x].append((y, c))
        adj[y].append((x, c))

    def farthest(src):
        dist = np.full(n, -1.0)
        parent = np.full(n, -1, dtype=np.int64)
        dist[src] = 0.0
        stack = [src]
        while stack:
            x = stack.pop()
            for y, c in adj[x]:
                if dist[y] < 0:
                    dist[y] = dist[x] + c
                    parent[y] = x
                    stack.append(y)
        return int(np.argmax(dist)), parent

    end_a, _ = farthest(0)
    end_b, parent = farthest(end_a)
    path = [end_b]
    while path[-1] != end_a:
        path.append(int(parent[path[-1]]))
    return np.array(path[::-1], dtype=np.int64)


def _candidate_edges(pts):
    n = len(pts)
    if n > COMPLETE_GRAPH_MAX_VERTICES:
        try:
            from scipy.spatial import Delaunay
            tri = Delaunay(pts)
            s = tri.simplices
            e = np.concatenate([s[:, [0, 1]], s[:, [1, 2]], s[:, [0, 2]]])
            e.sort(axis=1)
            e = np.unique(e, axis=0)
            return e[:, 0], e[:, 1]
        except Exception:  # degenerate (e.g. collinear) input: use all pairs
            log.debug("Delaunay failed; falling back to the complete graph")
    return np.triu_indices(n, k=1)


def merge_mst(primary, secondaries=()):
    """Merge rendered polygons by walking the diameter of their vertices' Euclidean MST.

    All vertices from the primary and secondary polygons form a complete
    graph weighted by distance; the path between the two tree vertices that
    are farthest apart (along the tree) is closed into the merged polygon.
    """
    parts = [np.asarray(primary, dtype=np.float64).reshape(-1, 2)]
    parts += [np.asarray(s, dtype=np.float64).reshape(-1, 2) for s in secondaries]
    pts = np.concatenate(parts)
    prov = np.concatenate([np.full(len(p), k - 1) for k, p in enumerate(parts)])
    n = len(pts)
    if n < 3:
        raise GeometryError(f"merging needs at least 3 vertices, got {n}")
    a, b = _candidate_edges(pts)
    w = np.linalg.norm(pts[a] - pts[b], axis=1)
    tree = kruskal(n, a, b, w)
    path = tree_diameter_path(n, a[tree], b[tree], w[tree])
    fp = pts[path]
    simple = len(fp) >= 3 and is_simple(fp)
    if not simple:
        log.warning("merged polygon (%d vertices) is not simple", len(fp))
    return MergedLayout(footprint=fp, provenance=prov[path], simple=simple)
