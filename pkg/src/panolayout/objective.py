"""Training objective on a density logit map and its exact gradient.

Per-ray loss is the cross-entropy between the alpha-blending weights
``T_i * alpha_i`` (plus the escape mass ``T_{K+1}``) and a two-point target
that blends exactly to the ground-truth depth. The full objective is::

    w1 * L_primary + w2 * L_secondary + w3 * L_seg

where ``L_primary`` sums the ray losses of the floor and ceiling column rays,
``L_secondary`` is the mean over secondary cameras of each camera's summed
ray losses, and ``L_seg`` is the mean per-pixel binary cross-entropy of
``sigmoid(logit)`` against the exterior mask.

Everything downstream of the logits is evaluated in log space so the gradient
stays finite when weights underflow.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .coords import azimuth_to_direction
from .density import DensityLogitMap, Plane, sigmoid, softplus
from .errors import DomainError, GeometryError
from .polygons import polygon_area, sample_interior
from .render import (SamplingConfig, column_depths, polygon_azimuths, sample_secondary_ray,
                     sample_stencil)
from .synth import SyntheticScene, gt_masks, oracle_depth

LOG_EPS = float(np.log(1e-12))


@dataclass(frozen=True)
class ObjectiveWeights:
    w1: float = 1.0
    w2: float = 0.1
    w3: float = 1.0

    def __post_init__(self):
        if min(self.w1, self.w2, self.w3) < 0:
            raise DomainError("loss weights must be non-negative")


@dataclass
class LossGrad:
    value: float
    grad: np.ndarray


def gt_weights(t, d_star):
    """Compact target distribution over ``K`` samples plus the escape slot.

    The two samples bracketing ``d_star`` share the mass so that blending
    their depths gives ``d_star``; past the last sample all mass escapes, and
    before the first sample it all goes to sample 1.
    """
    t = np.asarray(t, dtype=np.float64)
    w = gt_weights_batch(t, np.atleast_1d(np.asarray(d_star, dtype=np.float64)))
    return w[0] if np.ndim(d_star) == 0 else w


def gt_weights_batch(t, d_star):
    """Vectorized :func:`gt_weights`: ``t`` is ``(K,)``, ``d_star`` is ``(R,)``; returns ``(R, K+1)``."""
    t = np.asarray(t, dtype=np.float64)
    d = np.asarray(d_star, dtype=np.float64)
    if t.ndim != 1 or len(t) < 1:
        raise DomainError("sample depths must be a non-empty 1-D array")
    if len(t) > 1 and np.any(np.diff(t) <= 0):
        raise DomainError("sample depths must be strictly increasing")
    if np.any(d <= 0):
        raise DomainError("ground-truth depth must be positive")
    k = len(t)
    out = np.zeros((len(d), k + 1))
    rows = np.arange(len(d))
    escape = d > t[-1]
    before = d <= t[0]
    mid = ~escape & ~before
    out[escape, k] = 1.0
    out[before, 0] = 1.0
    if np.any(mid):
        # t[lo] < d <= t[lo + 1]
        hi = np.searchsorted(t, d[mid], side="left")
        lo = hi - 1
        wk = (t[hi] - d[mid]) / (t[hi] - t[lo])
        out[rows[mid], lo] = wk
        out[rows[mid], hi] = 1.0 - wk
    return out


def ce_weight_loss(rs, target):
    """Cross-entropy between rendered weights and ``target`` (shape ``(..., K+1)``)."""
    target = np.asarray(target, dtype=np.float64)
    if target.shape[-1] != rs.alpha.shape[-1] + 1:
        raise DomainError("target must have K+1 entries")
    with np.errstate(divide="ignore"):
        lw = np.maximum(np.log(rs.weights), LOG_EPS)
        lt = np.maximum(np.log(rs.escape), LOG_EPS)
    out = -np.sum(target[..., :-1] * lw, axis=-1) - target[..., -1] * lt
    return out.item() if np.ndim(out) == 0 else out


def _log_weights(sigma):
    cum = np.cumsum(sigma, axis=-1)
    excl = np.concatenate([np.zeros_like(cum[..., :1]), cum[..., :-1]], axis=-1)
    with np.errstate(divide="ignore"):
        log_alpha = np.log(-np.expm1(-sigma))
    return log_alpha - excl, -cum[..., -1]


def ray_losses(logit, dscale, target):
    """Per-ray cross-entropy given interpolated sample logits ``(R, K)``."""
    logw, log_escape = _log_weights(softplus(logit) * dscale)
    k = logit.shape[-1]
    return (-np.sum(target[..., :k] * np.maximum(logw, LOG_EPS), axis=-1)
            - target[..., k] * np.maximum(log_escape, LOG_EPS))


def ray_losses_backward(logit, dscale, target):
    """Per-ray losses and ``d loss / d logit`` at every sample."""
    sigma = softplus(logit) * dscale
    logw, log_escape = _log_weights(sigma)
    k = logit.shape[-1]
    act = logw > LOG_EPS
    act_esc = log_escape > LOG_EPS
    loss = (-np.sum(target[..., :k] * np.maximum(logw, LOG_EPS), axis=-1)
            - target[..., k] * np.maximum(log_escape, LOG_EPS))
    a = target[..., :k] * act
    b = target[..., k] * act_esc
    # sum_{i > j} a_i
    after = np.cumsum(a[..., ::-1], axis=-1)[..., ::-1] - a
    with np.errstate(divide="ignore", over="ignore"):
        inv = np.where(a > 0, 1.0 / np.expm1(sigma), 0.0)
    dsigma = after + b[..., None] - a * inv
    return loss, dsigma * sigmoid(logit) * dscale


def seg_loss(dmap, gt):
    """Mean binary cross-entropy of ``sigmoid(logit)`` against the exterior mask."""
    mask = _seg_mask(dmap.shape, gt, dmap.z_ceiling)
    x = dmap.logits
    return float(np.mean(softplus(x) - mask * x))


def _seg_mask(shape, gt, z_ceiling):
    return gt_masks(SyntheticScene(gt, tuple(shape), z_ceiling=z_ceiling)).astype(np.float64)


@dataclass
class RayGroup:
    """Rays sharing one sample count: stencils, density scales and targets."""

    idx: np.ndarray      # (R, K, 4) flat pixel indices
    w: np.ndarray        # (R, K, 4) bilinear weights
    dscale: np.ndarray   # (R, K) segment length in density units
    target: np.ndarray   # (R, K+1)
    coeff: float

    def __post_init__(self):
        self._gather = None

    def operators(self, n_pix):
        """Sparse interpolation matrix (samples x pixels) and its transpose, cached."""
        if self._gather is None or self._gather[0].shape[1] != n_pix:
            rows = np.repeat(np.arange(self.idx.shape[0] * self.idx.shape[1]), 4)
            a = sparse.csr_matrix((self.w.ravel(), (rows, self.idx.ravel())),
                                  shape=(rows[-1] + 1 if len(rows) else 0, n_pix))
            self._gather = (a, a.T.tocsr())
        return self._gather

    def sample_logits(self, flat_logits, rays=slice(None)):
        if isinstance(rays, slice) and rays == slice(None) and flat_logits.dtype == np.float64:
            a, _ = self.operators(flat_logits.size)
            return (a @ flat_logits).reshape(self.idx.shape[:2])
        return np.sum(flat_logits[self.idx[rays]] * self.w[rays], axis=-1)


class LayoutObjective:
    """Differentiable objective for one ground-truth layout and raster size.

    All ray geometry depends only on the layout, the raster size and the
    seed, so it is built once; calling the object evaluates the loss and
    gradient for a logit array.
    """

    def __init__(self, gt, shape, weights=ObjectiveWeights(), seed=0,
                 sampling=SamplingConfig(), n_cams=32, secondary_vertices=None,
                 z_ceiling=-1.0, margin=0.1):
        gt.validate()
        if polygon_area(gt.vertices) < 1e-9:
            raise GeometryError("ground-truth layout is degenerate")
        self.gt = gt
        self.shape = tuple(shape)
        self.weights = weights
        self.z_floor = gt.camera_height
        self.z_ceiling = z_ceiling
        # geometry only: stencils do not depend on the logit values
        geo = DensityLogitMap(np.zeros(self.shape), self.z_floor, z_ceiling)
        self.mask = _seg_mask(self.shape, gt, z_ceiling)
        self.groups = []
        h, w = self.shape
        dirs = azimuth_to_direction(polygon_azimuths(w))
        zeros = np.zeros_like(dirs)
        for plane, fp in ((Plane.FLOOR, gt.vertices), (Plane.CEILING, gt.ceiling_footprint(z_ceiling))):
            _, t = column_depths(h, geo.plane_z(plane), plane)
            idx, sw = sample_stencil(geo, plane, zeros, dirs, t)
            target = gt_weights_batch(t, oracle_depth(zeros, dirs, fp))
            self.groups.append(RayGroup(idx, sw, np.ones((w, len(t))), target, weights.w1))
        self.centers = sample_interior(gt.vertices, n_cams, margin=margin, seed=seed)
        m = secondary_vertices or w
        sdirs = azimuth_to_direction(polygon_azimuths(m))
        for c in self.centers:
            origins = np.broadcast_to(c, sdirs.shape)
            t, delta = sample_secondary_ray(origins, sdirs, self.z_floor,
                                            sampling.n_samples, sampling.t_far)
            target = gt_weights_batch(t, oracle_depth(origins, sdirs, gt.vertices))
            # samples after the last target weight never enter the loss
            used = np.flatnonzero(target[:, :-1].any(axis=0))
            keep = len(t) if target[:, -1].any() else int(used.max()) + 1
            idx, sw = sample_stencil(geo, Plane.FLOOR, origins, sdirs, t[:keep])
            target = np.concatenate([target[:, :keep], target[:, -1:]], axis=1)
            dscale = delta[:, :keep] * (h / np.pi)
            self.groups.append(RayGroup(idx, sw, dscale, target, weights.w2 / len(self.centers)))

    def __call__(self, logits):
        x = np.asarray(logits, dtype=np.float64)
        if x.shape != self.shape:
            raise DomainError(f"logit map shape {x.shape} != {self.shape}")
        flat = x.ravel()
        value = 0.0
        grad = np.zeros(flat.size)
        for g in self.groups:
            if g.coeff == 0.0:
                continue
            s = g.sample_logits(flat)
            loss, dl = ray_losses_backward(s, g.dscale, g.target)
            value += g.coeff * float(np.sum(loss))
            _, at = g.operators(flat.size)
            grad += at @ (g.coeff * dl.ravel())
        w3 = self.weights.w3
        if w3:
            n = flat.size
            y = self.mask.ravel()
            value += w3 * float(np.mean(softplus(flat) - y * flat))
            grad += (w3 / n) * (sigmoid(flat) - y)
        return LossGrad(value, grad.reshape(self.shape))

    def value(self, logits):
        """Loss only (no gradient)."""
        flat = np.asarray(logits, dtype=np.float64).ravel()
        total = 0.0
        for g in self.groups:
            if g.coeff:
                total += g.coeff * float(np.sum(ray_losses(g.sample_logits(flat), g.dscale, g.target)))
        if self.weights.w3:
            y = self.mask.ravel()
            total += self.weights.w3 * float(np.mean(softplus(flat) - y * flat))
        return total

    def touched_pixels(self):
        """Flat indices of pixels inside at least one weighted ray sample's bilinear stencil."""
        seen = np.zeros(int(np.prod(self.shape)), dtype=bool)
        for g in self.groups:
            if g.coeff == 0.0:
                continue
            seen[g.idx[g.w > 0]] = True
        return np.flatnonzero(seen)

    def rays_touching(self, pixels):
        """For each group, a list (one per pixel) of ray indices whose stencil contains it."""
        pixels = np.asarray(pixels)
        lut = np.full(int(np.prod(self.shape)), -1, dtype=np.int64)
        lut[pixels] = np.arange(len(pixels))
        out = []
        for g in self.groups:
            lab = lut[g.idx]
            lab[g.w <= 0] = -1
            r, _, _ = np.nonzero(lab >= 0)
            pairs = np.unique(np.stack([lab[lab >= 0], r], axis=1), axis=0)
            split = np.searchsorted(pairs[:, 0], np.arange(len(pixels) + 1))
            out.append([pairs[split[k]:split[k + 1], 1] for k in range(len(pixels))])
        return out

    def local_value(self, logits, pixel, rays):
        """Every loss term that depends on ``pixel``; ``rays`` comes from :meth:`rays_touching`.

        Differences of this quantity equal differences of the full loss when
        only ``pixel`` changes, without the round-off of the large untouched
        sum. The arithmetic runs in the precision of ``logits`` (pass
        ``np.longdouble`` for finite differences).
        """
        flat = np.asarray(logits).ravel()
        dt = flat.dtype
        total = dt.type(0)
        for g, r in zip(self.groups, rays):
            if g.coeff and len(r):
                s = np.sum(flat[g.idx[r]] * g.w[r].astype(dt), axis=-1)
                loss = ray_losses(s, g.dscale[r].astype(dt), g.target[r].astype(dt))
                total += dt.type(g.coeff) * np.sum(loss)
        if self.weights.w3:
            x, y = flat[pixel], dt.type(self.mask.ravel()[pixel])
            total += dt.type(self.weights.w3) * (softplus(x) - y * x) / dt.type(flat.size)
        return total


def total_loss(dmap, gt, weights=ObjectiveWeights(), seed=0, sampling=SamplingConfig(), n_cams=32):
    """Objective value and gradient w.r.t. every logit of ``dmap``."""
    if abs(dmap.z_floor - gt.camera_height) > 1e-12:
        raise DomainError("map floor plane and layout camera height disagree")
    obj = LayoutObjective(gt, dmap.shape, weights, seed, sampling, n_cams, z_ceiling=dmap.z_ceiling)
    return obj(dmap.logits)


@dataclass
class GradCheckReport:
    pixels: np.ndarray
    analytic: np.ndarray
    numeric: np.ndarray
    rel_err: np.ndarray

    @property
    def max_rel_err(self):
        return float(self.rel_err.max()) if len(self.rel_err) else 0.0


def gradcheck(objective, logits, n_probes=200, h=1e-4, seed=0, floor=1e-8):
    """Compare the analytic gradient with central finite differences at random touched pixels.

    Finite differences only re-evaluate the loss terms touching the probed
    pixel, in extended precision. The relative error is
    ``|g - fd| / max(|g|, |fd|, floor)``.
    """
    if n_probes <= 0:
        raise DomainError("n_probes must be positive")
    x = np.array(logits, dtype=np.float64)
    grad = objective(x).grad.ravel()
    touched = objective.touched_pixels()
    rng = np.random.default_rng(seed)
    pixels = np.sort(rng.choice(touched, size=min(n_probes, len(touched)), replace=False))
    rays = objective.rays_touching(pixels)
    numeric = np.empty(len(pixels))
    flat = x.ravel().astype(np.longdouble)
    hh = np.longdouble(h)
    for k, p in enumerate(pixels):
        r = [group_rays[k] for group_rays in rays]
        old = flat[p]
        flat[p] = old + hh
        fp = objective.local_value(flat, p, r)
        flat[p] = old - hh
        fm = objective.local_value(flat, p, r)
        flat[p] = old
        numeric[k] = float((fp - fm) / (2 * hh))
    analytic = grad[pixels]
    rel = np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return GradCheckReport(pixels, analytic, numeric, rel)
