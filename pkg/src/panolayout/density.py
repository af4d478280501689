"""Density logit maps: activation, bilinear lookup, binary-segmentation view."""

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

Z_FLOOR = 1.6
Z_CEILING_TEMP = -1.0

# beyond this |logit| softplus switches to its asymptote
SOFTPLUS_THRESHOLD = 30.0


class Plane(enum.Enum):
    FLOOR = "floor"
    CEILING = "ceiling"


@dataclass(frozen=True)
class DensityLogitMap:
    """``H x W`` logits; rows ``[0, H/2)`` live on the ceiling plane, the rest on the floor.

    The array is copied to float64 and made read-only on construction.
    """

    logits: np.ndarray
    z_floor: float = Z_FLOOR
    z_ceiling: float = Z_CEILING_TEMP

    def __post_init__(self):
        arr = np.array(self.logits, dtype=np.float64)
        if arr.ndim != 2:
            raise DomainError(f"logit map must be 2-D, got shape {arr.shape}")
        h, w = arr.shape
        if h < 2 or h % 2:
            raise DomainError(f"map height must be even and >= 2, got {h}")
        if w < 1:
            raise DomainError("map width must be positive")
        if not np.all(np.isfinite(arr)):
            raise DomainError("logit map contains non-finite values")
        if not (self.z_floor > 0 and self.z_ceiling < 0):
            raise DomainError("need z_floor > 0 > z_ceiling")
        arr.setflags(write=False)
        object.__setattr__(self, "logits", arr)

    @property
    def height(self):
        return self.logits.shape[0]

    @property
    def width(self):
        return self.logits.shape[1]

    @property
    def shape(self):
        return self.logits.shape

    def plane_z(self, plane):
        return self.z_floor if plane is Plane.FLOOR else self.z_ceiling

    def row_range(self, plane):
        """Half-open integer row range ``[lo, hi)`` owned by ``plane``."""
        h2 = self.height // 2
        return (h2, self.height) if plane is Plane.FLOOR else (0, h2)

    def with_logits(self, logits):
        return DensityLogitMap(logits, self.z_floor, self.z_ceiling)

    def roll_columns(self, k):
        return self.with_logits(np.roll(self.logits, k, axis=1))


def _floating(x):
    x = np.asarray(x)
    return x if np.issubdtype(x.dtype, np.floating) else x.astype(np.float64)


def softplus(x):
    """``log(1 + exp(x))`` without overflow. Keeps the input's float precision."""
    x = _floating(x)
    out = np.where(x > SOFTPLUS_THRESHOLD, x,
                   np.log1p(np.exp(np.minimum(x, SOFTPLUS_THRESHOLD))))
    return out.item() if out.ndim == 0 else out


def sigmoid(x):
    x = _floating(x)
    # exp(-|x|) never overflows
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out.item() if out.ndim == 0 else out


def bilinear_stencil(rows, cols, height, width, plane):
    """Flat indices and weights of the 4-pixel bilinear stencil.

    Rows are clamped to the half-plane's own edge rows, columns wrap modulo
    ``width``. Returns ``(idx, w)`` with trailing dimension 4.
    """
    rows = np.asarray(rows, dtype=np.float64)
    cols = np.asarray(cols, dtype=np.float64)
    h2 = height // 2
    if plane is Plane.FLOOR:
        lo, hi = h2, height - 1
        bad = rows < h2 - 0.5
    else:
        lo, hi = 0, h2 - 1
        bad = rows >= h2 - 0.5
    if np.any(bad):
        raise DomainError(f"query row lies outside the {plane.value} half of the map")
    r = np.clip(rows, lo, hi)
    r0 = np.floor(r)
    fr = r - r0
    r0 = r0.astype(np.int64)
    r1 = np.minimum(r0 + 1, hi)
    c0f = np.floor(cols)
    fc = cols - c0f
    c0 = np.mod(c0f.astype(np.int64), width)
    c1 = np.mod(c0 + 1, width)
    idx = np.stack([r0 * width + c0, r0 * width + c1,
                    r1 * width + c0, r1 * width + c1], axis=-1)
    w = np.stack([(1 - fr) * (1 - fc), (1 - fr) * fc,
                  fr * (1 - fc), fr * fc], axis=-1)
    return idx, w


def interp(rows, cols, dmap, plane):
    """Bilinearly interpolated logit at continuous pixel position(s)."""
    idx, w = bilinear_stencil(rows, cols, dmap.height, dmap.width, plane)
    out = np.sum(dmap.logits.ravel()[idx] * w, axis=-1)
    return out.item() if out.ndim == 0 else out


def to_binary_seg_logit(dmap):
    """The same raster read as per-pixel sigmoid logits.

    With the segment length rescaled to pixel units (``delta * H / pi``), the
    opacity of a one-pixel vertical segment is ``1 - sigmoid(-x) = sigmoid(x)``,
    so no conversion is needed.
    """
    return np.array(dmap.logits)


def segment_opacity(logit, delta):
    """Opacity of a segment of length ``delta`` (already in density units)."""
    return -np.expm1(-softplus(logit) * np.asarray(delta, dtype=np.float64))
