"""Room layout: floor-plan polygon, layout height and camera height."""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .polygons import is_simple, polygon_area

CAMERA_HEIGHT = 1.6


@dataclass(frozen=True)
class LayoutPolygon:
    vertices: np.ndarray
    height: float
    camera_height: float = CAMERA_HEIGHT

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "height", float(self.height))
        object.__setattr__(self, "camera_height", float(self.camera_height))

    def validate(self, require_simple=True):
        """Raise :class:`ValidationError` unless the layout is usable.

        Returns ``self`` so calls can be chained.
        """
        v = self.vertices
        if v.ndim != 2 or v.shape[1] != 2:
            raise ValidationError(f"vertices must be a list of [x, y] pairs, got shape {v.shape}")
        if len(v) < 3:
            raise ValidationError(f"layout needs at least 3 vertices, got {len(v)}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("vertices contain non-finite values")
        same = np.all(v == np.roll(v, -1, axis=0), axis=1)
        if np.any(same):
            raise ValidationError(f"degenerate edge {int(np.argmax(same))}")
        if not (np.isfinite(self.height) and self.height > 0):
            raise ValidationError(f"height must be positive, got {self.height}")
        if not (np.isfinite(self.camera_height) and self.camera_height > 0):
            raise ValidationError(f"camera_height must be positive, got {self.camera_height}")
        if require_simple:
            if not is_simple(v):
                raise ValidationError("layout polygon is not simple")
            if polygon_area(v) <= 0:
                raise ValidationError("layout polygon has zero area")
        return self

    @property
    def ceiling_distance(self):
        """Camera-to-ceiling distance."""
        return self.height - self.camera_height

    def ceiling_footprint(self, z_ceiling):
        """Ceiling outline projected through the camera onto the plane ``z = z_ceiling``."""
        if self.height <= self.camera_height:
            raise ValidationError("ceiling must be above the camera (height > camera_height)")
        return self.vertices * (-z_ceiling / self.ceiling_distance)
