"""Differentiable 360-degree room-layout rendering from floor-plan density maps."""

from .density import DensityLogitMap, Plane
from .errors import DomainError, FormatError, GeometryError, PoleError, ValidationError
from .layout import LayoutPolygon
from .pipeline import RenderConfig, reconstruct

__all__ = [
    "DensityLogitMap",
    "DomainError",
    "FormatError",
    "GeometryError",
    "LayoutPolygon",
    "Plane",
    "PoleError",
    "RenderConfig",
    "ValidationError",
    "reconstruct",
]

__version__ = "0.1.0"
