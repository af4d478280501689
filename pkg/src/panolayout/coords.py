"""Equirectangular image <-> spherical angles <-> z-down world frame.

Conventions:
    * pixel centers sit at integer ``(i, j)``; the continuous row range is
      ``[-0.5, H - 0.5)`` and columns wrap with period ``W``.
    * ``u`` is the azimuth, ``arctan2(x, y)``, so the image center column looks
      along +y and +x is to the right.
    * ``v`` is the elevation from the xy-plane, positive toward the floor (+z).

All functions accept scalars or numpy arrays and broadcast.
"""

import numpy as np

from .errors import DomainError, PoleError


def pixel_to_angles(i, j, height, width):
    """Continuous pixel coordinates to ``(u, v)`` in radians."""
    if height <= 0 or width <= 0:
        raise DomainError(f"image size must be positive, got {height}x{width}")
    i = np.asarray(i, dtype=np.float64)
    j = np.asarray(j, dtype=np.float64)
    if np.any(i < -0.5) or np.any(i >= height - 0.5):
        raise DomainError(f"row outside [-0.5, {height - 0.5})")
    u = ((j + 0.5) / width - 0.5) * 2.0 * np.pi
    # columns wrap; fold back into [-pi, pi)
    u = np.mod(u + np.pi, 2.0 * np.pi) - np.pi
    v = ((i + 0.5) / height - 0.5) * np.pi
    return _unbox(u), _unbox(v)


def angles_to_pixel(u, v, height, width):
    """Inverse of :func:`pixel_to_angles`. Columns are not wrapped."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    j = (u / (2.0 * np.pi) + 0.5) * width - 0.5
    i = (v / np.pi + 0.5) * height - 0.5
    return _unbox(i), _unbox(j)


def angles_to_world(u, v, depth):
    """Lift ``(u, v)`` at distance ``depth`` to ``(x, y, z)``."""
    depth = np.asarray(depth, dtype=np.float64)
    if np.any(depth <= 0):
        raise DomainError("depth must be positive")
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    cv = np.cos(v)
    x = depth * cv * np.sin(u)
    y = depth * cv * np.cos(u)
    z = depth * np.sin(v)
    return _unbox(x), _unbox(y), _unbox(z)


def world_to_angles(x, y, z):
    """``(x, y, z)`` to ``(u, v)``. Points on the z axis raise :class:`PoleError`."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if np.any((x == 0.0) & (y == 0.0)):
        raise PoleError("azimuth undefined for a point with x = y = 0")
    u = np.arctan2(x, y)
    v = np.arctan2(z, np.hypot(x, y))
    return _unbox(u), _unbox(v)


def eq_proj(x, y, z, height, width):
    """Project a world point to continuous equirectangular ``(i, j)``."""
    u, v = world_to_angles(x, y, z)
    return angles_to_pixel(u, v, height, width)


def column_azimuth(col, width):
    """Azimuth of the center of image column ``col``."""
    return ((np.asarray(col, dtype=np.float64) + 0.5) / width - 0.5) * 2.0 * np.pi


def azimuth_to_direction(u):
    """Unit floor-plan direction ``(x, y)`` for azimuth ``u``; shape ``(..., 2)``."""
    u = np.asarray(u, dtype=np.float64)
    return np.stack([np.sin(u), np.cos(u)], axis=-1)


def _unbox(a):
    return a.item() if a.ndim == 0 else a
