"""End-to-end layout reconstruction from a density logit map."""

from dataclasses import dataclass, field

import numpy as np

from .density import Plane
from .errors import DomainError
from .layout import LayoutPolygon
from .polygons import ccw, merge_mst, signed_area, union
from .render import (SamplingConfig, infer_height, primary_polygon, secondary_polygons)

MERGE_MODES = ("none", "union", "mst")


@dataclass(frozen=True)
class RenderConfig:
    n_secondary_cams: int = 32
    samples_per_ray: int = 1024
    t_far: float = 16.0
    merge: str = "mst"
    seed: int = 0
    secondary_vertices: int = None  # None: one ray per image column
    margin: float = 0.1
    threads: int = None

    def __post_init__(self):
        if self.n_secondary_cams < 0 or self.samples_per_ray < 2:
            raise DomainError("sample and camera counts must be non-negative")
        if not self.t_far > 0:
            raise DomainError("t_far must be positive")
        if self.merge not in MERGE_MODES:
            raise DomainError(f"merge must be one of {MERGE_MODES}, got {self.merge!r}")

    @property
    def sampling(self):
        return SamplingConfig(self.samples_per_ray, self.t_far)


@dataclass
class Reconstruction:
    layout: LayoutPolygon
    primary: np.ndarray
    ceiling: np.ndarray
    secondaries: list = field(default_factory=list)
    provenance: np.ndarray = None
    escaped_rays: int = 0
    simple: bool = True


def reconstruct(dmap, config=RenderConfig()):
    """Primary + secondary rendering, polygon merging and height inference."""
    floor = primary_polygon(dmap, Plane.FLOOR, full=True)
    ceiling = primary_polygon(dmap, Plane.CEILING, full=True)
    height = infer_height(floor.vertices, ceiling.vertices, dmap.z_floor, dmap.z_ceiling)
    escaped = floor.escaped + ceiling.escaped
    secondaries = []
    if config.merge != "none" and config.n_secondary_cams > 0:
        rendered = secondary_polygons(dmap, floor.vertices, config.n_secondary_cams, config.seed,
                                      config.sampling, m=config.secondary_vertices,
                                      margin=config.margin, threads=config.threads, full=True)
        escaped += sum(r.escaped for r in rendered)
        secondaries = [r.vertices for r in rendered]
    provenance = np.full(len(floor.vertices), -1)
    simple = True
    if config.merge == "none" or not secondaries:
        footprint = floor.vertices
    elif config.merge == "union":
        footprint = union([floor.vertices] + secondaries)
        provenance = None
    else:
        merged = merge_mst(floor.vertices, secondaries)
        footprint, provenance, simple = merged.footprint, merged.provenance, merged.simple
    if provenance is not None and len(footprint) and signed_area(footprint) < 0:
        provenance = np.concatenate([provenance[:1], provenance[:0:-1]])
    layout = LayoutPolygon(ccw(footprint), height, dmap.z_floor)
    return Reconstruction(layout, floor.vertices, ceiling.vertices, secondaries,
                          provenance, escaped, simple)

