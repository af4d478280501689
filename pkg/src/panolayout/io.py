"""Readers and writers for on-disk artifacts.

DLM1 density raster::

    DLM1 <H> <W> <z_floor> <z_ceiling>\\n
    <H*W little-endian float32, row-major, row 0 = top of image>

Layout JSON::

    {"vertices": [[x, y], ...], "height": h, "camera_height": 1.6}
"""

import json
import xml.etree.ElementTree as ET

import numpy as np
from PIL import Image

from .density import DensityLogitMap
from .errors import FormatError, ValidationError
from .layout import LayoutPolygon

MAGIC = b"DLM1"
_MAX_HEADER = 256


def encode_dlm1(dmap):
    h, w = dmap.shape
    header = f"DLM1 {h} {w} {float(dmap.z_floor)!r} {float(dmap.z_ceiling)!r}\n".encode("ascii")
    return header + dmap.logits.astype("<f4").tobytes()


def decode_dlm1(data):
    """Parse DLM1 bytes; every failure is a :class:`FormatError` with an offset."""
    data = bytes(data)
    nl = data.find(b"\n", 0, _MAX_HEADER)
    if nl < 0:
        raise FormatError("missing header terminator", offset=min(len(data), _MAX_HEADER))
    fields = data[:nl].split(b" ")
    if fields[0] != MAGIC:
        raise FormatError(f"unknown magic {fields[0][:8]!r}", offset=0)
    if len(fields) != 5:
        raise FormatError(f"header needs 5 fields, got {len(fields)}", offset=0)
    try:
        h, w = int(fields[1]), int(fields[2])
        z_floor, z_ceiling = float(fields[3]), float(fields[4])
    except ValueError:
        raise FormatError("non-numeric header field", offset=len(fields[0]) + 1) from None
    if h <= 0 or w <= 0:
        raise FormatError(f"bad raster size {h}x{w}", offset=len(fields[0]) + 1)
    if h % 2:
        raise FormatError(f"raster height must be even, got {h}", offset=len(fields[0]) + 1)
    expected = h * w * 4
    actual = len(data) - nl - 1
    if actual != expected:
        kind = "truncated payload" if actual < expected else "trailing bytes after payload"
        raise FormatError(f"{kind}: expected {expected} bytes, got {actual}", offset=nl + 1 + min(actual, expected))
    arr = np.frombuffer(data, dtype="<f4", count=h * w, offset=nl + 1).reshape(h, w)
    if not np.all(np.isfinite(arr)):
        bad = int(np.argmax(~np.isfinite(arr.ravel())))
        raise FormatError("non-finite logit", offset=nl + 1 + 4 * bad)
    try:
        return DensityLogitMap(arr.astype(np.float64), z_floor=z_floor, z_ceiling=z_ceiling)
    except ValueError as exc:
        raise FormatError(str(exc), offset=0) from None


def write_dlm1(path, dmap):
    with open(path, "wb") as fh:
        fh.write(encode_dlm1(dmap))


def read_dlm1(path):
    with open(path, "rb") as fh:
        return decode_dlm1(fh.read())


def layout_to_dict(layout):
    return {
        "vertices": [[float(x), float(y)] for x, y in np.asarray(layout.vertices)],
        "height": float(layout.height),
        "camera_height": float(layout.camera_height),
    }


def layout_from_dict(obj, require_simple=True):
    if not isinstance(obj, dict):
        raise ValidationError("layout JSON must be an object")
    for key in ("vertices", "height"):
        if key not in obj:
            raise ValidationError(f"missing field {key!r}")
    try:
        verts = np.asarray(obj["vertices"], dtype=np.float64)
        height = float(obj["height"])
        cam = float(obj.get("camera_height", 1.6))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"bad field value: {exc}") from None
    if verts.ndim != 2 or verts.shape[-1] != 2:
        raise ValidationError("vertices must be a list of [x, y] pairs")
    return LayoutPolygon(verts, height, cam).validate(require_simple=require_simple)


def dumps_layout(layout):
    return json.dumps(layout_to_dict(layout), indent=2) + "\n"


def loads_layout(text, require_simple=True):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", offset=exc.pos) from None
    return layout_from_dict(obj, require_simple=require_simple)


def write_layout_json(path, layout):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_layout(layout))


def read_layout_json(path, require_simple=True):
    with open(path, encoding="utf-8") as fh:
        return loads_layout(fh.read(), require_simple=require_simple)


def read_png(path):
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def write_png(path, arr):
    arr = np.asarray(arr)
    if arr.dtype != np.uint8:
        raise ValueError("PNG writer expects uint8 data")
    Image.fromarray(arr).save(path)


def layouts_svg(polygons, labels=None, classes=None, grid=1.0, px_per_m=60.0, margin=0.5):
    """SVG overlay of floor-plan polygons with a 1 m grid and the camera at the origin.

    ``polygons`` are ``(N, 2)`` arrays; ``classes`` are CSS classes used for
    stroke styling (one per polygon).
    """
    polygons = [np.asarray(p, dtype=np.float64) for p in polygons]
    labels = labels or [f"layout {k}" for k in range(len(polygons))]
    classes = classes or [f"layout-{k}" for k in range(len(polygons))]
    allpts = np.concatenate(polygons + [np.zeros((1, 2))])
    lo = np.floor(allpts.min(axis=0) - margin)
    hi = np.ceil(allpts.max(axis=0) + margin)
    size = (hi - lo) * px_per_m
    legend_h = 18 * len(polygons) + 10

    def xy(p):
        # svg y grows downward
        return (p[0] - lo[0]) * px_per_m, (hi[1] - p[1]) * px_per_m

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg",
                     width=f"{size[0]:.0f}", height=f"{size[1] + legend_h:.0f}",
                     viewBox=f"0 0 {size[0]:.3f} {size[1] + legend_h:.3f}")
    palette = ["#2854c5", "#d62728", "#2ca02c", "#b89230", "#9467bd", "#17becf"]
    style = [".grid{stroke:#ddd;stroke-width:1}", ".camera{fill:#000}"]
    for k, c in enumerate(classes):
        style.append(f".{c}{{fill:none;stroke:{palette[k % len(palette)]};stroke-width:2}}")
    ET.SubElement(svg, "style").text = "".join(style)
    g = ET.SubElement(svg, "g", {"class": "grid"})
    for x in np.arange(lo[0], hi[0] + 1e-9, grid):
        ET.SubElement(g, "line", x1=f"{(x - lo[0]) * px_per_m:.2f}", y1="0",
                      x2=f"{(x - lo[0]) * px_per_m:.2f}", y2=f"{size[1]:.2f}")
    for y in np.arange(lo[1], hi[1] + 1e-9, grid):
        ET.SubElement(g, "line", x1="0", y1=f"{(hi[1] - y) * px_per_m:.2f}",
                      x2=f"{size[0]:.2f}", y2=f"{(hi[1] - y) * px_per_m:.2f}")
    for poly, cls in zip(polygons, classes):
        pts = [xy(p) for p in poly]
        d = "M " + " L ".join(f"{x:.3f} {y:.3f}" for x, y in pts) + " Z"
        ET.SubElement(svg, "path", {"class": cls, "d": d})
    cx, cy = xy((0.0, 0.0))
    ET.SubElement(svg, "circle", {"class": "camera", "cx": f"{cx:.3f}", "cy": f"{cy:.3f}", "r": "4"})
    for k, (label, cls) in enumerate(zip(labels, classes)):
        y = size[1] + 14 + 18 * k
        ET.SubElement(svg, "line", {"class": cls, "x1": "8", "y1": f"{y - 4:.0f}", "x2": "28", "y2": f"{y - 4:.0f}"})
        ET.SubElement(svg, "text", x="34", y=f"{y:.0f}", style="font:12px sans-serif").text = label
    return ET.tostring(svg, encoding="unicode")
