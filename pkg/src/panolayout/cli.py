"""Command-line interface.

Exit codes: 0 success, 1 check failed (gradcheck), 2 bad input or usage,
3 geometric failure (pole hit, degenerate polygon, camera outside layout).
"""

import argparse
import logging
import sys

import numpy as np

from . import io
from .errors import DomainError, FormatError, GeometryError, PoleError
from .layout import LayoutPolygon
from .objective import LayoutObjective, ObjectiveWeights, gradcheck
from .pipeline import MERGE_MODES, RenderConfig, reconstruct
from .polygons import iou2d, iou3d
from .render import SamplingConfig
from .synth import SyntheticScene, checker_panorama, coordinate_panorama_png, gt_masks, rasterize_density
from .warp import layout_warp, parse_transform

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_GEOMETRY = 0, 1, 2, 3

log = logging.getLogger("panolayout")


def _size(text):
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 512x1024, got {text!r}") from None
    if h <= 0 or w <= 0 or h % 2:
        raise argparse.ArgumentTypeError("size needs positive dims and an even height")
    return h, w


def _positive_int(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


def _write_text(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def cmd_render(args):
    dmap = io.read_dlm1(args.dlm)
    cfg = RenderConfig(n_secondary_cams=args.n_secondary, samples_per_ray=args.samples,
                       t_far=args.t_far, merge=args.merge, seed=args.seed,
                       secondary_vertices=args.secondary_vertices)
    rec = reconstruct(dmap, cfg)
    if rec.escaped_rays:
        log.warning("%d rendered rays escaped (transmittance > 0.5 past t_far)", rec.escaped_rays)
    if not rec.simple:
        log.warning("merged polygon is not simple")
    _write_text(args.output, io.dumps_layout(rec.layout))
    if args.svg:
        polys = [rec.primary] + rec.secondaries + [rec.layout.vertices]
        classes = ["primary"] + [f"secondary secondary-{k}" for k in range(len(rec.secondaries))] + ["merged"]
        labels = ["primary"] + [f"secondary {k}" for k in range(len(rec.secondaries))] + ["merged"]
        _write_text(args.svg, io.layouts_svg(polys, labels, [c.split()[-1] for c in classes]))
    return EXIT_OK


def cmd_warp(args):
    img = io.read_png(args.image)
    layout = io.read_layout_json(args.layout)
    try:
        t = parse_transform(args.transform)
    except ValueError as exc:
        raise DomainError(str(exc)) from None
    out, new_layout = layout_warp(img, layout, t)
    io.write_png(args.output, out)
    if args.layout_out:
        io.write_layout_json(args.layout_out, new_layout)
    return EXIT_OK


def cmd_synth(args):
    layout = io.read_layout_json(args.layout)
    scene = SyntheticScene(layout, args.size, l0=args.l0)
    io.write_dlm1(args.dlm, rasterize_density(scene))
    if args.mask:
        io.write_png(args.mask, gt_masks(scene) * np.uint8(255))
    if args.pano:
        io.write_png(args.pano, coordinate_panorama_png(layout, args.size))
    if args.checker:
        io.write_png(args.checker, checker_panorama(layout, args.size))
    return EXIT_OK


def cmd_eval(args):
    a = io.read_layout_json(args.a, require_simple=False)
    b = io.read_layout_json(args.b, require_simple=False)
    print(f"2D IoU: {iou2d(a.vertices, b.vertices):.6f}")
    print(f"3D IoU: {iou3d(a, b):.6f}")
    return EXIT_OK


def cmd_gradcheck(args):
    dmap = io.read_dlm1(args.dlm)
    layout = io.read_layout_json(args.layout)
    if abs(layout.camera_height - dmap.z_floor) > 1e-9:
        raise DomainError("layout camera height does not match the map's floor plane")
    obj = LayoutObjective(layout, dmap.shape, ObjectiveWeights(), seed=args.seed,
                          sampling=SamplingConfig(args.samples, args.t_far),
                          n_cams=args.n_secondary, z_ceiling=dmap.z_ceiling)
    rep = gradcheck(obj, dmap.logits, n_probes=args.n_probes, h=args.h, seed=args.seed)
    print(f"probes: {len(rep.pixels)}")
    print(f"max relative error: {rep.max_rel_err:.3e}")
    ok = rep.max_rel_err < args.tol
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_plot(args):
    layouts = [io.read_layout_json(p, require_simple=False) for p in args.layouts]
    labels = list(args.layouts)
    svg = io.layouts_svg([l.vertices for l in layouts], labels)
    _write_text(args.output, svg + "\n")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="panolayout", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("render", help="render a layout polygon from a DLM1 density map")
    r.add_argument("dlm")
    r.add_argument("-o", "--output", help="layout JSON path (default: stdout)")
    r.add_argument("--svg", help="also write an SVG overlay of all rendered polygons")
    r.add_argument("--n-secondary", type=int, default=32)
    r.add_argument("--samples", type=int, default=1024, help="samples per secondary ray")
    r.add_argument("--t-far", type=float, default=16.0)
    r.add_argument("--merge", choices=MERGE_MODES, default="mst")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--secondary-vertices", type=_positive_int, default=None,
                   help="rays per secondary polygon (default: map width)")
    r.set_defaults(func=cmd_render)

    w = sub.add_parser("warp", help="LayoutWarp augmentation of a panorama")
    w.add_argument("image")
    w.add_argument("layout")
    w.add_argument("--transform", required=True,
                   help="camheight:S | shift:X[rad|deg] | stretch:SX,SY | flip | perturb:seed=N[,low=L,high=H]")
    w.add_argument("-o", "--output", required=True, help="output PNG")
    w.add_argument("--layout-out", help="write the transformed layout JSON here")
    w.set_defaults(func=cmd_warp)

    s = sub.add_parser("synth", help="rasterize a synthetic density map from a layout")
    s.add_argument("layout")
    s.add_argument("--size", type=_size, default=(512, 1024), help="HxW, default 512x1024")
    s.add_argument("--l0", type=float, default=20.0, help="logit magnitude")
    s.add_argument("--dlm", required=True, help="output DLM1 path")
    s.add_argument("--mask", help="output exterior-mask PNG")
    s.add_argument("--pano", help="output surface-coordinate panorama PNG")
    s.add_argument("--checker", help="output checkerboard panorama PNG")
    s.set_defaults(func=cmd_synth)

    e = sub.add_parser("eval", help="2D/3D IoU between two layouts")
    e.add_argument("a")
    e.add_argument("b")
    e.set_defaults(func=cmd_eval)

    g = sub.add_parser("gradcheck", help="finite-difference check of the objective gradient")
    g.add_argument("dlm")
    g.add_argument("layout")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n-probes", type=_positive_int, default=200)
    g.add_argument("--h", type=float, default=1e-4)
    g.add_argument("--tol", type=float, default=1e-3)
    g.add_argument("--n-secondary", type=int, default=32)
    g.add_argument("--samples", type=int, default=1024)
    g.add_argument("--t-far", type=float, default=16.0)
    g.set_defaults(func=cmd_gradcheck)

    pl = sub.add_parser("plot", help="SVG overlay of layout floor plans")
    pl.add_argument("layouts", nargs="+")
    pl.add_argument("-o", "--output", help="SVG path (default: stdout)")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (PoleError, GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except (FormatError, DomainError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
