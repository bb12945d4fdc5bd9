"""Command-line front end.

Subcommands: estimate (depth/disparity -> normal map), synth (scene ->
ground-truth files), eval (normals or masks -> metric report),
freespace (normal map -> drivable mask), bench (timing harness).

Exit codes: 0 success, 1 I/O or file-format failure, 2 validation
failure. All outputs are written atomically and are byte-reproducible
for identical invocations.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import io as nfio
from .camera import CameraIntrinsics
from .errors import FormatError, ParseError
from .metrics import aae, colorize_angular_errors, confusion, normal_freespace, scores
from .scenes import (
    BoxObstacle,
    PlaneScene,
    RoadScene,
    SphereScene,
    add_noise,
    default_road_scene,
    synthesize,
)
from .estimator import (
    THREADS_ENV,
    GradientFilter,
    NeighborhoodSpec,
    estimate_normals,
    estimate_normals_from_disparity,
)


def _parse_triple(text: str, flag: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError(f"{flag} expects three comma-separated numbers, got {text!r}")
    try:
        x, y, z = (float(p) for p in parts)
    except ValueError:
        raise ValueError(f"{flag} expects numbers, got {text!r}") from None
    if not all(np.isfinite(v) for v in (x, y, z)):
        raise ValueError(f"{flag} must be finite")
    return x, y, z


def _parse_size(text: str) -> tuple[int, int]:
    m = text.lower().split("x")
    if len(m) != 2:
        raise ValueError(f"--size expects WxH, got {text!r}")
    try:
        w, h = int(m[0]), int(m[1])
    except ValueError:
        raise ValueError(f"--size expects integers, got {text!r}") from None
    if w < 3 or h < 3:
        raise ValueError("--size must be at least 3x3")
    return w, h


def _resolve_intrinsics(args, need_baseline: bool):
    """Inline --fx/--fy/--cx/--cy/--baseline override the --calib file."""
    calib = nfio.read_calib(args.calib) if args.calib else None

    def pick(inline, from_file, name):
        if inline is not None:
            return inline
        if from_file is not None:
            return from_file
        raise ValueError(f"missing intrinsics: provide --calib or --{name}")

    fx = pick(args.fx, calib.fx if calib else None, "fx")
    fy = pick(args.fy, calib.fy if calib else None, "fy")
    cx = pick(args.cx, calib.cx if calib else None, "cx")
    cy = pick(args.cy, calib.cy if calib else None, "cy")
    baseline = None
    if need_baseline:
        baseline = args.baseline if args.baseline is not None else (
            calib.baseline if calib else None
        )
        if baseline is None:
            raise ValueError("missing baseline: provide --calib with baseline or --baseline")
    return CameraIntrinsics(fx=fx, fy=fy, xo=cx, yo=cy), baseline


def _add_intrinsics_flags(p: argparse.ArgumentParser):
    p.add_argument("--calib", help="calibration file (key=value)")
    p.add_argument("--fx", type=float, help="focal length x in pixels (overrides calib)")
    p.add_argument("--fy", type=float, help="focal length y in pixels (overrides calib)")
    p.add_argument("--cx", type=float, help="principal point x (overrides calib)")
    p.add_argument("--cy", type=float, help="principal point y (overrides calib)")
    p.add_argument("--baseline", type=float, help="stereo baseline in meters (overrides calib)")


def cmd_estimate(args) -> int:
    if (args.depth is None) == (args.disparity is None):
        raise ValueError("provide exactly one of --depth or --disparity")
    intr, baseline = _resolve_intrinsics(args, need_baseline=args.disparity is not None)
    filt = GradientFilter.from_name(args.filter)
    nbhd = NeighborhoodSpec.from_size(args.neighborhood)

    t0 = time.perf_counter()
    if args.depth is not None:
        depth = nfio.read_depth_png(args.depth)
        nm = estimate_normals(depth, intr, filt, nbhd, threads=args.threads)
        total = depth.valid.size
    else:
        disp = nfio.read_disparity_png(args.disparity, baseline)
        nm = estimate_normals_from_disparity(disp, intr, filt, nbhd, threads=args.threads)
        total = disp.valid.size
    elapsed = time.perf_counter() - t0
    nfio.write_normal_png(nm, args.out)
    print(f"pixels_total={total}")
    print(f"pixels_valid={int(np.count_nonzero(nm.valid))}")
    print(f"time_ms={elapsed * 1000.0:.3f}")
    return 0


def _scene_from_args(args):
    if args.spec:
        return nfio.read_scene_spec(args.spec)
    if not args.kind:
        raise ValueError("provide --spec or --kind")
    width, height = args.width, args.height
    fx = args.fx if args.fx is not None else 500.0
    fy = args.fy if args.fy is not None else 500.0
    cx = args.cx if args.cx is not None else width / 2.0
    cy = args.cy if args.cy is not None else height / 2.0
    intr = CameraIntrinsics(fx=fx, fy=fy, xo=cx, yo=cy)
    common = dict(width=width, height=height, intrinsics=intr, far=args.far)
    if args.kind == "plane":
        if args.normal is None or args.d is None:
            raise ValueError("plane scenes need --normal and --d")
        return PlaneScene(normal=_parse_triple(args.normal, "--normal"), d=args.d, **common)
    if args.kind == "sphere":
        if args.center is None or args.radius is None:
            raise ValueError("sphere scenes need --center and --radius")
        return SphereScene(center=_parse_triple(args.center, "--center"), radius=args.radius, **common)
    if args.kind == "road":
        boxes = []
        for text in args.box or []:
            parts = text.split(",")
            if len(parts) != 5:
                raise ValueError(f"--box expects x,z,sx,sy,sz, got {text!r}")
            x, z, sx, sy, sz = (float(p) for p in parts)
            boxes.append(BoxObstacle(x=x, z=z, size_x=sx, size_y=sy, size_z=sz))
        return RoadScene(ground_d=args.ground_d, boxes=tuple(boxes), **common)
    # stock scene used throughout the tests
    return default_road_scene(width, height)


def cmd_synth(args) -> int:
    scene = _scene_from_args(args)
    bundle = synthesize(scene)
    depth = bundle.depth
    if args.noise:
        depth = add_noise(depth, args.noise, args.seed)
    os.makedirs(args.outdir, exist_ok=True)
    nfio.write_depth_png(depth, os.path.join(args.outdir, "depth.png"))
    nfio.write_normal_png(bundle.normals, os.path.join(args.outdir, "normals_gt.png"))
    if bundle.freespace is not None:
        nfio.write_mask_png(bundle.freespace, os.path.join(args.outdir, "freespace_gt.png"))
    intr = scene.intrinsics
    nfio.write_calib(
        nfio.CalibFile(fx=intr.fx, fy=intr.fy, cx=intr.xo, cy=intr.yo, baseline=args.calib_baseline),
        os.path.join(args.outdir, "calib.txt"),
    )
    nfio.write_scene_spec(scene, os.path.join(args.outdir, "scene.txt"))
    print(f"outdir={args.outdir}")
    print(f"pixels_valid={int(np.count_nonzero(depth.valid))}")
    return 0


def cmd_eval(args) -> int:
    report: dict = {}
    if args.mode == "normals":
        gt = nfio.read_normal_png(args.gt)
        pred = nfio.read_normal_png(args.pred)
        err = aae(gt, pred, sign_invariant=args.sign_invariant)
        report["m"] = err.m
        report["aae_rad"] = err.e_aae
        report["aae_deg"] = float(np.rad2deg(err.e_aae))
        if args.error_map:
            rgb = colorize_angular_errors(err, saturation=float(np.deg2rad(args.saturation)))
            nfio.write_color_png(rgb, args.error_map)
    else:
        gt = nfio.read_mask_png(args.gt)
        pred = nfio.read_mask_png(args.pred)
        counts = confusion(pred, gt)
        s = scores(counts)
        report.update(
            n_tp=counts.n_tp, n_tn=counts.n_tn, n_fp=counts.n_fp, n_fn=counts.n_fn
        )
        report.update(s.as_dict())
    for line in nfio.format_kv(report).splitlines():
        print(line)
    if args.out:
        nfio.write_metric_report(report, args.out)
    return 0


def cmd_freespace(args) -> int:
    # flag validation precedes any file access
    up = np.array(_parse_triple(args.up, "--up"))
    norm = float(np.linalg.norm(up))
    if norm == 0:
        raise ValueError("--up must be a nonzero vector")
    max_angle = float(np.deg2rad(args.max_angle))
    if not 0 < max_angle < np.pi / 2:
        raise ValueError("--max-angle must be in (0, 90) degrees")
    nm = nfio.read_normal_png(args.normals)
    mask = normal_freespace(
        nm,
        up / norm,
        max_angle=max_angle,
        largest_component=args.largest_component,
    )
    nfio.write_mask_png(mask, args.out)
    print(f"pixels_positive={int(np.count_nonzero(mask))}")
    return 0


def cmd_bench(args) -> int:
    width, height = _parse_size(args.size)
    scene = default_road_scene(width, height)
    bundle = synthesize(scene)
    filt = GradientFilter.from_name(args.filter)
    nbhd = NeighborhoodSpec.from_size(args.neighborhood)
    times = []
    for _ in range(args.iters):
        t0 = time.perf_counter()
        estimate_normals(bundle.depth, scene.intrinsics, filt, nbhd, threads=args.threads)
        times.append(time.perf_counter() - t0)
    times_ms = sorted(t * 1000.0 for t in times)
    median = times_ms[len(times_ms) // 2] if len(times_ms) % 2 else (
        0.5 * (times_ms[len(times_ms) // 2 - 1] + times_ms[len(times_ms) // 2])
    )
    print(f"size={width}x{height}")
    print(f"iters={args.iters}")
    print(f"median_ms={median:.3f}")
    print(f"min_ms={times_ms[0]:.3f}")
    print(f"max_ms={times_ms[-1]:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="normal-forge",
        description="Surface normal estimation from depth/disparity images",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate a normal map from depth or disparity")
    p.add_argument("--depth", help="16-bit depth PNG (value/256 meters)")
    p.add_argument("--disparity", help="16-bit disparity PNG (value/256 pixels)")
    _add_intrinsics_flags(p)
    p.add_argument("--out", required=True, help="output normal PNG")
    p.add_argument("--filter", default="central", choices=("central", "forward", "sobel"))
    p.add_argument("--neighborhood", type=int, default=8, choices=(4, 8))
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker threads (default: ${THREADS_ENV} or 1)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("synth", help="render a synthetic scene with ground truth")
    p.add_argument("--spec", help="scene spec file (key=value)")
    p.add_argument("--kind", choices=("plane", "sphere", "road", "default-road"))
    p.add_argument("--width", type=int, default=640)
    p.add_argument("--height", type=int, default=480)
    p.add_argument("--fx", type=float)
    p.add_argument("--fy", type=float)
    p.add_argument("--cx", type=float)
    p.add_argument("--cy", type=float)
    p.add_argument("--far", type=float, default=200.0)
    p.add_argument("--normal", help="plane normal nx,ny,nz")
    p.add_argument("--d", type=float, help="plane offset in meters")
    p.add_argument("--center", help="sphere center X,Y,Z")
    p.add_argument("--radius", type=float, help="sphere radius in meters")
    p.add_argument("--ground-d", type=float, default=1.5, help="camera height above ground")
    p.add_argument("--box", action="append", help="road box x,z,sx,sy,sz (repeatable)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0, help="depth noise sigma in meters")
    p.add_argument("--calib-baseline", type=float, default=None,
                   help="baseline to record in the emitted calib file")
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="evaluate normals or masks against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--mode", required=True, choices=("normals", "mask"))
    p.add_argument("--sign-invariant", action="store_true")
    p.add_argument("--out", help="write the report as a key=value file")
    p.add_argument("--error-map", help="write a colorized angular-error PNG (normals mode)")
    p.add_argument("--saturation", type=float, default=30.0,
                   help="error-map saturation angle in degrees")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("freespace", help="threshold a normal map against the up direction")
    p.add_argument("--normals", required=True)
    p.add_argument("--up", default="0,-1,0", help="up direction ux,uy,uz")
    p.add_argument("--max-angle", type=float, default=15.0, help="degrees")
    p.add_argument("--largest-component", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_freespace)

    p = sub.add_parser("bench", help="time estimate_normals on a synthetic scene")
    p.add_argument("--size", default="640x480")
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--filter", default="central", choices=("central", "forward", "sobel"))
    p.add_argument("--neighborhood", type=int, default=8, choices=(4, 8))
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (FormatError, ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry():
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
