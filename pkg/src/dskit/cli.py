"""dskit command line: one subcommand per pipeline stage.

Every subcommand wraps exactly one library operation. Exit code 0 on
success; 2 on bad flags (argparse); 1 on runtime/I-O failure with a
single machine-parsable line "error: <message>" on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import metrics as mt
from .geometry import CameraIntrinsics, estimate_normals, unproject
from .image_io import read_pfm, write_pfm, write_png
from .panorama import (CropParams, HdrPanorama, crop_perspective, detect_sun_direction,
                       normalize_mean_intensity, sun_confidence, tonemap_ldr)
from .shading import compose_direct_shading, ndotl, write_normals, write_shading
from .volume import (DEFAULT_N_PLANES, DEFAULT_SAMPLES, SUN_SOLID_ANGLE, DirectionalLight,
                     build_volume_from_depth, render_shadow_map, save_volume)


def _parse_vec3(text: str) -> np.ndarray:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z - got {text!r}")
    return np.array(parts)


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("DSKIT_THREADS")
    return int(env) if env else 0


def cmd_sun(args) -> int:
    pano = HdrPanorama.load(args.pano)
    direction = detect_sun_direction(pano)
    ratio = sun_confidence(pano)
    print(json.dumps({
        "direction": [float(x) for x in direction],
        "max_over_median_luminance": None if ratio == float("inf") else ratio,
        "low_confidence": ratio < ds.LOW_CONFIDENCE_SUN_RATIO,
    }))
    return 0


def cmd_crop(args) -> int:
    pano = HdrPanorama.load(args.pano)
    params = CropParams(vertical_fov=args.vfov, azimuth=args.azimuth,
                        elevation=args.elevation, roll=args.roll,
                        resolution=args.resolution)
    img = crop_perspective(pano, params)
    if args.normalize:
        img = normalize_mean_intensity(img)
    if args.out.endswith(".png"):
        write_png(args.out, tonemap_ldr(img))
    else:
        write_pfm(args.out, img)
    return 0


def cmd_normals(args) -> int:
    depth = read_pfm(args.depth)
    cam = CameraIntrinsics.from_vfov(args.vfov, depth.shape[1], depth.shape[0])
    normals = estimate_normals(unproject(depth, cam))
    write_normals(args.out, normals, args.png)
    return 0


def cmd_shadow(args) -> int:
    depth = read_pfm(args.depth)
    cam = CameraIntrinsics.from_vfov(args.vfov, depth.shape[1], depth.shape[0])
    vol = build_volume_from_depth(depth, cam, n_planes=args.planes, sigma0=args.sigma0)
    light = DirectionalLight(args.light, solid_angle=args.solid_angle)
    shadow = render_shadow_map(vol, unproject(depth, cam), light,
                               samples=args.samples, step=args.step, seed=args.seed or 0)
    write_pfm(args.out, shadow.astype(np.float32))
    return 0


def cmd_shade(args) -> int:
    if args.cosine is not None:
        cosine = read_pfm(args.cosine)
    else:
        if args.normals is None or args.light is None:
            raise ValueError("shade needs either --cosine or both --normals and --light")
        cosine = ndotl(read_pfm(args.normals), DirectionalLight(args.light))
    shadow = read_pfm(args.shadow)
    shading = compose_direct_shading(cosine, shadow)
    write_shading(args.out, shading.astype(np.float32), args.png)
    return 0


def cmd_volume_dump(args) -> int:
    depth = read_pfm(args.depth)
    cam = CameraIntrinsics.from_vfov(args.vfov, depth.shape[1], depth.shape[0])
    vol = build_volume_from_depth(depth, cam, n_planes=args.planes, sigma0=args.sigma0)
    save_volume(args.out, vol)
    return 0


def cmd_dataset(args) -> int:
    if args.config:
        cfg, rcfg = ds.load_config(args.config)
    else:
        cfg, rcfg = ds.SamplerConfig(), ds.RenderConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, global_seed=args.seed)
    summary = ds.generate_dataset(args.panos, args.depths, cfg, rcfg, args.out,
                                  workers=_threads(args), limit=args.limit)
    print(json.dumps(summary))
    return 0


def cmd_eval(args) -> int:
    pairs_path = Path(args.pairs)
    base = pairs_path.parent
    records = []
    for pair in ds.read_manifest(pairs_path):
        shading_a = read_pfm(base / pair["shading_a"])
        shading_b = read_pfm(base / pair["shading_b"])
        normals_a = read_pfm(base / pair["normals"])
        normals_b = read_pfm(base / pair["normals_b"]) if "normals_b" in pair else None
        rec = mt.evaluate_pair(shading_a, shading_b, normals_a, normals_b,
                               method=args.method)
        rec["id"] = pair.get("id", len(records))
        records.append(rec)
    report = mt.aggregate_report(records, method=args.method)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dskit",
                                description="direct-shading dataset toolkit")
    p.add_argument("--seed", type=int, default=None, help="global RNG seed")
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes, 0 = auto (env DSKIT_THREADS)")
    p.add_argument("--log-level", default="warning",
                   choices=["debug", "info", "warning", "error"])
    p.add_argument("--config", default=None, help="JSON config file")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("sun", help="detect the sun direction in a panorama")
    q.add_argument("pano")
    q.set_defaults(func=cmd_sun)

    q = sub.add_parser("crop", help="extract a perspective crop")
    q.add_argument("--pano", required=True)
    q.add_argument("--vfov", type=float, required=True)
    q.add_argument("--azimuth", type=float, default=0.0)
    q.add_argument("--elevation", type=float, default=0.0)
    q.add_argument("--roll", type=float, default=0.0)
    q.add_argument("--resolution", type=int, default=512)
    q.add_argument("--normalize", action="store_true",
                   help="normalize mean intensity to 0.5 before writing")
    q.add_argument("--out", required=True, help=".pfm (linear) or .png (tonemapped LDR)")
    q.set_defaults(func=cmd_crop)

    q = sub.add_parser("normals", help="estimate normals from a depth PFM")
    q.add_argument("--depth", required=True)
    q.add_argument("--vfov", type=float, required=True)
    q.add_argument("--out", required=True, help="normal map PFM")
    q.add_argument("--png", default=None, help="optional visualization PNG")
    q.set_defaults(func=cmd_normals)

    q = sub.add_parser("shadow", help="ray-march a cast shadow map")
    q.add_argument("--depth", required=True)
    q.add_argument("--vfov", type=float, required=True)
    q.add_argument("--light", type=_parse_vec3, required=True,
                   help="camera-frame direction toward the light, x,y,z")
    q.add_argument("--solid-angle", type=float, default=SUN_SOLID_ANGLE)
    q.add_argument("--planes", type=int, default=DEFAULT_N_PLANES)
    q.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    q.add_argument("--step", type=float, default=None)
    q.add_argument("--sigma0", type=float, default=None)
    q.add_argument("--out", required=True, help="transmittance PFM")
    q.set_defaults(func=cmd_shadow)

    q = sub.add_parser("shade", help="compose direct shading = cosine * shadow")
    q.add_argument("--shadow", required=True, help="transmittance PFM")
    q.add_argument("--cosine", default=None, help="precomputed n-dot-l PFM")
    q.add_argument("--normals", default=None, help="normal PFM (with --light)")
    q.add_argument("--light", type=_parse_vec3, default=None)
    q.add_argument("--out", required=True, help="shading PFM")
    q.add_argument("--png", default=None, help="gamma-encoded visualization PNG")
    q.set_defaults(func=cmd_shade)

    q = sub.add_parser("dataset", help="generate the paired dataset")
    q.add_argument("--panos", required=True)
    q.add_argument("--depths", required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--limit", type=int, default=None)
    q.set_defaults(func=cmd_dataset)

    q = sub.add_parser("eval", help="lighting-consistency report for shading pairs")
    q.add_argument("--pairs", required=True, help="JSONL pair manifest")
    q.add_argument("--out", required=True, help="report JSON")
    q.add_argument("--method", default="irls", choices=["irls", "lstsq"])
    q.set_defaults(func=cmd_eval)

    q = sub.add_parser("volume-dump", help="build and dump a DSKV1 density volume")
    q.add_argument("--depth", required=True)
    q.add_argument("--vfov", type=float, required=True)
    q.add_argument("--planes", type=int, default=DEFAULT_N_PLANES)
    q.add_argument("--sigma0", type=float, default=None)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_volume_dump)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper()))
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
