"""Paired {image, normal, shading} dataset generation from HDR panoramas.

Cameras are sampled per (seed, panorama, crop index) with a counter-based
generator, so any record can be regenerated in isolation and runs are
byte-identical regardless of worker count. Depth maps are external
inputs resolved per sample by a provider (directory of PFM files).
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .geometry import camera_rotation, estimate_normals, unproject
from .image_io import read_pfm, write_png
from .panorama import (CropParams, HdrPanorama, crop_perspective, detect_sun_direction,
                       normalization_scale, sun_confidence, tonemap_ldr)
from .shading import compose_direct_shading, ndotl, write_normals, write_shading
from .volume import (DEFAULT_N_PLANES, DEFAULT_SAMPLES, SUN_SOLID_ANGLE,
                     DirectionalLight, build_volume_from_depth, render_shadow_map)

log = logging.getLogger(__name__)

LOW_CONFIDENCE_SUN_RATIO = 10.0
_BLOCK_SIZE = 25  # crops per parallel work unit


@dataclass(frozen=True)
class SamplerConfig:
    crops_per_pano: int = 250
    resolution: int = 512
    vfov_range: tuple[float, float] = (30.0, 110.0)
    azimuth_range: tuple[float, float] = (0.0, 360.0)
    elevation_range: tuple[float, float] = (-22.5, 22.5)
    roll_range: tuple[float, float] = (-22.5, 22.5)
    global_seed: int = 0

    def __post_init__(self):
        if self.crops_per_pano < 1:
            raise ValueError(f"crops_per_pano must be >= 1, got {self.crops_per_pano}")
        if self.resolution < 1:
            raise ValueError(f"resolution must be >= 1, got {self.resolution}")
        for name in ("vfov_range", "azimuth_range", "elevation_range", "roll_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must be an increasing pair, got ({lo}, {hi})")
        if not (0.0 < self.vfov_range[0] and self.vfov_range[1] < 180.0):
            raise ValueError(f"vfov_range must stay within (0, 180), got {self.vfov_range}")


@dataclass(frozen=True)
class RenderConfig:
    n_planes: int = DEFAULT_N_PLANES
    samples: int = DEFAULT_SAMPLES
    step: float | None = None       # None -> 1/(2*n_planes)
    sigma0: float | None = None     # None -> 50 per plane spacing
    solid_angle: float = SUN_SOLID_ANGLE


def load_config(path) -> tuple[SamplerConfig, RenderConfig]:
    """Parse the JSON config; unknown keys are an error."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError("config root must be a JSON object")
    render_raw = raw.pop("render", {})
    sampler_fields = SamplerConfig.__dataclass_fields__
    render_fields = RenderConfig.__dataclass_fields__
    unknown = set(raw) - set(sampler_fields)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    unknown = set(render_raw) - set(render_fields)
    if unknown:
        raise ValueError(f"unknown render config keys: {sorted(unknown)}")
    for key in ("vfov_range", "azimuth_range", "elevation_range", "roll_range"):
        if key in raw:
            raw[key] = tuple(raw[key])
    return SamplerConfig(**raw), RenderConfig(**render_raw)


def _digest(*parts) -> bytes:
    joined = "|".join(str(p) for p in parts).encode("utf-8")
    return hashlib.blake2b(joined, digest_size=16).digest()


def sample_crop_params(cfg: SamplerConfig, pano_id: str, crop_idx: int) -> CropParams:
    """Deterministic camera draw for one sample.

    FOV and azimuth are uniform; elevation and roll are triangular with
    mode 0. Keyed by (global_seed, pano_id, crop_idx) through a
    counter-based Philox stream: same inputs, same params, always.
    """
    key = int.from_bytes(_digest(cfg.global_seed, pano_id, crop_idx, "crop"), "little")
    rng = np.random.Generator(np.random.Philox(key=key))
    vfov = rng.uniform(*cfg.vfov_range)
    azimuth = rng.uniform(*cfg.azimuth_range)
    elevation = rng.triangular(cfg.elevation_range[0], 0.0, cfg.elevation_range[1])
    roll = rng.triangular(cfg.roll_range[0], 0.0, cfg.roll_range[1])
    return CropParams(vertical_fov=float(vfov), azimuth=float(azimuth),
                      elevation=float(elevation), roll=float(roll),
                      resolution=cfg.resolution)


def render_seed(cfg: SamplerConfig, pano_id: str, crop_idx: int) -> int:
    return int.from_bytes(_digest(cfg.global_seed, pano_id, crop_idx, "render")[:8], "little")


class DirectoryDepthProvider:
    """Resolves depth maps from <root>/<pano_id>/<crop_idx:04d>.pfm."""

    def __init__(self, root):
        self.root = Path(root)

    def path_for(self, pano_id: str, crop_idx: int) -> Path:
        return self.root / pano_id / f"{crop_idx:04d}.pfm"

    def __call__(self, pano_id: str, crop_idx: int) -> np.ndarray | None:
        path = self.path_for(pano_id, crop_idx)
        if not path.exists():
            return None
        return read_pfm(path)


def render_sample_arrays(pano: HdrPanorama, depth: np.ndarray, params: CropParams,
                         light_cam: np.ndarray, rcfg: RenderConfig, seed: int) -> dict:
    """Run the render stack for one sample and return its arrays.

    crop -> normalize to 0.5 mean -> tonemap, then depth -> point cloud
    -> normals -> density volume -> cone-sampled shadow -> n-dot-l ->
    direct shading. Same inputs give bit-identical outputs, so manifest
    records can be re-rendered exactly.
    """
    hdr = crop_perspective(pano, params)
    scale = normalization_scale(hdr)
    ldr = tonemap_ldr(hdr * scale)

    intr = params.intrinsics()
    points = unproject(depth, intr)
    normals = estimate_normals(points)
    vol = build_volume_from_depth(depth, intr, n_planes=rcfg.n_planes, sigma0=rcfg.sigma0)
    light = DirectionalLight(light_cam, solid_angle=rcfg.solid_angle)
    shadow = render_shadow_map(vol, points, light, samples=rcfg.samples,
                               step=rcfg.step, seed=seed, normals=normals)
    shading = np.clip(compose_direct_shading(ndotl(normals, light), shadow), 0.0, 1.0)
    return {"ldr": ldr, "normals": normals, "shadow": shadow, "shading": shading,
            "scale": scale}


def generate_sample(pano: HdrPanorama, depth_provider, cfg: SamplerConfig,
                    rcfg: RenderConfig, pano_id: str, crop_idx: int, out_dir,
                    sun_world: np.ndarray | None = None,
                    light_override: np.ndarray | None = None,
                    prompt: str = "",
                    sun_low_confidence: bool | None = None) -> dict | None:
    """Produce one dataset record (files plus manifest entry).

    The shadow light is the detected sun rotated into the camera frame
    unless light_override (camera frame) is given. Returns None when the
    depth provider has nothing for this sample or the crop carries no
    light; both are logged, not raised. A sun below the crop's horizon
    is fine - the shading is simply dark.
    """
    out_dir = Path(out_dir)
    params = sample_crop_params(cfg, pano_id, crop_idx)
    depth = depth_provider(pano_id, crop_idx)
    if depth is None:
        log.warning("no depth for %s/%04d, sample skipped", pano_id, crop_idx)
        return None

    if sun_world is None:
        sun_world = detect_sun_direction(pano)
    rot = camera_rotation(params.azimuth, params.elevation, params.roll)
    if light_override is not None:
        light_cam = np.asarray(light_override, dtype=np.float64)
        light_cam = light_cam / np.linalg.norm(light_cam)
        light_world = rot @ light_cam
    else:
        light_world = np.asarray(sun_world, dtype=np.float64)
        light_cam = rot.T @ light_world

    seed = render_seed(cfg, pano_id, crop_idx)
    try:
        arrays = render_sample_arrays(pano, depth, params, light_cam, rcfg, seed)
    except ValueError as exc:
        if "degenerate exposure" in str(exc):
            log.warning("all-dark crop %s/%04d, sample skipped", pano_id, crop_idx)
            return None
        raise

    stem = f"{crop_idx:04d}"
    sample_dir = out_dir / pano_id
    sample_dir.mkdir(parents=True, exist_ok=True)
    rel = {
        "image": f"{pano_id}/{stem}_image.png",
        "normal_pfm": f"{pano_id}/{stem}_normal.pfm",
        "normal_png": f"{pano_id}/{stem}_normal.png",
        "shading_pfm": f"{pano_id}/{stem}_shading.pfm",
        "shading_png": f"{pano_id}/{stem}_shading.png",
    }
    write_png(out_dir / rel["image"], arrays["ldr"])
    write_normals(out_dir / rel["normal_pfm"], arrays["normals"], out_dir / rel["normal_png"])
    write_shading(out_dir / rel["shading_pfm"], arrays["shading"], out_dir / rel["shading_png"])

    return {
        "pano_id": pano_id,
        "crop_idx": crop_idx,
        **rel,
        "crop": asdict(params),
        "light_world": [float(x) for x in light_world],
        "light_camera": [float(x) for x in light_cam],
        "solid_angle": rcfg.solid_angle,
        "normalization_scale": float(arrays["scale"]),
        "sun_low_confidence": bool(sun_confidence(pano) < LOW_CONFIDENCE_SUN_RATIO)
                              if sun_low_confidence is None else sun_low_confidence,
        "prompt": prompt,
    }


def _pano_prompt(pano_path: Path) -> str:
    sidecar = pano_path.with_suffix(".txt")
    if sidecar.exists():
        return sidecar.read_text(encoding="utf-8").strip()
    return ""


def _render_block(args) -> list[dict | None]:
    (pano_path, pano_id, crop_indices, cfg, rcfg, depth_root, out_dir) = args
    pano = HdrPanorama.load(pano_path)
    provider = DirectoryDepthProvider(depth_root)
    sun = detect_sun_direction(pano)
    low_conf = bool(sun_confidence(pano) < LOW_CONFIDENCE_SUN_RATIO)
    prompt = _pano_prompt(Path(pano_path))
    return [generate_sample(pano, provider, cfg, rcfg, pano_id, idx, out_dir,
                            sun_world=sun, prompt=prompt, sun_low_confidence=low_conf)
            for idx in crop_indices]


def read_manifest(path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def generate_dataset(pano_dir, depth_dir, cfg: SamplerConfig, rcfg: RenderConfig,
                     out_dir, workers: int = 0, limit: int | None = None) -> dict:
    """Render every (panorama, crop) pair and append a JSONL manifest.

    Resumable: records already present in the manifest are skipped.
    Work is split into blocks of crops farmed to worker processes;
    outputs are written per sample and the manifest is appended by this
    process in task order, so results do not depend on worker count.
    """
    pano_dir = Path(pano_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / "manifest.jsonl"

    pano_paths = sorted(pano_dir.glob("*.hdr"))
    if not pano_paths:
        raise FileNotFoundError(f"no .hdr panoramas in {pano_dir}")

    done = set()
    if manifest_path.exists():
        done = {(r["pano_id"], r["crop_idx"]) for r in read_manifest(manifest_path)}

    tasks = [(path, path.stem, idx)
             for path in pano_paths
             for idx in range(cfg.crops_per_pano)]
    if limit is not None:
        tasks = tasks[:limit]
    tasks = [t for t in tasks if (t[1], t[2]) not in done]

    blocks = []
    i = 0
    while i < len(tasks):
        path, pano_id, first = tasks[i]
        indices = [first]
        i += 1
        while (i < len(tasks) and tasks[i][1] == pano_id and len(indices) < _BLOCK_SIZE):
            indices.append(tasks[i][2])
            i += 1
        blocks.append((str(path), pano_id, indices, cfg, rcfg, str(depth_dir), str(out_dir)))

    if workers == 0:
        workers = os.cpu_count() or 1
    written = skipped = 0

    def consume(results):
        nonlocal written, skipped
        with open(manifest_path, "a", encoding="utf-8") as mf:
            for block_records in results:
                for record in block_records:
                    if record is None:
                        skipped += 1
                        continue
                    mf.write(json.dumps(record) + "\n")
                    mf.flush()
                    written += 1

    if workers <= 1 or len(blocks) <= 1:
        consume(map(_render_block, blocks))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            consume(pool.map(_render_block, blocks))

    return {"manifest": str(manifest_path), "written": written,
            "skipped": skipped, "already_done": len(done)}
