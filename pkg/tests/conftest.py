"""Shared synthetic scenes and fixture builders."""

import numpy as np
import pytest

from dskit import CameraIntrinsics, HdrPanorama, write_hdr, write_pfm


def make_sky_pano(height=128, sun_u=0.62, sun_v=0.22, seed=1, sun_power=800.0):
    """Sky gradient plus a bright sun blob; linear radiance, 2:1 lat-long."""
    width = 2 * height
    rng = np.random.default_rng(seed)
    uu, vv = np.meshgrid(np.arange(width) / width, np.arange(height) / (height - 1))
    sky = np.clip(1.0 - vv * 1.6, 0.0, 1.0)
    rad = np.stack([0.2 + 0.3 * sky, 0.25 + 0.35 * sky, 0.3 + 0.5 * sky], axis=-1)
    rad += rng.uniform(0.0, 0.05, rad.shape)
    du = np.minimum(np.abs(uu - sun_u), 1.0 - np.abs(uu - sun_u))
    blob = np.exp(-((du / 0.01) ** 2 + ((vv - sun_v) / 0.01) ** 2))
    rad += sun_power * blob[..., None] * np.array([1.0, 0.95, 0.85])
    return HdrPanorama(rad.astype(np.float32))


def gradient_pano(height=64):
    """Smooth radiance ramp in (u, v); good for resampling oracles."""
    width = 2 * height
    uu, vv = np.meshgrid(np.arange(width) / width, np.arange(height) / (height - 1))
    rad = np.stack([0.2 + 0.6 * uu, 0.1 + 0.8 * vv, np.full_like(uu, 0.5)], axis=-1)
    return HdrPanorama(rad.astype(np.float32))


def floor_wall_depth(n, vfov_deg, ground=1.2, wall_z=6.0):
    """Ground plane `ground` below the axis, fronto-parallel wall at wall_z."""
    f = (n / 2) / np.tan(np.radians(vfov_deg) / 2)
    _, vv = np.meshgrid(np.arange(n) - (n - 1) / 2, np.arange(n) - (n - 1) / 2)
    z_floor = np.where(vv > f * ground / wall_z, f * ground / np.maximum(vv, 1e-9), wall_z)
    return np.minimum(wall_z, z_floor)


def sphere_depth(cam: CameraIntrinsics, center_z=4.0, radius=1.0, background_z=8.0,
                 center_x=0.0, center_y=0.0):
    """Analytic depth render of a sphere in front of a fronto-parallel wall."""
    uu, vv = np.meshgrid(np.arange(cam.width) - cam.cx, np.arange(cam.height) - cam.cy)
    dx = uu / cam.focal_px
    dy = vv / cam.focal_px
    a = dx * dx + dy * dy + 1.0
    b = -2.0 * (dx * center_x + dy * center_y + center_z)
    c = center_x ** 2 + center_y ** 2 + center_z ** 2 - radius ** 2
    disc = b * b - 4 * a * c
    hit = disc > 0
    z = np.where(hit, (-b - np.sqrt(np.maximum(disc, 0.0))) / (2 * a), background_z)
    return z, hit


@pytest.fixture(scope="session")
def dataset_fixture(tmp_path_factory):
    """Two panoramas with prompt sidecar plus depth PFMs for a few crops."""
    from dskit.dataset import SamplerConfig, sample_crop_params

    root = tmp_path_factory.mktemp("dsfix")
    panos = root / "panos"
    depths = root / "depths"
    panos.mkdir()
    depths.mkdir()
    cfg = SamplerConfig(crops_per_pano=6, resolution=96, global_seed=11)

    write_hdr(panos / "pano_a.hdr", make_sky_pano(seed=1).radiance)
    write_hdr(panos / "pano_b.hdr", make_sky_pano(height=96, sun_u=0.4, sun_v=0.3, seed=2).radiance)
    (panos / "pano_a.txt").write_text("a sunny street\n")

    for pano_id in ("pano_a", "pano_b"):
        d = depths / pano_id
        d.mkdir()
        for idx in range(cfg.crops_per_pano):
            params = sample_crop_params(cfg, pano_id, idx)
            z = floor_wall_depth(cfg.resolution, params.vertical_fov)
            write_pfm(d / f"{idx:04d}.pfm", z.astype(np.float32))
    return {"root": root, "panos": panos, "depths": depths, "cfg": cfg}
