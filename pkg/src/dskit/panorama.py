"""HDR panorama handling: sun detection, perspective crops, radiometry.

Panoramas are latitude-longitude maps. Texel (row r, col c) of an HxW
panorama sits at u = c/W (half-open, wraps horizontally) and
v = r/(H-1) (closed, clamps vertically), so the top row is exactly the
zenith and the bottom row exactly the nadir.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CameraIntrinsics, camera_rays, camera_rotation
from .image_io import read_hdr

LUMA_WEIGHTS = np.array([0.2126, 0.7152, 0.0722])
TONEMAP_GAMMA = 2.2
LDR_CLIP = 1.0 - 2.0 ** -16


@dataclass(frozen=True)
class HdrPanorama:
    """Linear-radiance lat-long map; radiance is (H, W, 3) float32, >= 0."""

    radiance: np.ndarray

    def __post_init__(self):
        rad = np.asarray(self.radiance, dtype=np.float32)
        if rad.ndim != 3 or rad.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) radiance, got {rad.shape}")
        if rad.shape[0] < 2 or rad.shape[1] != 2 * rad.shape[0]:
            raise ValueError(f"panorama must be 2:1 lat-long, got {rad.shape[1]}x{rad.shape[0]}")
        if not np.all(np.isfinite(rad)) or np.any(rad < 0):
            raise ValueError("panorama radiance must be finite and non-negative")
        object.__setattr__(self, "radiance", rad)

    @property
    def height(self) -> int:
        return self.radiance.shape[0]

    @property
    def width(self) -> int:
        return self.radiance.shape[1]

    @classmethod
    def load(cls, path) -> "HdrPanorama":
        return cls(read_hdr(path))

    def luminance(self) -> np.ndarray:
        return self.radiance @ LUMA_WEIGHTS


@dataclass(frozen=True)
class CropParams:
    vertical_fov: float
    azimuth: float
    elevation: float
    roll: float
    resolution: int

    def __post_init__(self):
        if not 0.0 < self.vertical_fov < 180.0:
            raise ValueError(f"vertical fov must be in (0, 180), got {self.vertical_fov}")
        if self.resolution < 1:
            raise ValueError(f"resolution must be >= 1, got {self.resolution}")

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics.from_vfov(self.vertical_fov, self.resolution, self.resolution)


def direction_from_uv(u, v) -> np.ndarray:
    """Lat-long (u, v) to unit direction: phi = 2*pi*u - pi, theta = pi*v."""
    phi = 2.0 * np.pi * np.asarray(u, dtype=np.float64) - np.pi
    theta = np.pi * np.asarray(v, dtype=np.float64)
    st = np.sin(theta)
    return np.stack([st * np.sin(phi), np.cos(theta), st * np.cos(phi)], axis=-1)


def uv_from_direction(d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit direction(s) to lat-long (u in [0,1), v in [0,1])."""
    d = np.asarray(d, dtype=np.float64)
    phi = np.arctan2(d[..., 0], d[..., 2])
    theta = np.arccos(np.clip(d[..., 1], -1.0, 1.0))
    u = np.mod((phi + np.pi) / (2.0 * np.pi), 1.0)
    v = theta / np.pi
    return u, v


def detect_sun_direction(pano: HdrPanorama) -> np.ndarray:
    """Direction of the brightest pixel (Rec. 709 luminance), unit norm.

    Ties break to the first pixel in row-major order. Raises if the
    panorama carries no light at all.
    """
    luma = pano.luminance()
    flat = int(np.argmax(luma))
    if luma.flat[flat] <= 0.0:
        raise ValueError("no light found")
    r, c = divmod(flat, pano.width)
    u = c / pano.width
    v = r / (pano.height - 1)
    return direction_from_uv(u, v)


def sun_confidence(pano: HdrPanorama) -> float:
    """Max/median luminance ratio; below ~10 the sun is likely occluded."""
    luma = pano.luminance()
    med = float(np.median(luma))
    if med <= 0.0:
        return math.inf
    return float(luma.max()) / med


def sample_panorama(pano: HdrPanorama, dirs: np.ndarray) -> np.ndarray:
    """Bilinear radiance lookup for unit directions (..., 3).

    Horizontal wrap-around, vertical clamp.
    """
    u, v = uv_from_direction(dirs)
    h, w = pano.height, pano.width
    cf = u * w
    rf = np.clip(v * (h - 1), 0.0, h - 1)
    c0 = np.floor(cf).astype(np.int64)
    r0 = np.floor(rf).astype(np.int64)
    fc = cf - c0
    fr = rf - r0
    c0 %= w
    c1 = (c0 + 1) % w
    r0 = np.clip(r0, 0, h - 1)
    r1 = np.clip(r0 + 1, 0, h - 1)
    rad = pano.radiance
    top = rad[r0, c0] * (1.0 - fc)[..., None] + rad[r0, c1] * fc[..., None]
    bot = rad[r1, c0] * (1.0 - fc)[..., None] + rad[r1, c1] * fc[..., None]
    return (top * (1.0 - fr)[..., None] + bot * fr[..., None]).astype(np.float32)


def crop_perspective(pano: HdrPanorama, cam: CropParams) -> np.ndarray:
    """Extract a linear-HDR pinhole crop, (res, res, 3) float32.

    Each output pixel bilinearly samples the panorama along its camera
    ray; f = (H/2)/tan(vfov/2) and the view rotation applies azimuth,
    elevation, then roll.
    """
    intr = cam.intrinsics()
    rays = camera_rays(intr)
    rot = camera_rotation(cam.azimuth, cam.elevation, cam.roll)
    world = rays @ rot.T
    return sample_panorama(pano, world)


def normalization_scale(img: np.ndarray, target: float = 0.5) -> float:
    """Scale factor that brings the mean over all channel values to `target`."""
    mean = float(np.asarray(img).mean())
    if mean <= 0.0:
        raise ValueError("degenerate exposure")
    return target / mean


def normalize_mean_intensity(img: np.ndarray, target: float = 0.5) -> np.ndarray:
    """Scale an image so the mean over all channel values hits `target`.

    Raises on an all-zero image.
    """
    img = np.asarray(img)
    return img * normalization_scale(img, target)


def tonemap_ldr(img: np.ndarray) -> np.ndarray:
    """Gamma-encode (gamma 2.2) and clip to [0, 1): min(v^(1/2.2), 1-2^-16).

    Not idempotent; apply exactly once per sample.
    """
    img = np.asarray(img)
    if not np.all(np.isfinite(img)) or np.any(img < 0):
        raise ValueError("tonemap input must be finite and non-negative")
    return np.minimum(np.power(img, 1.0 / TONEMAP_GAMMA), LDR_CLIP)
