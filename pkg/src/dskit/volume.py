"""Multi-plane density volumes in NDC and the operations on them.

The volume is a stack of fronto-parallel extinction grids at increasing
NDC depths. NDC here is the unit cube: x = (f*X/Z + cx + 0.5)/W,
y likewise, depth d = (1/z - 1/near)/(1/far - 1/near) (disparity-linear).
Extinction has units of 1/NDC-length; transmittance along a ray is
exp(-integral of sigma).
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import CameraIntrinsics, estimate_normals

log = logging.getLogger(__name__)

DEFAULT_N_PLANES = 64
DEFAULT_SAMPLES = 16
SUN_SOLID_ANGLE = 6.8e-5  # steradians, physical solar disc
OPACITY_PER_SPACING = 50.0  # sigma0 * spacing; one plane crossing gives T < 1e-20

_DSKV_MAGIC = b"DSKV1"


@dataclass(frozen=True)
class DirectionalLight:
    """Unit direction toward the light plus the source's solid angle (sr)."""

    direction: np.ndarray
    solid_angle: float = SUN_SOLID_ANGLE

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64).reshape(3)
        norm = float(np.linalg.norm(d))
        if norm < 1e-12:
            raise ValueError("light direction must be nonzero")
        object.__setattr__(self, "direction", d / norm)
        if not self.solid_angle > 0.0:
            raise ValueError(f"solid angle must be positive, got {self.solid_angle}")


@dataclass(frozen=True)
class DensityVolume:
    planes: np.ndarray          # (N, H, W) float32 extinction, >= 0
    plane_depths: np.ndarray    # (N,) strictly increasing NDC depths in [0, 1]
    near: float                 # metric depth of NDC 0
    far: float                  # metric depth of NDC 1
    camera: CameraIntrinsics
    clamped_px: int = 0         # build bookkeeping: depths clamped into [near, far]

    def __post_init__(self):
        planes = np.ascontiguousarray(self.planes, dtype=np.float32)
        depths = np.asarray(self.plane_depths, dtype=np.float64).reshape(-1)
        if planes.ndim != 3 or planes.shape[0] != depths.shape[0]:
            raise ValueError(f"planes {planes.shape} do not match {depths.shape[0]} depths")
        if not np.all(np.isfinite(planes)) or np.any(planes < 0):
            raise ValueError("extinction must be finite and non-negative")
        if np.any(np.diff(depths) <= 0) or depths[0] < 0 or depths[-1] > 1:
            raise ValueError("plane depths must be strictly increasing within [0, 1]")
        if not 0 < self.near < self.far:
            raise ValueError(f"need 0 < near < far, got {self.near}, {self.far}")
        object.__setattr__(self, "planes", planes)
        object.__setattr__(self, "plane_depths", depths)

    @property
    def n_planes(self) -> int:
        return self.planes.shape[0]

    @property
    def grid_shape(self) -> tuple[int, int]:
        return self.planes.shape[1], self.planes.shape[2]

    def default_step(self) -> float:
        return 1.0 / (2 * self.n_planes)


def ndc_from_depth(z, near: float, far: float):
    return (1.0 / np.asarray(z, dtype=np.float64) - 1.0 / near) / (1.0 / far - 1.0 / near)


def depth_from_ndc(d, near: float, far: float):
    return 1.0 / (1.0 / near + np.asarray(d, dtype=np.float64) * (1.0 / far - 1.0 / near))


def build_volume_from_depth(depth: np.ndarray, cam: CameraIntrinsics,
                            n_planes: int = DEFAULT_N_PLANES,
                            sigma0: float | None = None,
                            near: float | None = None,
                            far: float | None = None) -> DensityVolume:
    """Deterministic density field from a depth map.

    Each pixel's extinction budget sigma0 is split linearly between the
    two planes bracketing its NDC depth; every plane behind that pair
    also receives sigma0 (solid backing) so surfaces occlude rays that
    pass behind them. near/far default to the 0.5/99.5 depth percentiles
    padded by 5%; depths outside are clamped and counted.
    """
    depth = np.asarray(depth, dtype=np.float64)
    if depth.shape != (cam.height, cam.width):
        raise ValueError(f"depth shape {depth.shape} != camera {(cam.height, cam.width)}")
    if not np.all(np.isfinite(depth)) or np.any(depth <= 0):
        raise ValueError("depth map must be finite and strictly positive")
    if n_planes < 2:
        raise ValueError(f"need at least 2 planes, got {n_planes}")
    if near is None:
        near = float(np.percentile(depth, 0.5)) * 0.95
    if far is None:
        far = float(np.percentile(depth, 99.5)) * 1.05
    if not 0 < near < far:
        raise ValueError(f"need 0 < near < far, got {near}, {far}")

    spacing = 1.0 / (n_planes - 1)
    if sigma0 is None:
        sigma0 = OPACITY_PER_SPACING / spacing
    if not sigma0 > 0:
        raise ValueError(f"sigma0 must be positive, got {sigma0}")

    d_px = ndc_from_depth(depth, near, far)
    clamped = int(np.count_nonzero((d_px < 0.0) | (d_px > 1.0)))
    if clamped:
        log.warning("%d/%d depth pixels outside [near, far], clamped", clamped, d_px.size)
        d_px = np.clip(d_px, 0.0, 1.0)

    plane_depths = np.linspace(0.0, 1.0, n_planes)
    cell = np.clip(np.searchsorted(plane_depths, d_px, side="right") - 1, 0, n_planes - 2)
    w_hi = np.clip((d_px - plane_depths[cell])
                   / (plane_depths[cell + 1] - plane_depths[cell]), 0.0, 1.0)

    rows, cols = np.indices(depth.shape)
    planes = np.zeros((n_planes, cam.height, cam.width), dtype=np.float64)
    np.add.at(planes, (cell, rows, cols), sigma0 * (1.0 - w_hi))
    np.add.at(planes, (cell + 1, rows, cols), sigma0 * w_hi)
    for j in range(2, n_planes):
        planes[j][cell <= j - 2] += sigma0

    return DensityVolume(planes=planes.astype(np.float32), plane_depths=plane_depths,
                         near=near, far=far, camera=cam, clamped_px=clamped)


def _cam_args(vol: DensityVolume):
    cam = vol.camera
    return (float(cam.focal_px), cam.cx, cam.cy, float(cam.width), float(cam.height),
            float(vol.near), float(vol.far))


def raymarch_transmittance(vol: DensityVolume, origin, direction, step: float | None = None) -> float:
    """Transmittance along a ray from a camera-space point.

    The ray is clipped to the view frustum and marched in NDC with the
    given step (NDC length, defaults to 1/(2N)); origins outside the
    frustum traverse no medium and return 1.
    """
    if step is None:
        step = vol.default_step()
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    o = np.asarray(origin, dtype=np.float64).reshape(3)
    d = np.asarray(direction, dtype=np.float64).reshape(3)
    norm = float(np.linalg.norm(d))
    if norm < 1e-12:
        raise ValueError("ray direction must be nonzero")
    d = d / norm
    return float(_kernels._trace_ray(vol.planes, vol.plane_depths, *_cam_args(vol),
                                     o[0], o[1], o[2], d[0], d[1], d[2], float(step)))


def _orthonormal_basis(direction: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    helper = np.array([1.0, 0.0, 0.0]) if abs(direction[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t1 = np.cross(direction, helper)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(direction, t1)
    return t1, t2


def render_shadow_map(vol: DensityVolume, surface: np.ndarray, light: DirectionalLight,
                      samples: int = DEFAULT_SAMPLES, step: float | None = None,
                      seed: int = 0, normals: np.ndarray | None = None) -> np.ndarray:
    """Per-pixel mean transmittance toward the light over a sampled cone.

    surface is an (H, W, 3) camera-space point cloud; ray origins are
    biased 2*step along the surface normals against shadow acne. Cone
    directions come from a per-pixel seeded low-discrepancy sequence
    (sample 0 is the exact central direction), so the map is
    byte-identical for a fixed (volume, light, samples, step, seed).
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    if step is None:
        step = vol.default_step()
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    surface = np.ascontiguousarray(surface, dtype=np.float64)
    if surface.ndim != 3 or surface.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) surface points, got {surface.shape}")
    if normals is None:
        normals = estimate_normals(surface)
    normals = np.ascontiguousarray(normals, dtype=np.float64)
    if normals.shape != surface.shape:
        raise ValueError(f"normals shape {normals.shape} != surface {surface.shape}")

    l = light.direction
    cos_cap = max(-1.0, 1.0 - light.solid_angle / (2.0 * math.pi))
    t1, t2 = _orthonormal_basis(l)
    out = _kernels._shadow_map(vol.planes, vol.plane_depths, *_cam_args(vol),
                               surface, normals,
                               l[0], l[1], l[2], t1[0], t1[1], t1[2], t2[0], t2[1], t2[2],
                               cos_cap, int(samples), float(step), np.uint64(seed & (2**64 - 1)),
                               2.0 * float(step))
    return out


def expected_depth(vol: DensityVolume, step: float = 1.0 / 256.0) -> np.ndarray:
    """Transmittance-weighted mean absorption depth per camera ray (NDC).

    Camera rays are straight lines down the NDC depth axis, so this
    integrates each pixel column: w_j = T_(j-1) * (1 - exp(-sigma_j*dz)).
    Pixels absorbing less than 1e-6 total weight come back as NaN.
    """
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    h, w = vol.grid_shape
    nsteps = int(math.ceil(1.0 / step))
    dz = 1.0 / nsteps
    planes = vol.planes.astype(np.float64)
    pd = vol.plane_depths

    trans = np.ones((h, w))
    num = np.zeros((h, w))
    den = np.zeros((h, w))
    for j in range(nsteps):
        t = (j + 0.5) * dz
        if t < pd[0] or t > pd[-1]:
            continue
        k = min(np.searchsorted(pd, t, side="right") - 1, vol.n_planes - 2)
        wk = (t - pd[k]) / (pd[k + 1] - pd[k])
        sigma = planes[k] * (1.0 - wk) + planes[k + 1] * wk
        absorb = -np.expm1(-sigma * dz)
        weight = trans * absorb
        num += weight * t
        den += weight
        trans *= 1.0 - absorb
    out = np.full((h, w), np.nan)
    valid = den >= 1e-6
    out[valid] = num[valid] / den[valid]
    return out


def save_volume(path, vol: DensityVolume) -> None:
    """Write the DSKV1 container: magic, counts, near/far/focal, depths, planes."""
    n, (h, w) = vol.n_planes, vol.grid_shape
    with open(path, "wb") as fh:
        fh.write(_DSKV_MAGIC)
        fh.write(struct.pack("<IIIddd", n, h, w, vol.near, vol.far, vol.camera.focal_px))
        fh.write(vol.plane_depths.astype("<f8").tobytes())
        fh.write(vol.planes.astype("<f4").tobytes())


def load_volume(path) -> DensityVolume:
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != _DSKV_MAGIC:
            raise ValueError(f"not a DSKV1 volume: {path}")
        n, h, w, near, far, focal = struct.unpack("<IIIddd", fh.read(36))
        depths = np.frombuffer(fh.read(8 * n), dtype="<f8").astype(np.float64)
        planes = np.frombuffer(fh.read(4 * n * h * w), dtype="<f4").reshape(n, h, w)
    cam = CameraIntrinsics(focal_px=float(focal), width=w, height=h)
    return DensityVolume(planes=planes.copy(), plane_depths=depths,
                         near=float(near), far=float(far), camera=cam)
