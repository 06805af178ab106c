"""Pinhole camera model, depth unprojection, and normal estimation.

Frames
------
World: right-handed, Y up. Azimuth phi is measured from +Z toward +X,
polar theta from +Y, so a unit direction is
(sin(theta)*sin(phi), cos(theta), sin(theta)*cos(phi)).

Camera: x right, y down, z forward (so image row/col axes match x/y and
visible surfaces have camera-facing normals with n_z <= 0). Pixel
coordinates (u, v) are measured from the principal point at the image
center, pixel centers on integer indices: u = col - (W-1)/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class CameraIntrinsics:
    focal_px: float
    width: int
    height: int

    def __post_init__(self):
        if self.focal_px <= 0:
            raise ValueError(f"focal length must be positive, got {self.focal_px}")

    @classmethod
    def from_vfov(cls, vfov_deg: float, width: int, height: int) -> "CameraIntrinsics":
        if not 0.0 < vfov_deg < 180.0:
            raise ValueError(f"vertical fov must be in (0, 180), got {vfov_deg}")
        focal = (height / 2.0) / math.tan(math.radians(vfov_deg) / 2.0)
        return cls(focal_px=focal, width=width, height=height)

    @property
    def cx(self) -> float:
        return (self.width - 1) / 2.0

    @property
    def cy(self) -> float:
        return (self.height - 1) / 2.0


def camera_rotation(azimuth_deg: float, elevation_deg: float, roll_deg: float) -> np.ndarray:
    """World-from-camera rotation matrix (columns = right, down, forward).

    Positive elevation tilts the view up; positive roll banks the camera
    clockwise as seen from behind it (the horizon appears to rotate
    counterclockwise). The trailing diag(-1,-1,1) block maps the y-down
    camera frame onto the y-up world so the composition stays a proper
    rotation.
    """
    az = math.radians(azimuth_deg)
    el = math.radians(elevation_deg)
    ro = math.radians(roll_deg)
    ry = np.array([[math.cos(az), 0.0, math.sin(az)],
                   [0.0, 1.0, 0.0],
                   [-math.sin(az), 0.0, math.cos(az)]])
    rx = np.array([[1.0, 0.0, 0.0],
                   [0.0, math.cos(el), math.sin(el)],
                   [0.0, -math.sin(el), math.cos(el)]])
    rz = np.array([[math.cos(ro), -math.sin(ro), 0.0],
                   [math.sin(ro), math.cos(ro), 0.0],
                   [0.0, 0.0, 1.0]])
    flip = np.diag([-1.0, -1.0, 1.0])
    return ry @ rx @ rz @ flip


def world_to_camera(v: np.ndarray, azimuth_deg: float, elevation_deg: float,
                    roll_deg: float) -> np.ndarray:
    """Rotate a world-frame direction into the camera frame."""
    return camera_rotation(azimuth_deg, elevation_deg, roll_deg).T @ np.asarray(v, dtype=np.float64)


def camera_to_world(v: np.ndarray, azimuth_deg: float, elevation_deg: float,
                    roll_deg: float) -> np.ndarray:
    """Rotate a camera-frame direction into the world frame."""
    return camera_rotation(azimuth_deg, elevation_deg, roll_deg) @ np.asarray(v, dtype=np.float64)


def pixel_grid(cam: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel (u, v) coordinates measured from the principal point."""
    u = np.arange(cam.width, dtype=np.float64) - cam.cx
    v = np.arange(cam.height, dtype=np.float64) - cam.cy
    return np.meshgrid(u, v)


def camera_rays(cam: CameraIntrinsics) -> np.ndarray:
    """Unit ray direction per pixel in the camera frame, shape (H, W, 3)."""
    uu, vv = pixel_grid(cam)
    d = np.stack([uu, vv, np.full_like(uu, cam.focal_px)], axis=-1)
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def unproject(depth: np.ndarray, cam: CameraIntrinsics) -> np.ndarray:
    """Lift a depth map to a camera-frame point cloud.

    x = u*z/f and y = v*z/f per pixel, z preserved. Returns (H, W, 3).
    """
    depth = np.asarray(depth, dtype=np.float64)
    if depth.shape != (cam.height, cam.width):
        raise ValueError(f"depth shape {depth.shape} != camera {(cam.height, cam.width)}")
    if not np.all(np.isfinite(depth)) or np.any(depth <= 0):
        raise ValueError("depth map must be finite and strictly positive")
    uu, vv = pixel_grid(cam)
    return np.stack([uu * depth / cam.focal_px,
                     vv * depth / cam.focal_px,
                     depth], axis=-1)


def estimate_normals(points: np.ndarray) -> np.ndarray:
    """Per-pixel unit normals from the point-cloud cross product.

    n = d(p)/dx x d(p)/dy with central differences (one-sided at the
    borders), then flipped to face the camera (n . view_ray <= 0).
    Pixels with a degenerate cross product (norm < 1e-12) are filled
    from the nearest valid pixel so the map stays dense.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 3 or points.shape[2] != 3 or points.shape[0] < 3 or points.shape[1] < 3:
        raise ValueError(f"expected (H>=3, W>=3, 3) point cloud, got {points.shape}")

    dpdx = np.empty_like(points)
    dpdx[:, 1:-1] = (points[:, 2:] - points[:, :-2]) / 2.0
    dpdx[:, 0] = points[:, 1] - points[:, 0]
    dpdx[:, -1] = points[:, -1] - points[:, -2]

    dpdy = np.empty_like(points)
    dpdy[1:-1, :] = (points[2:, :] - points[:-2, :]) / 2.0
    dpdy[0, :] = points[1, :] - points[0, :]
    dpdy[-1, :] = points[-1, :] - points[-2, :]

    n = np.cross(dpdx, dpdy)
    norm = np.linalg.norm(n, axis=-1)
    valid = norm >= 1e-12
    n[valid] /= norm[valid, None]

    # orient toward the camera: the view ray through a pixel is its point
    flip = np.sum(n * points, axis=-1) > 0
    n[flip] *= -1.0

    if not valid.all():
        if not valid.any():
            raise ValueError("no valid normals in point cloud")
        _, idx = ndimage.distance_transform_edt(~valid, return_indices=True)
        n = n[idx[0], idx[1]]
    return n
