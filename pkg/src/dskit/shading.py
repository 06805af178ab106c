"""Cosine term and direct-shading composition."""

from __future__ import annotations

import numpy as np

from .image_io import write_pfm, write_png
from .panorama import TONEMAP_GAMMA
from .volume import DirectionalLight


def ndotl(normals: np.ndarray, light: DirectionalLight) -> np.ndarray:
    """Clamped Lambert cosine max(0, n . l) per pixel, (H, W) float."""
    normals = np.asarray(normals)
    if normals.ndim != 3 or normals.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) normals, got {normals.shape}")
    return np.maximum(0.0, normals @ light.direction)


def compose_direct_shading(cosine: np.ndarray, shadow: np.ndarray) -> np.ndarray:
    """Direct shading s = cosine * transmittance, elementwise in [0, 1]."""
    cosine = np.asarray(cosine)
    shadow = np.asarray(shadow)
    if cosine.shape != shadow.shape:
        raise ValueError(f"shape mismatch: cosine {cosine.shape} vs shadow {shadow.shape}")
    return cosine * shadow


def write_shading(pfm_path, shading: np.ndarray, png_path=None) -> None:
    """Store shading as linear PFM and optionally a gamma-encoded PNG."""
    write_pfm(pfm_path, shading)
    if png_path is not None:
        write_png(png_path, np.power(np.clip(shading, 0.0, 1.0), 1.0 / TONEMAP_GAMMA))


def write_normals(pfm_path, normals: np.ndarray, png_path=None) -> None:
    """Store normals as 3-channel PFM in [-1, 1], optional PNG viz (n*0.5+0.5)."""
    write_pfm(pfm_path, normals)
    if png_path is not None:
        write_png(png_path, np.asarray(normals) * 0.5 + 0.5)
