"""dskit: direct-shading dataset toolkit.

Panorama crops, depth-based normals, ray-marched cast shadows from a
multi-plane density volume, direct-shading dataset generation, and
lighting-consistency metrics.
"""

from .dataset import (DirectoryDepthProvider, RenderConfig, SamplerConfig,
                      generate_dataset, generate_sample, load_config,
                      read_manifest, render_sample_arrays, sample_crop_params)
from .geometry import (CameraIntrinsics, camera_rotation, camera_to_world,
                       estimate_normals, unproject, world_to_camera)
from .image_io import read_hdr, read_pfm, read_png, write_hdr, write_pfm, write_png
from .metrics import angular_error, dominant_light_direction, evaluate_pair, psnr
from .panorama import (CropParams, HdrPanorama, crop_perspective, detect_sun_direction,
                       direction_from_uv, normalize_mean_intensity, sample_panorama,
                       sun_confidence, tonemap_ldr, uv_from_direction)
from .shading import compose_direct_shading, ndotl
from .volume import (DensityVolume, DirectionalLight, build_volume_from_depth,
                     expected_depth, load_volume, raymarch_transmittance,
                     render_shadow_map, save_volume)

__version__ = "0.1.0"

__all__ = [
    "CameraIntrinsics", "CropParams", "DensityVolume", "DirectionalLight",
    "DirectoryDepthProvider", "HdrPanorama", "RenderConfig", "SamplerConfig",
    "angular_error", "build_volume_from_depth", "camera_rotation", "camera_to_world",
    "compose_direct_shading", "crop_perspective", "detect_sun_direction",
    "direction_from_uv", "dominant_light_direction", "estimate_normals",
    "evaluate_pair", "expected_depth", "generate_dataset", "generate_sample",
    "load_config", "load_volume", "ndotl", "normalize_mean_intensity", "psnr",
    "raymarch_transmittance", "read_hdr", "read_manifest", "read_pfm", "read_png",
    "render_sample_arrays", "render_shadow_map", "sample_crop_params",
    "sample_panorama", "save_volume", "sun_confidence", "tonemap_ldr", "unproject",
    "uv_from_direction", "world_to_camera", "write_hdr", "write_pfm", "write_png",
]
