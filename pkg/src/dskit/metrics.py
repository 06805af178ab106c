"""Lighting-consistency metrics: PSNR, light angular error, dominant light fit."""

from __future__ import annotations

import math

import numpy as np

PSNR_CAP_DB = 100.0
LIT_THRESHOLD = 0.05
MIN_LIT_PIXELS = 100


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """10*log10(peak^2 / MSE), capped at 100 dB for near-identical inputs."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse < peak * peak * 1e-10:
        return PSNR_CAP_DB
    return 10.0 * math.log10(peak * peak / mse)


def angular_error(d1, d2) -> float:
    """Angle in degrees between two unit directions."""
    dot = float(np.dot(np.asarray(d1, dtype=np.float64), np.asarray(d2, dtype=np.float64)))
    return math.degrees(math.acos(max(-1.0, min(1.0, dot))))


def dominant_light_direction(shading: np.ndarray, normals: np.ndarray,
                             method: str = "irls") -> np.ndarray:
    """Best single light direction explaining a shading map, unit norm.

    Fits l in s ~ max(0, n . l) over pixels with s > 0.05. "irls" runs
    L1-flavored iteratively reweighted least squares (robust to the odd
    shadowed/clamped pixel slipping through the threshold); "lstsq" is a
    single unweighted solve. This extractor is a heuristic stand-in; no
    canonical definition of the dominant direction exists.
    """
    shading = np.asarray(shading, dtype=np.float64)
    normals = np.asarray(normals, dtype=np.float64)
    if shading.shape != normals.shape[:2] or normals.shape[-1] != 3:
        raise ValueError(f"shapes disagree: shading {shading.shape}, normals {normals.shape}")
    lit = shading > LIT_THRESHOLD
    if np.count_nonzero(lit) < MIN_LIT_PIXELS:
        raise ValueError("underdetermined")
    a = normals[lit]
    b = shading[lit]

    l, *_ = np.linalg.lstsq(a, b, rcond=None)
    if method == "irls":
        for _ in range(20):
            r = a @ l - b
            w = 1.0 / np.maximum(np.abs(r), 1e-6)
            aw = a * w[:, None]
            l_new = np.linalg.solve(aw.T @ a, aw.T @ b)
            if np.linalg.norm(l_new - l) < 1e-12:
                l = l_new
                break
            l = l_new
    elif method != "lstsq":
        raise ValueError(f"unknown method: {method}")

    norm = float(np.linalg.norm(l))
    if norm < 1e-12:
        raise ValueError("underdetermined")
    return l / norm


def evaluate_pair(shading_a: np.ndarray, shading_b: np.ndarray,
                  normals_a: np.ndarray, normals_b: np.ndarray | None = None,
                  method: str = "irls") -> dict:
    """PSNR plus angular error between the pair's dominant light directions."""
    if normals_b is None:
        normals_b = normals_a
    record = {"psnr_db": psnr(shading_a, shading_b)}
    try:
        da = dominant_light_direction(shading_a, normals_a, method=method)
        db = dominant_light_direction(shading_b, normals_b, method=method)
        record["angular_error_deg"] = angular_error(da, db)
    except ValueError as exc:
        record["angular_error_deg"] = None
        record["error"] = str(exc)
    return record


def aggregate_report(pairs: list[dict], method: str = "irls") -> dict:
    """Combine per-pair records into the evaluation report."""
    psnrs = [p["psnr_db"] for p in pairs if p.get("psnr_db") is not None]
    angs = [p["angular_error_deg"] for p in pairs if p.get("angular_error_deg") is not None]
    agg = {
        "psnr_db_mean": float(np.mean(psnrs)) if psnrs else None,
        "psnr_db_median": float(np.median(psnrs)) if psnrs else None,
        "angular_error_deg_mean": float(np.mean(angs)) if angs else None,
        "angular_error_deg_median": float(np.median(angs)) if angs else None,
    }
    return {
        "pairs": pairs,
        "aggregate": agg,
        "dominant_direction_method": f"{method} n-dot-l fit (heuristic stand-in)",
    }
