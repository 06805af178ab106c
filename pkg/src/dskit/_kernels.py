"""Numba kernels for NDC ray marching and cone-sampled shadow maps.

Everything here is serial and branch-deterministic: results are
bit-identical across runs and independent of any outer parallelism.
NDC is the unit cube: x,y from normalized image coordinates, depth from
the disparity-linear near/far remap.
"""

import numpy as np
from numba import njit

OPTICAL_DEPTH_CUTOFF = 20.0

# additive-recurrence (R2) low-discrepancy constants, 1/g and 1/g^2 for the
# plastic number g = 1.32471795724474602596
_R2_A1 = 0.7548776662466927
_R2_A2 = 0.5698402909980532

_SM64_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM64_M1 = np.uint64(0xBF58476D1CE4E5B9)
_SM64_M2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True)
def _splitmix64(state):
    state = state + _SM64_GAMMA
    z = state
    z = (z ^ (z >> np.uint64(30))) * _SM64_M1
    z = (z ^ (z >> np.uint64(27))) * _SM64_M2
    z = z ^ (z >> np.uint64(31))
    return z, state


@njit(cache=True)
def _sigma_at(planes, plane_d, nx, ny, nd):
    """Trilinear extinction lookup: bilinear in-plane, linear across planes."""
    n = plane_d.shape[0]
    if nd < plane_d[0] or nd > plane_d[n - 1]:
        return 0.0
    if n == 1:
        k = 0
        wk = 1.0
    else:
        lo = 0
        hi = n - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if plane_d[mid] <= nd:
                lo = mid
            else:
                hi = mid
        k = lo
        wk = 1.0 - (nd - plane_d[k]) / (plane_d[k + 1] - plane_d[k])

    h = planes.shape[1]
    w = planes.shape[2]
    gx = nx * w - 0.5
    gy = ny * h - 0.5
    if gx < 0.0:
        gx = 0.0
    elif gx > w - 1.0:
        gx = w - 1.0
    if gy < 0.0:
        gy = 0.0
    elif gy > h - 1.0:
        gy = h - 1.0
    x0 = int(gx)
    y0 = int(gy)
    if x0 > w - 2:
        x0 = w - 2 if w > 1 else 0
    if y0 > h - 2:
        y0 = h - 2 if h > 1 else 0
    x1 = x0 + 1 if w > 1 else x0
    y1 = y0 + 1 if h > 1 else y0
    fx = gx - x0
    fy = gy - y0

    s = 0.0
    wsum = wk
    for idx in range(2):
        if idx == 1:
            if wk >= 1.0 or k + 1 >= n:
                break
            k = k + 1
            wsum = 1.0 - wsum
        p00 = planes[k, y0, x0]
        p01 = planes[k, y0, x1]
        p10 = planes[k, y1, x0]
        p11 = planes[k, y1, x1]
        bil = (p00 * (1.0 - fx) + p01 * fx) * (1.0 - fy) + (p10 * (1.0 - fx) + p11 * fx) * fy
        s += wsum * bil
    return s


@njit(cache=True)
def _march_segment(planes, plane_d, ax, ay, ad, bx, by, bd, step):
    """Optical depth along the NDC segment a->b, midpoint rule."""
    ex = bx - ax
    ey = by - ay
    ed = bd - ad
    length = np.sqrt(ex * ex + ey * ey + ed * ed)
    if length == 0.0:
        return 0.0
    nsteps = int(np.ceil(length / step))
    if nsteps < 1:
        nsteps = 1
    delta = length / nsteps
    tau = 0.0
    for j in range(nsteps):
        t = (j + 0.5) / nsteps
        tau += _sigma_at(planes, plane_d, ax + t * ex, ay + t * ey, ad + t * ed) * delta
        if tau > OPTICAL_DEPTH_CUTOFF:
            break
    return tau


@njit(cache=True)
def _trace_ray(planes, plane_d, f, cx, cy, w, h, near, far,
               ox, oy, oz, dx, dy, dz, step):
    """Transmittance from a camera-space origin along a direction.

    Clips the ray against the view frustum, maps the inside segment to
    NDC (projective maps keep it straight), and marches it. Origins
    outside the frustum see no medium and return 1.
    """
    # frustum half-spaces g_i >= 0, linear in the camera-space point
    g1 = oz - near
    g2 = far - oz
    g3 = f * ox + (cx + 0.5) * oz
    g4 = -f * ox + (w - cx - 0.5) * oz
    g5 = f * oy + (cy + 0.5) * oz
    g6 = -f * oy + (h - cy - 0.5) * oz
    if g1 < 0.0 or g2 < 0.0 or g3 < 0.0 or g4 < 0.0 or g5 < 0.0 or g6 < 0.0:
        return 1.0

    s1 = dz
    s2 = -dz
    s3 = f * dx + (cx + 0.5) * dz
    s4 = -f * dx + (w - cx - 0.5) * dz
    s5 = f * dy + (cy + 0.5) * dz
    s6 = -f * dy + (h - cy - 0.5) * dz

    t_exit = np.inf
    if s1 < 0.0 and -g1 / s1 < t_exit:
        t_exit = -g1 / s1
    if s2 < 0.0 and -g2 / s2 < t_exit:
        t_exit = -g2 / s2
    if s3 < 0.0 and -g3 / s3 < t_exit:
        t_exit = -g3 / s3
    if s4 < 0.0 and -g4 / s4 < t_exit:
        t_exit = -g4 / s4
    if s5 < 0.0 and -g5 / s5 < t_exit:
        t_exit = -g5 / s5
    if s6 < 0.0 and -g6 / s6 < t_exit:
        t_exit = -g6 / s6
    if not np.isfinite(t_exit) or t_exit <= 0.0:
        return 1.0

    inv_near = 1.0 / near
    span = 1.0 / far - inv_near
    ax = (f * ox / oz + cx + 0.5) / w
    ay = (f * oy / oz + cy + 0.5) / h
    ad = (1.0 / oz - inv_near) / span
    ez = oz + t_exit * dz
    bx = (f * (ox + t_exit * dx) / ez + cx + 0.5) / w
    by = (f * (oy + t_exit * dy) / ez + cy + 0.5) / h
    bd = (1.0 / ez - inv_near) / span

    tau = _march_segment(planes, plane_d, ax, ay, ad, bx, by, bd, step)
    return np.exp(-tau)


@njit(cache=True)
def _shadow_map(planes, plane_d, f, cx, cy, w, h, near, far,
                points, normals, lx, ly, lz, t1x, t1y, t1z, t2x, t2y, t2z,
                cos_cap, samples, step, seed, bias):
    """Mean cone-sampled transmittance toward the light, per surface pixel.

    Sample 0 is pinned to the central light direction; samples 1.. come
    from an R2 sequence shifted per pixel by splitmix64(seed ^ index),
    so the result is independent of evaluation order.
    """
    rows = points.shape[0]
    cols = points.shape[1]
    out = np.empty((rows, cols))
    one_minus_cap = 1.0 - cos_cap
    for r in range(rows):
        for c in range(cols):
            ox = points[r, c, 0] + bias * normals[r, c, 0]
            oy = points[r, c, 1] + bias * normals[r, c, 1]
            oz = points[r, c, 2] + bias * normals[r, c, 2]

            state = np.uint64(seed) ^ np.uint64(r * cols + c)
            h1, state = _splitmix64(state)
            h2, state = _splitmix64(state)
            off1 = h1 / 18446744073709551616.0
            off2 = h2 / 18446744073709551616.0

            acc = 0.0
            for s in range(samples):
                if s == 0:
                    ct = 1.0
                    st = 0.0
                    ph = 0.0
                else:
                    u1 = (off1 + _R2_A1 * s) % 1.0
                    u2 = (off2 + _R2_A2 * s) % 1.0
                    ct = 1.0 - u1 * one_minus_cap
                    arg = 1.0 - ct * ct
                    st = np.sqrt(arg) if arg > 0.0 else 0.0
                    ph = 2.0 * np.pi * u2
                cp = np.cos(ph)
                sp = np.sin(ph)
                dx = ct * lx + st * (cp * t1x + sp * t2x)
                dy = ct * ly + st * (cp * t1y + sp * t2y)
                dz = ct * lz + st * (cp * t1z + sp * t2z)
                acc += _trace_ray(planes, plane_d, f, cx, cy, w, h, near, far,
                                  ox, oy, oz, dx, dy, dz, step)
            out[r, c] = acc / samples
    return out
