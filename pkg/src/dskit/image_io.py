"""Float image I/O: Radiance RGBE (.hdr) reading, PFM read/write, PNG write.

All readers return numpy float32 arrays in row-major, top-to-bottom order.
PFM files are stored bottom-to-top on disk (format convention); the
round trip through these functions is the identity.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, PngImagePlugin


# --------------------------------------------------------------------------
# PFM
# --------------------------------------------------------------------------

def read_pfm(path) -> np.ndarray:
    """Read a PFM file into (H, W) or (H, W, 3) float32, top-to-bottom."""
    with open(path, "rb") as fh:
        header = fh.readline().rstrip()
        if header == b"PF":
            channels = 3
        elif header == b"Pf":
            channels = 1
        else:
            raise ValueError(f"not a PFM file: {path}")
        dims = fh.readline().split()
        width, height = int(dims[0]), int(dims[1])
        scale = float(fh.readline().rstrip())
        endian = "<" if scale < 0 else ">"
        count = width * height * channels
        data = np.frombuffer(fh.read(count * 4), dtype=endian + "f4", count=count)
    img = data.reshape(height, width, channels) if channels == 3 else data.reshape(height, width)
    img = np.flipud(img).astype(np.float32)
    if abs(scale) != 1.0:
        img = img * abs(scale)
    return np.ascontiguousarray(img)


def write_pfm(path, img: np.ndarray) -> None:
    """Write (H, W) or (H, W, 3) float data as little-endian PFM, scale -1.0."""
    img = np.asarray(img, dtype=np.float32)
    if img.ndim == 2:
        header = b"Pf"
    elif img.ndim == 3 and img.shape[2] == 3:
        header = b"PF"
    else:
        raise ValueError(f"PFM supports 1 or 3 channels, got shape {img.shape}")
    height, width = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(header + b"\n")
        fh.write(f"{width} {height}\n".encode("ascii"))
        fh.write(b"-1.0\n")
        fh.write(np.flipud(img).astype("<f4").tobytes())


# --------------------------------------------------------------------------
# Radiance RGBE (.hdr)
# --------------------------------------------------------------------------

def _decode_rgbe(rgbe: np.ndarray) -> np.ndarray:
    # (..., 4) uint8 -> (..., 3) float32; shared exponent, bias 128+8,
    # value = m * 2^(E-136), E == 0 means black (stb/OpenCV convention).
    rgbe = rgbe.astype(np.float32)
    exp = rgbe[..., 3]
    scale = np.where(exp == 0.0, 0.0, np.exp2(exp - 136.0))
    return rgbe[..., :3] * scale[..., None]


def read_hdr(path) -> np.ndarray:
    """Read a Radiance RGBE .hdr image into (H, W, 3) linear float32."""
    with open(path, "rb") as fh:
        magic = fh.readline()
        if not magic.startswith(b"#?"):
            raise ValueError(f"not a Radiance HDR file: {path}")
        # header: key=value lines until a blank line, then the resolution line
        while True:
            line = fh.readline()
            if line in (b"\n", b"\r\n"):
                break
            if not line:
                raise ValueError(f"truncated HDR header: {path}")
        res = fh.readline().split()
        if len(res) != 4 or res[0] != b"-Y" or res[2] != b"+X":
            raise ValueError(f"unsupported HDR resolution line: {res}")
        height, width = int(res[1]), int(res[3])
        data = fh.read()

    out = np.empty((height, width, 4), dtype=np.uint8)
    pos = 0
    for row in range(height):
        if pos + 4 > len(data):
            raise ValueError("truncated HDR pixel data")
        head = data[pos:pos + 4]
        if head[0] == 2 and head[1] == 2 and (head[2] << 8 | head[3]) == width and width >= 8:
            # new-style RLE: four separate channel streams per scanline
            pos += 4
            for ch in range(4):
                col = 0
                while col < width:
                    run = data[pos]
                    pos += 1
                    if run > 128:
                        out[row, col:col + run - 128, ch] = data[pos]
                        col += run - 128
                        pos += 1
                    else:
                        out[row, col:col + run, ch] = np.frombuffer(
                            data, dtype=np.uint8, count=run, offset=pos)
                        col += run
                        pos += run
                if col != width:
                    raise ValueError("corrupt HDR RLE scanline")
        else:
            # flat scanline (old-style RLE with 1,1,1 markers not supported)
            row_bytes = np.frombuffer(data, dtype=np.uint8, count=width * 4, offset=pos)
            out[row] = row_bytes.reshape(width, 4)
            pos += width * 4
    return _decode_rgbe(out)


def write_hdr(path, img: np.ndarray) -> None:
    """Write (H, W, 3) linear float data as a flat (uncompressed) RGBE .hdr."""
    img = np.asarray(img, dtype=np.float32)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3), got {img.shape}")
    height, width = img.shape[:2]
    maxc = img.max(axis=2)
    rgbe = np.zeros((height, width, 4), dtype=np.uint8)
    nz = maxc > 1e-32
    exp = np.zeros_like(maxc)
    mant = np.zeros_like(maxc)
    mant[nz], exp[nz] = np.frexp(maxc[nz])
    scale = np.zeros_like(maxc)
    scale[nz] = mant[nz] * 256.0 / maxc[nz]
    rgbe[..., :3] = np.clip(img * scale[..., None], 0, 255).astype(np.uint8)
    rgbe[..., 3] = np.where(nz, exp + 128, 0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"#?RADIANCE\n")
        fh.write(b"FORMAT=32-bit_rle_rgbe\n\n")
        fh.write(f"-Y {height} +X {width}\n".encode("ascii"))
        fh.write(rgbe.tobytes())


# --------------------------------------------------------------------------
# PNG
# --------------------------------------------------------------------------

def write_png(path, img: np.ndarray) -> None:
    """Write [0,1) float channels as 8-bit sRGB-tagged PNG, value = round(255*v)."""
    img = np.asarray(img)
    q = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    mode = "RGB" if q.ndim == 3 else "L"
    info = PngImagePlugin.PngInfo()
    info.add(b"sRGB", b"\x00")  # rendering intent: perceptual
    Image.fromarray(q, mode=mode).save(Path(path), format="PNG", pnginfo=info)


def read_png(path) -> np.ndarray:
    """Read an 8-bit PNG back to float32 in [0, 1] (value/255)."""
    img = np.asarray(Image.open(Path(path)))
    return img.astype(np.float32) / 255.0
