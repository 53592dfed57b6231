"""Pixel-space utilities: RGBA assembly, PNG I/O, compositing, bilinear resize.

Conventions: RGB images are ``(h, w, 3)`` floats in [-1, 1], alpha maps are
``(h, w)`` floats in [0, 1], RGBA images are ``(h, w, 4)`` with those two
ranges side by side. PNG output is always 8-bit with straight
(non-premultiplied) alpha.

The PNG writer is self-contained (zlib + struct, filter 0, no interlacing)
so output bytes are fully deterministic; reading goes through Pillow, which
also decodes PNGs produced by other tools.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np
from PIL import Image

__all__ = [
    "assemble_rgba",
    "bilinear_resize",
    "composite_over",
    "read_png",
    "write_png",
    "write_png_gray",
]

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def assemble_rgba(rgb: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Concatenate an RGB image and an alpha map into an RGBA image."""
    rgb = np.asarray(rgb)
    alpha = np.asarray(alpha)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"rgb must be (h, w, 3), got {rgb.shape}")
    if alpha.shape != rgb.shape[:2]:
        raise ValueError(f"alpha shape {alpha.shape} does not match rgb {rgb.shape[:2]}")
    return np.concatenate([rgb, alpha[:, :, None]], axis=2)


def _round_half_up(values: np.ndarray) -> np.ndarray:
    # round-half-away-from-zero; inputs are non-negative here
    return np.floor(values + 0.5)


def quantize_channel(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Map [lo, hi] floats to uint8 with round-half-up; out-of-range clips."""
    scaled = (np.asarray(values, dtype=np.float64) - lo) * (255.0 / (hi - lo))
    return np.clip(_round_half_up(scaled), 0, 255).astype(np.uint8)


def _chunk(tag: bytes, body: bytes) -> bytes:
    return struct.pack(">I", len(body)) + tag + body + struct.pack(">I", zlib.crc32(tag + body))


def _encode_png(pixels: np.ndarray, color_type: int) -> bytes:
    h, w = pixels.shape[:2]
    rows = pixels.reshape(h, -1)
    raw = b"".join(b"\x00" + rows[y].tobytes() for y in range(h))
    ihdr = struct.pack(">IIBBBBB", w, h, 8, color_type, 0, 0, 0)
    return b"".join([
        _PNG_MAGIC,
        _chunk(b"IHDR", ihdr),
        _chunk(b"IDAT", zlib.compress(raw, 9)),
        _chunk(b"IEND", b""),
    ])


def write_png(img: np.ndarray, path: str) -> None:
    """Write an RGBA image ([-1,1] RGB, [0,1] A) as an 8-bit RGBA PNG.

    RGB bytes are ``round(255 * (v + 1) / 2)``, alpha bytes ``round(255 * a)``,
    rounding half away from zero.
    """
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 4:
        raise ValueError(f"expected (h, w, 4) RGBA, got {img.shape}")
    rgb = quantize_channel(img[:, :, :3], -1.0, 1.0)
    a = quantize_channel(img[:, :, 3], 0.0, 1.0)
    pixels = np.concatenate([rgb, a[:, :, None]], axis=2)
    with open(path, "wb") as f:
        f.write(_encode_png(pixels, color_type=6))


def write_png_gray(values: np.ndarray, path: str) -> None:
    """Write a [0,1] map as an 8-bit grayscale PNG (debug heatmaps)."""
    values = np.asarray(values)
    if values.ndim != 2:
        raise ValueError(f"expected a 2-D map, got shape {values.shape}")
    with open(path, "wb") as f:
        f.write(_encode_png(quantize_channel(values, 0.0, 1.0), color_type=0))


def write_png_gray_bytes(byte_values: np.ndarray, path: str) -> None:
    """Write an already-quantized uint8 map as a grayscale PNG."""
    byte_values = np.asarray(byte_values, dtype=np.uint8)
    if byte_values.ndim != 2:
        raise ValueError(f"expected a 2-D map, got shape {byte_values.shape}")
    with open(path, "wb") as f:
        f.write(_encode_png(byte_values, color_type=0))


def read_png(path: str) -> np.ndarray:
    """Read a PNG into float arrays using the inverse of write_png's mapping.

    Returns (h, w, 3) for RGB-like files and (h, w, 4) for files with alpha;
    RGB channels land in [-1, 1], alpha in [0, 1].
    """
    with Image.open(path) as im:
        has_alpha = im.mode in ("RGBA", "LA", "PA") or "transparency" in im.info
        data = np.asarray(im.convert("RGBA" if has_alpha else "RGB"), dtype=np.float64)
    rgb = data[:, :, :3] / 255.0 * 2.0 - 1.0
    if data.shape[2] == 4:
        return np.concatenate([rgb, data[:, :, 3:4] / 255.0], axis=2)
    return rgb


def composite_over(fg: np.ndarray, bg: np.ndarray) -> np.ndarray:
    """Alpha-over: ``a * fg_rgb + (1 - a) * bg_rgb`` elementwise."""
    fg = np.asarray(fg)
    bg = np.asarray(bg)
    if fg.ndim != 3 or fg.shape[2] != 4:
        raise ValueError(f"fg must be (h, w, 4) RGBA, got {fg.shape}")
    if bg.shape != fg.shape[:2] + (3,):
        raise ValueError(f"bg shape {bg.shape} does not match fg {fg.shape[:2]}")
    a = fg[:, :, 3:4]
    return a * fg[:, :, :3] + (1.0 - a) * bg


def bilinear_resize(grid: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize (align_corners=False, edge-replicating) of a 2-D map.

    A trailing channel axis is carried through untouched. Identity sizes
    reproduce the input exactly.
    """
    if out_h < 1 or out_w < 1:
        raise ValueError(f"target size must be positive, got {out_h}x{out_w}")
    src = np.asarray(grid, dtype=np.float64)
    if src.ndim not in (2, 3):
        raise ValueError(f"expected a 2-D map (optionally with channels), got shape {src.shape}")
    h, w = src.shape[:2]

    ys = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    xs = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    if src.ndim == 3:
        wy = wy[:, :, None]
        wx = wx[:, :, None]

    top = src[np.ix_(y0, x0)] * (1.0 - wx) + src[np.ix_(y0, x1)] * wx
    bot = src[np.ix_(y1, x0)] * (1.0 - wx) + src[np.ix_(y1, x1)] * wx
    return top * (1.0 - wy) + bot * wy
