"""Raster primitives: images, gray masks, rectangles, and the pixel ops built on them.

Masks are float64 grids in [0, 1]; images are 8-bit with 1 or 3 channels.
Serialization of masks uses binary PGM (P5) with maxval 255.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from .errors import CorruptImageError, DimensionMismatchError, UnsupportedFormatError

_VALUE_EPS = 1e-9


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle in pixel coordinates, (x, y) top-left corner."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self) -> None:
        if self.w < 1 or self.h < 1:
            raise ValueError(f"rect must have positive extent, got {self.w}x{self.h}")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"rect origin must be non-negative, got ({self.x},{self.y})")

    @property
    def slices(self) -> tuple[slice, slice]:
        return slice(self.y, self.y + self.h), slice(self.x, self.x + self.w)

    def fits_inside(self, width: int, height: int) -> bool:
        return self.x + self.w <= width and self.y + self.h <= height

    def to_json(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}

    @classmethod
    def from_json(cls, obj: dict) -> "Rect":
        return cls(int(obj["x"]), int(obj["y"]), int(obj["w"]), int(obj["h"]))


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class GrayMask:
    """Continuous-valued mask, values in [0, 1], row-major (h, w) storage."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = self.values
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"mask must be a non-empty 2-d array, got shape {v.shape}")
        if v.dtype != np.float64:
            raise ValueError(f"mask values must be float64, got {v.dtype}")
        lo, hi = float(v.min()), float(v.max())
        if lo < -_VALUE_EPS or hi > 1.0 + _VALUE_EPS:
            raise ValueError(f"mask values outside [0,1]: min={lo} max={hi}")
        _freeze(v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_array(cls, arr: np.ndarray, clip: bool = False) -> "GrayMask":
        v = np.asarray(arr, dtype=np.float64).copy()
        if clip:
            v = np.clip(v, 0.0, 1.0)
        return cls(v)

    @classmethod
    def zeros(cls, width: int, height: int) -> "GrayMask":
        return cls(np.zeros((height, width), dtype=np.float64))

    @classmethod
    def full(cls, width: int, height: int, value: float) -> "GrayMask":
        return cls(np.full((height, width), value, dtype=np.float64))


@dataclass(frozen=True)
class RasterImage:
    """8-bit image, (h, w, c) storage with c in {1, 3}."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        p = self.pixels
        if p.ndim != 3 or p.shape[2] not in (1, 3):
            raise ValueError(f"image must be (h, w, c) with c in {{1,3}}, got shape {p.shape}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("image must be non-empty")
        if p.dtype != np.uint8:
            raise ValueError(f"image pixels must be uint8, got {p.dtype}")
        _freeze(p)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


def luminance(image: RasterImage) -> GrayMask:
    """Grayscale view of an image as a [0, 1] mask (ITU-R 601 weights for color)."""
    p = image.pixels.astype(np.float64)
    if image.channels == 1:
        gray = p[:, :, 0]
    else:
        gray = 0.299 * p[:, :, 0] + 0.587 * p[:, :, 1] + 0.114 * p[:, :, 2]
    return GrayMask(np.clip(gray / 255.0, 0.0, 1.0))


def _parse_pgm(data: bytes) -> np.ndarray:
    if not data.startswith(b"P5"):
        if data.startswith(b"P2"):
            raise UnsupportedFormatError("ascii PGM (P2) not supported, use binary P5")
        raise CorruptImageError("not a binary PGM file")
    # header = magic, width, height, maxval; '#' comments allowed between tokens
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise CorruptImageError(f"bad PGM header token {token!r}")
        fields.append(int(token))
    pos += 1  # single whitespace byte after maxval
    width, height, maxval = fields
    if maxval > 255:
        raise UnsupportedFormatError(f"16-bit PGM rejected (maxval={maxval})")
    if width < 1 or height < 1 or maxval < 1:
        raise CorruptImageError(f"bad PGM dimensions {width}x{height} maxval={maxval}")
    raster = data[pos : pos + width * height]
    if len(raster) != width * height:
        raise CorruptImageError("PGM pixel data truncated")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width)


def load_image(path: str | Path) -> RasterImage:
    """Load an 8-bit PNG or binary PGM from disk.

    Raises:
        UnsupportedFormatError: 16-bit sources or unknown formats.
        CorruptImageError: recognized format with unparseable contents.
    """
    data = Path(path).read_bytes()
    if data.startswith(b"P5") or data.startswith(b"P2"):
        return RasterImage(_parse_pgm(data)[:, :, None].copy())
    if data.startswith(b"\x89PNG"):
        try:
            with Image.open(Path(path)) as im:
                im.load()
                if im.mode in ("I", "I;16", "I;16B", "I;16L", "I;16N"):
                    raise UnsupportedFormatError(f"16-bit PNG rejected (mode={im.mode})")
                if im.mode == "L":
                    arr = np.asarray(im, dtype=np.uint8)[:, :, None]
                elif im.mode == "LA":
                    arr = np.asarray(im.convert("L"), dtype=np.uint8)[:, :, None]
                else:
                    arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
                return RasterImage(arr.copy())
        except UnidentifiedImageError as exc:
            raise CorruptImageError(f"corrupt PNG: {exc}") from exc
        except OSError as exc:
            raise CorruptImageError(f"corrupt PNG: {exc}") from exc
    raise UnsupportedFormatError("unrecognized image format (PNG or binary PGM expected)")


def mask_to_bytes(mask: GrayMask) -> bytes:
    """Serialize a mask as binary PGM, values rounded half-up onto 0..255."""
    quantized = np.floor(mask.values * 255.0 + 0.5).astype(np.uint8)
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    return header + quantized.tobytes()


def write_mask(mask: GrayMask, path: str | Path) -> None:
    Path(path).write_bytes(mask_to_bytes(mask))


def load_mask(path: str | Path) -> GrayMask:
    """Read a P5 PGM back as a [0, 1] mask (inverse of write_mask up to 1/255)."""
    arr = _parse_pgm(Path(path).read_bytes())
    return GrayMask(arr.astype(np.float64) / 255.0)


def min_max_scale(mask: GrayMask) -> GrayMask:
    """Affinely rescale onto [0, 1]; a flat mask degenerates to all zeros."""
    v = mask.values
    lo = float(v.min())
    hi = float(v.max())
    if hi - lo == 0.0:
        return GrayMask.zeros(mask.width, mask.height)
    return GrayMask(np.clip((v - lo) / (hi - lo), 0.0, 1.0))


def _gaussian_kernel(size: int) -> np.ndarray:
    sigma = size / 6.0
    radius = size // 2
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(mask: GrayMask, kernel_size: int) -> GrayMask:
    """Separable Gaussian blur with sigma = kernel_size / 6 and clamp-to-edge borders.

    An even kernel_size is promoted to the next odd value. A constant mask
    passes through unchanged (normalized kernel), output stays in [0, 1].
    """
    if kernel_size < 1:
        raise ValueError(f"kernel_size must be >= 1, got {kernel_size}")
    if kernel_size % 2 == 0:
        kernel_size += 1
    if kernel_size == 1:
        return mask
    k = _gaussian_kernel(kernel_size)
    out = ndimage.convolve1d(mask.values, k, axis=0, mode="nearest")
    out = ndimage.convolve1d(out, k, axis=1, mode="nearest")
    return GrayMask(np.clip(out, 0.0, 1.0))


def _axis_positions(dst: int, src: int) -> np.ndarray:
    # corner-aligned: first sample at 0, last at src-1
    if dst == 1:
        return np.zeros(1, dtype=np.float64)
    return np.arange(dst, dtype=np.float64) * ((src - 1) / (dst - 1))


def _resize_plane(plane: np.ndarray, width: int, height: int) -> np.ndarray:
    src_h, src_w = plane.shape
    ys = _axis_positions(height, src_h)
    xs = _axis_positions(width, src_w)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, src_h - 1)
    x1 = np.minimum(x0 + 1, src_w - 1)
    ty = (ys - y0)[:, None]
    tx = (xs - x0)[None, :]
    top = plane[y0[:, None], x0[None, :]] * (1.0 - tx) + plane[y0[:, None], x1[None, :]] * tx
    bot = plane[y1[:, None], x0[None, :]] * (1.0 - tx) + plane[y1[:, None], x1[None, :]] * tx
    return top * (1.0 - ty) + bot * ty


def resize_bilinear(source: RasterImage | GrayMask, width: int, height: int):
    """Bilinear resize with corner-aligned sampling; identity when dims match."""
    if width < 1 or height < 1:
        raise ValueError(f"target dims must be positive, got {width}x{height}")
    if isinstance(source, GrayMask):
        if (width, height) == (source.width, source.height):
            return source
        out = _resize_plane(source.values, width, height)
        return GrayMask(np.clip(out, 0.0, 1.0))
    if (width, height) == (source.width, source.height):
        return source
    planes = [
        _resize_plane(source.pixels[:, :, c].astype(np.float64), width, height)
        for c in range(source.channels)
    ]
    stacked = np.stack(planes, axis=2)
    return RasterImage(np.floor(stacked + 0.5).clip(0, 255).astype(np.uint8))


def coverage_fraction(mask: GrayMask, rect: Rect, bin_threshold: float) -> float:
    """Fraction of the rectangle whose mask values exceed bin_threshold."""
    if not rect.fits_inside(mask.width, mask.height):
        raise ValueError(f"rect {rect} outside mask {mask.width}x{mask.height}")
    region = mask.values[rect.slices]
    return float(np.count_nonzero(region > bin_threshold)) / (rect.w * rect.h)


def mask_iou(a: GrayMask, b: GrayMask, threshold: float) -> float:
    """Intersection over union of the two binarized masks; both empty gives 1.0."""
    if (a.width, a.height) != (b.width, b.height):
        raise DimensionMismatchError(
            f"mask dims differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    pa = a.values > threshold
    pb = b.values > threshold
    union = np.count_nonzero(pa | pb)
    if union == 0:
        return 1.0
    return float(np.count_nonzero(pa & pb)) / union


def round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))
