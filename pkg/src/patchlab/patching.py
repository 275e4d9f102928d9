"""Overlap gridding: cover an image with the minimal count of fixed-size patches.

Rows and columns are the ceiling of image extent over patch size; when that
leaves slack, offsets spread evenly between 0 and the last pinned position so
neighboring patches overlap instead of leaving a remainder strip.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .raster import GrayMask, RasterImage, Rect, coverage_fraction, round_half_up


@dataclass(frozen=True)
class PatchGrid:
    patch_size: int
    rects: tuple[Rect, ...]
    rows: int
    cols: int


def axis_offsets(side: int, patch_size: int) -> list[int]:
    """Patch start offsets along one axis: ceil(side/patch) positions, first at
    0, last pinned so the final patch ends exactly at the border."""
    if side < 1 or patch_size < 1:
        raise ValueError(f"side and patch_size must be positive, got {side}, {patch_size}")
    count = math.ceil(side / patch_size)
    effective = min(patch_size, side)
    if count == 1:
        return [0]
    span = side - effective
    return [round_half_up(i * span / (count - 1)) for i in range(count)]


def overlap_grid(image_w: int, image_h: int, patch_size: int) -> PatchGrid:
    """Row-major grid of patches covering the image with minimal counts per axis."""
    if patch_size > max(image_w, image_h):
        raise ValueError(
            f"patch_size {patch_size} exceeds both image sides {image_w}x{image_h}"
        )
    xs = axis_offsets(image_w, patch_size)
    ys = axis_offsets(image_h, patch_size)
    pw = min(patch_size, image_w)
    ph = min(patch_size, image_h)
    rects = tuple(Rect(x, y, pw, ph) for y in ys for x in xs)
    return PatchGrid(patch_size=patch_size, rects=rects, rows=len(ys), cols=len(xs))


def filter_patches(
    grid: PatchGrid, mask: GrayMask, coverage_threshold: float, bin_threshold: float
) -> list[Rect]:
    """Patches whose mask coverage meets the threshold, grid order preserved."""
    return [
        r
        for r in grid.rects
        if coverage_fraction(mask, r, bin_threshold) >= coverage_threshold
    ]


def crop_patch(image: RasterImage, rect: Rect) -> RasterImage:
    if not rect.fits_inside(image.width, image.height):
        raise ValueError(f"rect {rect} outside image {image.width}x{image.height}")
    ys, xs = rect.slices
    return RasterImage(image.pixels[ys, xs].copy())
