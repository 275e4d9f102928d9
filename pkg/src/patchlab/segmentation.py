"""Pixel clustering of a binarized saliency map into candidate object groups.

Connected component labeling splits the salient area into groups a crowd can
verify independently; small fragments are dropped before verification, and
the surviving verdicts carve the saliency map down to the verified target.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .raster import GrayMask, Rect

OUTCOME_PROCEED = "proceed"
OUTCOME_TERMINATE_WITH_FULL_MAP = "terminate-with-full-map"

_STRUCTURE_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCTURE_8 = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class PixelGroup:
    id: int
    pixels: frozenset
    bbox: Rect
    size: int


@dataclass(frozen=True)
class SegmentationOutcome:
    kind: str
    target_map: GrayMask


def threshold_mask(mask: GrayMask, threshold: float) -> GrayMask:
    """Binarize: strictly-above pixels become 1.0, the rest 0.0."""
    return GrayMask((mask.values > threshold).astype(np.float64))


def connected_components(binary: GrayMask, connectivity: int = 4) -> list[PixelGroup]:
    """Groups of positive pixels, ids numbered 1.. in raster-scan discovery order."""
    if connectivity == 4:
        structure = _STRUCTURE_4
    elif connectivity == 8:
        structure = _STRUCTURE_8
    else:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    labels, count = ndimage.label(binary.values > 0.5, structure=structure)
    if count == 0:
        return []
    flat = labels.ravel()
    positions = np.flatnonzero(flat)
    labels_at = flat[positions]
    # discovery order: rank labels by their first raster-scan occurrence
    unique, first_pos = np.unique(labels_at, return_index=True)
    rank_of = {int(lab): rank for rank, lab in enumerate(unique[np.argsort(first_pos)])}
    width = binary.width
    groups: list[PixelGroup | None] = [None] * count
    order = np.argsort(labels_at, kind="stable")
    boundaries = np.searchsorted(labels_at[order], unique)
    for i, lab in enumerate(unique):
        idx = order[boundaries[i] : boundaries[i + 1]] if i + 1 < len(unique) else order[boundaries[i] :]
        pos = positions[idx]
        ys = pos // width
        xs = pos % width
        x0, x1 = int(xs.min()), int(xs.max())
        y0, y1 = int(ys.min()), int(ys.max())
        rank = rank_of[int(lab)]
        groups[rank] = PixelGroup(
            id=rank + 1,
            pixels=frozenset(zip(xs.tolist(), ys.tolist())),
            bbox=Rect(x0, y0, x1 - x0 + 1, y1 - y0 + 1),
            size=int(len(pos)),
        )
    return groups  # type: ignore[return-value]


def filter_groups(groups: list[PixelGroup], min_group_size: int) -> list[PixelGroup]:
    """Keep groups strictly larger than min_group_size, preserving order."""
    return [g for g in groups if g.size > min_group_size]


def largest_object_size(groups: list[PixelGroup]) -> int:
    """Longest bounding-box side over the groups."""
    if not groups:
        raise ValueError("largest_object_size needs at least one group")
    return max(max(g.bbox.w, g.bbox.h) for g in groups)


def apply_group_verdicts(
    saliency_map: GrayMask, groups: list[PixelGroup], verdicts: list[bool]
) -> SegmentationOutcome:
    """Restrict the saliency map to positively verified groups.

    All-negative verdicts mean the clustering carved the object apart, so the
    extraction should stop and keep the whole saliency map instead.
    """
    if len(groups) != len(verdicts):
        raise ValueError(f"{len(groups)} groups but {len(verdicts)} verdicts")
    if not any(verdicts):
        return SegmentationOutcome(OUTCOME_TERMINATE_WITH_FULL_MAP, saliency_map)
    target = np.zeros_like(saliency_map.values)
    for group, keep in zip(groups, verdicts):
        if not keep:
            continue
        for x, y in group.pixels:
            target[y, x] = saliency_map.values[y, x]
    return SegmentationOutcome(OUTCOME_PROCEED, GrayMask(target))
