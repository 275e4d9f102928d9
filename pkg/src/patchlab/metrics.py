"""Evaluation metrics for extracted attention masks and labeling effort."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import GrayMask, mask_iou, min_max_scale

# weight balancing attention loss against a base objective; fixed, but recorded
# in reports so downstream consumers know what the numbers were computed with
BALANCE_WEIGHT = 0.5


@dataclass(frozen=True)
class MaskQuality:
    iou: float
    mse: float
    attention_loss: float

    def to_json(self) -> dict:
        return {"iou": self.iou, "mse": self.mse, "attentionLoss": self.attention_loss}


def attention_loss(model_map: GrayMask, attention_mask: GrayMask) -> float:
    """Mean squared difference between the min-max scaled model map and the mask.

    Scaling only the model side makes the value invariant to any positive
    affine rescaling of the model map.
    """
    if (model_map.width, model_map.height) != (attention_mask.width, attention_mask.height):
        raise ValueError(
            f"dims differ: {model_map.width}x{model_map.height}"
            f" vs {attention_mask.width}x{attention_mask.height}"
        )
    scaled = min_max_scale(model_map).values
    diff = scaled - attention_mask.values
    return float(np.mean(diff * diff))


def per_patch_time(elapsed_ms: float, page_size: int) -> float:
    """A page's time cost divided evenly over its tasks."""
    if page_size < 1:
        raise ValueError(f"page_size must be >= 1, got {page_size}")
    if elapsed_ms < 0:
        raise ValueError(f"elapsed_ms must be non-negative, got {elapsed_ms}")
    return elapsed_ms / page_size


def mask_quality(candidate: GrayMask, ground_truth: GrayMask, bin_threshold: float = 0.5) -> MaskQuality:
    """IoU at bin_threshold, plain MSE, and attention loss vs the ground truth."""
    diff = candidate.values - ground_truth.values
    return MaskQuality(
        iou=mask_iou(candidate, ground_truth, bin_threshold),
        mse=float(np.mean(diff * diff)),
        attention_loss=attention_loss(ground_truth, candidate),
    )


def consensus_histogram(scores: list[float], bins: int = 10) -> list[int]:
    """Counts of consensus scores per uniform bin over [0, 1], last bin closed."""
    counts = [0] * bins
    for s in scores:
        if not 0.0 <= s <= 1.0:
            raise ValueError(f"consensus score {s} outside [0, 1]")
        idx = min(int(s * bins), bins - 1)
        counts[idx] += 1
    return counts


def time_summary(per_task_ms: list[float]) -> dict:
    """Mean, median and 95th percentile of per-task answer times."""
    if not per_task_ms:
        return {"mean": None, "p50": None, "p95": None}
    arr = np.asarray(per_task_ms, dtype=np.float64)
    return {
        "mean": float(arr.mean()),
        "p50": float(np.percentile(arr, 50)),
        "p95": float(np.percentile(arr, 95)),
    }
