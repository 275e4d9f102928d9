"""Vote aggregation: soft-voted response masks, worker validity, consensus, merging.

Per-pixel response values are the fraction of positive votes among the votes
whose patch covers that pixel, so disagreement shows up as intermediate gray
instead of a hard majority call. A round's response is folded into the running
mask by blurring it and either averaging (where the mask is still empty) or
multiplying (where earlier rounds left evidence).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .raster import GrayMask, Rect, gaussian_blur


class TaskKind(str, Enum):
    SALIENCY_VERIFY = "saliency-verify"
    GROUP_VERIFY = "group-verify"
    PATCH_LABEL = "patch-label"
    TEST = "test"


@dataclass(frozen=True)
class Vote:
    rect: Rect
    worker_id: str
    answer: bool
    task_kind: TaskKind = TaskKind.PATCH_LABEL


@dataclass(frozen=True)
class ValidityReport:
    worker_id: str
    test_total: int
    test_correct: int
    score: float
    accepted: bool

    def to_json(self) -> dict:
        return {
            "workerId": self.worker_id,
            "testTotal": self.test_total,
            "testCorrect": self.test_correct,
            "score": self.score,
            "accepted": self.accepted,
        }


def build_response_mask(width: int, height: int, votes: list[Vote]) -> GrayMask:
    """Per-pixel positive-vote fraction; pixels no vote covers stay 0."""
    positive = np.zeros((height, width), dtype=np.float64)
    total = np.zeros((height, width), dtype=np.float64)
    for vote in votes:
        if not vote.rect.fits_inside(width, height):
            raise ValueError(f"vote rect {vote.rect} outside {width}x{height}")
        total[vote.rect.slices] += 1.0
        if vote.answer:
            positive[vote.rect.slices] += 1.0
    out = np.divide(positive, total, out=np.zeros_like(positive), where=total > 0)
    return GrayMask(out)


def validity_score(
    worker_id: str,
    answers: list[tuple[str, bool]],
    truth: dict[str, bool],
    valid_threshold: float = 0.9,
) -> ValidityReport:
    """Score a worker's test answers against known labels.

    Acceptance is score >= valid_threshold; a worker with no test questions
    (gating disabled) is accepted with score 1.0.
    """
    if not answers:
        return ValidityReport(worker_id, 0, 0, 1.0, True)
    correct = 0
    for task_id, answer in answers:
        if task_id not in truth:
            raise KeyError(f"no ground truth for test task {task_id!r}")
        if truth[task_id] == answer:
            correct += 1
    score = correct / len(answers)
    return ValidityReport(worker_id, len(answers), correct, score, score >= valid_threshold)


def consensus_score(answers: list[bool]) -> float:
    """Agreement strength: |sum of +/-1 mapped answers| / N, in [0, 1]."""
    if not answers:
        raise ValueError("consensus of an empty answer list is undefined")
    total = sum(1 if a else -1 for a in answers)
    return abs(total) / len(answers)


def merge_masks(prev: GrayMask, response: GrayMask, blur_kernel: int) -> GrayMask:
    """Fold a round's response into the running mask.

    The blurred response is averaged into pixels the running mask has not
    touched yet (prev == 0) and multiplied elsewhere, so later rounds can only
    carve down regions that earlier rounds endorsed.
    """
    if (prev.width, prev.height) != (response.width, response.height):
        raise ValueError(
            f"mask dims differ: {prev.width}x{prev.height} vs {response.width}x{response.height}"
        )
    blurred = gaussian_blur(response, blur_kernel).values
    p = prev.values
    merged = np.where(p == 0.0, (p + blurred) / 2.0, p * blurred)
    return GrayMask(np.clip(merged, 0.0, 1.0))
