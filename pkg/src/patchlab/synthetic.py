"""Seeded synthetic fixtures: images, ground-truth masks, saliency, test pools.

Images are single-channel 256x256 scenes with one bright object (rectangle or
ellipse) over a dark noisy background. The object's binary mask doubles as
ground truth for simulated workers and, resampled to the provider scales, as
an idealized precomputed saliency map, which lets end-to-end runs isolate the
crowd protocol from saliency-model error.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng
from .raster import GrayMask, RasterImage, Rect, coverage_fraction, resize_bilinear, write_mask

IMAGE_SIZE = 256


@dataclass(frozen=True)
class SyntheticSample:
    image_id: str
    label: str
    image: RasterImage
    gt_mask: GrayMask
    object_rect: Rect
    shape: str


def make_sample(seed: int, index: int, *, size: int = IMAGE_SIZE) -> SyntheticSample:
    """One synthetic scene; deterministic in (seed, index)."""
    g = rng.stream(seed, "image", index)
    shape = "rect" if g.integers(2) == 0 else "ellipse"
    w = int(g.integers(60, 181))
    h = int(g.integers(60, 181))
    x0 = int(g.integers(8, size - w - 7))
    y0 = int(g.integers(8, size - h - 7))
    obj = Rect(x0, y0, w, h)

    yy, xx = np.mgrid[0:size, 0:size]
    if shape == "rect":
        inside = (xx >= x0) & (xx < x0 + w) & (yy >= y0) & (yy < y0 + h)
    else:
        cx = x0 + w / 2.0
        cy = y0 + h / 2.0
        inside = (((xx + 0.5 - cx) / (w / 2.0)) ** 2 + ((yy + 0.5 - cy) / (h / 2.0)) ** 2) <= 1.0
    gt = GrayMask(inside.astype(np.float64))

    background = g.integers(0, 41, size=(size, size))
    texture = g.integers(0, 56, size=(size, size))
    pixels = np.where(inside, 190 + texture, background).astype(np.uint8)
    image = RasterImage(pixels[:, :, np.newaxis])
    return SyntheticSample(
        image_id=f"img-{index:03d}",
        label="shape",
        image=image,
        gt_mask=gt,
        object_rect=obj,
        shape=shape,
    )


def ideal_saliency_files(gt_mask: GrayMask, scales: tuple[int, ...]) -> dict[int, GrayMask]:
    return {scale: resize_bilinear(gt_mask, scale, scale) for scale in scales}


def _corner_rect(obj: Rect, size: int, side: int = 32) -> Rect:
    """A background square well clear of the object; tries all four corners."""
    xs = [0, size - side]
    ys = [0, size - side]
    for cy in ys:
        for cx in xs:
            rect = Rect(cx, cy, side, side)
            if (
                rect.x + side <= obj.x
                or rect.x >= obj.x + obj.w
                or rect.y + side <= obj.y
                or rect.y >= obj.y + obj.h
            ):
                return rect
    raise ValueError("object leaves no free corner for a negative test patch")


def _inner_rect(sample: SyntheticSample) -> Rect:
    obj = sample.object_rect
    if sample.shape == "rect":
        side = max(1, min(obj.w, obj.h, 96))
    else:
        a = obj.w / 2.0
        b = obj.h / 2.0
        side = max(1, int(0.9 * 2.0 * a * b / np.sqrt(a * a + b * b)))
        side = min(side, 96)
    cx = obj.x + obj.w // 2
    cy = obj.y + obj.h // 2
    return Rect(cx - side // 2, cy - side // 2, side, side)


def build_test_pool(samples: list[SyntheticSample], count: int, seed: int) -> list[dict]:
    """Known-answer questions at coverage extremes (fully inside / fully outside)."""
    g = rng.stream(seed, "test-pool")
    questions = []
    for i in range(count):
        sample = samples[int(g.integers(len(samples)))]
        positive = i % 2 == 0
        rect = _inner_rect(sample) if positive else _corner_rect(sample.object_rect, IMAGE_SIZE)
        coverage = coverage_fraction(sample.gt_mask, rect, 0.5)
        questions.append(
            {
                "imageId": sample.image_id,
                "rect": rect.to_json(),
                "answer": bool(coverage >= 0.3),
                "label": sample.label,
            }
        )
    return questions


def build_dataset(
    root,
    *,
    count: int,
    seed: int,
    pool_size: int = 24,
    scales: tuple[int, ...] = (256, 512),
) -> list[SyntheticSample]:
    """Write images, ground truth, ideal saliency, and a test pool under root."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "gt").mkdir(parents=True, exist_ok=True)
    (root / "saliency").mkdir(parents=True, exist_ok=True)
    samples = [make_sample(seed, i) for i in range(count)]
    for sample in samples:
        _write_pgm_image(sample.image, root / "images" / f"{sample.image_id}.pgm")
        write_mask(sample.gt_mask, root / "gt" / f"{sample.image_id}.pgm")
        for scale, mask in ideal_saliency_files(sample.gt_mask, scales).items():
            write_mask(mask, root / "saliency" / f"{sample.image_id}.{scale}.pgm")
    pool = build_test_pool(samples, pool_size, seed)
    (root / "test-pool.json").write_text(json.dumps({"questions": pool}, indent=2))
    return samples


def _write_pgm_image(image: RasterImage, path: Path) -> None:
    if image.pixels.shape[2] != 1:
        raise ValueError("PGM fixture images must be single-channel")
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    path.write_bytes(header + image.pixels[:, :, 0].tobytes())


def write_scenario(
    path,
    *,
    data_dir: str,
    samples: list[SyntheticSample],
    workers: list[dict],
    seed: int,
    defaults: dict | None = None,
    assignment_pages: int = 20,
) -> dict:
    scenario = {
        "seed": seed,
        "rng": "philox4x64",
        "dataDir": data_dir,
        "assignmentPages": assignment_pages,
        "defaults": defaults or {},
        "images": [
            {
                "imageId": s.image_id,
                "classLabel": s.label,
                "gtMask": f"{data_dir}/gt/{s.image_id}.pgm",
            }
            for s in samples
        ],
        "workers": workers,
    }
    Path(path).write_text(json.dumps(scenario, indent=2))
    return scenario


def pool_from_mask(
    image_id: str,
    gt_mask: GrayMask,
    label: str,
    count: int,
    seed: int,
    *,
    max_tries: int = 20_000,
) -> list[dict]:
    """Sample unambiguous test questions from an arbitrary ground-truth mask.

    Rects are kept only at coverage extremes (>= 0.6 or exactly 0) so honest
    workers of any reasonable perception threshold answer them correctly, and
    positives/negatives stay balanced within one.
    """
    g = rng.stream(seed, "extract-pool", image_id)
    width, height = gt_mask.width, gt_mask.height
    questions: list[dict] = []
    positives = 0
    tries = 0
    while len(questions) < count and tries < max_tries:
        tries += 1
        side = int(g.integers(32, 97))
        side = min(side, width, height)
        x = int(g.integers(0, width - side + 1))
        y = int(g.integers(0, height - side + 1))
        rect = Rect(x, y, side, side)
        coverage = coverage_fraction(gt_mask, rect, 0.5)
        if coverage >= 0.6:
            answer = True
        elif coverage == 0.0:
            answer = False
        else:
            continue
        negatives = len(questions) - positives
        if answer and positives - negatives >= 1:
            continue
        if not answer and negatives - positives >= 1:
            continue
        questions.append(
            {"imageId": image_id, "rect": rect.to_json(), "answer": answer, "label": label}
        )
        positives += int(answer)
    if len(questions) < count:
        raise ValueError(
            f"could only sample {len(questions)}/{count} unambiguous test questions; "
            "the ground-truth mask may be too fragmented"
        )
    return questions


def honest_workers(count: int) -> list[dict]:
    return [
        {"workerId": f"w{i:02d}", "perceptionThreshold": 0.3, "flipProb": 0.0, "malicious": False}
        for i in range(count)
    ]
