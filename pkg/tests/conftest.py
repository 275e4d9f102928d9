"""Shared builders for engine-level tests: a 64x64 fixture image with a
32x32 bright object, ideal precomputed saliency, and a small test pool."""

import json

import numpy as np
from PIL import Image as PilImage

from patchlab.orchestrator import JobConfig
from patchlab.raster import GrayMask, Rect, coverage_fraction, write_mask
from patchlab.saliency import SaliencyProviderConfig

SIDE = 64
OBJ = Rect(0, 0, 32, 32)

POOL_RECTS = [
    (Rect(0, 0, 16, 16), True),
    (Rect(40, 40, 16, 16), False),
    (Rect(8, 8, 16, 16), True),
    (Rect(48, 0, 16, 16), False),
    (Rect(16, 0, 16, 16), True),
    (Rect(32, 32, 16, 16), False),
    (Rect(0, 16, 16, 16), True),
    (Rect(40, 8, 16, 16), False),
]


class FakeClock:
    def __init__(self, start=1_000.0):
        self.t = start

    def __call__(self):
        return self.t

    def advance(self, seconds):
        self.t += seconds


def fixture_gt():
    gt = np.zeros((SIDE, SIDE), dtype=np.float64)
    gt[OBJ.slices] = 1.0
    return GrayMask(gt)


def make_data_dir(tmp_path, pool_size=8):
    data = tmp_path / "data"
    (data / "images").mkdir(parents=True)
    (data / "sal").mkdir()
    pixels = np.zeros((SIDE, SIDE), dtype=np.uint8)
    pixels[OBJ.slices] = 200
    PilImage.fromarray(pixels, mode="L").save(data / "images" / "img.png")
    write_mask(fixture_gt(), data / "sal" / f"img.{SIDE}.pgm")
    questions = [
        {"imageId": "img", "rect": r.to_json(), "answer": a, "label": "thing"}
        for r, a in POOL_RECTS[:pool_size]
    ]
    (data / "test-pool.json").write_text(json.dumps({"questions": questions}))
    return data


def make_config(**overrides):
    params = dict(
        init_size=32,
        min_size=20,
        min_group_size=512,
        votes_per_patch=1,
        test_questions_per_worker=0,
        saliency=SaliencyProviderConfig(
            mode="precomputed", scales=(SIDE,), precomputed_dir="sal"
        ),
    )
    params.update(overrides)
    return JobConfig(**params)


def honest(gt):
    def fn(task):
        if task["kind"] == "saliency-verify":
            return True
        rect = Rect.from_json(task["rect"])
        return coverage_fraction(gt, rect, 0.5) >= 0.3

    return fn


def make_scenario(tmp_path, workers, *, seed=0, count=1, k=10):
    """Synthetic one-or-more-image scenario with ideal precomputed saliency."""
    from patchlab.synthetic import build_dataset, write_scenario

    data = tmp_path / "data"
    samples = build_dataset(data, count=count, seed=seed, pool_size=24, scales=(256,))
    defaults = {
        "testQuestionsPerWorker": k,
        "saliency": {
            "mode": "precomputed",
            "scales": [256],
            "precomputedDir": "saliency",
        },
    }
    path = tmp_path / "scenario.json"
    write_scenario(
        path, data_dir="data", samples=samples, workers=workers, seed=seed, defaults=defaults
    )
    return path, samples
