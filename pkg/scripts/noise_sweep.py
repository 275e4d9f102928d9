"""Sweep worker noise levels and report extraction quality at each one.

Runs the synthetic benchmark once per flip probability and prints a table of
mean IoU, success rate (IoU >= 0.5), and rejected assignment counts. Useful
for checking that redundancy (votes per patch) absorbs answer noise.

    python3 scripts/noise_sweep.py --count 20 --votes 5 --workers 16
"""
import argparse
import tempfile
from pathlib import Path

import numpy as np

from patchlab.errors import SimulationStalledError
from patchlab.raster import mask_iou
from patchlab.simworker import run_simulation
from patchlab.synthetic import build_dataset, write_scenario


def run_level(root: Path, *, count, seed, votes, n_workers, flip) -> dict:
    data = root / "data"
    samples = build_dataset(data, count=count, seed=seed, pool_size=24)
    defaults = {
        "votesPerPatch": votes,
        "testQuestionsPerWorker": 10,
        "saliency": {
            "mode": "precomputed",
            "scales": [256, 512],
            "precomputedDir": "saliency",
        },
    }
    workers = [
        {"workerId": f"w{i:02d}", "perceptionThreshold": 0.3, "flipProb": flip}
        for i in range(n_workers)
    ]
    scenario = root / "scenario.json"
    write_scenario(scenario, data_dir="data", samples=samples, workers=workers,
                   seed=seed, defaults=defaults)
    report = run_simulation(scenario)
    ious = [
        mask_iou(report.engine.current_mask(job_id), sample.gt_mask, 0.5)
        for job_id, sample in zip(report.job_ids, samples)
    ]
    return {
        "flip": flip,
        "mean_iou": float(np.mean(ious)),
        "successes": sum(iou >= 0.5 for iou in ious),
        "rejected": sum(w["rejected"] for w in report.workers),
        "polls": report.polls,
    }


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--count", type=int, default=20, help="images per level")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--votes", type=int, default=5)
    parser.add_argument("--workers", type=int, default=16)
    parser.add_argument("--levels", type=float, nargs="+", default=[0.0, 0.05, 0.1, 0.2])
    args = parser.parse_args()

    print(f"{'flip':>6} {'mean IoU':>9} {'success':>8} {'rejected':>9} {'polls':>7}")
    with tempfile.TemporaryDirectory() as tmp:
        for level, flip in enumerate(args.levels):
            try:
                row = run_level(
                    Path(tmp) / f"level-{level}",
                    count=args.count,
                    seed=args.seed,
                    votes=args.votes,
                    n_workers=args.workers,
                    flip=flip,
                )
            except SimulationStalledError:
                # every remaining worker has already seen the outstanding
                # questions; a larger --workers pool avoids this
                print(f"{flip:>6.2f} {'stalled':>9} {'-':>8} {'-':>9} {'-':>7}")
                continue
            success = f"{row['successes']}/{args.count}"
            print(f"{row['flip']:>6.2f} {row['mean_iou']:>9.4f} {success:>8} "
                  f"{row['rejected']:>9} {row['polls']:>7}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
