"""Generate a synthetic benchmark: images, ground truth, ideal saliency,
a test-question pool, and a scenario file ready for `patchlab simulate`.

    python3 scripts/make_scenario.py --out bench --count 50 --workers 3
"""
import argparse
import json
from pathlib import Path

from patchlab.synthetic import build_dataset, honest_workers, write_scenario


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True, help="output directory (created)")
    parser.add_argument("--count", type=int, default=50, help="number of images")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=3, help="simulated worker count")
    parser.add_argument("--flip-prob", type=float, default=0.0, help="per-answer flip probability")
    parser.add_argument("--votes", type=int, default=3, help="votes collected per patch")
    parser.add_argument("--tests", type=int, default=10, help="test questions per assignment")
    args = parser.parse_args()

    root = Path(args.out)
    if (root / "scenario.json").exists():
        parser.error(f"{root / 'scenario.json'} already exists")
    samples = build_dataset(root / "data", count=args.count, seed=args.seed, pool_size=24)
    workers = honest_workers(args.workers)
    for profile in workers:
        profile["flipProb"] = args.flip_prob
    defaults = {
        "votesPerPatch": args.votes,
        "testQuestionsPerWorker": args.tests,
        "saliency": {
            "mode": "precomputed",
            "scales": [256, 512],
            "precomputedDir": "saliency",
        },
    }
    write_scenario(
        root / "scenario.json",
        data_dir="data",
        samples=samples,
        workers=workers,
        seed=args.seed,
        defaults=defaults,
    )
    print(json.dumps({
        "scenario": str(root / "scenario.json"),
        "images": len(samples),
        "workers": len(workers),
        "flipProb": args.flip_prob,
    }, indent=2))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
