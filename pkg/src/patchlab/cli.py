"""Command-line entry points.

  patchlab serve    --port N --data DIR [--config FILE]
  patchlab extract  --image F --label L --sim-workers K --seed S [--gt F]
  patchlab simulate --scenario FILE
  patchlab report   --job ID --data DIR

The PATCHLAB_DATA environment variable overrides the data directory from
either the config file or the command line.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
from PIL import Image as PilImage

from .orchestrator import JobConfig
from .raster import load_image, load_mask, mask_iou


def _fail(message: str) -> "NoReturn":  # noqa: F821
    print(f"error: {message}", file=sys.stderr)
    raise SystemExit(2)


def _data_dir(flag_value: str | None, default: str = "./patchlab-data") -> Path:
    env = os.environ.get("PATCHLAB_DATA")
    if env:
        return Path(env)
    return Path(flag_value) if flag_value else Path(default)


def _load_config(path: str | None) -> JobConfig:
    if not path:
        return JobConfig()
    try:
        return JobConfig.from_json(json.loads(Path(path).read_text()))
    except (OSError, ValueError, KeyError) as exc:
        _fail(f"bad config file {path}: {exc}")


def cmd_serve(args) -> int:
    import uvicorn

    from .engine import Engine
    from .service import create_app

    engine = Engine(_data_dir(args.data), defaults=_load_config(args.config), seed=args.seed)
    uvicorn.run(create_app(engine), host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_extract(args) -> int:
    from . import synthetic
    from .simworker import run_simulation

    image_path = Path(args.image)
    if not image_path.is_file():
        _fail(f"image {image_path} not found")
    image = load_image(image_path)
    image_id = image_path.stem
    config = _load_config(args.config)

    run_dir = _data_dir(args.data) / "runs" / f"{image_id}-s{args.seed}"
    if (run_dir / "events.jsonl").exists():
        _fail(f"{run_dir} already holds a run; choose a fresh --data dir or seed")
    (run_dir / "images").mkdir(parents=True, exist_ok=True)
    (run_dir / "gt").mkdir(parents=True, exist_ok=True)

    pixels = image.pixels
    if pixels.shape[2] == 1:
        PilImage.fromarray(pixels[:, :, 0], mode="L").save(run_dir / "images" / f"{image_id}.png")
    else:
        PilImage.fromarray(pixels, mode="RGB").save(run_dir / "images" / f"{image_id}.png")

    if args.gt:
        gt = load_mask(args.gt)
    else:
        # no ground truth supplied: simulated workers judge patches against a
        # binarized saliency map, so the run exercises the protocol end to end
        from .raster import GrayMask
        from .saliency import multiscale_saliency

        saliency = multiscale_saliency(image, config.saliency, image_id=image_id)
        gt = GrayMask((saliency.values > config.bin_threshold).astype(np.float64))
        print(f"note: no --gt given; using binarized saliency as worker ground truth")
    from .raster import write_mask

    write_mask(gt, run_dir / "gt" / f"{image_id}.pgm")

    pool: list[dict] = []
    if config.test_questions_per_worker > 0:
        try:
            pool = synthetic.pool_from_mask(
                image_id,
                gt,
                args.label,
                max(2 * config.test_questions_per_worker, config.test_questions_per_worker),
                args.seed,
            )
        except ValueError as exc:
            print(f"note: {exc}; disabling test questions for this run")
            config = JobConfig.from_json({**config.to_json(), "testQuestionsPerWorker": 0})
    (run_dir / "test-pool.json").write_text(json.dumps({"questions": pool}, indent=2))

    scenario_path = run_dir / "scenario.json"
    scenario_path.write_text(
        json.dumps(
            {
                "seed": args.seed,
                "rng": "philox4x64",
                "dataDir": ".",
                "defaults": config.to_json(),
                "images": [
                    {
                        "imageId": image_id,
                        "classLabel": args.label,
                        "gtMask": f"gt/{image_id}.pgm",
                    }
                ],
                "workers": synthetic.honest_workers(args.sim_workers),
            },
            indent=2,
        )
    )

    report = run_simulation(scenario_path)
    job_id = report.job_ids[0]
    state = report.states[job_id]
    mask = report.engine.current_mask(job_id)
    iou = mask_iou(mask, gt, config.bin_threshold)
    (run_dir / "report.json").write_text(json.dumps(report.to_json(), indent=2))
    print(f"job {job_id}: {state} after {report.pages_submitted} pages")
    print(f"final mask: {run_dir / 'jobs' / job_id / 'attention.pgm'}")
    print(f"IoU vs ground truth at threshold {config.bin_threshold}: {iou:.3f}")
    print(f"report: {run_dir / 'report.json'}")
    return 0


def cmd_simulate(args) -> int:
    from .simworker import run_simulation

    report = run_simulation(args.scenario)
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_json(), indent=2))
    summary = {
        "states": report.states,
        "polls": report.polls,
        "pagesSubmitted": report.pages_submitted,
        "workers": report.workers,
    }
    print(json.dumps(summary, indent=2))
    return 0


def cmd_report(args) -> int:
    from .engine import Engine

    engine = Engine(_data_dir(args.data))
    print(json.dumps(engine.job_report(args.job), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="patchlab")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP task API")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--data", default=None)
    serve.add_argument("--config", default=None)
    serve.add_argument("--seed", type=int, default=0)
    serve.set_defaults(func=cmd_serve)

    extract = sub.add_parser("extract", help="extract a mask for one image with simulated workers")
    extract.add_argument("--image", required=True)
    extract.add_argument("--label", required=True)
    extract.add_argument("--sim-workers", type=int, default=3, dest="sim_workers")
    extract.add_argument("--seed", type=int, default=0)
    extract.add_argument("--gt", default=None)
    extract.add_argument("--data", default=None)
    extract.add_argument("--config", default=None)
    extract.set_defaults(func=cmd_extract)

    simulate = sub.add_parser("simulate", help="run a scenario file to completion")
    simulate.add_argument("--scenario", required=True)
    simulate.add_argument("--out", default=None)
    simulate.set_defaults(func=cmd_simulate)

    report = sub.add_parser("report", help="print a job report from a data directory")
    report.add_argument("--job", required=True)
    report.add_argument("--data", default=None)
    report.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
