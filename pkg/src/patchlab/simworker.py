"""Simulated crowd workers.

Workers answer binary patch questions from a ground-truth object mask: the
base answer is whether the patch's ground-truth coverage clears the worker's
perception threshold, optionally flipped with probability epsilon; malicious
workers answer uniformly at random. Every answer is drawn from a counter-based
generator keyed by (scenario seed, worker id, task id), so a run is a pure
function of the scenario file regardless of page interleaving.

`run_simulation` drives the HTTP surface (in-process by default) round-robin
until every job reaches a terminal state, then bundles the reports.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng
from .engine import Engine
from .errors import SimulationStalledError
from .orchestrator import JobConfig
from .raster import GrayMask, Rect, coverage_fraction, load_mask

RNG_ALGORITHM = "philox4x64"
PAGE_ELAPSED_MS = 1000.0


@dataclass(frozen=True)
class WorkerProfile:
    worker_id: str
    perception_threshold: float = 0.3
    flip_prob: float = 0.0
    malicious: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.perception_threshold <= 1.0:
            raise ValueError(f"perceptionThreshold outside [0,1]: {self.perception_threshold}")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError(f"flipProb outside [0,1]: {self.flip_prob}")

    def to_json(self) -> dict:
        return {
            "workerId": self.worker_id,
            "perceptionThreshold": self.perception_threshold,
            "flipProb": self.flip_prob,
            "malicious": self.malicious,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "WorkerProfile":
        return cls(
            worker_id=obj["workerId"],
            perception_threshold=float(obj.get("perceptionThreshold", 0.3)),
            flip_prob=float(obj.get("flipProb", 0.0)),
            malicious=bool(obj.get("malicious", False)),
        )


def _noisy(base: bool, profile: WorkerProfile, generator: np.random.Generator) -> bool:
    if profile.malicious:
        return bool(generator.random() < 0.5)
    if profile.flip_prob > 0.0 and generator.random() < profile.flip_prob:
        return not base
    return base


def answer_patch(
    rect: Rect, gt_mask: GrayMask, profile: WorkerProfile, generator: np.random.Generator
) -> bool:
    """Binary patch answer from ground truth, with the profile's noise model."""
    base = coverage_fraction(gt_mask, rect, 0.5) >= profile.perception_threshold
    return _noisy(base, profile, generator)


def parse_pgm_mask(data: bytes) -> GrayMask:
    from .raster import _parse_pgm

    pixels = _parse_pgm(data)
    return GrayMask(pixels.astype(np.float64) / 255.0)


class SimWorkerClient:
    """One simulated worker driving the HTTP API through an httpx-style client."""

    def __init__(self, profile: WorkerProfile, client, seed: int, gt_masks: dict[str, GrayMask]):
        self.profile = profile
        self.client = client
        self.seed = seed
        self.gt_masks = gt_masks
        self.pages_submitted = 0

    def _gt(self, image_id: str) -> GrayMask:
        if image_id not in self.gt_masks:
            raise SimulationStalledError(f"no ground truth registered for image {image_id!r}")
        return self.gt_masks[image_id]

    def _answer_task(self, task: dict) -> bool:
        generator = rng.stream(self.seed, "worker", self.profile.worker_id, task["taskId"])
        rect = Rect.from_json(task["rect"])
        gt = self._gt(task["imageId"])
        if task["kind"] == "saliency-verify":
            response = self.client.get(f"/jobs/{task['jobId']}/mask")
            if response.status_code != 200:
                raise SimulationStalledError(
                    f"mask fetch for job {task['jobId']} failed: {response.status_code}"
                )
            saliency = parse_pgm_mask(response.content)
            gt_positive = gt.values > 0.5
            gt_count = int(gt_positive.sum())
            if gt_count == 0:
                base = not bool((saliency.values > 0.5).any())
            else:
                hits = int(((saliency.values > 0.5) & gt_positive).sum())
                base = (hits / gt_count) >= 0.5
            return _noisy(base, self.profile, generator)
        return answer_patch(rect, gt, self.profile, generator)

    def poll_once(self) -> bool:
        """Fetch and answer one page; False when no work was available."""
        wid = self.profile.worker_id
        response = self.client.get(f"/workers/{wid}/next-page")
        if response.status_code == 204:
            return False
        if response.status_code != 200:
            raise SimulationStalledError(f"next-page for {wid} failed: {response.status_code}")
        page = response.json()
        answers = [self._answer_task(task) for task in page["tasks"]]
        submit = self.client.post(
            f"/pages/{page['pageToken']}/answers",
            json={"workerId": wid, "answers": answers, "elapsedMs": PAGE_ELAPSED_MS},
        )
        if submit.status_code != 200:
            raise SimulationStalledError(
                f"submission of page {page['pageToken']} failed: "
                f"{submit.status_code} {submit.text}"
            )
        self.pages_submitted += 1
        return True


@dataclass
class SimulationReport:
    job_ids: list[str]
    states: dict[str, str]
    job_reports: dict[str, dict]
    workers: list[dict]
    polls: int
    pages_submitted: int
    engine: Engine = field(repr=False, default=None)

    def to_json(self) -> dict:
        return {
            "jobIds": self.job_ids,
            "states": self.states,
            "jobReports": self.job_reports,
            "workers": self.workers,
            "polls": self.polls,
            "pagesSubmitted": self.pages_submitted,
        }


def load_scenario(path) -> dict:
    path = Path(path)
    scenario = json.loads(path.read_text())
    if "seed" not in scenario or "images" not in scenario or "workers" not in scenario:
        raise ValueError(f"scenario {path} must define seed, images, and workers")
    algorithm = scenario.get("rng", RNG_ALGORITHM)
    if algorithm != RNG_ALGORITHM:
        raise ValueError(f"unsupported rng algorithm {algorithm!r}, expected {RNG_ALGORITHM!r}")
    scenario["_dir"] = path.parent
    return scenario


def _resolve(base: Path, value: str) -> Path:
    candidate = Path(value)
    return candidate if candidate.is_absolute() else base / candidate


def run_simulation(scenario_path, *, client_factory=None, max_polls: int = 500_000):
    """Run a scenario to completion; returns a SimulationReport.

    `client_factory` maps a FastAPI app to an httpx-style client; defaults to
    an in-process test client so simulations need no network.
    """
    scenario = load_scenario(scenario_path)
    base = scenario["_dir"]
    seed = int(scenario["seed"])
    data_dir = _resolve(base, scenario.get("dataDir", "data"))
    defaults = JobConfig.from_json(scenario.get("defaults", {}))
    engine = Engine(
        data_dir,
        defaults=defaults,
        seed=seed,
        assignment_pages=int(scenario.get("assignmentPages", 20)),
    )
    app = None
    if client_factory is None:
        from fastapi.testclient import TestClient

        from .service import create_app

        app = create_app(engine)
        client = TestClient(app)
    else:
        from .service import create_app

        app = create_app(engine)
        client = client_factory(app)

    gt_masks: dict[str, GrayMask] = {}
    job_ids: list[str] = []
    for entry in scenario["images"]:
        image_id = entry["imageId"]
        gt_masks[image_id] = load_mask(_resolve(base, entry["gtMask"]))
        response = client.post(
            "/jobs",
            json={
                "imageId": image_id,
                "classLabel": entry.get("classLabel", "object"),
                "config": entry.get("config"),
            },
        )
        if response.status_code != 200:
            raise SimulationStalledError(
                f"job creation for {image_id} failed: {response.status_code} {response.text}"
            )
        job_ids.append(response.json()["jobId"])

    workers = [
        SimWorkerClient(WorkerProfile.from_json(w), client, seed, gt_masks)
        for w in scenario["workers"]
    ]
    if not workers:
        raise ValueError("scenario defines no workers")

    polls = 0
    idle_passes = 0
    while True:
        states = {jid: engine.job_status(jid)["state"] for jid in job_ids}
        if all(state in ("Finalized", "TerminatedEarly") for state in states.values()):
            break
        progressed = False
        for worker in workers:
            polls += 1
            if polls > max_polls:
                raise SimulationStalledError(f"exceeded {max_polls} polls without completion")
            progressed = worker.poll_once() or progressed
        if progressed:
            idle_passes = 0
        else:
            idle_passes += 1
            # allow a couple of idle passes: a no-page poll can still close
            # an assignment and unlock work for the next pass
            if idle_passes >= 3:
                raise SimulationStalledError(
                    f"no worker can make progress; job states: {states}"
                )

    return SimulationReport(
        job_ids=job_ids,
        states={jid: engine.job_status(jid)["state"] for jid in job_ids},
        job_reports={jid: engine.job_report(jid) for jid in job_ids},
        workers=engine.workers_report(),
        polls=polls,
        pages_submitted=sum(w.pages_submitted for w in workers),
        engine=engine,
    )
