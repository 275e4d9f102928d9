import json

import numpy as np
import pytest
from conftest import make_scenario
from fastapi.testclient import TestClient

from patchlab import rng
from patchlab.engine import Engine
from patchlab.errors import SimulationStalledError
from patchlab.raster import GrayMask, Rect, mask_to_bytes
from patchlab.service import create_app
from patchlab.simworker import (
    PAGE_ELAPSED_MS,
    RNG_ALGORITHM,
    SimWorkerClient,
    WorkerProfile,
    answer_patch,
    load_scenario,
    parse_pgm_mask,
    run_simulation,
)
from patchlab.synthetic import honest_workers


def square_gt(side=64, obj=Rect(0, 0, 32, 32)):
    gt = np.zeros((side, side))
    gt[obj.slices] = 1.0
    return GrayMask(gt)


class TestWorkerProfile:
    def test_json_round_trip(self):
        profile = WorkerProfile("w1", perception_threshold=0.4, flip_prob=0.1, malicious=True)
        again = WorkerProfile.from_json(json.loads(json.dumps(profile.to_json())))
        assert again == profile

    def test_json_defaults(self):
        profile = WorkerProfile.from_json({"workerId": "w9"})
        assert profile == WorkerProfile("w9")
        assert profile.perception_threshold == 0.3
        assert profile.flip_prob == 0.0
        assert not profile.malicious

    @pytest.mark.parametrize(
        "bad",
        [
            {"perception_threshold": -0.1},
            {"perception_threshold": 1.1},
            {"flip_prob": -0.5},
            {"flip_prob": 2.0},
        ],
    )
    def test_validation(self, bad):
        with pytest.raises(ValueError):
            WorkerProfile("w1", **bad)


class TestAnswerPatch:
    def gen(self, task="t0"):
        return rng.stream(0, "worker", "w0", task)

    def test_honest_threshold(self):
        gt = square_gt()
        worker = WorkerProfile("w0")
        # half the rect overlaps the object: 0.5 >= 0.3
        assert answer_patch(Rect(16, 0, 32, 32), gt, worker, self.gen()) is True
        # 8x32 of a 32x32 rect: 0.25 < 0.3
        assert answer_patch(Rect(24, 0, 32, 32), gt, worker, self.gen()) is False
        assert answer_patch(Rect(32, 32, 16, 16), gt, worker, self.gen()) is False

    def test_flip_prob_one_always_flips(self):
        gt = square_gt()
        flipper = WorkerProfile("w0", flip_prob=1.0)
        assert answer_patch(Rect(0, 0, 32, 32), gt, flipper, self.gen()) is False
        assert answer_patch(Rect(32, 32, 16, 16), gt, flipper, self.gen()) is True

    def test_malicious_ignores_ground_truth(self):
        gt = square_gt()
        evil = WorkerProfile("w0", malicious=True)
        answers = {
            answer_patch(Rect(0, 0, 32, 32), gt, evil, self.gen(f"t{i}"))
            for i in range(32)
        }
        assert answers == {True, False}

    def test_determinism_keyed_by_task(self):
        gt = square_gt()
        evil = WorkerProfile("w0", malicious=True)
        first = [
            answer_patch(Rect(0, 0, 8, 8), gt, evil, self.gen(f"t{i}")) for i in range(16)
        ]
        second = [
            answer_patch(Rect(0, 0, 8, 8), gt, evil, self.gen(f"t{i}")) for i in range(16)
        ]
        assert first == second


class TestPgmParsing:
    def test_round_trip(self):
        mask = GrayMask(np.linspace(0, 1, 64).reshape(8, 8))
        again = parse_pgm_mask(mask_to_bytes(mask))
        assert again.values.shape == (8, 8)
        assert np.allclose(again.values, mask.values, atol=1 / 255)


class TestScenarioLoading:
    def write(self, tmp_path, payload):
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(payload))
        return path

    def test_missing_keys_rejected(self, tmp_path):
        path = self.write(tmp_path, {"seed": 0, "images": []})
        with pytest.raises(ValueError):
            load_scenario(path)

    def test_unknown_rng_rejected(self, tmp_path):
        path = self.write(
            tmp_path, {"seed": 0, "images": [], "workers": [], "rng": "mt19937"}
        )
        with pytest.raises(ValueError):
            load_scenario(path)

    def test_default_rng_accepted(self, tmp_path):
        path = self.write(tmp_path, {"seed": 3, "images": [], "workers": []})
        scenario = load_scenario(path)
        assert scenario["seed"] == 3
        assert scenario["_dir"] == tmp_path
        assert RNG_ALGORITHM == "philox4x64"


class TestPolling:
    def test_poll_once_false_when_no_work(self, tmp_path):
        data = tmp_path / "data"
        (data / "images").mkdir(parents=True)
        engine = Engine(data)
        client = TestClient(create_app(engine))
        worker = SimWorkerClient(WorkerProfile("w0"), client, 0, {})
        assert worker.poll_once() is False
        assert worker.pages_submitted == 0

    def test_missing_ground_truth_stalls(self, tmp_path):
        worker = SimWorkerClient(WorkerProfile("w0"), None, 0, {})
        with pytest.raises(SimulationStalledError):
            worker._gt("img-xyz")


class TestRunSimulation:
    def test_honest_run_finalizes(self, tmp_path):
        path, samples = make_scenario(tmp_path, honest_workers(3))
        report = run_simulation(path)
        assert report.job_ids == ["job-0000"]
        assert report.states == {"job-0000": "Finalized"}
        assert report.pages_submitted > 0
        assert report.polls >= report.pages_submitted
        job_report = report.job_reports["job-0000"]
        assert job_report["validity"]["rejected"] == 0
        assert all(w["rejected"] == 0 for w in report.workers)
        payload = report.to_json()
        assert set(payload) == {
            "jobIds",
            "states",
            "jobReports",
            "workers",
            "polls",
            "pagesSubmitted",
        }
        mask_file = tmp_path / "data" / "jobs" / "job-0000" / "attention.pgm"
        assert mask_file.exists()

    def test_run_is_deterministic(self, tmp_path):
        path_a, _ = make_scenario(tmp_path / "a", honest_workers(3))
        path_b, _ = make_scenario(tmp_path / "b", honest_workers(3))
        report_a = run_simulation(path_a)
        report_b = run_simulation(path_b)
        mask_a = (tmp_path / "a" / "data" / "jobs" / "job-0000" / "attention.pgm").read_bytes()
        mask_b = (tmp_path / "b" / "data" / "jobs" / "job-0000" / "attention.pgm").read_bytes()
        assert mask_a == mask_b
        assert report_a.to_json() == report_b.to_json()

    def test_always_wrong_worker_stalls(self, tmp_path):
        saboteur = [
            {"workerId": "bad", "perceptionThreshold": 0.3, "flipProb": 1.0, "malicious": False}
        ]
        path, _ = make_scenario(tmp_path, saboteur, k=2)
        with pytest.raises(SimulationStalledError):
            run_simulation(path)

    def test_no_workers_rejected(self, tmp_path):
        path, _ = make_scenario(tmp_path, [])
        with pytest.raises(ValueError):
            run_simulation(path)

    def test_page_elapsed_constant(self):
        assert PAGE_ELAPSED_MS == 1000.0
