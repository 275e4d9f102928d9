"""Crowd-task engine: queueing, leasing, worker assignments, and replay.

The engine owns a data directory and an append-only event log recording every
external input (job creation, page issuance, page submission, lease expiry,
assignment closure, polygon annotations). All derived state, including the
masks themselves, is a deterministic function of that log, so constructing an
engine over an existing directory replays the log and reconstructs the exact
in-memory state and byte-identical artifacts.

Worker assignments follow the crowdsourcing protocol: each assignment spans a
fixed number of six-question pages, with exactly `testQuestionsPerWorker`
known-answer test questions interleaved at seeded-random slots. Validity is
scored when the assignment closes; accepted assignments commit their votes,
rejected ones push every real task back onto the queue for other workers.
"""
from __future__ import annotations

import json
import time
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image as PilImage

from . import rng
from .aggregation import TaskKind, ValidityReport, consensus_score, validity_score
from .errors import (
    DegeneratePolygonError,
    DuplicateSubmissionError,
    LeaseExpiredError,
    QuotaNotMetError,
    SubmissionMismatchError,
    UnknownEntityError,
    WrongStateError,
)
from .metrics import BALANCE_WEIGHT, consensus_histogram, per_patch_time, time_summary
from .orchestrator import (
    Job,
    JobConfig,
    JobDir,
    JobState,
    PatchTask,
    advance,
    can_advance,
    create_job as make_job,
)
from .raster import GrayMask, RasterImage, Rect, load_image

PAGE_SIZE = 6


class Recorder:
    """Shared on/off switch for event appends; disabled while replaying."""

    def __init__(self) -> None:
        self.enabled = True


class EventLog:
    def __init__(self, path: Path):
        self.path = Path(path)
        self.next_seq = 0

    def append(self, event: dict) -> dict:
        event = {"seq": self.next_seq, **event}
        self.next_seq += 1
        with open(self.path, "a") as fh:
            fh.write(json.dumps(event, separators=(",", ":")) + "\n")
        return event

    def read_all(self) -> list[dict]:
        if not self.path.exists():
            return []
        events = []
        with open(self.path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    events.append(json.loads(line))
        return events


@dataclass(frozen=True)
class TestQuestion:
    index: int
    image_id: str
    rect: Rect
    answer: bool
    label: str

    @property
    def task_id(self) -> str:
        return f"test:{self.index}"


@dataclass
class TaskRecord:
    task: PatchTask
    status: str = "pending"  # pending | leased | held | accepted
    leased_to: str | None = None
    lease_token: str | None = None
    answer: bool | None = None
    answered_by: str | None = None
    per_task_ms: float | None = None
    redeploys: int = 0


@dataclass
class Assignment:
    index: int
    plan: list[bool]
    test_order: list[int]
    cursor: int = 0
    tests_issued: list[str] = field(default_factory=list)
    pages_issued: int = 0
    pages_answered: int = 0
    open_token: str | None = None
    last_label: str | None = None
    real_answers: list[tuple[str, bool, float]] = field(default_factory=list)
    test_answers: list[tuple[str, bool]] = field(default_factory=list)


@dataclass
class WorkerState:
    worker_id: str
    next_index: int = 0
    current: Assignment | None = None
    questions_seen: set[str] = field(default_factory=set)
    assignments_done: int = 0
    accepted: int = 0
    rejected: int = 0
    last_validity: ValidityReport | None = None


@dataclass
class Page:
    token: str
    worker_id: str
    assignment_index: int
    task_ids: list[str]
    test_task_ids: list[str]
    job_id: str | None
    label: str
    issued_at_ms: int
    forced: bool = False
    answered: bool = False
    expired: bool = False


class Engine:
    def __init__(
        self,
        data_dir,
        *,
        defaults: JobConfig | None = None,
        seed: int = 0,
        assignment_pages: int = 20,
        lease_ttl_ms: int = 120_000,
        clock=time.time,
    ):
        self.data_dir = Path(data_dir)
        (self.data_dir / "images").mkdir(parents=True, exist_ok=True)
        (self.data_dir / "jobs").mkdir(parents=True, exist_ok=True)
        self.defaults = defaults if defaults is not None else JobConfig()
        self.seed = int(seed)
        self.assignment_pages = int(assignment_pages)
        self.lease_ttl_ms = int(lease_ttl_ms)
        self.clock = clock
        # settings persist with the data so a later process (report, crash
        # recovery) replays with the same assignment plans and thresholds
        settings_path = self.data_dir / "engine.json"
        if settings_path.exists():
            stored = json.loads(settings_path.read_text())
            self.defaults = JobConfig.from_json(stored["defaults"])
            self.seed = int(stored["seed"])
            self.assignment_pages = int(stored["assignmentPages"])
            self.lease_ttl_ms = int(stored["leaseTtlMs"])
        slots = self.assignment_pages * PAGE_SIZE
        if self.defaults.test_questions_per_worker > slots:
            raise ValueError(
                f"testQuestionsPerWorker {self.defaults.test_questions_per_worker} "
                f"exceeds assignment capacity {slots}"
            )
        if not settings_path.exists():
            settings_path.write_text(
                json.dumps(
                    {
                        "defaults": self.defaults.to_json(),
                        "seed": self.seed,
                        "assignmentPages": self.assignment_pages,
                        "leaseTtlMs": self.lease_ttl_ms,
                    },
                    indent=2,
                )
            )

        self.recorder = Recorder()
        self.log = EventLog(self.data_dir / "events.jsonl")
        self.test_pool: list[TestQuestion] = self._load_test_pool()
        self._truth = {q.task_id: q.answer for q in self.test_pool}

        self.jobs: dict[str, Job] = {}
        self.records: dict[str, TaskRecord] = {}
        self.queue: list[str] = []
        self.workers: dict[str, WorkerState] = {}
        self.pages: dict[str, Page] = {}
        self.polygons: list[dict] = []
        self._images: dict[str, RasterImage] = {}
        self._job_validity: dict[str, list[bool]] = defaultdict(list)
        self._page_counter = 0
        self._job_counter = 0
        self._replay()

    # ---------------------------------------------------------------- setup

    def _load_test_pool(self) -> list[TestQuestion]:
        path = self.data_dir / "test-pool.json"
        if not path.exists():
            return []
        payload = json.loads(path.read_text())
        pool = []
        for i, q in enumerate(payload.get("questions", [])):
            pool.append(
                TestQuestion(
                    index=i,
                    image_id=q["imageId"],
                    rect=Rect.from_json(q["rect"]),
                    answer=bool(q["answer"]),
                    label=q.get("label", ""),
                )
            )
        return pool

    def register_image(self, image_id: str, image: RasterImage) -> Path:
        """Store an image under the data directory so jobs can reference it."""
        path = self.data_dir / "images" / f"{image_id}.png"
        pixels = image.pixels
        if pixels.shape[2] == 1:
            PilImage.fromarray(pixels[:, :, 0], mode="L").save(path)
        else:
            PilImage.fromarray(pixels, mode="RGB").save(path)
        self._images[image_id] = image
        return path

    def _image(self, image_id: str) -> RasterImage:
        if image_id in self._images:
            return self._images[image_id]
        base = self.data_dir / "images"
        for candidate in (base / f"{image_id}.png", base / f"{image_id}.pgm", base / image_id):
            if candidate.is_file():
                image = load_image(candidate)
                self._images[image_id] = image
                return image
        raise UnknownEntityError(f"image {image_id!r} not found under {base}")

    def _now_ms(self) -> int:
        return int(self.clock() * 1000)

    def _emit(self, event_type: str, **fields) -> None:
        if self.recorder.enabled:
            self.log.append({"type": event_type, **fields})

    def _job_store(self, job_id: str) -> JobDir:
        return JobDir(self.data_dir / "jobs", job_id, recorder=self.recorder)

    # ----------------------------------------------------------------- jobs

    def create_job(
        self,
        image_id: str,
        class_label: str,
        config: dict | JobConfig | None = None,
        job_id: str | None = None,
    ) -> str:
        if isinstance(config, JobConfig):
            cfg = config
        else:
            cfg = self.defaults.merged_with(config)
        self._image(image_id)  # decodability check before anything persists
        if job_id is None:
            job_id = f"job-{self._job_counter:04d}"
        if job_id in self.jobs:
            raise WrongStateError(f"job id {job_id!r} already exists")
        now_ms = self._now_ms()
        self._emit(
            "job_created",
            jobId=job_id,
            imageId=image_id,
            classLabel=class_label,
            config=cfg.to_json(),
            createdAtMs=now_ms,
        )
        self._create_job_core(job_id, image_id, class_label, cfg, now_ms)
        return job_id

    def _resolve_config(self, cfg: JobConfig) -> JobConfig:
        sal = cfg.saliency
        if sal.mode == "precomputed" and sal.precomputed_dir is not None:
            directory = Path(sal.precomputed_dir)
            if not directory.is_absolute():
                directory = self.data_dir / directory
                return replace(cfg, saliency=replace(sal, precomputed_dir=str(directory)))
        return cfg

    def _create_job_core(
        self, job_id: str, image_id: str, class_label: str, cfg: JobConfig, created_at_ms: int
    ) -> None:
        image = self._image(image_id)
        job = make_job(
            job_id, image_id, class_label, self._resolve_config(cfg), image, created_at_ms
        )
        self.jobs[job_id] = job
        n = self._numeric_suffix(job_id, "job-")
        if n is not None:
            self._job_counter = max(self._job_counter, n + 1)
        store = self._job_store(job_id)
        store.write_descriptor(job)
        self._auto_advance(job)

    @staticmethod
    def _numeric_suffix(value: str, prefix: str) -> int | None:
        if value.startswith(prefix) and value[len(prefix) :].isdigit():
            return int(value[len(prefix) :])
        return None

    def job(self, job_id: str) -> Job:
        if job_id not in self.jobs:
            raise UnknownEntityError(f"unknown job {job_id!r}")
        return self.jobs[job_id]

    def job_ids(self) -> list[str]:
        return sorted(self.jobs)

    def job_status(self, job_id: str) -> dict:
        job = self.job(job_id)
        return {"state": job.state.value, "iteration": job.iteration, "gridSize": job.grid_size}

    def current_mask(self, job_id: str) -> GrayMask:
        job = self.job(job_id)
        if job.final_mask is not None:
            return job.final_mask
        if job.state == JobState.PATCH_ROUND:
            return job.prev_mask
        if job.saliency_map is not None:
            return job.saliency_map
        raise WrongStateError(f"job {job_id} has no mask yet (state {job.state.value})")

    def _auto_advance(self, job: Job) -> None:
        store = self._job_store(job.job_id)
        while not job.terminal:
            answers = {}
            for tid in job.pending:
                record = self.records.get(tid)
                if record is not None and record.status == "accepted":
                    answers[tid] = (record.answered_by, record.answer)
            if not can_advance(job, answers):
                break
            new_tasks = advance(job, answers, store)
            self._register_tasks(new_tasks)

    def _register_tasks(self, tasks: list[PatchTask]) -> None:
        for task in tasks:
            if task.task_id in self.records:
                raise WrongStateError(f"duplicate task id {task.task_id}")
            self.records[task.task_id] = TaskRecord(task=task)
            self.queue.append(task.task_id)

    # ---------------------------------------------------------- page issuing

    def _worker_state(self, worker_id: str) -> WorkerState:
        if not worker_id or not worker_id.strip():
            raise UnknownEntityError("worker id must be a non-empty string")
        if worker_id not in self.workers:
            self.workers[worker_id] = WorkerState(worker_id=worker_id)
        return self.workers[worker_id]

    def _build_assignment(self, worker_id: str, index: int) -> Assignment:
        k = self.defaults.test_questions_per_worker
        if k > 0 and len(self.test_pool) < k:
            raise WrongStateError(
                f"test pool has {len(self.test_pool)} questions, need {k} per assignment"
            )
        slots = self.assignment_pages * PAGE_SIZE
        plan = [False] * slots
        if k > 0:
            g = rng.stream(self.seed, "plan", worker_id, index)
            for position in g.choice(slots, size=k, replace=False):
                plan[int(position)] = True
        order_gen = rng.stream(self.seed, "tests", worker_id, index)
        test_order = [int(i) for i in order_gen.permutation(len(self.test_pool))]
        return Assignment(index=index, plan=plan, test_order=test_order)

    def _first_eligible(self, worker: WorkerState) -> TaskRecord | None:
        for tid in self.queue:
            record = self.records[tid]
            if record.status == "pending" and record.task.question_key not in worker.questions_seen:
                return record
        return None

    def _next_eligible_in_job(
        self,
        worker: WorkerState,
        job_id: str,
        picked_questions: set[str],
        picked_ids: list[str],
    ) -> TaskRecord | None:
        for tid in self.queue:
            record = self.records[tid]
            if record.status != "pending" or record.task.job_id != job_id:
                continue
            if tid in picked_ids:
                continue
            question = record.task.question_key
            if question in worker.questions_seen or question in picked_questions:
                continue
            return record
        return None

    def _pick_test(self, assignment: Assignment, label: str, picked_ids: list[str]) -> str | None:
        def scan(require_label: bool) -> str | None:
            for pool_index in assignment.test_order:
                question = self.test_pool[pool_index]
                tid = question.task_id
                if tid in assignment.tests_issued or tid in picked_ids:
                    continue
                if require_label and question.label != label:
                    continue
                return tid
            return None

        return scan(True) or scan(False)

    def _pick_plan_tasks(self, worker: WorkerState, assignment: Assignment):
        """Walk the assignment plan from the cursor, filling up to one page."""
        first = self._first_eligible(worker)
        if first is None:
            return [], [], None, 0
        job = self.jobs[first.task.job_id]
        k = self.defaults.test_questions_per_worker
        picked: list[str] = []
        picked_tests: list[str] = []
        picked_questions: set[str] = set()
        consumed = 0
        while len(picked) < PAGE_SIZE and assignment.cursor + consumed < len(assignment.plan):
            wants_test = assignment.plan[assignment.cursor + consumed]
            if wants_test and len(assignment.tests_issued) + len(picked_tests) < k:
                tid = self._pick_test(assignment, job.class_label, picked)
                if tid is not None:
                    picked.append(tid)
                    picked_tests.append(tid)
                    consumed += 1
                    continue
            record = self._next_eligible_in_job(worker, job.job_id, picked_questions, picked)
            if record is None:
                break
            picked.append(record.task.task_id)
            picked_questions.add(record.task.question_key)
            consumed += 1
        return picked, picked_tests, job, consumed

    def _forced_test_ids(self, assignment: Assignment) -> list[str]:
        k = self.defaults.test_questions_per_worker
        label = assignment.last_label or (self.test_pool[0].label if self.test_pool else "")
        picked: list[str] = []
        while len(picked) < PAGE_SIZE and len(assignment.tests_issued) + len(picked) < k:
            tid = self._pick_test(assignment, label, picked)
            if tid is None:
                break
            picked.append(tid)
        return picked

    def _any_outstanding_lease(self) -> bool:
        return any(not p.answered and not p.expired for p in self.pages.values())

    def next_page(self, worker_id: str) -> Page | None:
        now_ms = self._now_ms()
        self._sweep_leases(now_ms)
        worker = self._worker_state(worker_id)
        if worker.current is not None and worker.current.open_token is not None:
            return self.pages[worker.current.open_token]

        if worker.current is None:
            if self._first_eligible(worker) is None:
                return None
            worker.current = self._build_assignment(worker_id, worker.next_index)
            worker.next_index += 1
        assignment = worker.current
        k = self.defaults.test_questions_per_worker

        if assignment.pages_issued >= self.assignment_pages:
            # page cap reached; only test top-off pages may still go out
            test_ids = self._forced_test_ids(assignment)
            if not test_ids:
                report = self._close_assignment(worker, "page-cap", emit=True)
                del report
                return None
            return self._issue_page(worker, assignment, test_ids, test_ids, None, 0, True)

        picked, picked_tests, job, consumed = self._pick_plan_tasks(worker, assignment)
        if picked:
            return self._issue_page(
                worker, assignment, picked, picked_tests, job, consumed, False
            )

        # no real question available to this worker right now
        if len(assignment.tests_issued) < k:
            test_ids = self._forced_test_ids(assignment)
            return self._issue_page(worker, assignment, test_ids, test_ids, None, 0, True)
        if self._any_outstanding_lease():
            return None  # in-flight pages may spawn follow-up rounds
        self._close_assignment(worker, "queue-exhausted", emit=True)
        return None

    def _issue_page(
        self,
        worker: WorkerState,
        assignment: Assignment,
        task_ids: list[str],
        test_ids: list[str],
        job: Job | None,
        consumed: int,
        forced: bool,
    ) -> Page:
        token = f"pg-{self._page_counter:06d}"
        self._page_counter += 1
        now_ms = self._now_ms()
        label = job.class_label if job is not None else (assignment.last_label or "")
        for tid in task_ids:
            if tid in test_ids:
                continue
            record = self.records[tid]
            record.status = "leased"
            record.leased_to = worker.worker_id
            record.lease_token = token
            worker.questions_seen.add(record.task.question_key)
        assignment.tests_issued.extend(test_ids)
        assignment.cursor += consumed
        assignment.pages_issued += 1
        assignment.open_token = token
        if job is not None:
            assignment.last_label = job.class_label
        page = Page(
            token=token,
            worker_id=worker.worker_id,
            assignment_index=assignment.index,
            task_ids=list(task_ids),
            test_task_ids=list(test_ids),
            job_id=job.job_id if job is not None else None,
            label=label,
            issued_at_ms=now_ms,
            forced=forced,
        )
        self.pages[token] = page
        self._emit(
            "page_issued",
            token=token,
            workerId=worker.worker_id,
            assignmentIndex=assignment.index,
            jobId=page.job_id,
            label=label,
            taskIds=page.task_ids,
            testTaskIds=page.test_task_ids,
            cursorAfter=assignment.cursor,
            forced=forced,
            issuedAtMs=now_ms,
        )
        return page

    def page_payload(self, page: Page) -> dict:
        tasks = []
        for tid in page.task_ids:
            if tid in page.test_task_ids:
                question = self.test_pool[int(tid.split(":", 1)[1])]
                tasks.append(
                    {
                        "taskId": tid,
                        "kind": TaskKind.PATCH_LABEL.value,  # tests are indistinguishable
                        "rect": question.rect.to_json(),
                        "imageId": question.image_id,
                        "jobId": None,
                        "imageUrl": f"/patches/{tid}.png",
                    }
                )
            else:
                task = self.records[tid].task
                payload = task.to_json()
                payload["imageUrl"] = f"/patches/{tid}.png"
                tasks.append(payload)
        return {
            "pageToken": page.token,
            "jobLabel": page.label,
            "tasks": tasks,
            "issuedAtMs": page.issued_at_ms,
        }

    # ------------------------------------------------------------ submission

    def submit_page(self, token: str, worker_id: str, answers: list[bool], elapsed_ms: float):
        now_ms = self._now_ms()
        self._sweep_leases(now_ms)
        result = self._apply_submission(token, worker_id, list(answers), float(elapsed_ms))
        self._emit(
            "page_submitted",
            token=token,
            workerId=worker_id,
            answers=[bool(a) for a in answers],
            elapsedMs=float(elapsed_ms),
            submittedAtMs=now_ms,
        )
        return result

    def _apply_submission(
        self, token: str, worker_id: str, answers: list[bool], elapsed_ms: float
    ) -> dict:
        if token not in self.pages:
            raise UnknownEntityError(f"unknown page token {token!r}")
        page = self.pages[token]
        if page.expired:
            raise LeaseExpiredError(f"page {token} lease expired")
        if page.answered:
            raise DuplicateSubmissionError(f"page {token} already answered")
        if page.worker_id != worker_id:
            raise SubmissionMismatchError(
                f"page {token} was issued to {page.worker_id!r}, not {worker_id!r}"
            )
        if len(answers) != len(page.task_ids):
            raise SubmissionMismatchError(
                f"expected {len(page.task_ids)} answers, got {len(answers)}"
            )
        if elapsed_ms <= 0:
            raise SubmissionMismatchError("elapsedMs must be positive")
        worker = self.workers[worker_id]
        assignment = worker.current
        if assignment is None or assignment.open_token != token:
            raise SubmissionMismatchError(f"page {token} is not the worker's open page")

        page.answered = True
        assignment.open_token = None
        assignment.pages_answered += 1
        per_ms = per_patch_time(elapsed_ms, len(page.task_ids))
        for tid, raw in zip(page.task_ids, answers):
            answer = bool(raw)
            if tid in page.test_task_ids:
                assignment.test_answers.append((tid, answer))
            else:
                record = self.records[tid]
                record.status = "held"
                record.lease_token = None
                record.answer = answer
                record.answered_by = worker_id
                record.per_task_ms = per_ms
                assignment.real_answers.append((tid, answer, per_ms))

        k = self.defaults.test_questions_per_worker
        if (
            assignment.pages_answered >= self.assignment_pages
            and len(assignment.test_answers) >= k
        ):
            report = self._close_assignment(worker, "page-cap", emit=False)
            status = "accepted" if report.accepted else "rejected"
            return {"status": status, "validity": report.to_json()}
        return {"status": "accepted", "validity": None}

    def _close_assignment(self, worker: WorkerState, reason: str, emit: bool) -> ValidityReport:
        assignment = worker.current
        if assignment is None:
            raise WrongStateError(f"worker {worker.worker_id} has no open assignment")
        if emit:
            self._emit(
                "assignment_closed",
                workerId=worker.worker_id,
                assignmentIndex=assignment.index,
                reason=reason,
            )
        report = validity_score(
            worker.worker_id,
            assignment.test_answers,
            self._truth,
            self.defaults.valid_threshold,
        )
        worker.last_validity = report
        worker.assignments_done += 1
        touched: list[str] = []
        if report.accepted:
            worker.accepted += 1
            for tid, _, _ in assignment.real_answers:
                record = self.records[tid]
                record.status = "accepted"
                if record.task.job_id not in touched:
                    touched.append(record.task.job_id)
        else:
            worker.rejected += 1
            for tid, _, _ in assignment.real_answers:
                record = self.records[tid]
                record.status = "pending"
                record.answer = None
                record.answered_by = None
                record.per_task_ms = None
                record.leased_to = None
                record.redeploys += 1
                self.queue.append(tid)
                if record.task.job_id not in touched:
                    touched.append(record.task.job_id)
        worker.current = None
        for job_id in touched:
            self._job_validity[job_id].append(report.accepted)
        if report.accepted:
            for job_id in touched:
                self._auto_advance(self.jobs[job_id])
        return report

    # ---------------------------------------------------------------- leases

    def _sweep_leases(self, now_ms: int) -> None:
        for token in list(self.pages):
            page = self.pages[token]
            if page.answered or page.expired:
                continue
            if now_ms - page.issued_at_ms >= self.lease_ttl_ms:
                self._emit("lease_expired", token=token, atMs=now_ms)
                self._expire_page(token)

    def _expire_page(self, token: str) -> None:
        page = self.pages[token]
        page.expired = True
        worker = self.workers.get(page.worker_id)
        if worker is not None and worker.current is not None:
            assignment = worker.current
            if assignment.open_token == token:
                assignment.open_token = None
                assignment.pages_issued -= 1
                for tid in page.test_task_ids:
                    assignment.tests_issued.remove(tid)
        for tid in page.task_ids:
            if tid in page.test_task_ids:
                continue
            record = self.records[tid]
            if record.status == "leased" and record.lease_token == token:
                record.status = "pending"
                record.leased_to = None
                record.lease_token = None
                self.queue.append(tid)

    # -------------------------------------------------------------- polygons

    def submit_polygon(
        self, image_id: str, worker_id: str, points: list[tuple[float, float]], elapsed_ms: float
    ) -> dict:
        image = self._image(image_id)
        if len(points) < 5:
            raise DegeneratePolygonError(f"polygon needs at least 5 points, got {len(points)}")
        for x, y in points:
            if not (0 <= x <= image.width and 0 <= y <= image.height):
                raise DegeneratePolygonError(f"point ({x}, {y}) outside image bounds")
        area = 0.0
        n = len(points)
        for i in range(n):
            x0, y0 = points[i]
            x1, y1 = points[(i + 1) % n]
            area += x0 * y1 - x1 * y0
        if abs(area) / 2.0 == 0.0:
            raise DegeneratePolygonError("polygon has zero area")
        record = {
            "imageId": image_id,
            "workerId": worker_id,
            "points": [[float(x), float(y)] for x, y in points],
            "elapsedMs": float(elapsed_ms),
        }
        self._emit("polygon", **record, atMs=self._now_ms())
        self.polygons.append(record)
        return {"accepted": True}

    # ----------------------------------------------------------- patch views

    def task_view(self, task_id: str) -> dict:
        """Everything the service needs to render a task's patch image."""
        if task_id.startswith("test:"):
            index = int(task_id.split(":", 1)[1])
            if not 0 <= index < len(self.test_pool):
                raise UnknownEntityError(f"unknown test task {task_id!r}")
            question = self.test_pool[index]
            return {
                "kind": TaskKind.TEST,
                "rect": question.rect,
                "image": self._image(question.image_id),
                "saliency": None,
            }
        if task_id not in self.records:
            raise UnknownEntityError(f"unknown task {task_id!r}")
        task = self.records[task_id].task
        job = self.jobs[task.job_id]
        saliency = job.saliency_map if task.kind == TaskKind.SALIENCY_VERIFY else None
        return {
            "kind": task.kind,
            "rect": task.rect,
            "image": job.image,
            "saliency": saliency,
        }

    # ---------------------------------------------------------------- report

    def job_report(self, job_id: str) -> dict:
        job = self.job(job_id)
        entries = []
        by_question: dict[str, list[TaskRecord]] = defaultdict(list)
        for record in self.records.values():
            task = record.task
            if (
                task.job_id == job_id
                and task.kind == TaskKind.PATCH_LABEL
                and record.status == "accepted"
            ):
                by_question[task.question_key].append(record)
        for question in sorted(by_question):
            group = by_question[question]
            answers = [r.answer for r in group]
            first = group[0].task
            entries.append(
                {
                    "round": first.round_index,
                    "patchIndex": first.patch_index,
                    "rect": first.rect.to_json(),
                    "votes": len(answers),
                    "positives": sum(answers),
                    "score": consensus_score(answers),
                }
            )
        scores = [e["score"] for e in entries]
        histogram = consensus_histogram(scores) if scores else None
        times = [
            record.per_task_ms
            for record in self.records.values()
            if record.task.job_id == job_id
            and record.status == "accepted"
            and record.per_task_ms is not None
        ]
        outcomes = self._job_validity.get(job_id, [])
        accepted = sum(outcomes)
        emitted = sum(1 for r in self.records.values() if r.task.job_id == job_id)
        done = sum(
            1
            for r in self.records.values()
            if r.task.job_id == job_id and r.status == "accepted"
        )
        redeployed = sum(
            r.redeploys for r in self.records.values() if r.task.job_id == job_id
        )
        if job.final_mask is not None:
            mask_path = f"jobs/{job_id}/attention.pgm"
        elif job.iteration > 0:
            mask_path = f"jobs/{job_id}/round-{job.iteration}.pgm"
        elif job.saliency_map is not None:
            mask_path = f"jobs/{job_id}/saliency.pgm"
        else:
            mask_path = None
        return {
            "jobId": job_id,
            "imageId": job.image_id,
            "classLabel": job.class_label,
            "state": job.state.value,
            "iteration": job.iteration,
            "gridSize": job.grid_size,
            "balanceWeight": BALANCE_WEIGHT,
            "consensus": {
                "entries": entries,
                "histogram": histogram,
                "mean": float(np.mean(scores)) if scores else None,
            },
            "timing": {"perTaskMs": time_summary(times), "tasksTimed": len(times)},
            "validity": {
                "assignmentsScored": len(outcomes),
                "accepted": int(accepted),
                "rejected": int(len(outcomes) - accepted),
                "acceptanceRate": (accepted / len(outcomes)) if outcomes else None,
            },
            "tasks": {
                "emitted": emitted,
                "accepted": done,
                "pendingStage": len(job.pending),
                "redeployed": int(redeployed),
            },
            "maskPath": mask_path,
        }

    def workers_report(self) -> list[dict]:
        out = []
        for worker_id in sorted(self.workers):
            worker = self.workers[worker_id]
            out.append(
                {
                    "workerId": worker_id,
                    "assignments": worker.assignments_done,
                    "accepted": worker.accepted,
                    "rejected": worker.rejected,
                    "lastValidity": (
                        worker.last_validity.to_json() if worker.last_validity else None
                    ),
                }
            )
        return out

    # ---------------------------------------------------------------- replay

    def _replay(self) -> None:
        events = self.log.read_all()
        if not events:
            return
        self.recorder.enabled = False
        try:
            for event in events:
                self._apply_event(event)
        finally:
            self.recorder.enabled = True
        self.log.next_seq = events[-1]["seq"] + 1

    def _apply_event(self, event: dict) -> None:
        kind = event["type"]
        if kind == "job_created":
            self._create_job_core(
                event["jobId"],
                event["imageId"],
                event["classLabel"],
                JobConfig.from_json(event["config"]),
                event["createdAtMs"],
            )
        elif kind == "page_issued":
            self._replay_page_issued(event)
        elif kind == "page_submitted":
            self._apply_submission(
                event["token"], event["workerId"], event["answers"], event["elapsedMs"]
            )
        elif kind == "lease_expired":
            self._expire_page(event["token"])
        elif kind == "assignment_closed":
            worker = self._worker_state(event["workerId"])
            self._close_assignment(worker, event["reason"], emit=False)
        elif kind == "polygon":
            self.polygons.append(
                {
                    "imageId": event["imageId"],
                    "workerId": event["workerId"],
                    "points": event["points"],
                    "elapsedMs": event["elapsedMs"],
                }
            )
        else:
            raise WrongStateError(f"unknown event type {kind!r} in log")

    def _replay_page_issued(self, event: dict) -> None:
        worker = self._worker_state(event["workerId"])
        index = event["assignmentIndex"]
        if worker.current is None or worker.current.index != index:
            worker.current = self._build_assignment(worker.worker_id, index)
            worker.next_index = max(worker.next_index, index + 1)
        assignment = worker.current
        token = event["token"]
        test_ids = list(event["testTaskIds"])
        for tid in event["taskIds"]:
            if tid in test_ids:
                continue
            record = self.records[tid]
            record.status = "leased"
            record.leased_to = worker.worker_id
            record.lease_token = token
            worker.questions_seen.add(record.task.question_key)
        assignment.tests_issued.extend(test_ids)
        assignment.cursor = event["cursorAfter"]
        assignment.pages_issued += 1
        assignment.open_token = token
        if event["jobId"] is not None:
            assignment.last_label = event["label"]
        self.pages[token] = Page(
            token=token,
            worker_id=worker.worker_id,
            assignment_index=index,
            task_ids=list(event["taskIds"]),
            test_task_ids=test_ids,
            job_id=event["jobId"],
            label=event["label"],
            issued_at_ms=event["issuedAtMs"],
            forced=event["forced"],
        )
        n = self._numeric_suffix(token, "pg-")
        if n is not None:
            self._page_counter = max(self._page_counter, n + 1)
