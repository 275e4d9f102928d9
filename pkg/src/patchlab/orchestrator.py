"""Per-image job state machine.

A job walks Created -> SaliencyDone -> SaliencyVerify -> GroupVerify ->
PatchRound* -> Finalized, with two early exits: a crowd veto of the saliency
map skips clustering and grids the whole image, and all-negative group
verdicts terminate with the full saliency map. Each patch round grids the
current mask, collects votes, folds the soft-voted response in, and shrinks
the grid until it falls below the configured minimum.

State is advanced one transition at a time; every advance is a deterministic
function of the accepted votes, which is what makes event-log replay
reconstruct byte-identical masks.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

from .aggregation import TaskKind, Vote, build_response_mask, merge_masks
from .errors import QuotaNotMetError, WrongStateError
from .patching import filter_patches, overlap_grid
from .raster import GrayMask, RasterImage, Rect, round_half_up, write_mask
from .saliency import SaliencyProviderConfig, multiscale_saliency
from .segmentation import (
    OUTCOME_TERMINATE_WITH_FULL_MAP,
    PixelGroup,
    apply_group_verdicts,
    connected_components,
    filter_groups,
    largest_object_size,
    threshold_mask,
)


class JobState(str, Enum):
    CREATED = "Created"
    SALIENCY_DONE = "SaliencyDone"
    SALIENCY_VERIFY = "SaliencyVerify"
    GROUP_VERIFY = "GroupVerify"
    PATCH_ROUND = "PatchRound"
    FINALIZED = "Finalized"
    TERMINATED_EARLY = "TerminatedEarly"


TERMINAL_STATES = (JobState.FINALIZED, JobState.TERMINATED_EARLY)


@dataclass(frozen=True)
class JobConfig:
    init_size: int = 128
    min_size: int = 80
    shrink_ratio: float = 0.4
    coverage_threshold: float = 0.3
    min_group_size: int = 1024
    valid_threshold: float = 0.9
    votes_per_patch: int = 3
    votes_per_group: int = 1
    test_questions_per_worker: int = 10
    bin_threshold: float = 0.5
    connectivity: int = 4
    saliency: SaliencyProviderConfig = field(default_factory=SaliencyProviderConfig)

    def __post_init__(self) -> None:
        if self.min_size < 1 or self.init_size < self.min_size:
            raise ValueError(
                f"need initSize >= minSize >= 1, got {self.init_size}, {self.min_size}"
            )
        if not 0.0 < self.shrink_ratio < 1.0:
            raise ValueError(f"shrinkRatio must be in (0,1), got {self.shrink_ratio}")
        if not 0.0 <= self.coverage_threshold <= 1.0:
            raise ValueError(f"coverageThreshold outside [0,1]: {self.coverage_threshold}")
        if not 0.0 <= self.bin_threshold < 1.0:
            raise ValueError(f"binThreshold outside [0,1): {self.bin_threshold}")
        if not 0.0 < self.valid_threshold <= 1.0:
            raise ValueError(f"validThreshold outside (0,1]: {self.valid_threshold}")
        if self.min_group_size < 0:
            raise ValueError(f"minGroupSize must be >= 0, got {self.min_group_size}")
        if self.votes_per_patch < 1 or self.votes_per_group < 1:
            raise ValueError("votesPerPatch and votesPerGroup must be >= 1")
        if self.test_questions_per_worker < 0:
            raise ValueError("testQuestionsPerWorker must be >= 0")
        if self.connectivity not in (4, 8):
            raise ValueError(f"connectivity must be 4 or 8, got {self.connectivity}")

    def to_json(self) -> dict:
        return {
            "initSize": self.init_size,
            "minSize": self.min_size,
            "shrinkRatio": self.shrink_ratio,
            "coverageThreshold": self.coverage_threshold,
            "minGroupSize": self.min_group_size,
            "validThreshold": self.valid_threshold,
            "votesPerPatch": self.votes_per_patch,
            "votesPerGroup": self.votes_per_group,
            "testQuestionsPerWorker": self.test_questions_per_worker,
            "binThreshold": self.bin_threshold,
            "connectivity": self.connectivity,
            "saliency": self.saliency.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "JobConfig":
        base = cls()
        sal = (
            SaliencyProviderConfig.from_json(obj["saliency"])
            if "saliency" in obj
            else base.saliency
        )
        return cls(
            init_size=int(obj.get("initSize", base.init_size)),
            min_size=int(obj.get("minSize", base.min_size)),
            shrink_ratio=float(obj.get("shrinkRatio", base.shrink_ratio)),
            coverage_threshold=float(obj.get("coverageThreshold", base.coverage_threshold)),
            min_group_size=int(obj.get("minGroupSize", base.min_group_size)),
            valid_threshold=float(obj.get("validThreshold", base.valid_threshold)),
            votes_per_patch=int(obj.get("votesPerPatch", base.votes_per_patch)),
            votes_per_group=int(obj.get("votesPerGroup", base.votes_per_group)),
            test_questions_per_worker=int(
                obj.get("testQuestionsPerWorker", base.test_questions_per_worker)
            ),
            bin_threshold=float(obj.get("binThreshold", base.bin_threshold)),
            connectivity=int(obj.get("connectivity", base.connectivity)),
            saliency=sal,
        )

    def merged_with(self, overrides: dict | None) -> "JobConfig":
        if not overrides:
            return self
        return JobConfig.from_json({**self.to_json(), **overrides})


@dataclass(frozen=True)
class PatchTask:
    task_id: str
    job_id: str | None
    kind: TaskKind
    rect: Rect
    image_id: str
    label: str
    question_key: str
    round_index: int | None = None
    patch_index: int | None = None
    group_id: int | None = None
    truth: bool | None = None

    def to_json(self) -> dict:
        return {
            "taskId": self.task_id,
            "jobId": self.job_id,
            "kind": self.kind.value,
            "rect": self.rect.to_json(),
            "imageId": self.image_id,
            "label": self.label,
        }


@dataclass
class Job:
    job_id: str
    image_id: str
    class_label: str
    config: JobConfig
    image: RasterImage
    created_at_ms: int
    state: JobState = JobState.CREATED
    saliency_map: GrayMask | None = None
    groups: list[PixelGroup] = field(default_factory=list)
    prev_mask: GrayMask | None = None
    grid_size: int | None = None
    iteration: int = 0
    round_index: int = 0
    pending: list[str] = field(default_factory=list)
    pending_meta: dict[str, PatchTask] = field(default_factory=dict)
    final_mask: GrayMask | None = None

    @property
    def terminal(self) -> bool:
        return self.state in TERMINAL_STATES


class JobDir:
    """Job directory: snapshots, descriptor, and the per-job event projection."""

    def __init__(self, root: Path, job_id: str, recorder=None):
        self.path = Path(root) / job_id
        self.path.mkdir(parents=True, exist_ok=True)
        self._recorder = recorder

    def write_descriptor(self, job: Job) -> None:
        payload = {
            "jobId": job.job_id,
            "imageId": job.image_id,
            "classLabel": job.class_label,
            "config": job.config.to_json(),
            "state": job.state.value,
            "iteration": job.iteration,
            "gridSize": job.grid_size,
            "createdAtMs": job.created_at_ms,
        }
        (self.path / "job.json").write_text(json.dumps(payload, indent=2))

    def write_snapshot(self, name: str, mask: GrayMask) -> None:
        write_mask(mask, self.path / name)

    def append_event(self, event: dict) -> None:
        if self._recorder is not None and not self._recorder.enabled:
            return
        with open(self.path / "events.jsonl", "a") as fh:
            fh.write(json.dumps(event, separators=(",", ":")) + "\n")


def _emit_round(job: Job) -> list[PatchTask]:
    """Grid the current mask at the current grid size and emit one vote slot
    per (kept patch, vote index)."""
    cfg = job.config
    grid = overlap_grid(job.image.width, job.image.height, job.grid_size)
    kept = filter_patches(grid, job.prev_mask, cfg.coverage_threshold, cfg.bin_threshold)
    tasks = []
    for patch_index, rect in enumerate(kept):
        for slot in range(cfg.votes_per_patch):
            question = f"{job.job_id}:r{job.round_index}:p{patch_index}"
            tasks.append(
                PatchTask(
                    task_id=f"{question}:v{slot}",
                    job_id=job.job_id,
                    kind=TaskKind.PATCH_LABEL,
                    rect=rect,
                    image_id=job.image_id,
                    label=job.class_label,
                    question_key=question,
                    round_index=job.round_index,
                    patch_index=patch_index,
                )
            )
    job.round_index += 1
    return tasks


def _set_pending(job: Job, tasks: list[PatchTask]) -> None:
    job.pending = [t.task_id for t in tasks]
    job.pending_meta = {t.task_id: t for t in tasks}


def _finish(job: Job, state: JobState, mask: GrayMask, store: JobDir) -> None:
    job.state = state
    job.final_mask = mask
    _set_pending(job, [])
    store.write_snapshot("attention.pgm", mask)
    store.append_event({"type": "job_finished", "state": state.value, "iteration": job.iteration})
    store.write_descriptor(job)


def can_advance(job: Job, answers: dict) -> bool:
    """True when the next transition's vote quota is satisfied."""
    if job.terminal:
        return False
    if job.state in (JobState.CREATED, JobState.SALIENCY_DONE):
        return True
    return all(tid in answers for tid in job.pending)


def advance(job: Job, answers: dict, store: JobDir) -> list[PatchTask]:
    """Execute one state transition; returns newly emitted tasks.

    `answers` maps accepted task ids to (worker_id, bool) pairs and must cover
    every pending task of the current stage.
    """
    if job.terminal:
        raise WrongStateError(f"job {job.job_id} already {job.state.value}")
    missing = [tid for tid in job.pending if tid not in answers]
    if missing:
        raise QuotaNotMetError(
            f"job {job.job_id} stage {job.state.value} awaits {len(missing)} votes"
        )

    cfg = job.config
    new_tasks: list[PatchTask] = []

    if job.state == JobState.CREATED:
        job.saliency_map = multiscale_saliency(job.image, cfg.saliency, image_id=job.image_id)
        job.state = JobState.SALIENCY_DONE
        store.write_snapshot("saliency.pgm", job.saliency_map)
        store.append_event({"type": "saliency_computed"})

    elif job.state == JobState.SALIENCY_DONE:
        question = f"{job.job_id}:sv"
        task = PatchTask(
            task_id=question,
            job_id=job.job_id,
            kind=TaskKind.SALIENCY_VERIFY,
            rect=Rect(0, 0, job.image.width, job.image.height),
            image_id=job.image_id,
            label=job.class_label,
            question_key=question,
        )
        new_tasks = [task]
        _set_pending(job, new_tasks)
        job.state = JobState.SALIENCY_VERIFY

    elif job.state == JobState.SALIENCY_VERIFY:
        _, approved = answers[job.pending[0]]
        if not approved:
            # crowd vetoed the saliency map: treat the whole image as salient
            job.prev_mask = GrayMask.full(job.image.width, job.image.height, 1.0)
            job.grid_size = min(cfg.init_size, max(job.image.width, job.image.height))
            job.state = JobState.PATCH_ROUND
            new_tasks = _emit_round(job)
            _set_pending(job, new_tasks)
        else:
            binary = threshold_mask(job.saliency_map, cfg.bin_threshold)
            groups = filter_groups(
                connected_components(binary, cfg.connectivity), cfg.min_group_size
            )
            if not groups:
                _finish(job, JobState.TERMINATED_EARLY, job.saliency_map, store)
                return []
            job.groups = groups
            for group in groups:
                for slot in range(cfg.votes_per_group):
                    question = f"{job.job_id}:g{group.id}"
                    new_tasks.append(
                        PatchTask(
                            task_id=f"{question}:v{slot}",
                            job_id=job.job_id,
                            kind=TaskKind.GROUP_VERIFY,
                            rect=group.bbox,
                            image_id=job.image_id,
                            label=job.class_label,
                            question_key=question,
                            group_id=group.id,
                        )
                    )
            _set_pending(job, new_tasks)
            job.state = JobState.GROUP_VERIFY

    elif job.state == JobState.GROUP_VERIFY:
        verdicts = []
        for group in job.groups:
            group_answers = [
                answers[tid][1]
                for tid in job.pending
                if job.pending_meta[tid].group_id == group.id
            ]
            verdicts.append(any(group_answers))
        outcome = apply_group_verdicts(job.saliency_map, job.groups, verdicts)
        if outcome.kind == OUTCOME_TERMINATE_WITH_FULL_MAP:
            _finish(job, JobState.TERMINATED_EARLY, job.saliency_map, store)
            return []
        kept_groups = [g for g, v in zip(job.groups, verdicts) if v]
        job.prev_mask = outcome.target_map
        job.grid_size = min(cfg.init_size, largest_object_size(kept_groups))
        if job.grid_size < cfg.min_size:
            _finish(job, JobState.FINALIZED, job.prev_mask, store)
            return []
        job.state = JobState.PATCH_ROUND
        new_tasks = _emit_round(job)
        _set_pending(job, new_tasks)

    elif job.state == JobState.PATCH_ROUND:
        if not job.pending:
            _finish(job, JobState.FINALIZED, job.prev_mask, store)
            return []
        votes = [
            Vote(
                rect=job.pending_meta[tid].rect,
                worker_id=answers[tid][0],
                answer=answers[tid][1],
                task_kind=TaskKind.PATCH_LABEL,
            )
            for tid in job.pending
        ]
        if not any(v.answer for v in votes):
            _finish(job, JobState.FINALIZED, job.prev_mask, store)
            return []
        response = build_response_mask(job.image.width, job.image.height, votes)
        job.prev_mask = merge_masks(job.prev_mask, response, cfg.min_size)
        job.iteration += 1
        store.write_snapshot(f"round-{job.iteration}.pgm", job.prev_mask)
        store.append_event(
            {"type": "round_merged", "iteration": job.iteration, "gridSize": job.grid_size}
        )
        next_size = round_half_up(job.grid_size * cfg.shrink_ratio)
        if next_size < cfg.min_size:
            _finish(job, JobState.FINALIZED, job.prev_mask, store)
            return []
        job.grid_size = next_size
        new_tasks = _emit_round(job)
        _set_pending(job, new_tasks)

    if new_tasks:
        store.append_event(
            {
                "type": "tasks_emitted",
                "state": job.state.value,
                "count": len(new_tasks),
                "taskIds": [t.task_id for t in new_tasks],
            }
        )
    store.write_descriptor(job)
    return new_tasks


def finalize(job: Job, store: JobDir) -> GrayMask:
    """Return the final mask of a terminal job (attention.pgm rewritten)."""
    if not job.terminal:
        raise WrongStateError(f"job {job.job_id} still {job.state.value}")
    store.write_snapshot("attention.pgm", job.final_mask)
    return job.final_mask


def create_job(
    job_id: str,
    image_id: str,
    class_label: str,
    config: JobConfig,
    image: RasterImage,
    created_at_ms: int | None = None,
) -> Job:
    if created_at_ms is None:
        created_at_ms = int(time.time() * 1000)
    return Job(
        job_id=job_id,
        image_id=image_id,
        class_label=class_label,
        config=config,
        image=image,
        created_at_ms=created_at_ms,
    )
