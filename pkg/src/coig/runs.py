"""Run state: step records, interventions, and the chain-run manifest.

Step records are append-only; superseding (never deleting) keeps the full
audit trail, and the current chain is the last non-superseded record per
index. The manifest round-trips bit-exactly through canonical JSON.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Optional

from .errors import IndexOutOfRange, PreconditionViolated
from .planner import ChainPlan, PlanStep

RUN_STATUSES = ("running", "paused", "completed", "failed")
STEP_STATUSES = ("pending", "succeeded", "failed", "superseded")
INTERVENTION_KINDS = ("edit_step", "insert_step", "delete_step", "rerun_from")


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def new_run_id() -> str:
    return uuid.uuid4().hex[:12]


@dataclass(frozen=True)
class ArtifactMeta:
    id: str
    media_kind: str
    width: Optional[int] = None
    height: Optional[int] = None

    def to_dict(self) -> dict:
        return {"id": self.id, "media_kind": self.media_kind, "width": self.width, "height": self.height}

    @classmethod
    def from_dict(cls, d: dict) -> "ArtifactMeta":
        return cls(id=d["id"], media_kind=d["media_kind"], width=d.get("width"), height=d.get("height"))


@dataclass(frozen=True)
class StepRecord:
    index: int
    prompt_used: PlanStep
    status: str
    artifact_id: Optional[str] = None
    parent_artifact_id: Optional[str] = None
    started_at: str = ""
    finished_at: Optional[str] = None
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "prompt_used": self.prompt_used.to_dict(),
            "status": self.status,
            "artifact_id": self.artifact_id,
            "parent_artifact_id": self.parent_artifact_id,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StepRecord":
        return cls(
            index=int(d["index"]),
            prompt_used=PlanStep.from_dict(d["prompt_used"]),
            status=d["status"],
            artifact_id=d.get("artifact_id"),
            parent_artifact_id=d.get("parent_artifact_id"),
            started_at=d.get("started_at", ""),
            finished_at=d.get("finished_at"),
            error=d.get("error"),
        )


@dataclass(frozen=True)
class Intervention:
    kind: str
    at_index: int
    payload: Optional[PlanStep] = None
    author: str = "human"
    applied_at: str = ""

    def __post_init__(self):
        if self.kind not in INTERVENTION_KINDS:
            raise PreconditionViolated(f"unknown intervention kind {self.kind!r}")
        if self.kind in ("edit_step", "insert_step") and self.payload is None:
            raise PreconditionViolated(f"{self.kind} requires a payload step")
        if self.author not in ("human", "auto_monitor"):
            raise PreconditionViolated(f"unknown author {self.author!r}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "at_index": self.at_index,
            "payload": self.payload.to_dict() if self.payload else None,
            "author": self.author,
            "applied_at": self.applied_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Intervention":
        return cls(
            kind=d["kind"],
            at_index=int(d["at_index"]),
            payload=PlanStep.from_dict(d["payload"]) if d.get("payload") else None,
            author=d.get("author", "human"),
            applied_at=d.get("applied_at", ""),
        )


@dataclass
class ChainRun:
    run_id: str
    plan: ChainPlan
    original_plan: ChainPlan
    backend_profile: str
    status: str = "running"
    steps: list[StepRecord] = field(default_factory=list)
    interventions: list[Intervention] = field(default_factory=list)
    artifacts: dict[str, ArtifactMeta] = field(default_factory=dict)
    created_at: str = field(default_factory=utc_now)
    step_mode: bool = False

    def active_records(self) -> dict[int, StepRecord]:
        """Last non-superseded record per index."""
        active: dict[int, StepRecord] = {}
        for rec in self.steps:
            if rec.status != "superseded":
                active[rec.index] = rec
        return active

    def next_index(self) -> int:
        """1 + length of the contiguous succeeded prefix."""
        active = self.active_records()
        t = 1
        while t in active and active[t].status == "succeeded":
            t += 1
        return t

    def artifact_id_at(self, index: int) -> Optional[str]:
        rec = self.active_records().get(index)
        return rec.artifact_id if rec and rec.status == "succeeded" else None

    def final_artifact_id(self) -> Optional[str]:
        return self.artifact_id_at(len(self.plan.steps))

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "plan": self.plan.to_dict(),
            "original_plan": self.original_plan.to_dict(),
            "backend_profile": self.backend_profile,
            "status": self.status,
            "steps": [r.to_dict() for r in self.steps],
            "interventions": [i.to_dict() for i in self.interventions],
            "artifacts": {k: v.to_dict() for k, v in sorted(self.artifacts.items())},
            "created_at": self.created_at,
            "step_mode": self.step_mode,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChainRun":
        return cls(
            run_id=d["run_id"],
            plan=ChainPlan.from_dict(d["plan"]),
            original_plan=ChainPlan.from_dict(d["original_plan"]),
            backend_profile=d["backend_profile"],
            status=d["status"],
            steps=[StepRecord.from_dict(r) for r in d.get("steps", [])],
            interventions=[Intervention.from_dict(i) for i in d.get("interventions", [])],
            artifacts={k: ArtifactMeta.from_dict(v) for k, v in d.get("artifacts", {}).items()},
            created_at=d.get("created_at", ""),
            step_mode=d.get("step_mode", False),
        )


def apply_plan_intervention(plan: ChainPlan, iv: Intervention) -> ChainPlan:
    """Pure plan transformation for one intervention; rerun_from is a no-op
    on the plan itself. Used both to apply and to replay the audit log."""
    n = len(plan.steps)
    if iv.kind == "rerun_from":
        if not 1 <= iv.at_index <= n:
            raise IndexOutOfRange(f"rerun_from index {iv.at_index} outside 1..{n}")
        return plan
    if iv.kind == "insert_step":
        if not 1 <= iv.at_index <= n + 1:
            raise IndexOutOfRange(f"insert index {iv.at_index} outside 1..{n + 1}")
    elif not 1 <= iv.at_index <= n:
        raise IndexOutOfRange(f"{iv.kind} index {iv.at_index} outside 1..{n}")

    steps = list(plan.steps)
    if iv.kind == "edit_step":
        payload = replace(iv.payload, index=iv.at_index, final_goal=plan.original_prompt)
        steps[iv.at_index - 1] = payload
    elif iv.kind == "insert_step":
        payload = replace(iv.payload, index=iv.at_index, final_goal=plan.original_prompt)
        steps.insert(iv.at_index - 1, payload)
    elif iv.kind == "delete_step":
        del steps[iv.at_index - 1]
    steps = [replace(s, index=i) for i, s in enumerate(steps, start=1)]
    return replace(plan, steps=tuple(steps))


def replay_interventions(original: ChainPlan, interventions: list[Intervention]) -> ChainPlan:
    plan = original
    for iv in interventions:
        plan = apply_plan_intervention(plan, iv)
    return plan
