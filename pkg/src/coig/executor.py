"""Step-by-step execution of a validated plan with checkpointing and
mid-run intervention.

The chain is inherently sequential: the first step generates, every later
step edits the previous image. Each transition is persisted before control
returns, so a process killed between steps resumes to byte-identical output
on the deterministic backend. Failures pause the run for a monitor to decide;
nothing is ever skipped silently.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

from .backends import BackendProfile, t2i_edit, t2i_generate
from .errors import (
    CoigError,
    IndexOutOfRange,
    NoMoreSteps,
    PlanInvalid,
    PriorStepFailed,
    RunNotPaused,
    TransportError,
)
from .planner import ChainPlan, PlanStep, validate_plan
from .runs import (
    ArtifactMeta,
    ChainRun,
    Intervention,
    StepRecord,
    apply_plan_intervention,
    new_run_id,
    utc_now,
)
from .scene import ImageArtifact
from .store import RunStore

StepObserver = Callable[[ChainRun, StepRecord], None]


def render_prompt(step: PlanStep) -> str:
    """Dual-context prompt: global goal first, then the step's instruction."""
    return f"Final Goal: {step.final_goal}\nThis Step's Action: {step.step_action}"


@dataclass
class Executor:
    store: RunStore
    profile: BackendProfile
    on_step: Optional[StepObserver] = None

    def _emit(self, run: ChainRun, record: StepRecord) -> None:
        if self.on_step is not None:
            self.on_step(run, record)

    def start_run(self, plan: ChainPlan, step_mode: bool = False) -> ChainRun:
        violations = validate_plan(plan)
        if violations:
            raise PlanInvalid(violations)
        run = ChainRun(
            run_id=new_run_id(),
            plan=plan,
            original_plan=plan,
            backend_profile=self.profile.name,
            status="running",
            step_mode=step_mode,
        )
        self.store.save_run(run)
        self.advance(run)
        return run

    def advance(self, run: ChainRun, retry_failed: bool = False) -> StepRecord:
        n = len(run.plan.steps)
        t = run.next_index()
        if t > n:
            raise NoMoreSteps(f"run {run.run_id} has no step {t}")
        active = run.active_records()
        if t in active and active[t].status == "failed":
            if not retry_failed:
                raise PriorStepFailed(f"step {t} of run {run.run_id} previously failed")
            run.steps[run.steps.index(active[t])] = replace(active[t], status="superseded")

        step = run.plan.steps[t - 1]
        started = utc_now()
        parent_id = run.artifact_id_at(t - 1) if t > 1 else None
        try:
            if t == 1:
                artifact = t2i_generate(render_prompt(step), self.profile.t2i)
            else:
                parent = self.store.get_artifact(run, parent_id)
                artifact = t2i_edit(parent, render_prompt(step), self.profile.t2i)
        except CoigError as exc:
            record = StepRecord(
                index=t, prompt_used=step, status="failed",
                parent_artifact_id=parent_id, started_at=started,
                finished_at=utc_now(), error=f"{type(exc).__name__}: {exc}",
            )
            run.steps.append(record)
            run.status = "paused"
            self.store.save_run(run)
            self._emit(run, record)
            return record

        self.store.put_artifact(artifact)
        run.artifacts[artifact.id] = ArtifactMeta(
            id=artifact.id, media_kind=artifact.media_kind,
            width=artifact.width, height=artifact.height,
        )
        record = StepRecord(
            index=t, prompt_used=step, status="succeeded",
            artifact_id=artifact.id, parent_artifact_id=parent_id,
            started_at=started, finished_at=utc_now(),
        )
        run.steps.append(record)
        if t == n:
            run.status = "completed"
        elif run.step_mode:
            run.status = "paused"
        else:
            run.status = "running"
        self.store.save_run(run)
        self._emit(run, record)
        return record

    def run_to_completion(
        self,
        run: ChainRun,
        should_pause: Optional[Callable[[], bool]] = None,
    ) -> ChainRun:
        n = len(run.plan.steps)
        retry = True  # a previously failed frontier step is re-attempted once on resume
        while run.next_index() <= n:
            if should_pause is not None and should_pause():
                run.status = "paused"
                self.store.save_run(run)
                return run
            record = self.advance(run, retry_failed=retry)
            retry = False
            if record.status == "failed" or run.status == "paused":
                return run
        if run.status != "completed":
            run.status = "completed"
            self.store.save_run(run)
        return run

    def pause(self, run: ChainRun) -> ChainRun:
        run.status = "paused"
        self.store.save_run(run)
        return run

    def resume(self, run: ChainRun) -> ChainRun:
        if run.status not in ("paused", "running"):
            raise RunNotPaused(f"run {run.run_id} is {run.status}, not resumable")
        run.status = "running"
        return self.run_to_completion(run)

    def apply_intervention(self, run: ChainRun, iv: Intervention) -> ChainRun:
        if run.status != "paused":
            raise RunNotPaused(f"run {run.run_id} is {run.status}; pause before intervening")
        if iv.kind == "rerun_from" and iv.at_index > 1 and run.artifact_id_at(iv.at_index - 1) is None:
            raise IndexOutOfRange(
                f"rerun_from {iv.at_index}: no checkpoint at step {iv.at_index - 1}"
            )
        new_plan = apply_plan_intervention(run.plan, iv)
        iv = replace(iv, applied_at=utc_now())
        run.plan = new_plan
        run.interventions.append(iv)
        if iv.kind in ("rerun_from", "insert_step", "delete_step"):
            # structural changes invalidate downstream executed steps
            run.steps = [
                replace(r, status="superseded")
                if r.index >= iv.at_index and r.status != "superseded"
                else r
                for r in run.steps
            ]
        run.status = "paused"
        self.store.save_run(run)
        return run
