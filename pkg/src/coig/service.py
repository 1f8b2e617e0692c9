"""HTTP API over runs, step events, interventions and evaluation reports.

The service is stateless over the run store: every response is
reconstructible from disk, and in-flight runs execute on background threads
that persist after each step, so a restart loses no committed state. Step
events are delivered over server-sent events with monotone step indices for
client-side dedup (at-least-once delivery: replay from the store, then live
tail).
"""

from __future__ import annotations

import json
import queue
import threading
from contextlib import asynccontextmanager
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response, StreamingResponse
from pydantic import BaseModel

from .backends import BackendProfile, mock_profile
from .errors import (
    AuthError,
    CoigError,
    IndexOutOfRange,
    NotFound,
    PlanInvalid,
    PreconditionViolated,
    RateLimited,
    RunNotPaused,
    SchemaError,
    TransportError,
)
from .executor import Executor
from .metrics import PerturbationSpec, build_probes, eval_causal, eval_readability, make_perturbation
from .planner import ChainPlan, PlanStep, decompose
from .render import render_scene_png
from .runs import ChainRun, Intervention, StepRecord
from .store import RunStore

_ERROR_CODES = [
    ((NotFound,), "not_found", 404),
    ((RunNotPaused, IndexOutOfRange), "conflict", 409),
    ((TransportError, RateLimited, AuthError), "backend_failure", 502),
    ((PlanInvalid, PreconditionViolated, SchemaError, CoigError), "invalid_input", 422),
]


def _api_error(exc: Exception) -> JSONResponse:
    for types, code, status in _ERROR_CODES:
        if isinstance(exc, types):
            detail = None
            if isinstance(exc, PlanInvalid):
                detail = [v.to_dict() for v in exc.violations]
            return JSONResponse(
                status_code=status,
                content={"code": code, "message": str(exc), "detail": detail},
            )
    return JSONResponse(
        status_code=500, content={"code": "internal", "message": str(exc), "detail": None}
    )


def _event(run_id: str, record: StepRecord) -> dict:
    return {
        "run_id": run_id,
        "step_index": record.index,
        "status": record.status,
        "artifact_id": record.artifact_id,
        "timestamp": record.finished_at or record.started_at,
    }


class RunEngine:
    """Single writer per run; fan-out of step events to any number of
    subscribers; distinct runs execute concurrently."""

    def __init__(self, store: RunStore, profiles: dict[str, BackendProfile], default_profile: str):
        self.store = store
        self.profiles = profiles
        self.default_profile = default_profile
        self._lock = threading.Lock()
        self._run_locks: dict[str, threading.Lock] = {}
        self._runs: dict[str, ChainRun] = {}
        self._threads: dict[str, threading.Thread] = {}
        self._pause_requested: set[str] = set()
        self._subscribers: dict[str, list[queue.Queue]] = {}

    def _run_lock(self, run_id: str) -> threading.Lock:
        with self._lock:
            return self._run_locks.setdefault(run_id, threading.Lock())

    def _get_run(self, run_id: str) -> ChainRun:
        with self._lock:
            if run_id in self._runs:
                return self._runs[run_id]
        run = self.store.load_run(run_id)
        with self._lock:
            return self._runs.setdefault(run_id, run)

    def profile(self, name: Optional[str]) -> BackendProfile:
        name = name or self.default_profile
        if name not in self.profiles:
            raise NotFound(f"no backend profile {name!r}")
        return self.profiles[name]

    def _executor(self, profile: BackendProfile) -> Executor:
        return Executor(store=self.store, profile=profile, on_step=self._on_step)

    def _on_step(self, run: ChainRun, record: StepRecord) -> None:
        event = _event(run.run_id, record)
        with self._lock:
            subscribers = list(self._subscribers.get(run.run_id, []))
        for q in subscribers:
            q.put(event)

    def subscribe(self, run_id: str) -> queue.Queue:
        q: queue.Queue = queue.Queue()
        with self._lock:
            self._subscribers.setdefault(run_id, []).append(q)
        return q

    def unsubscribe(self, run_id: str, q: queue.Queue) -> None:
        with self._lock:
            subs = self._subscribers.get(run_id, [])
            if q in subs:
                subs.remove(q)

    def create_run(
        self,
        plan: Optional[ChainPlan],
        prompt: Optional[str],
        profile_name: Optional[str],
        step_mode: bool = False,
    ) -> ChainRun:
        profile = self.profile(profile_name)
        if plan is None:
            if not prompt:
                raise PreconditionViolated("provide a plan or a prompt")
            plan = decompose(prompt, profile.llm)
        executor = self._executor(profile)
        run = executor.start_run(plan, step_mode=step_mode)
        with self._lock:
            self._runs[run.run_id] = run
        if run.status == "running":
            self._spawn(run, executor)
        return run

    def _spawn(self, run: ChainRun, executor: Executor) -> None:
        def work():
            with self._run_lock(run.run_id):
                executor.run_to_completion(
                    run, should_pause=lambda: run.run_id in self._pause_requested
                )
            self._pause_requested.discard(run.run_id)

        thread = threading.Thread(target=work, name=f"run-{run.run_id}", daemon=True)
        with self._lock:
            self._threads[run.run_id] = thread
        thread.start()

    def pause(self, run_id: str) -> ChainRun:
        run = self._get_run(run_id)
        thread = self._threads.get(run_id)
        if thread is not None and thread.is_alive():
            self._pause_requested.add(run_id)
            thread.join(timeout=30)
        with self._run_lock(run_id):
            if run.status != "paused":
                run.status = "paused"
                self.store.save_run(run)
        return run

    def resume(self, run_id: str) -> ChainRun:
        run = self._get_run(run_id)
        if run.status not in ("paused",):
            raise RunNotPaused(f"run {run_id} is {run.status}")
        executor = self._executor(self.profile(run.backend_profile))
        run.status = "running"
        self.store.save_run(run)
        self._spawn(run, executor)
        return run

    def intervene(self, run_id: str, iv: Intervention) -> ChainRun:
        run = self._get_run(run_id)
        executor = self._executor(self.profile(run.backend_profile))
        with self._run_lock(run_id):
            return executor.apply_intervention(run, iv)

    def drain(self) -> None:
        for thread in list(self._threads.values()):
            if thread.is_alive():
                thread.join(timeout=30)


class RunBody(BaseModel):
    plan: Optional[dict] = None
    prompt: Optional[str] = None
    profile: Optional[str] = None
    step_mode: bool = False


class InterventionBody(BaseModel):
    kind: str
    at_index: int
    payload: Optional[dict] = None
    author: str = "human"


class CausalBody(BaseModel):
    step_index: int
    original_value: str
    perturbed_value: str
    field: str = "color"


def create_app(
    store: RunStore,
    profiles: Optional[dict[str, BackendProfile]] = None,
    default_profile: str = "mock",
) -> FastAPI:
    profiles = profiles or {"mock": mock_profile()}
    engine = RunEngine(store, profiles, default_profile)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        engine.drain()

    app = FastAPI(title="coig service", lifespan=lifespan)
    app.state.engine = engine

    @app.exception_handler(CoigError)
    async def _coig_error_handler(request: Request, exc: CoigError):
        return _api_error(exc)

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/runs", status_code=201)
    def create_run(body: RunBody):
        plan = ChainPlan.from_dict(body.plan) if body.plan else None
        run = engine.create_run(plan, body.prompt, body.profile, body.step_mode)
        return run.to_dict()

    @app.get("/runs")
    def list_runs(status: Optional[str] = None):
        return [s.to_dict() for s in engine.store.list_runs(status)]

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        return engine.store.load_run(run_id).to_dict()

    @app.get("/runs/{run_id}/events")
    def stream_events(run_id: str, follow: bool = True):
        run = engine.store.load_run(run_id)  # not_found check

        def sse():
            q = engine.subscribe(run_id) if follow else None
            try:
                seen = 0
                current = engine.store.load_run(run_id)
                for record in current.steps:
                    if record.status in ("succeeded", "failed"):
                        seen += 1
                        yield _sse_frame(seen, _event(run_id, record))
                if q is None:
                    return
                while True:
                    try:
                        event = q.get(timeout=15)
                    except queue.Empty:
                        yield ": heartbeat\n\n"
                        continue
                    seen += 1
                    yield _sse_frame(seen, event)
            finally:
                if q is not None:
                    engine.unsubscribe(run_id, q)

        return StreamingResponse(sse(), media_type="text/event-stream")

    @app.post("/runs/{run_id}/pause")
    def pause(run_id: str):
        return engine.pause(run_id).to_dict()

    @app.post("/runs/{run_id}/resume")
    def resume(run_id: str):
        return engine.resume(run_id).to_dict()

    @app.post("/runs/{run_id}/interventions")
    def intervene(run_id: str, body: InterventionBody):
        iv = Intervention(
            kind=body.kind,
            at_index=body.at_index,
            payload=PlanStep.from_dict(body.payload) if body.payload else None,
            author=body.author,
        )
        return engine.intervene(run_id, iv).to_dict()

    @app.post("/runs/{run_id}/eval/readability")
    def readability(run_id: str):
        run = engine.store.load_run(run_id)
        profile = engine.profile(run.backend_profile)
        report = eval_readability(engine.store, run, build_probes(run.plan), profile.mllm)
        doc = report.to_dict()
        engine.store.save_report(run_id, "readability", doc, report.to_csv())
        return doc

    @app.post("/runs/{run_id}/eval/causal")
    def causal(run_id: str, body: CausalBody):
        run = engine.store.load_run(run_id)
        profile = engine.profile(run.backend_profile)
        spec = PerturbationSpec(
            step_index=body.step_index,
            original_value=body.original_value,
            perturbed_value=body.perturbed_value,
            perturbed_field=body.field,
        )
        pert_plan = make_perturbation(run.plan, spec)
        executor = Executor(store=engine.store, profile=profile)
        pert_run = executor.run_to_completion(executor.start_run(pert_plan))
        report = eval_causal(engine.store, run, pert_run, spec, profile.mllm)
        doc = report.to_dict()
        doc["perturbed_run_id"] = pert_run.run_id
        engine.store.save_report(run_id, "causal", doc, report.to_csv())
        return doc

    @app.get("/reports/{run_id}/{metric}")
    def report(run_id: str, metric: str):
        return engine.store.load_report(run_id, metric)

    @app.get("/artifacts/{ref}")
    def artifact(ref: str):
        as_png = ref.endswith(".png")
        blob_id = ref[:-4] if as_png else ref
        data = engine.store.get_blob(blob_id)
        headers = {"Cache-Control": "public, max-age=31536000, immutable"}
        is_png = data[:8] == b"\x89PNG\r\n\x1a\n"
        if as_png and not is_png:
            from .scene import SceneDocument

            data = render_scene_png(SceneDocument.from_bytes(data))
            is_png = True
        media = "image/png" if is_png else "application/json"
        return Response(content=data, media_type=media, headers=headers)

    return app


def _sse_frame(event_id: int, payload: dict) -> str:
    return f"id: {event_id}\nevent: step\ndata: {json.dumps(payload, sort_keys=True)}\n\n"
