"""Monitorability metrics: per-step readability and causal relevance.

Readability asks, for every attribute a detailing step introduces, whether
the evaluator can see it just before (on the previous image) and just after
(on the step's output). Causal relevance perturbs one sub-prompt, reruns the
chain, and checks the change both appears at its step and survives to the
final image. Scores are stored as fractions in [0, 1] and formatted as
percentages for display.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from typing import Optional

from .backends import BackendConfig, mllm_answer
from .errors import (
    FieldAbsent,
    GrayForbidden,
    MissingArtifact,
    PreconditionViolated,
    SpecMismatch,
)
from .grammar import AddPlaceholder, parse_actions
from .planner import ChainPlan, PlanStep
from .qa import presence_with_attribute
from .runs import ChainRun
from .scene import ImageArtifact, blank_artifact
from .store import RunStore

PERTURBABLE_FIELDS = ("color",)


@dataclass(frozen=True)
class ReadabilityProbe:
    step_index: int
    attribute_kind: str  # color | shape | texture
    question: str
    target_entity: str

    def to_dict(self) -> dict:
        return {
            "step_index": self.step_index,
            "attribute_kind": self.attribute_kind,
            "question": self.question,
            "target_entity": self.target_entity,
        }


@dataclass(frozen=True)
class ProbeResult:
    probe: ReadabilityProbe
    before_score: float
    after_score: float
    before_is_blank_sentinel: bool = False

    def to_dict(self) -> dict:
        return {
            "probe": self.probe.to_dict(),
            "before_score": self.before_score,
            "after_score": self.after_score,
            "before_is_blank_sentinel": self.before_is_blank_sentinel,
        }


@dataclass(frozen=True)
class ReadabilityReport:
    run_id: str
    results: tuple[ProbeResult, ...]

    def aggregate(self) -> dict[str, dict[str, float]]:
        by_kind: dict[str, list[ProbeResult]] = {}
        for r in self.results:
            by_kind.setdefault(r.probe.attribute_kind, []).append(r)
        return {
            kind: {
                "before": sum(r.before_score for r in rs) / len(rs),
                "after": sum(r.after_score for r in rs) / len(rs),
            }
            for kind, rs in sorted(by_kind.items())
        }

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "results": [r.to_dict() for r in self.results],
            "aggregates": self.aggregate(),
        }

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out)
        w.writerow(["probe_id", "attribute_kind", "before", "after"])
        for i, r in enumerate(self.results):
            w.writerow([i, r.probe.attribute_kind, r.before_score, r.after_score])
        return out.getvalue()


@dataclass(frozen=True)
class PerturbationSpec:
    step_index: int
    original_value: str
    perturbed_value: str
    perturbed_field: str = "color"

    def __post_init__(self):
        if self.perturbed_field not in PERTURBABLE_FIELDS:
            raise PreconditionViolated(f"unsupported perturbation field {self.perturbed_field!r}")

    def to_dict(self) -> dict:
        return {
            "step_index": self.step_index,
            "field": self.perturbed_field,
            "original_value": self.original_value,
            "perturbed_value": self.perturbed_value,
        }


@dataclass(frozen=True)
class CausalCase:
    case_id: str
    spec: PerturbationSpec
    score_unperturbed_final: float
    score_at_step: float
    score_perturbed_final: float
    question: str

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "spec": self.spec.to_dict(),
            "score_unperturbed_final": self.score_unperturbed_final,
            "score_at_step": self.score_at_step,
            "score_perturbed_final": self.score_perturbed_final,
            "question": self.question,
        }


@dataclass(frozen=True)
class CausalReport:
    score_unperturbed_final: float
    score_at_step: float
    score_perturbed_final: float
    cases: tuple[CausalCase, ...]

    def to_dict(self) -> dict:
        return {
            "score_unperturbed_final": self.score_unperturbed_final,
            "score_at_step": self.score_at_step,
            "score_perturbed_final": self.score_perturbed_final,
            "cases": [c.to_dict() for c in self.cases],
        }

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out)
        w.writerow(["case_id", "u_final", "at_step", "p_final"])
        for c in self.cases:
            w.writerow([c.case_id, c.score_unperturbed_final, c.score_at_step, c.score_perturbed_final])
        return out.getvalue()


def merge_causal_reports(reports: list[CausalReport]) -> CausalReport:
    cases = tuple(c for r in reports for c in r.cases)
    if not cases:
        raise PreconditionViolated("no causal cases to merge")
    k = len(cases)
    return CausalReport(
        score_unperturbed_final=sum(c.score_unperturbed_final for c in cases) / k,
        score_at_step=sum(c.score_at_step for c in cases) / k,
        score_perturbed_final=sum(c.score_perturbed_final for c in cases) / k,
        cases=cases,
    )


# ---------------------------------------------------------------------------
# Probe construction
# ---------------------------------------------------------------------------

_DETAIL_RE = re.compile(r"^Detail (?P<id>[\w-]+): (?P<attrs>.+)$")


def entity_classes(plan: ChainPlan) -> dict[str, str]:
    """Map entity ids to classes from the plan's placeholder actions."""
    classes: dict[str, str] = {}
    for step in plan.steps:
        try:
            actions = parse_actions(step.step_action)
        except Exception:
            continue
        for action in actions:
            if isinstance(action, AddPlaceholder):
                classes.setdefault(action.entity_id, action.cls)
    return classes


def _detail_attrs(step: PlanStep) -> list[tuple[str, str]]:
    m = _DETAIL_RE.match(step.step_action.strip())
    if not m:
        return []
    pairs = []
    for chunk in m["attrs"].split(","):
        if "=" in chunk:
            k, v = chunk.split("=", 1)
            pairs.append((k.strip().lower(), v.strip()))
    return pairs


def build_probes(plan: ChainPlan) -> list[ReadabilityProbe]:
    classes = entity_classes(plan)
    probes: list[ReadabilityProbe] = []
    for step in plan.steps:
        if step.kind != "entity_detail" or not step.target_entity:
            continue
        cls = classes.get(step.target_entity)
        if cls is None:
            continue
        for key, value in _detail_attrs(step):
            if key not in ("color", "shape", "texture"):
                continue
            probes.append(
                ReadabilityProbe(
                    step_index=step.index,
                    attribute_kind=key,
                    question=presence_with_attribute(cls, value, key),
                    target_entity=step.target_entity,
                )
            )
    return probes


# ---------------------------------------------------------------------------
# Readability
# ---------------------------------------------------------------------------

def _artifact_at(store: RunStore, run: ChainRun, index: int) -> ImageArtifact:
    artifact_id = run.artifact_id_at(index)
    if artifact_id is None:
        raise MissingArtifact(f"run {run.run_id} has no artifact for step {index}")
    return store.get_artifact(run, artifact_id)


def _score(artifact: ImageArtifact, question: str, config: BackendConfig) -> float:
    return 1.0 if mllm_answer(artifact, question, config) == "yes" else 0.0


def eval_readability(
    store: RunStore,
    run: ChainRun,
    probes: list[ReadabilityProbe],
    mllm_config: BackendConfig,
) -> ReadabilityReport:
    results = []
    for probe in probes:
        after = _artifact_at(store, run, probe.step_index)
        if probe.step_index == 1:
            before, sentinel = blank_artifact(), True
        else:
            before, sentinel = _artifact_at(store, run, probe.step_index - 1), False
        results.append(
            ProbeResult(
                probe=probe,
                before_score=_score(before, probe.question, mllm_config),
                after_score=_score(after, probe.question, mllm_config),
                before_is_blank_sentinel=sentinel,
            )
        )
    return ReadabilityReport(run_id=run.run_id, results=tuple(results))


# ---------------------------------------------------------------------------
# Causal relevance
# ---------------------------------------------------------------------------

def make_perturbation(plan: ChainPlan, spec: PerturbationSpec) -> ChainPlan:
    """New plan differing only in one step's attribute value."""
    if spec.perturbed_value.lower() == "gray":
        raise GrayForbidden("gray renders placeholders and is excluded from perturbations")
    if spec.perturbed_value == spec.original_value:
        raise PreconditionViolated("perturbed value must differ from the original")
    if not 1 <= spec.step_index <= len(plan.steps):
        raise FieldAbsent(f"no step {spec.step_index} in plan")
    step = plan.steps[spec.step_index - 1]
    needle = f"{spec.perturbed_field}={spec.original_value}"
    if step.kind != "entity_detail" or needle not in step.step_action:
        raise FieldAbsent(
            f"step {spec.step_index} does not carry {needle!r}"
        )
    new_action = step.step_action.replace(
        needle, f"{spec.perturbed_field}={spec.perturbed_value}", 1
    )
    steps = list(plan.steps)
    steps[spec.step_index - 1] = PlanStep(
        index=step.index, kind=step.kind, final_goal=step.final_goal,
        step_action=new_action, target_entity=step.target_entity,
    )
    return ChainPlan(
        original_prompt=plan.original_prompt, steps=tuple(steps),
        planner_model=plan.planner_model, created_at=plan.created_at,
    )


def eval_causal(
    store: RunStore,
    orig_run: ChainRun,
    pert_run: ChainRun,
    spec: PerturbationSpec,
    mllm_config: BackendConfig,
) -> CausalReport:
    t = spec.step_index
    orig_step = orig_run.plan.steps[t - 1] if t <= len(orig_run.plan.steps) else None
    pert_step = pert_run.plan.steps[t - 1] if t <= len(pert_run.plan.steps) else None
    if orig_step is None or pert_step is None or orig_step.step_action == pert_step.step_action:
        raise SpecMismatch(f"runs do not differ at step {t}")

    classes = entity_classes(pert_run.plan)
    cls = classes.get(pert_step.target_entity or "")
    if cls is None:
        raise SpecMismatch(f"cannot resolve the entity class for step {t}")
    question = presence_with_attribute(cls, spec.perturbed_value, spec.perturbed_field)

    n_orig = len(orig_run.plan.steps)
    n_pert = len(pert_run.plan.steps)
    case = CausalCase(
        case_id=f"{orig_run.run_id}:{pert_run.run_id}:{t}",
        spec=spec,
        score_unperturbed_final=_score(_artifact_at(store, orig_run, n_orig), question, mllm_config),
        score_at_step=_score(_artifact_at(store, pert_run, t), question, mllm_config),
        score_perturbed_final=_score(_artifact_at(store, pert_run, n_pert), question, mllm_config),
        question=question,
    )
    return CausalReport(
        score_unperturbed_final=case.score_unperturbed_final,
        score_at_step=case.score_at_step,
        score_perturbed_final=case.score_perturbed_final,
        cases=(case,),
    )
