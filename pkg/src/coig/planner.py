"""Prompt decomposition: turn one complex caption into an ordered plan of
single-entity steps, and validate plans against the four decomposition rules.

The wire format for planner replies is a fenced ``coig-plan`` block holding a
key-sorted JSON document; the same document is the on-disk plan file.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from importlib import resources
from typing import Optional

from .backends import BackendConfig, llm_complete
from .captions import ParsedCaption, parse_caption
from .errors import GrammarError, PlannerOutputError, PreconditionViolated

logger = logging.getLogger(__name__)

STEP_KINDS = ("foundational_layout", "background", "entity_detail", "interaction", "correction")

FOUNDATIONAL_KINDS = ("foundational_layout", "background")

RULES = ("missing_foundation", "multi_entity_step", "missing_final_goal", "destructive_edit", "malformed")

DEFAULT_MAX_STEPS = 16

PLAN_FENCE = "coig-plan"

_ENTITY_ID_RE = re.compile(r"\be\d+\b")


def csp_system_prompt() -> str:
    """The versioned planner system prompt shipped with the package."""
    return resources.files("coig.assets").joinpath("csp_system_prompt.txt").read_text()


@dataclass(frozen=True)
class PlanStep:
    index: int
    kind: str
    final_goal: str
    step_action: str
    target_entity: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "kind": self.kind,
            "final_goal": self.final_goal,
            "step_action": self.step_action,
            "target_entity": self.target_entity,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PlanStep":
        return cls(
            index=int(d["index"]),
            kind=str(d["kind"]),
            final_goal=str(d["final_goal"]),
            step_action=str(d["step_action"]),
            target_entity=d.get("target_entity"),
        )


@dataclass(frozen=True)
class ChainPlan:
    original_prompt: str
    steps: tuple[PlanStep, ...]
    planner_model: str = ""
    created_at: str = ""

    def to_dict(self) -> dict:
        return {
            "original_prompt": self.original_prompt,
            "planner_model": self.planner_model,
            "created_at": self.created_at,
            "steps": [s.to_dict() for s in self.steps],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChainPlan":
        return cls(
            original_prompt=str(d["original_prompt"]),
            planner_model=str(d.get("planner_model", "")),
            created_at=str(d.get("created_at", "")),
            steps=tuple(PlanStep.from_dict(s) for s in d["steps"]),
        )


@dataclass(frozen=True)
class PlanViolation:
    step_index: int
    rule: str
    message: str

    def to_dict(self) -> dict:
        return {"step_index": self.step_index, "rule": self.rule, "message": self.message}


def serialize_plan(plan: ChainPlan) -> str:
    body = json.dumps(plan.to_dict(), sort_keys=True, indent=2, ensure_ascii=False)
    return f"```{PLAN_FENCE}\n{body}\n```\n"


_FENCE_RE = re.compile(rf"```{PLAN_FENCE}\s*\n(?P<body>.*?)\n```", re.DOTALL)


def parse_planner_output(text: str) -> ChainPlan:
    """Extract the first plan block from an LLM reply, tolerating prose."""
    if not text:
        raise PlannerOutputError("empty planner reply")
    blocks = _FENCE_RE.findall(text)
    if len(blocks) > 1:
        logger.warning("planner reply contains %d plan blocks; using the first", len(blocks))
    body = blocks[0] if blocks else text
    try:
        payload = json.loads(body)
        plan = ChainPlan.from_dict(payload)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise PlannerOutputError(f"no valid plan block in reply: {exc}") from exc
    if not plan.steps:
        raise PlannerOutputError("plan has no steps")
    return plan


def load_plan_file(path) -> ChainPlan:
    with open(path, encoding="utf-8") as fh:
        return parse_planner_output(fh.read())


# ---------------------------------------------------------------------------
# Deterministic template planner (the mock LLM's decomposition)
# ---------------------------------------------------------------------------

def template_plan(prompt: str) -> ChainPlan:
    """Decompose a caption with the deterministic template: one layout step,
    one detailing step per entity, one step per interaction, background last.
    """
    parsed = parse_caption(prompt)
    steps: list[PlanStep] = []

    def add(kind: str, action: str, target: Optional[str] = None) -> None:
        steps.append(
            PlanStep(
                index=len(steps) + 1,
                kind=kind,
                final_goal=prompt,
                step_action=action,
                target_entity=target,
            )
        )

    layout = ". ".join(
        f"Add placeholder {parsed.entity_id(i)}: {e.cls} at {e.position}"
        for i, e in enumerate(parsed.entities)
    )
    add("foundational_layout", layout)

    for i, ent in enumerate(parsed.entities):
        attrs = dict(ent.attributes)
        if not attrs:
            attrs["shape"] = ent.cls
        pairs = ", ".join(
            f"{k}={attrs[k]}" for k in ("color", "shape", "texture") if k in attrs
        )
        add("entity_detail", f"Detail {parsed.entity_id(i)}: {pairs}", parsed.entity_id(i))

    for src, verb, dst in parsed.interactions:
        add(
            "interaction",
            f"Interact {parsed.entity_id(src)}: {verb} {parsed.entity_id(dst)}",
            parsed.entity_id(src),
        )

    if parsed.background:
        add("background", f"Fill background: {parsed.background}")

    return ChainPlan(original_prompt=prompt, steps=tuple(steps), planner_model="mock-template-planner")


def mock_planner_reply(user_prompt: str) -> str:
    """Canned deterministic reply of the mock text backend."""
    try:
        plan = template_plan(user_prompt)
    except GrammarError:
        return "I could not produce a step-by-step decomposition for that caption."
    return "Here is the decomposition plan.\n\n" + serialize_plan(plan)


# ---------------------------------------------------------------------------
# Decompose and validate
# ---------------------------------------------------------------------------

FORMAT_REMINDER = (
    "\n\nReminder: reply with exactly one fenced `coig-plan` block containing "
    "the key-sorted JSON plan document and nothing else inside the fence."
)


def decompose(
    prompt: str,
    config: BackendConfig,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> ChainPlan:
    if not prompt:
        raise PreconditionViolated("prompt must be non-empty")
    system = csp_system_prompt()
    reply = llm_complete(system, prompt, config)
    try:
        plan = parse_planner_output(reply)
    except PlannerOutputError:
        reply = llm_complete(system + FORMAT_REMINDER, prompt, config)
        plan = parse_planner_output(reply)
    if len(plan.steps) > max_steps:
        raise PlannerOutputError(f"plan has {len(plan.steps)} steps, cap is {max_steps}")
    return replace(
        plan,
        planner_model=plan.planner_model or (config.model_name or "mock-template-planner"),
        created_at=datetime.now(timezone.utc).isoformat(),
    )


def _action_entity_ids(action: str) -> list[str]:
    seen: list[str] = []
    for m in _ENTITY_ID_RE.findall(action):
        if m not in seen:
            seen.append(m)
    return seen


def validate_plan(plan: ChainPlan) -> list[PlanViolation]:
    """Check the four decomposition rules; violations are data, not errors."""
    violations: list[PlanViolation] = []

    for pos, step in enumerate(plan.steps, start=1):
        if step.index != pos:
            violations.append(PlanViolation(pos, "malformed", f"index {step.index} at position {pos}"))
        if step.kind not in STEP_KINDS:
            violations.append(PlanViolation(pos, "malformed", f"unknown step kind {step.kind!r}"))
        if not step.step_action.strip():
            violations.append(PlanViolation(pos, "malformed", "empty step action"))

    if plan.steps and plan.steps[0].kind not in FOUNDATIONAL_KINDS and plan.steps[0].kind in STEP_KINDS:
        violations.append(
            PlanViolation(1, "missing_foundation", "step 1 must lay out the scene or its background")
        )

    finalized: set[str] = set()
    for step in plan.steps:
        ids = _action_entity_ids(step.step_action)
        if step.kind == "entity_detail":
            if step.target_entity is None or len(ids) != 1 or ids[0] != step.target_entity:
                violations.append(
                    PlanViolation(
                        step.index,
                        "multi_entity_step",
                        f"detail step must address exactly one entity, found {ids}",
                    )
                )
        elif step.kind == "interaction":
            if step.target_entity is None or not ids or ids[0] != step.target_entity or len(ids) > 2:
                violations.append(
                    PlanViolation(
                        step.index,
                        "multi_entity_step",
                        f"interaction step must act from exactly one entity, found {ids}",
                    )
                )

        if step.kind != "correction":
            if "Delete " in step.step_action:
                violations.append(
                    PlanViolation(step.index, "destructive_edit", "delete outside a correction step")
                )
            if step.kind == "entity_detail" and step.target_entity in finalized:
                violations.append(
                    PlanViolation(
                        step.index,
                        "destructive_edit",
                        f"re-details finalized entity {step.target_entity}",
                    )
                )

        if step.kind == "entity_detail" and step.target_entity:
            finalized.add(step.target_entity)

        if not step.final_goal or step.final_goal != plan.original_prompt:
            violations.append(
                PlanViolation(step.index, "missing_final_goal", "step does not carry the original caption")
            )

    return violations
