"""Benchmark tooling: entity-collapse prompt generation, the 7-point
visual-census scorer, and generic QA-template scoring for compositionality
prompt files.

The entity-collapse suite procedurally builds prompts that force four
same-class entities with distinct attributes and two pairwise interactions,
the construction most prone to merge, attribute swap, and homogenization
failures. Scoring credits one point for the correct entity count, up to four
for attribute binding (maximum one-to-one matching between prompted
attributes and distinct detected entities, so a single entity hoarding
attributes earns at most one credit), and up to two for interactions realized
between two distinct detected entities.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import random
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

from .backends import BackendProfile, mllm_answer, mllm_census, t2i_generate
from .census import CensusReport
from .errors import CoigError, PreconditionViolated, SchemaError, VocabTooSmall
from .captions import pluralize
from .executor import Executor
from .planner import decompose
from .qa import attribute_question, presence_question
from .scene import ImageArtifact
from .store import RunStore

logger = logging.getLogger(__name__)

EC_ENTITY_COUNT = 4

EC_TEMPLATE = (
    "Four {jobs} are in a room. "
    "The first is {a1} and is {i1} the second, who is {a2}. "
    "The third is {a3} and is {i2} the fourth, who is {a4}."
)


@dataclass(frozen=True)
class ECVocab:
    jobs: tuple[str, ...]
    attributes: tuple[str, ...]
    interactions: tuple[str, ...]

    def validate(self) -> None:
        for name, items, need in (
            ("jobs", self.jobs, 1),
            ("attributes", self.attributes, 4),
            ("interactions", self.interactions, 2),
        ):
            if len(items) < need:
                raise VocabTooSmall(f"{name} needs at least {need} items, has {len(items)}")
            if len(set(items)) != len(items):
                raise VocabTooSmall(f"{name} contains duplicates")

    @classmethod
    def default(cls) -> "ECVocab":
        raw = json.loads(resources.files("coig.assets").joinpath("ec_vocab.json").read_text())
        return cls(
            jobs=tuple(raw["jobs"]),
            attributes=tuple(raw["attributes"]),
            interactions=tuple(raw["interactions"]),
        )


@dataclass(frozen=True)
class ECPrompt:
    id: int
    job: str
    attributes: tuple[str, str, str, str]
    interactions: tuple[str, str]
    text: str
    expected_entity_count: int = EC_ENTITY_COUNT

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "job": self.job,
            "attributes": list(self.attributes),
            "interactions": list(self.interactions),
            "text": self.text,
            "expected_entity_count": self.expected_entity_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ECPrompt":
        return cls(
            id=int(d["id"]),
            job=d["job"],
            attributes=tuple(d["attributes"]),
            interactions=tuple(d["interactions"]),
            text=d["text"],
            expected_entity_count=int(d.get("expected_entity_count", EC_ENTITY_COUNT)),
        )


def generate_ec_prompts(vocab: ECVocab, count: int, seed: int) -> list[ECPrompt]:
    vocab.validate()
    if count < 1:
        raise PreconditionViolated("count must be >= 1")
    rng = random.Random(seed)
    prompts = []
    for i in range(1, count + 1):
        job = rng.choice(vocab.jobs)
        attrs = tuple(rng.sample(vocab.attributes, 4))
        inters = tuple(rng.sample(vocab.interactions, 2))
        text = EC_TEMPLATE.format(
            jobs=pluralize(job), a1=attrs[0], a2=attrs[1], a3=attrs[2], a4=attrs[3],
            i1=inters[0], i2=inters[1],
        )
        prompts.append(ECPrompt(id=i, job=job, attributes=attrs, interactions=inters, text=text))
    return prompts


def prompts_to_jsonl(prompts: list[ECPrompt]) -> str:
    return "".join(json.dumps(p.to_dict(), sort_keys=True) + "\n" for p in prompts)


def prompts_from_jsonl(text: str) -> list[ECPrompt]:
    return [ECPrompt.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ECScore:
    entity_count: int
    attribute_binding: int
    interaction: int

    @property
    def total(self) -> int:
        return self.entity_count + self.attribute_binding + self.interaction

    def to_dict(self) -> dict:
        return {
            "entity_count": self.entity_count,
            "attribute_binding": self.attribute_binding,
            "interaction": self.interaction,
            "total": self.total,
        }


def _norm(s: str) -> str:
    return s.strip().lower()


def _max_matching(adjacency: list[set[int]], n_right: int) -> int:
    """Maximum bipartite matching via augmenting paths."""
    match_right: dict[int, int] = {}

    def augment(left: int, visited: set[int]) -> bool:
        for right in adjacency[left]:
            if right in visited:
                continue
            visited.add(right)
            if right not in match_right or augment(match_right[right], visited):
                match_right[right] = left
                return True
        return False

    count = 0
    for left in range(len(adjacency)):
        if augment(left, set()):
            count += 1
    return count


def score_ec(census: CensusReport, prompt: ECPrompt) -> ECScore:
    job = _norm(prompt.job)
    entries = list(census.entries)
    same_class = [e for e in entries if _norm(e.cls) == job]
    entity_count = 1 if len(same_class) == prompt.expected_entity_count else 0

    adjacency = []
    for attr in prompt.attributes:
        want = _norm(attr)
        adjacency.append(
            {j for j, e in enumerate(entries) if any(_norm(a) == want for a in e.attributes)}
        )
    attribute_binding = _max_matching(adjacency, len(entries))

    ids = census.ids()
    interaction = 0
    for verb in prompt.interactions:
        want = _norm(verb)
        for e in entries:
            hit = any(
                _norm(v) == want and t is not None and t != e.census_id and t in ids
                for v, t in e.interactions
            )
            if hit:
                interaction += 1
                break

    return ECScore(entity_count=entity_count, attribute_binding=attribute_binding, interaction=interaction)


# ---------------------------------------------------------------------------
# Batch runs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ECScorecard:
    pipeline: str
    rows: tuple[dict, ...]  # {"id", "entity_count", ..., "total"} or {"id", "error"}

    def scored(self) -> list[dict]:
        return [r for r in self.rows if "error" not in r]

    def mean(self, component: str) -> float:
        rows = self.scored()
        if not rows:
            return 0.0
        return sum(r[component] for r in rows) / len(rows)

    def to_dict(self) -> dict:
        return {
            "pipeline": self.pipeline,
            "rows": list(self.rows),
            "means": {
                c: self.mean(c)
                for c in ("entity_count", "attribute_binding", "interaction", "total")
            },
        }

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out)
        w.writerow(["component", "max", "mean"])
        w.writerow(["entity_count", 1, self.mean("entity_count")])
        w.writerow(["attribute_binding", 4, self.mean("attribute_binding")])
        w.writerow(["interaction", 2, self.mean("interaction")])
        w.writerow(["total", 7, self.mean("total")])
        return out.getvalue()


def _final_artifact(store: RunStore, profile: BackendProfile, prompt_text: str) -> ImageArtifact:
    plan = decompose(prompt_text, profile.llm)
    executor = Executor(store=store, profile=profile)
    run = executor.start_run(plan)
    run = executor.run_to_completion(run)
    artifact_id = run.final_artifact_id()
    if run.status != "completed" or artifact_id is None:
        raise CoigError(f"chain run {run.run_id} ended {run.status}")
    return store.get_artifact(run, artifact_id)


def run_ec_benchmark(
    prompts: list[ECPrompt],
    pipeline: str,
    profile: BackendProfile,
    store: RunStore,
) -> ECScorecard:
    if pipeline not in ("coig", "single_pass"):
        raise PreconditionViolated(f"unknown pipeline {pipeline!r}")
    rows = []
    for prompt in prompts:
        try:
            if pipeline == "coig":
                artifact = _final_artifact(store, profile, prompt.text)
            else:
                artifact = t2i_generate(prompt.text, profile.t2i)
            census = mllm_census(artifact, profile.mllm)
            score = score_ec(census, prompt)
            rows.append({"id": prompt.id, **score.to_dict()})
        except CoigError as exc:
            logger.warning("prompt %d failed: %s", prompt.id, exc)
            rows.append({"id": prompt.id, "error": f"{type(exc).__name__}: {exc}"})
    return ECScorecard(pipeline=pipeline, rows=tuple(rows))


# ---------------------------------------------------------------------------
# Generic QA scoring
# ---------------------------------------------------------------------------

QA_BENCHMARKS = ("geneval_style", "compbench_style", "conceptmix_style")


@dataclass(frozen=True)
class QAItem:
    question: str
    expected: str = "yes"

    def to_dict(self) -> dict:
        return {"question": self.question, "expected": self.expected}


@dataclass(frozen=True)
class QAScore:
    fraction: float
    all_yes: bool
    answered: int
    abstained: int

    def to_dict(self) -> dict:
        return {
            "fraction": self.fraction,
            "all_yes": self.all_yes,
            "answered": self.answered,
            "abstained": self.abstained,
        }


def build_qa(record: dict, benchmark: str) -> list[QAItem]:
    if benchmark not in QA_BENCHMARKS:
        raise SchemaError(f"unknown benchmark style {benchmark!r}")
    if not isinstance(record, dict):
        raise SchemaError("prompt record must be an object")

    if benchmark == "conceptmix_style":
        questions = record.get("questions")
        if not isinstance(questions, list) or not all(isinstance(q, str) for q in questions):
            raise SchemaError("conceptmix-style records must carry a 'questions' list")
        return [QAItem(question=q) for q in questions]

    objects = record.get("objects")
    if not isinstance(objects, list) or not objects:
        raise SchemaError("record must carry a non-empty 'objects' list")
    items: list[QAItem] = []
    for obj in objects:
        if not isinstance(obj, dict) or not obj.get("class"):
            raise SchemaError(f"malformed object record: {obj!r}")
        cls = str(obj["class"])
        items.append(QAItem(question=presence_question(cls)))
        for attr in ("color", "shape", "texture", "position"):
            if obj.get(attr):
                items.append(QAItem(question=attribute_question(cls, str(obj[attr]), attr)))
        if obj.get("count"):
            items.append(QAItem(question=attribute_question(cls, str(obj["count"]), "count")))
    return items


def score_qa(image: ImageArtifact, items: list[QAItem], mllm_config) -> QAScore:
    if not items:
        raise PreconditionViolated("no QA items to score")
    yes = answered = abstained = 0
    for item in items:
        try:
            answer = mllm_answer(image, item.question, mllm_config)
        except CoigError as exc:
            logger.warning("QA item %r abstained: %s", item.question, exc)
            abstained += 1
            continue
        answered += 1
        if answer == item.expected:
            yes += 1
    fraction = yes / answered if answered else 0.0
    return QAScore(
        fraction=fraction,
        all_yes=(answered > 0 and yes == answered and abstained == 0),
        answered=answered,
        abstained=abstained,
    )


@dataclass(frozen=True)
class BenchmarkScorecard:
    benchmark: str
    rows: tuple[dict, ...]  # {"id", "group", "fraction", "all_yes"} or {"id", "error"}

    def scored(self) -> list[dict]:
        return [r for r in self.rows if "error" not in r]

    def by_group(self) -> dict[str, float]:
        groups: dict[str, list[float]] = {}
        for r in self.scored():
            groups.setdefault(str(r["group"]), []).append(r["fraction"])
        return {g: sum(v) / len(v) for g, v in sorted(groups.items())}

    def overall(self) -> float:
        rows = self.scored()
        return sum(r["fraction"] for r in rows) / len(rows) if rows else 0.0

    def to_dict(self) -> dict:
        return {
            "benchmark": self.benchmark,
            "rows": list(self.rows),
            "per_group": self.by_group(),
            "overall": self.overall(),
        }


def run_qa_benchmark(
    records: list[dict],
    benchmark: str,
    pipeline: str,
    profile: BackendProfile,
    store: RunStore,
) -> BenchmarkScorecard:
    if pipeline not in ("coig", "single_pass"):
        raise PreconditionViolated(f"unknown pipeline {pipeline!r}")
    rows = []
    for i, record in enumerate(records):
        rid = record.get("id", i)
        try:
            items = build_qa(record, benchmark)
            prompt_text = record.get("prompt")
            if not prompt_text:
                raise SchemaError("record carries no 'prompt'")
            if pipeline == "coig":
                artifact = _final_artifact(store, profile, prompt_text)
            else:
                artifact = t2i_generate(prompt_text, profile.t2i)
            score = score_qa(artifact, items, profile.mllm)
            rows.append({
                "id": rid,
                "group": record.get("group", record.get("k", "all")),
                "fraction": score.fraction,
                "all_yes": score.all_yes,
            })
        except CoigError as exc:
            logger.warning("record %s failed: %s", rid, exc)
            rows.append({"id": rid, "error": f"{type(exc).__name__}: {exc}"})
    return BenchmarkScorecard(benchmark=benchmark, rows=tuple(rows))
