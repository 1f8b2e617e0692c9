from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from coig.backends import mock_profile
from coig.bench import (
    ECPrompt,
    ECScore,
    ECVocab,
    build_qa,
    generate_ec_prompts,
    prompts_from_jsonl,
    prompts_to_jsonl,
    run_ec_benchmark,
    run_qa_benchmark,
    score_ec,
    score_qa,
)
from coig.captions import parse_caption
from coig.census import CensusEntry, CensusReport
from coig.errors import PreconditionViolated, SchemaError, VocabTooSmall
from coig.scene import ImageArtifact, SceneDocument, SceneEntity

VOCAB = ECVocab.default()


def brute_force_binding(census: CensusReport, prompt: ECPrompt) -> int:
    """Exhaustive max one-to-one assignment of prompt attributes to entries."""
    entries = list(census.entries)
    exhibits = [
        {j for j, e in enumerate(entries)
         if any(a.strip().lower() == attr.strip().lower() for a in e.attributes)}
        for attr in prompt.attributes
    ]

    def best(i: int, used: frozenset) -> int:
        if i == len(exhibits):
            return 0
        score = best(i + 1, used)  # skip this attribute
        for j in exhibits[i] - used:
            score = max(score, 1 + best(i + 1, used | {j}))
        return score

    return best(0, frozenset())


def ec_prompt(job="chef", attrs=("smiling", "frowning", "waving", "nodding"),
              inters=("talking to", "glaring at")):
    return ECPrompt(id=1, job=job, attributes=tuple(attrs), interactions=tuple(inters),
                    text="unused")


def entry(cid, cls="chef", attrs=(), inters=()):
    return CensusEntry(census_id=cid, cls=cls, attributes=tuple(attrs),
                       interactions=tuple(inters))


class TestGenerator:
    def test_prompt_structure(self):
        prompts = generate_ec_prompts(VOCAB, 30, seed=7)
        assert len(prompts) == 30
        for p in prompts:
            assert len(set(p.attributes)) == 4
            assert len(set(p.interactions)) == 2
            assert p.expected_entity_count == 4
            parsed = parse_caption(p.text)
            assert len(parsed.entities) == 4
            assert all(e.cls == p.job for e in parsed.entities)

    def test_same_seed_byte_identical(self):
        a = prompts_to_jsonl(generate_ec_prompts(VOCAB, 20, seed=99))
        b = prompts_to_jsonl(generate_ec_prompts(VOCAB, 20, seed=99))
        assert a == b

    def test_different_seeds_differ(self):
        a = prompts_to_jsonl(generate_ec_prompts(VOCAB, 20, seed=1))
        b = prompts_to_jsonl(generate_ec_prompts(VOCAB, 20, seed=2))
        assert a != b

    def test_jsonl_round_trip(self):
        prompts = generate_ec_prompts(VOCAB, 10, seed=3)
        assert prompts_from_jsonl(prompts_to_jsonl(prompts)) == prompts

    def test_vocab_too_small(self):
        with pytest.raises(VocabTooSmall):
            ECVocab(jobs=("chef",), attributes=("a", "b", "c"), interactions=("x", "y")).validate()
        with pytest.raises(VocabTooSmall):
            ECVocab(jobs=("chef", "chef"), attributes=("a", "b", "c", "d"),
                    interactions=("x", "y")).validate()

    def test_count_must_be_positive(self):
        with pytest.raises(PreconditionViolated):
            generate_ec_prompts(VOCAB, 0, seed=1)


class TestScoreEC:
    def faithful_census(self):
        return CensusReport(entries=(
            entry("P1", attrs=["smiling"], inters=[("talking to", "P2")]),
            entry("P2", attrs=["frowning"]),
            entry("P3", attrs=["waving"], inters=[("glaring at", "P4")]),
            entry("P4", attrs=["nodding"]),
        ))

    def test_perfect_render_scores_seven(self):
        score = score_ec(self.faithful_census(), ec_prompt())
        assert score == ECScore(entity_count=1, attribute_binding=4, interaction=2)
        assert score.total == 7

    def test_merge_loses_count_and_binding(self):
        census = CensusReport(entries=(
            entry("P1", attrs=["smiling", "frowning"], inters=[("talking to", "P2")]),
            entry("P2", attrs=["waving"], inters=[("glaring at", "P1")]),
        ))
        score = score_ec(census, ec_prompt())
        assert score.entity_count == 0
        # two entries can exhibit at most two distinct attributes
        assert score.attribute_binding == 2
        assert score.interaction == 2

    def test_homogenization_binds_once(self):
        census = CensusReport(entries=tuple(
            entry(f"P{i}", attrs=["smiling"]) for i in range(1, 5)
        ))
        score = score_ec(census, ec_prompt())
        assert score.entity_count == 1
        assert score.attribute_binding == 1
        assert score.interaction == 0

    def test_hoarding_entity_credits_one(self):
        census = CensusReport(entries=(
            entry("P1", attrs=["smiling", "frowning", "waving", "nodding"]),
            entry("P2"), entry("P3"), entry("P4"),
        ))
        assert score_ec(census, ec_prompt()).attribute_binding == 1

    def test_self_interaction_not_credited(self):
        census = CensusReport(entries=(
            entry("P1", inters=[("talking to", "P1")]),
            entry("P2"),
        ))
        assert score_ec(census, ec_prompt()).interaction == 0

    def test_untargeted_interaction_not_credited(self):
        census = CensusReport(entries=(
            entry("P1", inters=[("talking to", None)]),
            entry("P2"),
        ))
        assert score_ec(census, ec_prompt()).interaction == 0

    def test_wrong_class_fails_count_only(self):
        census = CensusReport(entries=(
            entry("P1", cls="pilot", attrs=["smiling"]),
            entry("P2", cls="pilot", attrs=["frowning"]),
            entry("P3", cls="pilot", attrs=["waving"]),
            entry("P4", cls="pilot", attrs=["nodding"]),
        ))
        score = score_ec(census, ec_prompt())
        assert score.entity_count == 0
        assert score.attribute_binding == 4

    def test_matching_equals_brute_force_on_constructions(self, rng):
        prompt = ec_prompt()
        for _ in range(200):
            census = random_collapsed_census(rng, prompt)
            assert score_ec(census, prompt).attribute_binding == brute_force_binding(census, prompt)

    def test_bounds_and_total(self, rng):
        prompt = ec_prompt()
        for _ in range(100):
            score = score_ec(random_collapsed_census(rng, prompt), prompt)
            assert 0 <= score.entity_count <= 1
            assert 0 <= score.attribute_binding <= 4
            assert 0 <= score.interaction <= 2
            assert score.total == score.entity_count + score.attribute_binding + score.interaction


def random_collapsed_census(rng: random.Random, prompt: ECPrompt) -> CensusReport:
    """Censuses shaped like merge, swap-leak and homogenization failures."""
    mode = rng.choice(("faithful", "merge", "swap", "homogenize", "noise"))
    n = {"faithful": 4, "merge": rng.randint(1, 3), "swap": 4,
         "homogenize": 4, "noise": rng.randint(0, 6)}[mode]
    ids = [f"P{i}" for i in range(1, n + 1)]
    entries = []
    attrs = list(prompt.attributes)
    if mode == "swap":
        rng.shuffle(attrs)
    for i, cid in enumerate(ids):
        if mode == "faithful" or mode == "swap":
            own = [attrs[i]]
        elif mode == "merge":
            own = rng.sample(attrs, rng.randint(0, 4))
        elif mode == "homogenize":
            own = [attrs[0]]
        else:
            own = rng.sample(attrs, rng.randint(0, len(attrs)))
        inters = []
        if ids and rng.random() < 0.5:
            verb = rng.choice(prompt.interactions)
            target = rng.choice(ids + [None])
            inters.append((verb, target))
        entries.append(entry(cid, attrs=own, inters=inters))
    return CensusReport(entries=tuple(entries))


@settings(max_examples=60, deadline=None)
@given(st.randoms(use_true_random=False))
def test_matching_equals_brute_force_property(r):
    prompt = ec_prompt()
    census = random_collapsed_census(r, prompt)
    assert score_ec(census, prompt).attribute_binding == brute_force_binding(census, prompt)


class TestEndToEnd:
    def test_coig_pipeline_scores_full_marks(self, store):
        prompts = generate_ec_prompts(VOCAB, 8, seed=11)
        card = run_ec_benchmark(prompts, "coig", mock_profile(), store)
        assert card.mean("total") == 7.0
        assert len(card.scored()) == 8

    def test_single_pass_merge_fault_drops_entity_count(self, store):
        prompts = generate_ec_prompts(VOCAB, 8, seed=11)
        card = run_ec_benchmark(prompts, "single_pass", mock_profile(t2i_fault="merge"), store)
        assert card.mean("entity_count") == 0.0

    def test_backend_outage_recorded_not_raised(self, store):
        prompts = generate_ec_prompts(VOCAB, 3, seed=5)
        card = run_ec_benchmark(prompts, "single_pass", mock_profile(t2i_fault="down"), store)
        assert card.scored() == []
        assert all("error" in r for r in card.rows)

    def test_unknown_pipeline_rejected(self, store):
        with pytest.raises(PreconditionViolated):
            run_ec_benchmark([], "diffusion", mock_profile(), store)

    def test_csv_shape(self, store):
        prompts = generate_ec_prompts(VOCAB, 2, seed=5)
        card = run_ec_benchmark(prompts, "coig", mock_profile(), store)
        lines = card.to_csv().strip().splitlines()
        assert lines[0] == "component,max,mean"
        assert len(lines) == 5


class TestQA:
    def qa_artifact(self):
        return ImageArtifact.from_scene(SceneDocument(entities=(
            SceneEntity(id="e1", cls="apple", color="red", position="left"),
            SceneEntity(id="e2", cls="bowl", color="blue", position="right"),
        )))

    def test_build_qa_objects_record(self):
        record = {
            "prompt": "a red apple left of a blue bowl",
            "objects": [
                {"class": "apple", "color": "red", "position": "left"},
                {"class": "bowl", "color": "blue"},
            ],
        }
        items = build_qa(record, "geneval_style")
        assert len(items) == 5  # 2 presence + 3 attribute questions

    def test_build_qa_count(self):
        items = build_qa({"objects": [{"class": "dog", "count": 2}]}, "compbench_style")
        assert any("count" in i.question for i in items)

    def test_conceptmix_passthrough(self):
        items = build_qa({"questions": ["Is the apple present?"]}, "conceptmix_style")
        assert [i.question for i in items] == ["Is the apple present?"]

    def test_schema_errors(self):
        with pytest.raises(SchemaError):
            build_qa({"objects": []}, "geneval_style")
        with pytest.raises(SchemaError):
            build_qa({"objects": [{"color": "red"}]}, "geneval_style")
        with pytest.raises(SchemaError):
            build_qa({"questions": "not a list"}, "conceptmix_style")
        with pytest.raises(SchemaError):
            build_qa({}, "unknown_style")

    def test_score_qa_partial(self, profile):
        items = build_qa({"objects": [
            {"class": "apple", "color": "red"},
            {"class": "bowl", "color": "green"},  # wrong color in the record
        ]}, "geneval_style")
        score = score_qa(self.qa_artifact(), items, profile.mllm)
        assert score.fraction == 0.75
        assert not score.all_yes
        assert score.answered == 4 and score.abstained == 0

    def test_score_qa_abstention_excluded_from_denominator(self, profile):
        from coig.bench import QAItem
        items = [QAItem(question="Is the apple present?"),
                 QAItem(question="gibberish that cannot parse")]
        score = score_qa(self.qa_artifact(), items, profile.mllm)
        assert score.answered == 1 and score.abstained == 1
        assert score.fraction == 1.0
        assert not score.all_yes

    def test_score_qa_empty_rejected(self, profile):
        with pytest.raises(PreconditionViolated):
            score_qa(self.qa_artifact(), [], profile.mllm)

    def test_run_qa_benchmark_grouping(self, store, profile):
        records = [
            {"id": "a", "group": "k2", "prompt": "a red apple and a blue bowl",
             "objects": [{"class": "apple", "color": "red"}, {"class": "bowl", "color": "blue"}]},
            {"id": "b", "group": "k2", "prompt": "a green cat and a blue dog",
             "objects": [{"class": "cat", "color": "green"}, {"class": "dog", "color": "blue"}]},
        ]
        card = run_qa_benchmark(records, "geneval_style", "coig", profile, store)
        assert card.overall() == 1.0
        assert card.by_group() == {"k2": 1.0}
