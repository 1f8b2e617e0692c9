"""Shared generators for randomized corpora used across the tests."""

from __future__ import annotations

import random

from coig.captions import COLORS, SHAPES, TEXTURES
from coig.executor import Executor
from coig.planner import ChainPlan, template_plan

NOUNS = (
    "apple", "bowl", "dog", "cat", "car", "tree", "bird", "chair",
    "lamp", "boat", "fish", "book", "cup", "hat", "horse", "vase",
)

BACKGROUNDS = ("table", "beach", "street", "field", "desk", "meadow")


def random_caption(rng: random.Random, min_entities: int = 2, max_entities: int = 3) -> str:
    """Caption with distinct nouns and colors, e.g.
    'a red apple, a glossy blue bowl and a green dog on a table'."""
    k = rng.randint(min_entities, max_entities)
    nouns = rng.sample(NOUNS, k)
    colors = rng.sample(COLORS, k)
    phrases = []
    for noun, color in zip(nouns, colors):
        adjectives = [color]
        if rng.random() < 0.3:
            adjectives.insert(0, rng.choice(TEXTURES))
        if rng.random() < 0.2:
            adjectives.insert(0, rng.choice(SHAPES))
        phrases.append("a " + " ".join(adjectives) + " " + noun)
    if k == 1:
        body = phrases[0]
    else:
        body = ", ".join(phrases[:-1]) + " and " + phrases[-1]
    if rng.random() < 0.6:
        body += " on a " + rng.choice(BACKGROUNDS)
    return body


def random_plan(rng: random.Random, **kwargs) -> ChainPlan:
    return template_plan(random_caption(rng, **kwargs))


def completed_run(executor: Executor, plan: ChainPlan):
    run = executor.start_run(plan)
    return executor.run_to_completion(run)
