"""Deterministic caption parsing for the mock planner and mock backend.

Two caption families are understood:

* simple compositional captions, e.g.
  ``a red apple and a blue bowl on a table`` or
  ``a red apple left of a blue bowl``;
* entity-collapse captions rendered by the benchmark generator, e.g.
  ``Four airmen are in a room. The first is smiling and glaring at the
  second, who is holding a bottle. ...``.

Both parse into the same intermediate description (entities with typed
attributes, pairwise interactions, optional background), which the template
planner turns into a step plan and the mock image backend can render in a
single pass.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .errors import GrammarError
from .scene import (
    Interaction,
    POSITIONS,
    SceneDocument,
    SceneEntity,
)

COLORS = (
    "red", "blue", "green", "yellow", "purple", "orange", "pink", "black",
    "white", "brown", "cyan", "magenta", "teal", "golden", "silver", "beige",
)

TEXTURES = (
    "glossy", "metallic", "wooden", "fluffy", "furry", "fuzzy", "striped",
    "spotted", "shiny", "matte", "velvet", "leather", "rough", "smooth",
)

SHAPES = (
    "round", "square", "cubic", "triangular", "oval", "rectangular",
    "star-shaped", "heart-shaped", "spherical", "flat",
)

# order in which unpositioned entities are laid out
_DEFAULT_POSITIONS = ("left", "center", "right", "top", "bottom")

_ARTICLES = ("a", "an", "the", "one")


@dataclass
class CaptionEntity:
    cls: str
    attributes: dict[str, str] = field(default_factory=dict)  # color/shape/texture
    position: Optional[str] = None


@dataclass
class ParsedCaption:
    entities: list[CaptionEntity] = field(default_factory=list)
    # (source_index, verb, target_index), zero-based entity indices
    interactions: list[tuple[int, str, int]] = field(default_factory=list)
    background: Optional[str] = None

    def entity_id(self, index: int) -> str:
        return f"e{index + 1}"


def pluralize(noun: str) -> str:
    if noun.endswith("man"):
        return noun[:-3] + "men"
    if re.search(r"(s|x|ch|sh)$", noun):
        return noun + "es"
    if re.search(r"[^aeiou]y$", noun):
        return noun[:-1] + "ies"
    return noun + "s"


def singularize(noun: str) -> str:
    if noun.endswith("men"):
        return noun[:-3] + "man"
    if noun.endswith("ies"):
        return noun[:-3] + "y"
    if re.search(r"(sses|xes|ches|shes)$", noun):
        return noun[:-2]
    if noun.endswith("s"):
        return noun[:-1]
    return noun


def _parse_noun_phrase(text: str) -> CaptionEntity:
    words = text.strip().split()
    # entities must be article-introduced noun phrases; this keeps the mock
    # caption language from swallowing arbitrary prose
    if not words or words[0].lower() not in _ARTICLES:
        raise GrammarError(f"not an article-introduced noun phrase: {text!r}")
    words = words[1:]
    attrs: dict[str, str] = {}
    rest = []
    for i, w in enumerate(words):
        lw = w.lower()
        if lw in COLORS and "color" not in attrs and not rest:
            attrs["color"] = lw
        elif lw in TEXTURES and "texture" not in attrs and not rest:
            attrs["texture"] = lw
        elif lw in SHAPES and "shape" not in attrs and not rest:
            attrs["shape"] = lw
        else:
            rest.append(lw)
    if not rest:
        raise GrammarError(f"noun phrase has no head noun: {text!r}")
    return CaptionEntity(cls=" ".join(rest), attributes=attrs)


_EC_RE = re.compile(
    r"^Four (?P<job>.+?) are in a room\. "
    r"The first is (?P<a1>.+?) and is (?P<i1>.+?) the second, who is (?P<a2>.+?)\. "
    r"The third is (?P<a3>.+?) and is (?P<i2>.+?) the fourth, who is (?P<a4>.+?)\.$"
)

_RELATIONS = {
    "left of": ("left", "right"),
    "right of": ("right", "left"),
    "above": ("top", "bottom"),
    "below": ("bottom", "top"),
}

_AT_RE = re.compile(r"^(?P<np>.+?)\s+at\s+(?P<pos>" + "|".join(POSITIONS) + r")$")


def parse_ec_caption(text: str) -> Optional[ParsedCaption]:
    m = _EC_RE.match(text.strip())
    if not m:
        return None
    job = singularize(m["job"].strip())
    parsed = ParsedCaption()
    for i, key in enumerate(("a1", "a2", "a3", "a4")):
        parsed.entities.append(
            CaptionEntity(
                cls=job,
                attributes={"texture": m[key].strip()},
                position=_DEFAULT_POSITIONS[i],
            )
        )
    parsed.interactions = [(0, m["i1"].strip(), 1), (2, m["i2"].strip(), 3)]
    parsed.background = "room"
    return parsed


def parse_simple_caption(text: str) -> ParsedCaption:
    body = text.strip().rstrip(".")
    if not body:
        raise GrammarError("empty caption")

    background = None
    m = re.search(r"\s+(?:on|in)\s+(?:a|an|the)\s+(?P<bg>[\w -]+)$", body)
    if m:
        background = m["bg"].strip()
        body = body[: m.start()]

    parsed = ParsedCaption(background=background)

    # binary spatial relation: "<NP> left of <NP>" etc.
    for phrase, (pos_a, pos_b) in _RELATIONS.items():
        sep = f" {phrase} "
        if sep in body:
            left, right = body.split(sep, 1)
            ent_a = _parse_noun_phrase(left)
            ent_b = _parse_noun_phrase(right)
            ent_a.position, ent_b.position = pos_a, pos_b
            parsed.entities = [ent_a, ent_b]
            return parsed

    chunks = re.split(r",\s+and\s+|\s+and\s+|,\s+", body)
    for i, chunk in enumerate(chunks):
        pos = None
        m = _AT_RE.match(chunk.strip())
        if m:
            chunk, pos = m["np"], m["pos"]
        ent = _parse_noun_phrase(chunk)
        ent.position = pos
        parsed.entities.append(ent)

    classes = [e.cls for e in parsed.entities]
    if len(classes) != len(set(classes)):
        raise GrammarError("simple captions require distinct entity classes")
    for i, ent in enumerate(parsed.entities):
        if ent.position is None:
            ent.position = _DEFAULT_POSITIONS[i % len(_DEFAULT_POSITIONS)]
    return parsed


def parse_caption(text: str) -> ParsedCaption:
    """Parse either caption family; raises GrammarError when neither fits."""
    ec = parse_ec_caption(text)
    if ec is not None:
        return ec
    return parse_simple_caption(text)


def render_full_scene(parsed: ParsedCaption) -> SceneDocument:
    """Render a caption in one pass: all entities detailed and locked.

    Entities with no explicit attribute get shape = their class noun, the
    same default the template planner uses for its detailing step.
    """
    entities = []
    inter_map: dict[int, list[Interaction]] = {}
    for src, verb, dst in parsed.interactions:
        inter_map.setdefault(src, []).append(
            Interaction(verb=verb, target_entity_id=parsed.entity_id(dst))
        )
    for i, ent in enumerate(parsed.entities):
        attrs = dict(ent.attributes)
        if not attrs:
            attrs["shape"] = ent.cls
        entities.append(
            SceneEntity(
                id=parsed.entity_id(i),
                cls=ent.cls,
                position=ent.position or "center",
                color=attrs.get("color"),
                shape=attrs.get("shape"),
                texture=attrs.get("texture"),
                interactions=tuple(inter_map.get(i, ())),
                locked=True,
                placeholder=False,
            )
        )
    return SceneDocument(entities=tuple(entities), background=parsed.background)
