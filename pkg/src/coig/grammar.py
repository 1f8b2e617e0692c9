"""Constrained action grammar executed by the mock image backend.

Line- or period-separated actions:

    Add placeholder <id>: <class> at <position>
    Detail <id>: <key>=<value>{, <key>=<value>}     (keys: color, shape, texture)
    Interact <id>: <verb> [<target_id>]
    Delete <id>
    Fill background: <text>

Applying actions is pure: a new SceneDocument is returned, and entities not
explicitly targeted are carried over untouched — the structural enforcement
of the compositional lock.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Optional, Union

from .errors import GrammarError, LockedEntityMutation, UnknownEntity
from .scene import PLACEHOLDER_COLOR, POSITIONS, Interaction, SceneDocument, SceneEntity

ATTR_KEYS = ("color", "shape", "texture")

_ID = r"[A-Za-z][\w-]*"

_ADD_RE = re.compile(
    rf"^Add placeholder (?P<id>{_ID}): (?P<cls>[\w -]+?) at (?P<pos>{'|'.join(POSITIONS)})$"
)
_DETAIL_RE = re.compile(rf"^Detail (?P<id>{_ID}): (?P<attrs>.+)$")
_INTERACT_RE = re.compile(rf"^Interact (?P<id>{_ID}): (?P<rest>.+)$")
_DELETE_RE = re.compile(rf"^Delete (?P<id>{_ID})$")
_FILL_RE = re.compile(r"^Fill background: (?P<text>.+)$")
_TARGET_RE = re.compile(rf"^(?P<verb>.+?)\s+(?P<target>e\d+)$")


@dataclass(frozen=True)
class AddPlaceholder:
    entity_id: str
    cls: str
    position: str


@dataclass(frozen=True)
class Detail:
    entity_id: str
    attrs: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class Interact:
    entity_id: str
    verb: str
    target_id: Optional[str]


@dataclass(frozen=True)
class Delete:
    entity_id: str


@dataclass(frozen=True)
class FillBackground:
    text: str


Action = Union[AddPlaceholder, Detail, Interact, Delete, FillBackground]


def _split_statements(text: str) -> list[str]:
    parts: list[str] = []
    for line in text.splitlines():
        parts.extend(p.strip() for p in line.split(". "))
    return [p.rstrip(".").strip() for p in parts if p.rstrip(".").strip()]


def parse_action(statement: str) -> Action:
    m = _ADD_RE.match(statement)
    if m:
        return AddPlaceholder(entity_id=m["id"], cls=m["cls"].strip().lower(), position=m["pos"])
    m = _DETAIL_RE.match(statement)
    if m:
        attrs = []
        for pair in m["attrs"].split(","):
            if "=" not in pair:
                raise GrammarError(f"malformed attribute pair: {pair.strip()!r}")
            key, value = pair.split("=", 1)
            key, value = key.strip().lower(), value.strip()
            if key not in ATTR_KEYS:
                raise GrammarError(f"unknown attribute key {key!r}")
            if not value:
                raise GrammarError(f"empty value for {key!r}")
            attrs.append((key, value))
        if not attrs:
            raise GrammarError("Detail action carries no attributes")
        return Detail(entity_id=m["id"], attrs=tuple(attrs))
    m = _INTERACT_RE.match(statement)
    if m:
        rest = m["rest"].strip()
        tm = _TARGET_RE.match(rest)
        if tm:
            return Interact(entity_id=m["id"], verb=tm["verb"].strip(), target_id=tm["target"])
        return Interact(entity_id=m["id"], verb=rest, target_id=None)
    m = _DELETE_RE.match(statement)
    if m:
        return Delete(entity_id=m["id"])
    m = _FILL_RE.match(statement)
    if m:
        return FillBackground(text=m["text"].strip())
    raise GrammarError(f"unparseable action: {statement!r}")


def parse_actions(text: str) -> list[Action]:
    statements = _split_statements(text)
    if not statements:
        raise GrammarError("no actions found")
    return [parse_action(s) for s in statements]


def apply_action(scene: SceneDocument, action: Action) -> SceneDocument:
    if isinstance(action, AddPlaceholder):
        existing = scene.get(action.entity_id)
        if existing is not None:
            if existing.locked:
                raise LockedEntityMutation(
                    f"entity {action.entity_id} is locked and not targeted for edit"
                )
            raise GrammarError(f"duplicate entity id {action.entity_id}")
        entity = SceneEntity(
            id=action.entity_id,
            cls=action.cls,
            position=action.position,
            color=PLACEHOLDER_COLOR,
            placeholder=True,
        )
        return scene.with_entity(entity)

    if isinstance(action, Detail):
        entity = scene.get(action.entity_id)
        if entity is None:
            raise UnknownEntity(f"no entity {action.entity_id} in scene")
        updates = dict(action.attrs)
        return scene.with_entity(
            replace(
                entity,
                color=updates.get("color", entity.color),
                shape=updates.get("shape", entity.shape),
                texture=updates.get("texture", entity.texture),
                placeholder=False,
                locked=True,
            )
        )

    if isinstance(action, Interact):
        entity = scene.get(action.entity_id)
        if entity is None:
            raise UnknownEntity(f"no entity {action.entity_id} in scene")
        if action.target_id is not None and scene.get(action.target_id) is None:
            raise UnknownEntity(f"no interaction target {action.target_id} in scene")
        interaction = Interaction(verb=action.verb, target_entity_id=action.target_id)
        return scene.with_entity(
            replace(
                entity,
                interactions=entity.interactions + (interaction,),
                placeholder=False,
                locked=True,
            )
        )

    if isinstance(action, Delete):
        if scene.get(action.entity_id) is None:
            raise UnknownEntity(f"no entity {action.entity_id} in scene")
        return scene.without_entity(action.entity_id)

    if isinstance(action, FillBackground):
        return replace(scene, background=action.text)

    raise GrammarError(f"unknown action {action!r}")


def apply_actions(scene: SceneDocument, actions: list[Action]) -> SceneDocument:
    for action in actions:
        scene = apply_action(scene, action)
    return scene
