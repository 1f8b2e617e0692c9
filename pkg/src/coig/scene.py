"""Structured scene documents and content-addressed image artifacts.

The deterministic mock backend renders scenes as structured documents instead
of pixels so every metric in the package has an exact oracle. Serialization is
canonical (key-sorted, fixed separators) so equal scenes hash identically.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Any, Optional

from .errors import PreconditionViolated

POSITIONS = ("left", "right", "top", "bottom", "center")

PLACEHOLDER_COLOR = "gray"

RASTER_PNG = "raster_png"
SCENE_DOCUMENT = "scene_document"


def canonical_json_bytes(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def content_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class Interaction:
    verb: str
    target_entity_id: Optional[str] = None

    def to_dict(self) -> dict:
        return {"verb": self.verb, "target_entity_id": self.target_entity_id}

    @classmethod
    def from_dict(cls, d: dict) -> "Interaction":
        return cls(verb=d["verb"], target_entity_id=d.get("target_entity_id"))


@dataclass(frozen=True)
class SceneEntity:
    id: str
    cls: str
    position: str = "center"
    color: Optional[str] = None
    shape: Optional[str] = None
    texture: Optional[str] = None
    interactions: tuple[Interaction, ...] = ()
    locked: bool = False
    placeholder: bool = False

    def __post_init__(self):
        if self.position not in POSITIONS:
            raise PreconditionViolated(f"unknown position {self.position!r}")
        if self.placeholder and (self.color != PLACEHOLDER_COLOR or self.texture is not None):
            raise PreconditionViolated("placeholders are gray and carry no texture")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "class": self.cls,
            "position": self.position,
            "color": self.color,
            "shape": self.shape,
            "texture": self.texture,
            "interactions": [i.to_dict() for i in self.interactions],
            "locked": self.locked,
            "placeholder": self.placeholder,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneEntity":
        return cls(
            id=d["id"],
            cls=d["class"],
            position=d["position"],
            color=d.get("color"),
            shape=d.get("shape"),
            texture=d.get("texture"),
            interactions=tuple(Interaction.from_dict(i) for i in d.get("interactions", [])),
            locked=d.get("locked", False),
            placeholder=d.get("placeholder", False),
        )

    def attribute(self, key: str) -> Optional[str]:
        if key not in ("color", "shape", "texture"):
            raise PreconditionViolated(f"unknown attribute key {key!r}")
        return getattr(self, key)


@dataclass(frozen=True)
class SceneDocument:
    entities: tuple[SceneEntity, ...] = ()
    background: Optional[str] = None

    def __post_init__(self):
        ids = [e.id for e in self.entities]
        if len(ids) != len(set(ids)):
            raise PreconditionViolated("entity ids must be unique")
        known = set(ids)
        for e in self.entities:
            for i in e.interactions:
                if i.target_entity_id is not None and i.target_entity_id not in known:
                    raise PreconditionViolated(
                        f"interaction on {e.id} references unknown entity {i.target_entity_id}"
                    )

    def get(self, entity_id: str) -> Optional[SceneEntity]:
        for e in self.entities:
            if e.id == entity_id:
                return e
        return None

    def with_entity(self, entity: SceneEntity) -> "SceneDocument":
        """Replace (by id) or append an entity."""
        out, seen = [], False
        for e in self.entities:
            if e.id == entity.id:
                out.append(entity)
                seen = True
            else:
                out.append(e)
        if not seen:
            out.append(entity)
        return replace(self, entities=tuple(out))

    def without_entity(self, entity_id: str) -> "SceneDocument":
        kept = tuple(e for e in self.entities if e.id != entity_id)
        # drop dangling interaction targets
        kept = tuple(
            replace(
                e,
                interactions=tuple(
                    i for i in e.interactions if i.target_entity_id != entity_id
                ),
            )
            for e in kept
        )
        return replace(self, entities=kept)

    def to_dict(self) -> dict:
        return {
            "entities": [e.to_dict() for e in self.entities],
            "background": self.background,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneDocument":
        return cls(
            entities=tuple(SceneEntity.from_dict(e) for e in d.get("entities", [])),
            background=d.get("background"),
        )

    def to_bytes(self) -> bytes:
        return canonical_json_bytes(self.to_dict())

    @classmethod
    def from_bytes(cls, data: bytes) -> "SceneDocument":
        return cls.from_dict(json.loads(data.decode("utf-8")))


@dataclass(frozen=True)
class ImageArtifact:
    id: str
    media_kind: str
    data: bytes = field(repr=False)
    width: Optional[int] = None
    height: Optional[int] = None

    def __post_init__(self):
        if self.media_kind not in (RASTER_PNG, SCENE_DOCUMENT):
            raise PreconditionViolated(f"unknown media kind {self.media_kind!r}")
        if self.id != content_hash(self.data):
            raise PreconditionViolated("artifact id does not match content hash")

    @classmethod
    def from_scene(cls, scene: SceneDocument) -> "ImageArtifact":
        data = scene.to_bytes()
        return cls(id=content_hash(data), media_kind=SCENE_DOCUMENT, data=data)

    @classmethod
    def from_png(cls, data: bytes, width: int, height: int) -> "ImageArtifact":
        return cls(id=content_hash(data), media_kind=RASTER_PNG, data=data, width=width, height=height)

    def scene(self) -> SceneDocument:
        if self.media_kind != SCENE_DOCUMENT:
            raise PreconditionViolated("artifact is not a scene document")
        return SceneDocument.from_bytes(self.data)


def blank_artifact() -> ImageArtifact:
    """Empty-scene sentinel used when no prior image exists (no step zero)."""
    return ImageArtifact.from_scene(SceneDocument())
