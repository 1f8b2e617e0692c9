"""Visual census: strict enumeration of visibly present entities.

The census is the structured reply the multimodal evaluator is instructed to
emit: every unambiguously visible entity gets a fresh identifier (P1, P2, ...)
and only attributes/interactions actually rendered are listed. The mock
backend reads it straight off the scene document; live backends must return
JSON conforming to this schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .errors import CensusParseError
from .scene import SceneDocument


@dataclass(frozen=True)
class CensusEntry:
    census_id: str
    cls: str
    attributes: tuple[str, ...] = ()
    interactions: tuple[tuple[str, Optional[str]], ...] = ()

    def to_dict(self) -> dict:
        return {
            "census_id": self.census_id,
            "class": self.cls,
            "attributes": list(self.attributes),
            "interactions": [
                {"verb": v, "target_census_id": t} for v, t in self.interactions
            ],
        }


@dataclass(frozen=True)
class CensusReport:
    entries: tuple[CensusEntry, ...] = ()

    def ids(self) -> set[str]:
        return {e.census_id for e in self.entries}

    def to_dict(self) -> dict:
        return {"entries": [e.to_dict() for e in self.entries]}

    @classmethod
    def from_dict(cls, d: dict) -> "CensusReport":
        if not isinstance(d, dict) or not isinstance(d.get("entries"), list):
            raise CensusParseError("census must be an object with an 'entries' list")
        entries = []
        for raw in d["entries"]:
            if not isinstance(raw, dict) or "census_id" not in raw or "class" not in raw:
                raise CensusParseError(f"malformed census entry: {raw!r}")
            inters = []
            for i in raw.get("interactions", []):
                if not isinstance(i, dict) or "verb" not in i:
                    raise CensusParseError(f"malformed interaction: {i!r}")
                inters.append((i["verb"], i.get("target_census_id")))
            entries.append(
                CensusEntry(
                    census_id=str(raw["census_id"]),
                    cls=str(raw["class"]),
                    attributes=tuple(str(a) for a in raw.get("attributes", [])),
                    interactions=tuple(inters),
                )
            )
        report = cls(entries=tuple(entries))
        ids = [e.census_id for e in report.entries]
        if len(ids) != len(set(ids)):
            raise CensusParseError("census ids must be unique")
        known = set(ids)
        for e in report.entries:
            for _, target in e.interactions:
                if target is not None and target not in known:
                    raise CensusParseError(f"interaction target {target!r} not in census")
        return report

    @classmethod
    def from_json_text(cls, text: str) -> "CensusReport":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CensusParseError(f"census reply is not valid JSON: {exc}") from exc
        return cls.from_dict(payload)


def census_of_scene(scene: SceneDocument) -> CensusReport:
    """Deterministic census: non-placeholder entities in document order.

    Attributes are listed only when set (the visual evidence constraint);
    interaction targets that are not themselves visible map to null.
    """
    visible = [e for e in scene.entities if not e.placeholder]
    id_map = {e.id: f"P{k}" for k, e in enumerate(visible, start=1)}
    entries = []
    for e in visible:
        attrs = tuple(v for v in (e.color, e.shape, e.texture) if v is not None)
        inters = tuple(
            (i.verb, id_map.get(i.target_entity_id) if i.target_entity_id else None)
            for i in e.interactions
        )
        entries.append(
            CensusEntry(census_id=id_map[e.id], cls=e.cls, attributes=attrs, interactions=inters)
        )
    return CensusReport(entries=tuple(entries))
