"""QA template grammar: building and answering yes/no verification questions.

Questions are one or more template sentences, e.g.
``Is the apple present? Is it red in color?`` or
``Is the bowl blue in color?``. A multi-sentence question is answered
conjunctively. The deterministic answerer inspects a SceneDocument;
placeholders never satisfy any clause (they are gray stand-ins, not
rendered content).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .errors import QuestionParseError
from .scene import SceneDocument

ATTRIBUTE_KEYS = ("color", "shape", "texture", "count", "position")

_PRESENCE_RE = re.compile(r"^is the (?P<obj>.+?) present$", re.IGNORECASE)
_IT_RE = re.compile(r"^is it (?P<preds>.+)$", re.IGNORECASE)
_SUBJ_RE = re.compile(r"^is the (?P<obj>.+?) (?P<preds>.+)$", re.IGNORECASE)
_PRED_RE = re.compile(
    r"^(?P<value>.+?) in (?P<attr>color|shape|texture|count|position)$", re.IGNORECASE
)

_NUMBER_WORDS = {
    "one": 1, "two": 2, "three": 3, "four": 4, "five": 5,
    "six": 6, "seven": 7, "eight": 8, "nine": 9, "ten": 10,
}


@dataclass(frozen=True)
class Clause:
    subject: str
    attr: Optional[str] = None  # None means bare presence check
    value: Optional[str] = None


def _parse_predicates(subject: str, preds: str) -> list[Clause]:
    clauses = []
    for part in re.split(r"\s+and\s+", preds.strip(), flags=re.IGNORECASE):
        m = _PRED_RE.match(part.strip())
        if not m:
            raise QuestionParseError(f"unparseable predicate: {part!r}")
        clauses.append(Clause(subject=subject, attr=m["attr"].lower(), value=m["value"].strip()))
    return clauses


def parse_question(text: str) -> list[Clause]:
    """Split a question string into clauses; raises QuestionParseError."""
    sentences = [s.strip() for s in text.split("?") if s.strip()]
    if not sentences:
        raise QuestionParseError("empty question")
    clauses: list[Clause] = []
    subject: Optional[str] = None
    for sent in sentences:
        m = _PRESENCE_RE.match(sent)
        if m:
            subject = m["obj"].strip()
            clauses.append(Clause(subject=subject))
            continue
        m = _IT_RE.match(sent)
        if m:
            if subject is None:
                raise QuestionParseError(f"'it' without a prior subject: {sent!r}")
            clauses.extend(_parse_predicates(subject, m["preds"]))
            continue
        m = _SUBJ_RE.match(sent)
        if m:
            subject = m["obj"].strip()
            clauses.extend(_parse_predicates(subject, m["preds"]))
            continue
        raise QuestionParseError(f"unparseable sentence: {sent!r}")
    return clauses


def _norm(s: str) -> str:
    return s.strip().lower()


def _clause_holds(scene: SceneDocument, clause: Clause) -> bool:
    subject = _norm(clause.subject)
    visible = [e for e in scene.entities if not e.placeholder and _norm(e.cls) == subject]
    if clause.attr is None:
        return bool(visible)
    if clause.attr == "count":
        value = _norm(clause.value or "")
        want = _NUMBER_WORDS.get(value)
        if want is None:
            try:
                want = int(value)
            except ValueError:
                raise QuestionParseError(f"unparseable count: {clause.value!r}")
        return len(visible) == want
    if clause.attr == "position":
        return any(_norm(e.position) == _norm(clause.value or "") for e in visible)
    want = _norm(clause.value or "")
    return any(_norm(e.attribute(clause.attr) or "") == want for e in visible)


def answer_question(scene: SceneDocument, question: str) -> str:
    """Answer "yes" iff every clause of the question holds in the scene."""
    clauses = parse_question(question)
    return "yes" if all(_clause_holds(scene, c) for c in clauses) else "no"


def presence_question(cls: str) -> str:
    return f"Is the {cls} present?"


def attribute_question(cls: str, value: str, attr: str) -> str:
    if attr not in ATTRIBUTE_KEYS:
        raise QuestionParseError(f"unknown attribute {attr!r}")
    return f"Is the {cls} {value} in {attr}?"


def presence_with_attribute(cls: str, value: str, attr: str) -> str:
    return f"{presence_question(cls)} Is it {value} in {attr}?"
