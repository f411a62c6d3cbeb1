"""Entity mention providers: a gazetteer matcher and an annotation importer.

Both stand in for an external biomedical NER model; every mention is
anchored to exact character offsets of the stored document body.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable

from .corpus import Document, DocumentSet, RecordError


def normalize(text: str) -> str:
    """Case-fold, collapse internal whitespace and trim."""
    return " ".join(text.casefold().split())


@dataclass(frozen=True)
class EntityMention:
    doc_id: str
    start: int
    end: int
    surface: str
    label: str
    canonical: str

    @classmethod
    def at(cls, doc: Document, start: int, end: int, label: str) -> "EntityMention":
        surface = doc.body[start:end]
        return cls(doc.doc_id, start, end, surface, label, normalize(surface))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, rec: dict) -> "EntityMention":
        return cls(rec["doc_id"], int(rec["start"]), int(rec["end"]), rec["surface"],
                   rec["label"], rec.get("canonical") or normalize(rec["surface"]))


def _term_pattern(term: str) -> re.Pattern:
    # internal whitespace in a term matches any whitespace run
    body = r"\s+".join(re.escape(part) for part in term.split())
    head = r"(?<![^\W_])" if term[0].isalnum() else ""
    tail = r"(?![^\W_])" if term[-1].isalnum() else ""
    return re.compile(head + body + tail, re.IGNORECASE)


def _compile_gazetteer(gazetteer: Iterable[tuple[str, str]]) -> list[tuple[re.Pattern, str]]:
    compiled = []
    for term, label in sorted(set(gazetteer)):
        term = term.strip()
        if not term:
            raise ValueError("gazetteer terms must be non-empty")
        compiled.append((_term_pattern(term), label))
    return compiled


def recognize_gazetteer(doc: Document, gazetteer: Iterable[tuple[str, str]]) -> list[EntityMention]:
    """Find case-insensitive, word-bounded occurrences of gazetteer terms.

    Overlaps are resolved longest match first, then leftmost. Output is
    sorted by (start, end) and never contains overlapping mentions.
    """
    patterns = gazetteer if isinstance(gazetteer, CompiledGazetteer) else CompiledGazetteer(gazetteer)
    candidates = []
    for pattern, label in patterns.entries:
        for m in pattern.finditer(doc.body):
            candidates.append((m.start(), m.end(), label))
    candidates.sort(key=lambda c: (-(c[1] - c[0]), c[0], c[2]))
    taken: list[tuple[int, int, str]] = []
    for start, end, label in candidates:
        if all(end <= s or start >= e for s, e, _ in taken):
            taken.append((start, end, label))
    taken.sort()
    return [EntityMention.at(doc, s, e, label) for s, e, label in taken]


class CompiledGazetteer:
    """Pre-compiled term patterns, reusable across documents."""

    def __init__(self, gazetteer: Iterable[tuple[str, str]]):
        self.entries = _compile_gazetteer(gazetteer)

    def __len__(self) -> int:
        return len(self.entries)


def load_gazetteer(path: str | Path) -> set[tuple[str, str]]:
    """Read ``term<TAB>label`` lines; a missing label defaults to ``ENTITY``."""
    terms = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            term, _, label = line.partition("\t")
            terms.add((term.strip(), label.strip() or "ENTITY"))
    return terms


def import_annotations(path: str | Path, docs: DocumentSet) -> tuple[list[EntityMention], list[RecordError]]:
    """Load externally produced mentions, rejecting records that do not line up.

    Each line holds ``doc_id``, ``start``, ``end``, ``surface``, ``label``.
    Records naming an unknown document, falling outside the body, or whose
    surface differs from the body slice are returned as errors instead.
    """
    mentions: list[EntityMention] = []
    errors: list[RecordError] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                doc_id, start, end = rec["doc_id"], int(rec["start"]), int(rec["end"])
                surface, label = rec["surface"], str(rec.get("label", "ENTITY"))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                errors.append(RecordError(lineno, f"malformed record: {exc}"))
                continue
            if doc_id not in docs:
                errors.append(RecordError(lineno, f"unknown doc_id {doc_id!r}"))
                continue
            body = docs[doc_id].body
            if not 0 <= start < end <= len(body):
                errors.append(RecordError(lineno, f"offsets out of range [{start}, {end})"))
                continue
            if body[start:end] != surface:
                errors.append(RecordError(lineno, f"surface mismatch: {surface!r} != {body[start:end]!r}"))
                continue
            mentions.append(EntityMention(doc_id, start, end, surface, label, normalize(surface)))
    mentions.sort(key=lambda m: (m.doc_id, m.start, m.end))
    return mentions, errors
