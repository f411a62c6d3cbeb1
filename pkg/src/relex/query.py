"""Wildcard (arg1, relation, arg2) search over the triple store."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

from .triplestore import FIELDS, ProvenancedTriple, TripleStore, tokenize


class QueryError(ValueError):
    pass


@dataclass(frozen=True)
class TripleQuery:
    """Per-slot token lists; ``None`` is a wildcard."""

    arg1: tuple[str, ...] | None = None
    relation: tuple[str, ...] | None = None
    arg2: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        for f in FIELDS:
            toks = getattr(self, f)
            if toks is not None:
                toks = tuple(dict.fromkeys(toks))
                if not toks:
                    raise QueryError(f"{f} slot has no searchable tokens")
                object.__setattr__(self, f, toks)
        if not self.slots:
            raise QueryError("query needs at least one constraint")

    @classmethod
    def from_text(cls, arg1: str | None = None, relation: str | None = None,
                  arg2: str | None = None) -> "TripleQuery":
        def slot(v):
            return None if v is None or v.strip() == "*" else tuple(tokenize(v))
        return cls(slot(arg1), slot(relation), slot(arg2))

    @property
    def slots(self) -> tuple[str, ...]:
        return tuple(f for f in FIELDS if getattr(self, f) is not None)


_KEYS = {"arg1": "arg1", "rel": "relation", "relation": "relation", "arg2": "arg2"}
_KEY_RE = re.compile(r"(?:^|\s)(arg1|rel|relation|arg2)=")


def parse_query(text: str) -> TripleQuery:
    """Parse ``arg1=<text>|* rel=<text>|* arg2=<text>|*``; omitted slots are wildcards."""
    marks = list(_KEY_RE.finditer(text))
    if not marks or text[:marks[0].start()].strip():
        raise QueryError(f"cannot parse query {text!r}; expected e.g. 'rel=treatment arg2=coronavirus'")
    values: dict[str, str] = {}
    for m, nxt in zip(marks, marks[1:] + [None]):
        slot = _KEYS[m.group(1)]
        if slot in values:
            raise QueryError(f"slot {slot} given twice")
        values[slot] = text[m.end():nxt.start() if nxt else len(text)].strip().strip("'\"")
    return TripleQuery.from_text(**values)


@dataclass(frozen=True)
class SearchResult:
    triple_id: int
    triple: ProvenancedTriple
    score: float
    matched_slots: tuple[str, ...]

    def to_dict(self) -> dict:
        return {"triple_id": self.triple_id, "score": self.score,
                "matched_slots": list(self.matched_slots), **self.triple.to_record(self.triple_id)}


def slot_score(query_tokens: Sequence[str], field_text: str) -> float:
    """Fraction of query tokens present in the field; 1.0 on an exact field match."""
    field_tokens = tokenize(field_text)
    if list(query_tokens) == field_tokens:
        return 1.0
    present = set(field_tokens)
    return sum(t in present for t in query_tokens) / len(query_tokens)


def matches(q: TripleQuery, t: ProvenancedTriple) -> bool:
    return all(set(getattr(q, f)) & set(tokenize(getattr(t.triple, f))) for f in q.slots)


def score(q: TripleQuery, t: ProvenancedTriple) -> float:
    return sum(slot_score(getattr(q, f), getattr(t.triple, f)) for f in q.slots) / len(q.slots)


def search(q: TripleQuery, store: TripleStore, limit: int = 10) -> list[SearchResult]:
    """Triples sharing a token with every constrained slot, best first.

    Candidates come from the inverted index (intersection of per-slot
    postings). Ties break on (doc_id, triple id).
    """
    if limit < 1:
        raise QueryError("limit must be >= 1")
    ids: set[int] | None = None
    for f in q.slots:
        hits = store.lookup(f, getattr(q, f))
        ids = hits if ids is None else ids & hits
        if not ids:
            return []
    results = [SearchResult(i, store[i], score(q, store[i]), q.slots) for i in ids]
    results.sort(key=lambda r: (-r.score, r.triple.doc_id, r.triple_id))
    return results[:limit]


@dataclass
class DocumentHit:
    doc_id: str
    best_score: float
    supports: list[SearchResult] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"doc_id": self.doc_id, "best_score": self.best_score,
                "supports": [r.to_dict() for r in self.supports]}


def documents_for(results: Sequence[SearchResult]) -> list[DocumentHit]:
    """Group hits by document, best-scoring document first (ties by doc_id)."""
    groups: dict[str, DocumentHit] = {}
    for r in results:
        hit = groups.setdefault(r.triple.doc_id, DocumentHit(r.triple.doc_id, r.score))
        hit.best_score = max(hit.best_score, r.score)
        hit.supports.append(r)
    return sorted(groups.values(), key=lambda h: (-h.best_score, h.doc_id))
