"""Append-only triple log with an in-memory inverted index."""

from __future__ import annotations

import json
import os
import re
import threading
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .ner import normalize
from .relparse import RelationTriple

FIELDS = ("arg1", "relation", "arg2")
SOURCES = ("llm", "imported")

_NON_ALNUM = re.compile(r"[\W_]+")


class StoreFormatError(Exception):
    def __init__(self, path, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.line = line


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs."""
    return [t for t in _NON_ALNUM.split(text.lower()) if t]


@dataclass(frozen=True)
class ProvenancedTriple:
    triple: RelationTriple
    doc_id: str
    context_start: int
    context_end: int
    model_name: str = ""
    template_id: int | None = None
    source: str = "llm"
    extracted_at: str = ""

    def __post_init__(self) -> None:
        if self.source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}, got {self.source!r}")
        if not self.doc_id:
            raise ValueError("doc_id must be non-empty")

    @property
    def dedup_key(self) -> tuple:
        return (self.triple, self.doc_id, self.context_start, self.context_end)

    def to_record(self, triple_id: int) -> dict:
        return {
            "id": triple_id,
            **self.triple.as_dict(),
            "doc_id": self.doc_id,
            "context_start": self.context_start,
            "context_end": self.context_end,
            "model_name": self.model_name,
            "template_id": self.template_id,
            "source": self.source,
            "extracted_at": self.extracted_at,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ProvenancedTriple":
        return cls(
            RelationTriple(rec["arg1"], rec["relation"], rec["arg2"]),
            rec["doc_id"], int(rec["context_start"]), int(rec["context_end"]),
            rec.get("model_name", ""), rec.get("template_id"),
            rec.get("source", "imported"), rec.get("extracted_at", ""),
        )


class TripleStore:
    """Provenance-tagged triples with per-field token postings.

    When opened on a path, every insert is appended to that log file; the
    index is always rebuilt from the log on load.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._triples: list[ProvenancedTriple] = []
        self._ids: dict[tuple, int] = {}
        self._postings: dict[str, dict[str, set[int]]] = {f: defaultdict(set) for f in FIELDS}
        self._norm_args: list[tuple[str, str]] = []
        self._lock = threading.RLock()

    # -- persistence -------------------------------------------------------

    @classmethod
    def load(cls, path: str | Path) -> "TripleStore":
        store = cls()
        for rec in _read_log(path):
            store._add(ProvenancedTriple.from_record(rec))
        return store

    @classmethod
    def open(cls, path: str | Path) -> "TripleStore":
        """Load ``path`` if it exists and append further inserts to it."""
        path = Path(path)
        store = cls.load(path) if path.exists() else cls()
        store.path = path
        return store

    def save(self, path: str | Path) -> None:
        tmp = Path(f"{path}.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            for i, t in enumerate(self._triples):
                fh.write(_dumps(t.to_record(i)))
        os.replace(tmp, path)

    # -- writes --------------------------------------------------------------

    def insert(self, t: ProvenancedTriple) -> int:
        """Store ``t`` and return its id; exact duplicates return the existing id."""
        with self._lock:
            existing = self._ids.get(t.dedup_key)
            if existing is not None:
                return existing
            triple_id = len(self._triples)
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(_dumps(t.to_record(triple_id)))
            return self._add(t)

    def insert_many(self, triples: Iterable[ProvenancedTriple]) -> list[int]:
        with self._lock:
            return [self.insert(t) for t in triples]

    def _add(self, t: ProvenancedTriple) -> int:
        existing = self._ids.get(t.dedup_key)
        if existing is not None:
            return existing
        triple_id = len(self._triples)
        self._triples.append(t)
        self._ids[t.dedup_key] = triple_id
        for f in FIELDS:
            for tok in tokenize(getattr(t.triple, f)):
                self._postings[f][tok].add(triple_id)
        self._norm_args.append((normalize(t.triple.arg1), normalize(t.triple.arg2)))
        return triple_id

    # -- reads ---------------------------------------------------------------

    def __len__(self) -> int:
        return len(self._triples)

    def __getitem__(self, triple_id: int) -> ProvenancedTriple:
        return self._triples[triple_id]

    def __iter__(self) -> Iterator[tuple[int, ProvenancedTriple]]:
        return iter(enumerate(list(self._triples)))

    def postings(self, field: str, token: str) -> frozenset[int]:
        return frozenset(self._postings[field].get(token, ()))

    def lookup(self, field: str, tokens: Iterable[str]) -> set[int]:
        """Ids whose ``field`` shares at least one token with ``tokens``."""
        hits: set[int] = set()
        index = self._postings[field]
        for tok in tokens:
            hits |= index.get(tok, set())
        return hits

    def has_relation(self, e1: str, e2: str) -> bool:
        """True if some stored triple's arguments contain ``e1`` and ``e2``.

        Containment is substring-level on normalized text and either
        orientation counts.
        """
        e1, e2 = normalize(e1), normalize(e2)
        for a1, a2 in list(self._norm_args):
            if (e1 in a1 and e2 in a2) or (e2 in a1 and e1 in a2):
                return True
        return False


def _dumps(rec: dict) -> str:
    return json.dumps(rec, ensure_ascii=False) + "\n"


def _read_log(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                ProvenancedTriple.from_record(rec)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                kind = "truncated record" if not line.endswith("\n") else "corrupt record"
                raise StoreFormatError(path, lineno, f"{kind}: {exc}") from None
            yield rec
