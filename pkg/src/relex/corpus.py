"""Corpus loading and rule-based sentence segmentation."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

logger = logging.getLogger(__name__)


class CorpusError(Exception):
    pass


@dataclass(frozen=True)
class RecordError:
    """A per-line problem found while reading a line-delimited file."""

    line: int
    reason: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.reason}"


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    body: str

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise ValueError("doc_id must be non-empty")


@dataclass(frozen=True)
class Sentence:
    index: int
    start: int
    end: int

    def text(self, body: str) -> str:
        return body[self.start:self.end]


@dataclass
class DocumentSet:
    """Ordered documents keyed by doc_id, plus the per-line load errors."""

    docs: dict[str, Document] = field(default_factory=dict)
    errors: list[RecordError] = field(default_factory=list)

    def add(self, doc: Document) -> None:
        if doc.doc_id in self.docs:
            raise CorpusError(f"duplicate doc_id {doc.doc_id!r}")
        self.docs[doc.doc_id] = doc

    def __len__(self) -> int:
        return len(self.docs)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.docs.values())

    def __contains__(self, doc_id: object) -> bool:
        return doc_id in self.docs

    def __getitem__(self, doc_id: str) -> Document:
        return self.docs[doc_id]


def load_corpus(path: str | Path) -> DocumentSet:
    """Read a JSON-lines corpus with ``doc_id``, ``title`` and ``body`` fields.

    Malformed lines are recorded in ``DocumentSet.errors`` and skipped.
    A repeated doc_id raises :class:`CorpusError`.
    """
    docs = DocumentSet()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                docs.errors.append(RecordError(lineno, f"invalid JSON: {exc.msg}"))
                continue
            if not isinstance(rec, dict):
                docs.errors.append(RecordError(lineno, "record is not an object"))
                continue
            bad = [k for k in ("doc_id", "title", "body") if not isinstance(rec.get(k), str)]
            if bad:
                docs.errors.append(RecordError(lineno, f"missing or non-string field(s): {', '.join(bad)}"))
                continue
            if not rec["doc_id"]:
                docs.errors.append(RecordError(lineno, "empty doc_id"))
                continue
            docs.add(Document(rec["doc_id"], rec["title"], rec["body"]))
    for err in docs.errors:
        logger.warning("%s: %s", path, err)
    return docs


def write_corpus(docs, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps({"doc_id": doc.doc_id, "title": doc.title, "body": doc.body},
                                ensure_ascii=False) + "\n")


# Tokens (lower-cased, trailing period removed) that never end a sentence.
ABBREVIATIONS = frozenset("""
al e.g i.e cf vs fig figs eq eqs ref refs no nos vol approx ca dr mr mrs ms prof
st sp spp var subsp jan feb mar apr jun jul aug sep sept oct nov dec resp incl
""".split())

_TERMINATOR = re.compile(r"[.?!]+[\"')\]]*(?=\s)")
_OPENERS = "\"'([“‘"


def _ends_with_abbreviation(text: str, dot: int) -> bool:
    # text[dot] is the terminating period
    i = dot
    while i > 0 and not text[i - 1].isspace():
        i -= 1
    token = text[i:dot].lstrip(_OPENERS)
    if not token:
        return False
    if len(token) == 1 and token.isupper():
        return True
    return token.lower() in ABBREVIATIONS


def _is_boundary(text: str, m: re.Match) -> bool:
    j = m.end()
    while j < len(text) and text[j].isspace():
        j += 1
    if j == len(text):
        return True
    if text[j] in _OPENERS and j + 1 < len(text):
        j += 1
    nxt = text[j]
    if not (nxt.isupper() or nxt.isdigit()):
        return False
    term = m.group()
    if term.startswith(".") and term.rstrip("\"')]") == ".":
        return not _ends_with_abbreviation(text, m.start())
    return True


def _trimmed(text: str, start: int, end: int) -> tuple[int, int]:
    while start < end and text[start].isspace():
        start += 1
    while end > start and text[end - 1].isspace():
        end -= 1
    return start, end


def segment_sentences(body: str) -> list[Sentence]:
    """Split ``body`` into trimmed, non-empty sentence spans.

    A sentence ends at ``.``, ``?`` or ``!`` (plus closing quotes/brackets)
    when followed by whitespace and an uppercase letter or digit. A single
    period after a known abbreviation or a lone capital initial (``E. coli``)
    does not end a sentence.
    """
    cuts = [m.end() for m in _TERMINATOR.finditer(body) if _is_boundary(body, m)]
    spans = []
    prev = 0
    for cut in cuts + [len(body)]:
        start, end = _trimmed(body, prev, cut)
        if start < end:
            spans.append((start, end))
        prev = cut
    return [Sentence(i, s, e) for i, (s, e) in enumerate(spans)]


def sentence_of(sentences: list[Sentence], start: int, end: int) -> Sentence | None:
    """Return the sentence fully containing ``[start, end)``, if any."""
    lo, hi = 0, len(sentences)
    while lo < hi:
        mid = (lo + hi) // 2
        if sentences[mid].end <= start:
            lo = mid + 1
        else:
            hi = mid
    if lo < len(sentences):
        s = sentences[lo]
        if s.start <= start and end <= s.end:
            return s
    return None
