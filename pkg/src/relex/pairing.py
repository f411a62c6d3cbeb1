"""Cross-sentence candidate pairs for hidden-relation prompting."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from typing import Protocol, Sequence

from .corpus import Sentence, sentence_of
from .ner import EntityMention

logger = logging.getLogger(__name__)

DEFAULT_MAX_GAP = 5


class KnownRelations(Protocol):
    def has_relation(self, e1: str, e2: str) -> bool: ...


@dataclass(frozen=True)
class PairingConfig:
    max_sentence_gap: int = DEFAULT_MAX_GAP
    max_pairs_per_doc: int | None = None

    def __post_init__(self) -> None:
        if self.max_sentence_gap < 1:
            raise ValueError("max_sentence_gap must be >= 1")
        if self.max_pairs_per_doc is not None and self.max_pairs_per_doc < 0:
            raise ValueError("max_pairs_per_doc must be >= 0")


@dataclass(frozen=True)
class EntityPair:
    doc_id: str
    head: EntityMention
    tail: EntityMention
    head_sentence: int
    tail_sentence: int
    context_start: int
    context_end: int

    @property
    def key(self) -> tuple[str, str]:
        return (self.head.canonical, self.tail.canonical)

    def head_span(self) -> tuple[int, int]:
        """Head offsets relative to the context."""
        return self.head.start - self.context_start, self.head.end - self.context_start

    def tail_span(self) -> tuple[int, int]:
        return self.tail.start - self.context_start, self.tail.end - self.context_start

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "head": self.head.to_dict(),
            "tail": self.tail.to_dict(),
            "head_sentence": self.head_sentence,
            "tail_sentence": self.tail_sentence,
            "context_start": self.context_start,
            "context_end": self.context_end,
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "EntityPair":
        return cls(rec["doc_id"], EntityMention.from_dict(rec["head"]),
                   EntityMention.from_dict(rec["tail"]), int(rec["head_sentence"]),
                   int(rec["tail_sentence"]), int(rec["context_start"]), int(rec["context_end"]))


def candidate_pairs(
    mentions: Sequence[EntityMention],
    sentences: Sequence[Sentence],
    known: KnownRelations | None = None,
    cfg: PairingConfig = PairingConfig(),
) -> list[EntityPair]:
    """Entity pairs in different sentences with no relation in ``known``.

    Pairs are keyed by their unordered canonical forms; for each key the
    mention pair with the fewest sentences between them (then the shortest
    character distance, then earliest) is kept. Output is in document order.
    """
    sentences = list(sentences)
    located: list[tuple[EntityMention, Sentence]] = []
    for m in mentions:
        s = sentence_of(sentences, m.start, m.end)
        if s is None:
            logger.warning("mention %r at [%d, %d) in %s is not inside any sentence; skipped",
                           m.surface, m.start, m.end, m.doc_id)
            continue
        located.append((m, s))
    located.sort(key=lambda ms: (ms[0].start, ms[0].end))

    best: dict[frozenset, tuple[tuple, EntityMention, EntityMention, Sentence, Sentence]] = {}
    known_cache: dict[frozenset, bool] = {}
    for i, (a, sa) in enumerate(located):
        for b, sb in located[i + 1:]:
            gap = sb.index - sa.index
            if gap > cfg.max_sentence_gap:
                break
            if gap < 1 or a.canonical == b.canonical:
                continue
            key = frozenset((a.canonical, b.canonical))
            if key not in known_cache:
                known_cache[key] = known is not None and known.has_relation(a.canonical, b.canonical)
            if known_cache[key]:
                continue
            rank = (gap, b.start - a.end, a.start, b.start)
            if key not in best or rank < best[key][0]:
                best[key] = (rank, a, b, sa, sb)

    pairs = [
        EntityPair(a.doc_id, a, b, sa.index, sb.index, sa.start, sb.end)
        for _, a, b, sa, sb in best.values()
    ]
    pairs.sort(key=lambda p: (p.head.start, p.tail.start))
    if cfg.max_pairs_per_doc is not None:
        pairs = pairs[:cfg.max_pairs_per_doc]
    return pairs


def sample_pairs(pairs: Sequence[EntityPair], k: int, seed: int) -> list[EntityPair]:
    """Seeded sample of ``k`` pairs, returned in their original order."""
    if k >= len(pairs):
        return list(pairs)
    chosen = sorted(random.Random(seed).sample(range(len(pairs)), k))
    return [pairs[i] for i in chosen]


def context_text(pair: EntityPair, body: str) -> str:
    """The run of sentences from the head's through the tail's, verbatim."""
    return body[pair.context_start:pair.context_end]
