"""End-to-end extraction: corpus -> mentions -> pairs -> prompts -> LLM -> store."""

from __future__ import annotations

import json
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence, TypeVar

from .corpus import Document, DocumentSet, RecordError, load_corpus, segment_sentences
from .llm_client import LLMClient, LLMError, RawCompletion
from .ner import CompiledGazetteer, EntityMention, import_annotations, load_gazetteer, recognize_gazetteer
from .pairing import EntityPair, PairingConfig, candidate_pairs, sample_pairs
from .prompting import TEMPLATES, MarkerConfig, PromptInstance, load_templates, prompt_for_pair
from .relparse import ValidationOutcome, parse_completion
from .triplestore import ProvenancedTriple, TripleStore

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class StageError(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage}: {message}")
        self.stage = stage


def _pmap(fn: Callable[[T], R], items: Sequence[T], workers: int) -> list[R]:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def write_jsonl(records: Iterable[dict], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
            n += 1
    return n


def read_jsonl(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


@dataclass
class PipelineConfig:
    corpus: Path
    gazetteer: Path | None = None
    annotations: Path | None = None
    pairing: PairingConfig = field(default_factory=PairingConfig)
    sample: int | None = None
    seed: int = 0
    template_id: int = 1
    template_file: Path | None = None
    store: Path | None = None
    known: Sequence[Path] = ()
    filter_containment: bool = True
    work_dir: Path | None = None
    workers: int = 1
    max_in_flight: int = 4
    markers: MarkerConfig = field(default_factory=MarkerConfig)

    def check(self) -> None:
        paths = [self.corpus, self.gazetteer, self.annotations, self.template_file, *self.known]
        for p in paths:
            if p is not None and not Path(p).exists():
                raise StageError("config", f"path does not exist: {p}")
        if (self.gazetteer is None) == (self.annotations is None):
            raise StageError("config", "give exactly one of a gazetteer or an annotation file")
        if self.template_id not in self.templates():
            raise StageError("config", f"unknown template id {self.template_id}")

    def templates(self) -> Mapping[int, str]:
        return load_templates(self.template_file) if self.template_file else TEMPLATES


# -- stages ------------------------------------------------------------------

def document_record(doc: Document) -> dict:
    return {"doc_id": doc.doc_id, "title": doc.title, "body": doc.body,
            "sentences": [[s.start, s.end] for s in segment_sentences(doc.body)]}


def find_mentions(docs: DocumentSet, gazetteer: Path | None = None, annotations: Path | None = None,
                  workers: int = 1) -> tuple[dict[str, list[EntityMention]], list[RecordError]]:
    by_doc: dict[str, list[EntityMention]] = {d.doc_id: [] for d in docs}
    errors: list[RecordError] = []
    if gazetteer is not None:
        compiled = CompiledGazetteer(load_gazetteer(gazetteer))
        found = _pmap(lambda d: recognize_gazetteer(d, compiled), list(docs), workers)
        for doc, mentions in zip(docs, found):
            by_doc[doc.doc_id] = mentions
    else:
        mentions, errors = import_annotations(annotations, docs)
        for m in mentions:
            by_doc[m.doc_id].append(m)
        for err in errors:
            logger.warning("%s: %s", annotations, err)
    return by_doc, errors


def find_pairs(docs: DocumentSet, mentions: Mapping[str, Sequence[EntityMention]], known,
               cfg: PairingConfig = PairingConfig(), sample: int | None = None, seed: int = 0,
               workers: int = 1) -> list[EntityPair]:
    def one(doc: Document) -> list[EntityPair]:
        return candidate_pairs(mentions.get(doc.doc_id, []), segment_sentences(doc.body), known, cfg)

    pairs = [p for chunk in _pmap(one, list(docs), workers) for p in chunk]
    if sample is not None:
        pairs = sample_pairs(pairs, sample, seed)
    return pairs


class _KnownUnion:
    def __init__(self, stores: Sequence[TripleStore]):
        self.stores = stores

    def has_relation(self, e1: str, e2: str) -> bool:
        return any(s.has_relation(e1, e2) for s in self.stores)


def known_relations(store: TripleStore | None, extra: Sequence[Path] = ()) -> _KnownUnion:
    stores = [store] if store is not None else []
    return _KnownUnion(stores + [TripleStore.load(p) for p in extra])


def build_prompts(docs: DocumentSet, pairs: Sequence[EntityPair], template_id: int = 1,
                  templates: Mapping[int, str] = TEMPLATES,
                  markers: MarkerConfig = MarkerConfig()) -> list[PromptInstance]:
    return [prompt_for_pair(p, docs[p.doc_id].body, template_id, templates, markers) for p in pairs]


def prompt_record(p: PromptInstance) -> dict:
    return {"template_id": p.template_id, "text": p.text, "marked_context": p.marked_context,
            "pair": p.pair.to_dict() if p.pair else None}


def prompt_from_record(rec: dict) -> PromptInstance:
    pair = EntityPair.from_dict(rec["pair"]) if rec.get("pair") else None
    return PromptInstance(int(rec["template_id"]), rec["text"], rec["marked_context"], pair)


# -- full run ------------------------------------------------------------------

@dataclass
class ExtractionResult:
    manifest: dict
    outcomes: list[tuple[EntityPair, ValidationOutcome]]
    failures: list[tuple[EntityPair, LLMError]]


def extract(cfg: PipelineConfig, client: LLMClient) -> ExtractionResult:
    """Run every stage and insert triples into the store at ``cfg.store``."""
    cfg.check()
    stage = "ingest"
    try:
        docs = load_corpus(cfg.corpus)
        stage = "ner"
        mentions, ann_errors = find_mentions(docs, cfg.gazetteer, cfg.annotations, cfg.workers)
        stage = "pairs"
        store = TripleStore.open(cfg.store) if cfg.store is not None else TripleStore()
        known = known_relations(store, cfg.known)
        pairs = find_pairs(docs, mentions, known, cfg.pairing, cfg.sample, cfg.seed, cfg.workers)
        stage = "prompts"
        prompts = build_prompts(docs, pairs, cfg.template_id, cfg.templates(), cfg.markers)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(stage, f"{type(exc).__name__}: {exc}") from exc

    completions = client.batch_complete(prompts, cfg.max_in_flight)

    counts: Counter = Counter()
    rejected: Counter = Counter()
    unparseable: Counter = Counter()
    outcomes: list[tuple[EntityPair, ValidationOutcome]] = []
    failures: list[tuple[EntityPair, LLMError]] = []
    completion_rows = []
    for prompt, result in zip(prompts, completions):
        pair = prompt.pair
        if isinstance(result, LLMError):
            failures.append((pair, result))
            logger.error("stage complete: doc_id=%s pair=(%s, %s): %s",
                         pair.doc_id, pair.head.surface, pair.tail.surface, result)
            completion_rows.append({"doc_id": pair.doc_id, "head": pair.head.surface,
                                    "tail": pair.tail.surface, "error": str(result)})
            continue
        completion_rows.append({"doc_id": pair.doc_id, "head": pair.head.surface,
                                "tail": pair.tail.surface, "prompt_hash": result.prompt_hash,
                                "text": result.text, "from_cache": result.retrieved_from_cache})
        n_objs, vals, bad = parse_completion(result.text, pair)
        counts["parsed_objects"] += n_objs
        if n_objs == 0:
            counts["empty_completions"] += 1
        for m in bad:
            unparseable[m.reason] += 1
        for v in vals:
            outcomes.append((pair, v))
            if v.accepted:
                counts["accepted"] += 1
            else:
                rejected[v.reason] += 1
            if v.accepted or not cfg.filter_containment:
                before = len(store)
                store.insert(_provenanced(v, pair, prompt, result))
                counts["stored" if len(store) > before else "duplicates"] += 1

    manifest = {
        "documents": len(docs),
        "corpus_errors": len(docs.errors),
        "mentions": sum(len(v) for v in mentions.values()),
        "annotation_errors": len(ann_errors),
        "pairs": len(pairs),
        "prompts": len(prompts),
        "completions": len(prompts) - len(failures),
        "completion_errors": len(failures),
        "empty_completions": counts["empty_completions"],
        "parsed_objects": counts["parsed_objects"],
        "accepted": counts["accepted"],
        "rejected": sum(rejected.values()),
        "rejected_reasons": dict(sorted(rejected.items())),
        "unparseable": sum(unparseable.values()),
        "unparseable_reasons": dict(sorted(unparseable.items())),
        "stored": counts["stored"],
        "duplicates": counts["duplicates"],
        "store_size": len(store),
        "template_id": cfg.template_id,
        "model_name": client.params.model_name,
        "cache_mode": client.cache_mode,
        "filter_containment": cfg.filter_containment,
    }

    if cfg.work_dir is not None:
        wd = Path(cfg.work_dir)
        wd.mkdir(parents=True, exist_ok=True)
        write_jsonl((document_record(d) for d in docs), wd / "documents.jsonl")
        write_jsonl((m.to_dict() for ms in mentions.values() for m in ms), wd / "mentions.jsonl")
        write_jsonl((p.to_dict() for p in pairs), wd / "pairs.jsonl")
        write_jsonl((prompt_record(p) for p in prompts), wd / "prompts.jsonl")
        write_jsonl(completion_rows, wd / "completions.jsonl")
        write_jsonl(({"doc_id": p.doc_id, "head": p.head.surface, "tail": p.tail.surface,
                      **v.triple.as_dict(), "status": v.status, "reason": v.reason,
                      "orientation": v.matched_orientation} for p, v in outcomes),
                    wd / "outcomes.jsonl")
    return ExtractionResult(manifest, outcomes, failures)


def _provenanced(v: ValidationOutcome, pair: EntityPair, prompt: PromptInstance,
                 result: RawCompletion) -> ProvenancedTriple:
    return ProvenancedTriple(v.triple, pair.doc_id, pair.context_start, pair.context_end,
                             result.model_name, prompt.template_id, "llm", result.created_at)


def write_manifest(manifest: dict, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
