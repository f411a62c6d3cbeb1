"""Command-line entry point: ``relex <subcommand> ...``.

Exit codes: 0 success, 1 stage failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import evalkit
from .corpus import CorpusError, load_corpus
from .llm_client import CACHE_MODES, EndpointConfig, GenerationParams, LLMClient, LLMError, ResponseCache, default_model
from .pairing import DEFAULT_MAX_GAP, EntityPair, PairingConfig
from .pipeline import (PipelineConfig, StageError, build_prompts, document_record, extract,
                       find_mentions, find_pairs, known_relations, prompt_record, read_jsonl,
                       write_jsonl, write_manifest)
from .ner import EntityMention
from .prompting import TEMPLATES, PromptError, load_templates
from .query import QueryError, documents_for, parse_query, search
from .triplestore import StoreFormatError, TripleStore

logger = logging.getLogger("relex")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _emit(records, path: str | None) -> int:
    if path in (None, "-"):
        n = 0
        for rec in records:
            sys.stdout.write(json.dumps(rec, ensure_ascii=False) + "\n")
            n += 1
        return n
    return write_jsonl(records, path)


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


# -- subcommands -----------------------------------------------------------


def cmd_ingest(args) -> int:
    docs = load_corpus(args.corpus)
    n = _emit((document_record(d) for d in docs), args.out)
    print(f"ingest: {n} documents, {len(docs.errors)} malformed lines", file=sys.stderr)
    return 0


def cmd_ner(args) -> int:
    docs = load_corpus(args.corpus)
    mentions, errors = find_mentions(docs, args.gazetteer, args.annotations, args.workers)
    n = _emit((m.to_dict() for ms in mentions.values() for m in ms), args.out)
    print(f"ner: {n} mentions, {len(errors)} rejected records", file=sys.stderr)
    return 0


def _pairing(args) -> PairingConfig:
    return PairingConfig(args.max_gap, args.max_pairs_per_doc)


def _store(args) -> TripleStore | None:
    return TripleStore.load(args.store) if args.store and Path(args.store).exists() else None


def cmd_pairs(args) -> int:
    docs = load_corpus(args.corpus)
    by_doc: dict[str, list[EntityMention]] = {d.doc_id: [] for d in docs}
    for rec in read_jsonl(args.mentions):
        m = EntityMention.from_dict(rec)
        if m.doc_id in by_doc:
            by_doc[m.doc_id].append(m)
    known = known_relations(_store(args), args.known)
    pairs = find_pairs(docs, by_doc, known, _pairing(args), args.sample, args.seed, args.workers)
    n = _emit((p.to_dict() for p in pairs), args.out)
    print(f"pairs: {n} candidate pairs", file=sys.stderr)
    return 0


def cmd_prompts(args) -> int:
    docs = load_corpus(args.corpus)
    pairs = [EntityPair.from_dict(r) for r in read_jsonl(args.pairs)]
    templates = load_templates(args.template_file) if args.template_file else TEMPLATES
    prompts = build_prompts(docs, pairs, args.template, templates)
    n = _emit((prompt_record(p) for p in prompts), args.out)
    print(f"prompts: {n} prompts (template {args.template})", file=sys.stderr)
    return 0


def _client(args) -> LLMClient:
    params = GenerationParams(args.model or default_model(), args.temperature, args.top_p,
                              args.top_k, args.max_new_tokens)
    endpoint = EndpointConfig.from_env(base_url=args.endpoint, api=args.api)
    cache = ResponseCache(args.cache) if args.cache else ResponseCache()
    return LLMClient(params, endpoint, cache, args.cache_mode)


def cmd_extract(args) -> int:
    cfg = PipelineConfig(
        corpus=Path(args.corpus),
        gazetteer=Path(args.gazetteer) if args.gazetteer else None,
        annotations=Path(args.annotations) if args.annotations else None,
        pairing=_pairing(args), sample=args.sample, seed=args.seed,
        template_id=args.template,
        template_file=Path(args.template_file) if args.template_file else None,
        store=Path(args.store), known=[Path(p) for p in args.known],
        filter_containment=args.filter_containment,
        work_dir=Path(args.work_dir) if args.work_dir else None,
        workers=args.workers, max_in_flight=args.max_in_flight,
    )
    with _client(args) as client:
        result = extract(cfg, client)
    manifest_path = args.manifest or (Path(args.work_dir) / "manifest.json" if args.work_dir else None)
    if manifest_path:
        write_manifest(result.manifest, manifest_path)
    m = result.manifest
    print(f"extract: {m['documents']} documents, {m['mentions']} mentions, {m['pairs']} pairs, "
          f"{m['completions']} completions, {m['accepted']} accepted, {m['rejected']} rejected, "
          f"{m['unparseable']} unparseable", file=sys.stderr)
    if result.failures:
        print(f"stage complete: {len(result.failures)} prompts failed; first: "
              f"doc_id={result.failures[0][0].doc_id}: {result.failures[0][1]}", file=sys.stderr)
        return 1
    return 0


def _print_results(results, as_json: bool, by_document: bool) -> None:
    if by_document:
        hits = documents_for(results)
        if as_json:
            print(json.dumps([h.to_dict() for h in hits], ensure_ascii=False))
            return
        for h in hits:
            print(f"{h.doc_id}\t{h.best_score:.3f}\t{len(h.supports)} triple(s)")
            for r in h.supports:
                t = r.triple.triple
                print(f"    [{r.triple_id}] ({t.arg1}; {t.relation}; {t.arg2})  {r.score:.3f}")
        return
    if as_json:
        print(json.dumps([r.to_dict() for r in results], ensure_ascii=False))
        return
    for r in results:
        t = r.triple.triple
        print(f"{r.score:.3f}\t{r.triple.doc_id}\t[{r.triple_id}] ({t.arg1}; {t.relation}; {t.arg2})")


def cmd_search(args) -> int:
    store = TripleStore.load(args.store)
    if args.interactive:
        return _repl(store, args)
    if not args.query:
        raise QueryError("no query given (or use --interactive)")
    results = search(parse_query(" ".join(args.query)), store, args.limit)
    _print_results(results, args.json, args.documents)
    return 0


def _repl(store: TripleStore, args) -> int:
    print(f"{len(store)} triples loaded. Query as: arg1=... rel=... arg2=...  (empty line quits)")
    while True:
        try:
            line = input("relex> ").strip()
        except EOFError:
            break
        if not line:
            break
        try:
            _print_results(search(parse_query(line), store, args.limit), args.json, args.documents)
        except QueryError as exc:
            print(f"error: {exc}")
    return 0


def _load_sets(paths) -> list[evalkit.AnnotationRecord]:
    batches = [evalkit.load_annotations(p) for p in paths]
    return batches[0] if len(batches) == 1 else evalkit.merge_annotations(*batches)


def cmd_eval(args) -> int:
    report = evalkit.agreement_report(_load_sets(args.annotations), args.total)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(evalkit.format_table({args.name: report}))
    return 0


def cmd_report(args) -> int:
    if args.manifest:
        manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        for k in sorted(manifest):
            print(f"{k:20s} {manifest[k]}")
        if not args.system:
            return 0
    reports = {}
    for entry in args.system:
        name, sep, files = entry.partition("=")
        if not sep:
            raise evalkit.AnnotationError(f"expected NAME=FILE[,FILE], got {entry!r}")
        reports[name] = evalkit.agreement_report(_load_sets(files.split(",")), args.total)
    if args.json:
        print(json.dumps({k: r.to_dict() for k, r in reports.items()}, indent=2))
    elif reports:
        print(evalkit.format_table(reports))
    return 0


# -- parser ----------------------------------------------------------------


def _add_ner_source(p) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--gazetteer", help="TSV of term<TAB>label")
    g.add_argument("--annotations", help="JSON-lines mention records")


def _add_pairing(p) -> None:
    p.add_argument("--max-gap", type=_positive, default=DEFAULT_MAX_GAP,
                   help="max sentence distance between head and tail (default %(default)s)")
    p.add_argument("--max-pairs-per-doc", type=int, default=None)
    p.add_argument("--sample", type=int, default=None, help="keep a seeded sample of N pairs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--known", action="append", default=[],
                   help="extra triple log(s) whose relations count as known")


def _add_template(p) -> None:
    p.add_argument("--template", type=int, default=1, help="prompt template id (default 1)")
    p.add_argument("--template-file", help="file of '<id>: <template>' lines")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="relex", description="Hidden relation extraction and triple search.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="load and segment a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("ner", help="find entity mentions")
    p.add_argument("--corpus", required=True)
    _add_ner_source(p)
    p.add_argument("--workers", type=_positive, default=1)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_ner)

    p = sub.add_parser("pairs", help="mine cross-sentence candidate pairs")
    p.add_argument("--corpus", required=True)
    p.add_argument("--mentions", required=True)
    p.add_argument("--store", help="triple log of already known relations")
    _add_pairing(p)
    p.add_argument("--workers", type=_positive, default=1)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser("prompts", help="render marked prompts for pairs")
    p.add_argument("--corpus", required=True)
    p.add_argument("--pairs", required=True)
    _add_template(p)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_prompts)

    p = sub.add_parser("extract", help="run the whole pipeline into a triple store")
    p.add_argument("--corpus", required=True)
    _add_ner_source(p)
    _add_pairing(p)
    _add_template(p)
    p.add_argument("--store", required=True, help="triple log to read known relations from and append to")
    p.add_argument("--work-dir", help="write per-stage records and manifest.json here")
    p.add_argument("--manifest", help="manifest path (default <work-dir>/manifest.json)")
    p.add_argument("--filter-containment", action=argparse.BooleanOptionalAction, default=True,
                   help="store only triples whose arguments contain both entities (default on)")
    p.add_argument("--endpoint", help="base URL (default $RELEX_LLM_ENDPOINT)")
    p.add_argument("--api", choices=("chat", "completions"), default="chat")
    p.add_argument("--model", help="model name (default $RELEX_LLM_MODEL)")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--top-p", type=float, default=1.0)
    p.add_argument("--top-k", type=int, default=50)
    p.add_argument("--max-new-tokens", type=int, default=512)
    p.add_argument("--cache", help="response cache file")
    p.add_argument("--cache-mode", choices=CACHE_MODES, default="record")
    p.add_argument("--workers", type=_positive, default=1)
    p.add_argument("--max-in-flight", type=_positive, default=4)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("search", help="query stored triples")
    p.add_argument("query", nargs="*", help="e.g. 'rel=treatment arg2=coronavirus'")
    p.add_argument("--store", required=True)
    p.add_argument("--limit", type=_positive, default=10)
    p.add_argument("--json", action="store_true")
    p.add_argument("--documents", action="store_true", help="group hits by document")
    p.add_argument("--interactive", action="store_true")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("eval", help="agreement statistics for one system")
    p.add_argument("annotations", nargs="+", help="CSV file(s) item_id,annotator,verdict")
    p.add_argument("--total", type=int, default=None)
    p.add_argument("--name", default="system")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="agreement table across systems and/or a run manifest")
    p.add_argument("system", nargs="*", help="NAME=FILE[,FILE]")
    p.add_argument("--total", type=int, default=None)
    p.add_argument("--manifest")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        print(f"relex {args.command}: {exc}", file=sys.stderr)
        return 1
    except (QueryError, evalkit.AnnotationError, PromptError, ValueError) as exc:
        print(f"relex {args.command}: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, QueryError) else 1
    except (CorpusError, StoreFormatError, LLMError, OSError, KeyError) as exc:
        print(f"relex {args.command}: stage {args.command} failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
