"""Acceptance criteria, one test each.

Every test prints a single ``[PASS]``/``[FAIL]`` line; run with ``-s`` to see them.
Randomized criteria use a seeded ``random.Random`` with explicit case counts so
the amount of work is fixed, and assert their wall-clock budget.
"""

import json
import random
import time
from contextlib import contextmanager
from fractions import Fraction
from pathlib import Path

from relex.cli import main
from relex.corpus import Document, segment_sentences
from relex.evalkit import (ContingencyTable, agreement_report, build_contingency, cohen_kappa,
                           kappa_fraction, load_annotations, merge_annotations)
from relex.ner import EntityMention, normalize
from relex.pairing import PairingConfig, candidate_pairs
from relex.prompting import PromptError, mark_entities, render_prompt, strip_markers
from relex.query import TripleQuery, search
from relex.relparse import MISSING_ENTITY, RelationTriple, extract_objects, normalize_triple, validate_containment
from relex.testing import NCOV_OUTPUT, MLST_OUTPUT, write_desk_fixture
from relex.triplestore import ProvenancedTriple, TripleStore

FIXTURES = Path(__file__).parent / "fixtures"
ZIKA = ("Zika virus (ZIKV) is a flavivirus transmitted via mosquitoes and sex to cause "
        "congenital neurodevelopmental defects, including microcephaly...")


@contextmanager
def criterion(n: int, title: str):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"\n[FAIL] criterion {n}: {title} ({time.perf_counter() - t0:.3f}s)")
        raise
    print(f"\n[PASS] criterion {n}: {title} ({time.perf_counter() - t0:.3f}s)")


def test_criterion_1_agreement_table():
    with criterion(1, "agreement table from annotation fixtures"):
        expected = {"flan_t5": ((3, 2, 1, 44), 0.63, (10, 8)),
                    "mixtral": ((15, 5, 3, 27), 0.66, (40, 36, 30))}
        for name, (cells, kappa, pcts) in expected.items():
            recs = merge_annotations(load_annotations(FIXTURES / f"{name}_I.csv"),
                                     load_annotations(FIXTURES / f"{name}_II.csv"))
            assert build_contingency(recs) == ContingencyTable(*cells)
            rep = agreement_report(recs, 50)
            assert abs(rep.kappa - kappa) <= 0.005
            assert round(rep.kappa, 2) == kappa
            got = (rep.pct_i, rep.pct_ii, rep.pct_both)
            assert got[:len(pcts)] == pcts
        assert abs(cohen_kappa(ContingencyTable(3, 2, 1, 44)) - 0.6341) < 1e-4
        assert abs(cohen_kappa(ContingencyTable(15, 5, 3, 27)) - 0.6610) < 1e-4


PROMPT1 = ('extract all the relations inside the sentence in the sentence: " [E]Zika virus[/E] (ZIKV) '
           'is a [E]flavivirus[/E] transmitted via mosquitoes and sex to cause congenital '
           'neurodevelopmental defects, including microcephaly..." that involves both "Zika virus" '
           'and "flavivirus". The results should be in JSON format that each JSON object has 3 keys '
           'which are "relation" and "entity1" and "entity2".')
PROMPT2 = ('Find every relations between "Zika virus" and "flavivirus" in the sentence: '
           '" [E]Zika virus[/E] (ZIKV) is a [E]flavivirus[/E] transmitted via ..." '
           'The results should be in JSON format.')


def test_criterion_2_golden_prompts():
    with criterion(2, "golden prompts for both templates"):
        head, tail = (0, 10), (23, 33)
        assert ZIKA[slice(*head)] == "Zika virus" and ZIKA[slice(*tail)] == "flavivirus"
        p1 = render_prompt(1, mark_entities(ZIKA, head, tail), "Zika virus", "flavivirus")
        assert p1.text == PROMPT1
        # the reference Prompt 2 shows the sentence cut after "transmitted via"
        short = ZIKA[:ZIKA.index("transmitted via") + len("transmitted via")] + " ..."
        p2 = render_prompt(2, mark_entities(short, head, tail), "Zika virus", "flavivirus")
        assert p2.text == PROMPT2
        full2 = render_prompt(2, mark_entities(ZIKA, head, tail), "Zika virus", "flavivirus").text
        assert full2.startswith(PROMPT2.split(" ...")[0])


def _pair(head, tail):
    from relex.pairing import EntityPair
    body = f"{head} is here. {tail} too."
    doc = Document("d", "", body)
    h = EntityMention.at(doc, 0, len(head), "E")
    ts = body.index(tail, len(head))
    return EntityPair("d", h, EntityMention.at(doc, ts, ts + len(tail), "E"), 0, 1, 0, len(body))


def test_criterion_3_golden_parses():
    with criterion(3, "golden parses of the two sample outputs"):
        triples = [normalize_triple(o) for o in extract_objects(NCOV_OUTPUT)]
        assert triples == [RelationTriple("combination of Ribavirin and Interferon", "treatment",
                                          "2019 new Coronavirus (n-Cov)")]
        triples = [normalize_triple(o) for o in extract_objects(MLST_OUTPUT)]
        assert len(triples) == 5 and all(isinstance(t, RelationTriple) for t in triples)
        outs = [validate_containment(t, _pair("multilocus sequence", "coli")) for t in triples]
        accepted = [o for o in outs if o.accepted]
        assert len(accepted) == 1 and accepted[0].triple.relation == "uses"
        assert sorted(o.reason for o in outs if not o.accepted) == [MISSING_ENTITY] * 4


ALPHABET = "abcdefghij XYZ,.()-éα[]/E"


def test_criterion_4_marker_round_trip():
    rng = random.Random(4)
    with criterion(4, "marker round trip over 1,000 cases"):
        t0 = time.perf_counter()
        overlaps = 0
        for _ in range(1000):
            text = "".join(rng.choice(ALPHABET) for _ in range(rng.randint(2, 60)))
            text = text.replace("[E]", "[e]").replace("[/E]", "[/e]")
            n = len(text)
            s1, s2 = rng.randrange(n), rng.randrange(n)
            e1, e2 = rng.randint(s1 + 1, n), rng.randint(s2 + 1, n)
            if max(s1, s2) < min(e1, e2):
                overlaps += 1
                try:
                    mark_entities(text, (s1, e1), (s2, e2))
                except PromptError:
                    continue
                raise AssertionError(f"overlap not rejected: {text!r} {(s1, e1)} {(s2, e2)}")
            marked = mark_entities(text, (s1, e1), (s2, e2))
            assert marked.count("[E]") == 2 and strip_markers(marked) == text
        assert 0 < overlaps < 1000
        assert time.perf_counter() - t0 < 1.0


WORDS = ["virus", "drug", "covid", "treats", "causes", "cell", "a", "b", "n-cov", "ace2"]


def _scan(q, store):
    from relex.triplestore import tokenize
    out = set()
    for i, t in store:
        fields = {"arg1": t.triple.arg1, "relation": t.triple.relation, "arg2": t.triple.arg2}
        if all(set(getattr(q, f)) & set(tokenize(fields[f])) for f in q.slots):
            out.add(i)
    return out


def test_criterion_5_index_equals_scan():
    rng = random.Random(5)
    phrase = lambda: " ".join(rng.choice(WORDS) for _ in range(rng.randint(1, 3)))  # noqa: E731
    with criterion(5, "indexed search equals linear scan, 200 stores x 20 queries"):
        t0 = time.perf_counter()
        for s in range(200):
            store = TripleStore()
            for k in range(rng.randint(0, 50)):
                store.insert(ProvenancedTriple(RelationTriple(phrase(), phrase(), phrase()),
                                               rng.choice("ABCD"), k, k + 1))
            for _ in range(20):
                slots = [None if rng.random() < 0.4 else phrase() + rng.choice(["", " zzz"]) for _ in range(3)]
                if all(x is None for x in slots):
                    slots[rng.randrange(3)] = phrase()
                q = TripleQuery.from_text(*slots)
                got = {r.triple_id for r in search(q, store, limit=10_000)}
                assert got == _scan(q, store), (s, slots)
        assert time.perf_counter() - t0 < 5.0


def _extract(paths, store, manifest):
    return main(["extract", "--corpus", str(paths["corpus"]), "--gazetteer", str(paths["gazetteer"]),
                 "--store", str(store), "--manifest", str(manifest), "--cache", str(paths["cache"]),
                 "--cache-mode", "replay-strict", "--model", "scripted-model", "--max-in-flight", "4"])


def test_criterion_6_pipeline_determinism(tmp_path):
    paths = write_desk_fixture(tmp_path / "desk")
    with criterion(6, "two replayed extract runs are byte-identical"):
        t0 = time.perf_counter()
        for run in ("a", "b"):
            assert _extract(paths, tmp_path / f"store_{run}.jsonl", tmp_path / f"manifest_{run}.json") == 0
        elapsed = time.perf_counter() - t0
        store_a, store_b = (tmp_path / f"store_{r}.jsonl" for r in "ab")
        man_a, man_b = (tmp_path / f"manifest_{r}.json" for r in "ab")
        assert store_a.read_bytes() == store_b.read_bytes()
        assert man_a.read_bytes() == man_b.read_bytes()
        m = json.loads(man_a.read_text())
        assert m["documents"] == 20
        assert m["prompts"] == m["pairs"] > 0
        assert m["accepted"] + m["rejected"] + m["unparseable"] == m["parsed_objects"]
        assert m["accepted"] > 0 and m["rejected"] > 0 and m["unparseable"] > 0
        assert m["stored"] == len(store_a.read_text().splitlines())
        assert elapsed < 10.0


ENTITIES = ["Alpha", "Beta", "Gamma", "Delta", "Epsilon", "Zeta"]
FILLER = ["binds", "the", "receptor", "in", "cells", "with", "high", "affinity"]


def _random_doc(rng):
    sentences = []
    for _ in range(rng.randint(1, 9)):
        words = [rng.choice(FILLER) for _ in range(rng.randint(2, 6))]
        for _ in range(rng.randint(0, 2)):
            words.insert(rng.randrange(len(words) + 1), rng.choice(ENTITIES))
        text = " ".join(words)
        sentences.append(text[0].upper() + text[1:] + ".")
    return Document("d", "", " ".join(sentences))


def test_criterion_7_pairing_contract():
    rng = random.Random(7)
    with criterion(7, "pairing contract over 1,000 random documents"):
        t0 = time.perf_counter()
        emitted = 0
        for _ in range(1000):
            doc = _random_doc(rng)
            sentences = segment_sentences(doc.body)
            mentions = []
            for ent in ENTITIES:
                start = doc.body.find(ent)
                while start != -1:
                    mentions.append(EntityMention.at(doc, start, start + len(ent), "E"))
                    start = doc.body.find(ent, start + 1)
            known = TripleStore()
            seeded = set()
            for _ in range(rng.randint(0, 3)):
                a, b = rng.sample(ENTITIES, 2)
                seeded.add(frozenset((normalize(a), normalize(b))))
                known.insert(ProvenancedTriple(RelationTriple(a, "r", b), "seed", 0, 1, source="imported"))
            gap = rng.randint(1, 5)
            pairs = candidate_pairs(mentions, sentences, known, PairingConfig(max_sentence_gap=gap))
            for p in pairs:
                emitted += 1
                hs = [s.index for s in sentences if s.start <= p.head.start and p.head.end <= s.end]
                ts = [s.index for s in sentences if s.start <= p.tail.start and p.tail.end <= s.end]
                assert hs == [p.head_sentence] and ts == [p.tail_sentence]
                assert p.head_sentence != p.tail_sentence
                assert abs(p.tail_sentence - p.head_sentence) <= gap
                assert frozenset((p.head.canonical, p.tail.canonical)) not in seeded
                assert not known.has_relation(p.head.canonical, p.tail.canonical)
                assert not known.has_relation(p.tail.canonical, p.head.canonical)
        assert emitted > 2000
        assert time.perf_counter() - t0 < 5.0


def test_criterion_8_kappa_properties():
    rng = random.Random(8)
    with criterion(8, "kappa properties over 10,000 random tables"):
        t0 = time.perf_counter()
        checked = 0
        for _ in range(10_000):
            a, b, c, d = (rng.randint(0, 40) for _ in range(4))
            if a + b + c + d == 0:
                continue
            t = ContingencyTable(a, b, c, d)
            n = t.n
            if (a + b) * (a + c) + (c + d) * (b + d) == n * n:
                continue  # chance agreement is total, kappa undefined
            k = kappa_fraction(t)
            assert -1 <= k <= 1
            assert k == kappa_fraction(t.swapped())
            checked += 1
            if a and d:
                assert kappa_fraction(ContingencyTable(a, 0, 0, d)) == 1
            r1, r2, c1, c2 = (rng.randint(1, 9) for _ in range(4))
            assert kappa_fraction(ContingencyTable(r1 * c1, r1 * c2, r2 * c1, r2 * c2)) == 0
        assert checked > 9000
        assert kappa_fraction(ContingencyTable(0, 5, 5, 0)) == Fraction(-1)
        assert time.perf_counter() - t0 < 1.0
