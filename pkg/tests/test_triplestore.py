import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from relex.relparse import RelationTriple
from relex.triplestore import ProvenancedTriple, StoreFormatError, TripleStore, tokenize

NCOV = RelationTriple("combination of Ribavirin and Interferon", "treatment", "2019 new Coronavirus (n-Cov)")


def pt(triple, doc="ncov", span=(0, 10), **kw):
    return ProvenancedTriple(triple, doc, span[0], span[1], **kw)


def test_tokenize():
    assert tokenize("2019 new Coronavirus (n-Cov)") == ["2019", "new", "coronavirus", "n", "cov"]
    assert tokenize("a_b--C") == ["a", "b", "c"]
    assert tokenize(" -- ") == []


class TestInsert:
    def test_first_insert(self):
        store = TripleStore()
        assert store.insert(pt(NCOV)) == 0
        assert len(store) == 1

    def test_dedup(self):
        store = TripleStore()
        store.insert(pt(NCOV, model_name="m1"))
        assert store.insert(pt(NCOV, model_name="m2")) == 0
        assert len(store) == 1

    def test_distinct(self):
        store = TripleStore()
        ids = [store.insert(pt(NCOV)), store.insert(pt(NCOV, span=(5, 10)))]
        assert ids == [0, 1]
        assert store[1].context_start == 5
        assert store.postings("relation", "treatment") == {0, 1}

    def test_bad_source(self):
        with pytest.raises(ValueError):
            pt(NCOV, source="guess")


class TestHasRelation:
    def test_empty(self):
        assert not TripleStore().has_relation("coronavirus", "ribavirin")

    def test_ncov(self):
        store = TripleStore()
        store.insert(pt(NCOV))
        assert store.has_relation("coronavirus", "ribavirin")
        assert store.has_relation("ribavirin", "coronavirus")
        assert store.has_relation("Ribavirin", "  CORONAVIRUS")
        assert not store.has_relation("coronavirus", "remdesivir")
        assert not store.has_relation("ribavirin", "interferon")  # both inside arg1


class TestPersistence:
    def test_round_trip(self, tmp_path):
        store = TripleStore()
        store.insert(pt(NCOV, model_name="m", template_id=1, extracted_at="t"))
        store.insert(pt(RelationTriple("a", "b", "c"), doc="x", source="imported"))
        store.save(tmp_path / "s.jsonl")
        loaded = TripleStore.load(tmp_path / "s.jsonl")
        assert list(loaded) == list(store)
        assert loaded.has_relation("coronavirus", "ribavirin")
        for f in ("arg1", "relation", "arg2"):
            for tok in ("b", "treatment", "coronavirus"):
                assert loaded.postings(f, tok) == store.postings(f, tok)

    def test_empty_file(self, tmp_path):
        (tmp_path / "s.jsonl").write_text("")
        assert len(TripleStore.load(tmp_path / "s.jsonl")) == 0

    def test_truncated_last_line(self, tmp_path):
        store = TripleStore()
        store.insert(pt(NCOV))
        store.insert(pt(RelationTriple("a", "b", "c")))
        path = tmp_path / "s.jsonl"
        store.save(path)
        path.write_text(path.read_text()[:-25])
        with pytest.raises(StoreFormatError, match=r":2: truncated") as err:
            TripleStore.load(path)
        assert err.value.line == 2

    def test_corrupt_middle_line(self, tmp_path):
        path = tmp_path / "s.jsonl"
        path.write_text('{"arg1": "a"}\n')
        with pytest.raises(StoreFormatError, match=":1: corrupt"):
            TripleStore.load(path)

    def test_open_appends(self, tmp_path):
        path = tmp_path / "s.jsonl"
        store = TripleStore.open(path)
        store.insert(pt(NCOV))
        first = path.read_text()
        store.insert(pt(RelationTriple("a", "b", "c")))
        store.insert(pt(NCOV))  # duplicate: no write
        text = path.read_text()
        assert text.startswith(first)  # append-only
        assert len(text.splitlines()) == 2
        assert json.loads(text.splitlines()[1])["id"] == 1
        reopened = TripleStore.open(path)
        assert len(reopened) == 2
        reopened.insert(pt(RelationTriple("d", "e", "f")))
        assert len(TripleStore.load(path)) == 3


words = st.sampled_from(["virus", "drug", "a", "b", "c", "treats", "x"])
phrases = st.lists(words, min_size=1, max_size=3).map(" ".join)


@given(st.lists(st.tuples(phrases, phrases, phrases), max_size=8), phrases, phrases)
def test_has_relation_symmetric(triples, e1, e2):
    store = TripleStore()
    for i, t in enumerate(triples):
        store.insert(pt(RelationTriple(*t), span=(i, i + 1)))
    assert store.has_relation(e1, e2) == store.has_relation(e2, e1)
    # oracle: direct scan
    expect = any((e1 in a1 and e2 in a2) or (e2 in a1 and e1 in a2) for a1, _, a2 in triples)
    assert store.has_relation(e1, e2) == expect
