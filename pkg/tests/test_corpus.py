import pytest
from hypothesis import given
from hypothesis import strategies as st

from relex.corpus import CorpusError, load_corpus, segment_sentences, sentence_of
from relex.testing import NCOV_TEXT, MLST_TEXT


def texts(body, sentences):
    return [s.text(body) for s in sentences]


class TestLoadCorpus:
    def test_two_records(self, write_jsonl):
        path = write_jsonl("c.jsonl", [{"doc_id": "a", "title": "A", "body": "x."},
                                       {"doc_id": "b", "title": "B", "body": "y.", "extra": 1}])
        docs = load_corpus(path)
        assert len(docs) == 2
        assert docs["b"].body == "y."
        assert not docs.errors

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        docs = load_corpus(path)
        assert len(docs) == 0 and not docs.errors

    def test_malformed_line_reported_and_skipped(self, write_jsonl):
        path = write_jsonl("c.jsonl", [{"doc_id": "a", "title": "", "body": "x"},
                                       '{"doc_id": "b", "title": ',
                                       {"doc_id": "c", "title": "", "body": "z"}])
        docs = load_corpus(path)
        assert [d.doc_id for d in docs] == ["a", "c"]
        assert len(docs.errors) == 1 and docs.errors[0].line == 2

    def test_missing_field_is_an_error_line(self, write_jsonl):
        path = write_jsonl("c.jsonl", [{"doc_id": "a", "title": ""}])
        docs = load_corpus(path)
        assert len(docs) == 0
        assert "body" in docs.errors[0].reason

    def test_duplicate_id_is_fatal(self, write_jsonl):
        path = write_jsonl("c.jsonl", [{"doc_id": "a", "title": "", "body": "x"}] * 2)
        with pytest.raises(CorpusError, match="duplicate"):
            load_corpus(path)


class TestSegmentSentences:
    def test_single_sentence(self):
        body = "A single sentence."
        sents = segment_sentences(body)
        assert len(sents) == 1
        assert (sents[0].start, sents[0].end) == (0, len(body))

    def test_empty(self):
        assert segment_sentences("") == []
        assert segment_sentences("   \n ") == []

    def test_mlst_paragraph(self):
        # segmented by hand
        expected = [
            "Escherichia coli O157:H7, an important food-borne pathogen, has become a major "
            "public health concern worldwide.",
            "The aim of this study was to investigate the molecular epidemiologic feature of "
            "E. coli O157:H7 strains in China.",
            "105 E. coli O157:H7 isolates were collected from various hosts and places over 9 years.",
            "A multilocus sequence typing scheme (MLST) was applied for bacteria genotyping and "
            "polymerase chain reaction (PCR) was used for virulence factor identification.",
        ]
        assert texts(MLST_TEXT, segment_sentences(MLST_TEXT)) == expected

    def test_ncov_paragraph(self):
        sents = texts(NCOV_TEXT, segment_sentences(NCOV_TEXT))
        assert len(sents) == 6
        assert sents[2].startswith("Coronavirus has caused")
        assert sents[5].startswith("Combination of Ribavirin")

    @pytest.mark.parametrize("body, n", [
        ("Results are shown in Fig. 3 of the appendix.", 1),
        ("As shown by Smith et al. 2020 this holds.", 1),
        ("Drugs e.g. Remdesivir were used.", 1),
        ("It worked! Then it failed? Yes.", 3),
        ("Dose was 5 mg. 20 patients responded.", 2),
        ('He said "stop." Then left.', 2),
        ("lower case follows. so no split here.", 1),
    ])
    def test_rules(self, body, n):
        assert len(segment_sentences(body)) == n

    def test_sentence_of(self):
        body = "One two. Three four."
        sents = segment_sentences(body)
        assert sentence_of(sents, 9, 14).index == 1
        assert sentence_of(sents, 0, 3).index == 0
        assert sentence_of(sents, 7, 10) is None


@given(st.text(alphabet=st.sampled_from(list("abcAB1 .?!\n\"')(E")), max_size=80))
def test_segmentation_invariants(body):
    sents = segment_sentences(body)
    prev_end = 0
    for i, s in enumerate(sents):
        assert s.index == i
        assert prev_end <= s.start < s.end <= len(body)
        chunk = body[s.start:s.end]
        assert chunk == chunk.strip() and chunk
        prev_end = s.end
    covered = "".join(body[s.start:s.end] for s in sents)
    assert "".join(covered.split()) == "".join(body.split())
    assert segment_sentences(body) == sents
