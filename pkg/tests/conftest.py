import json

import pytest
from hypothesis import settings

from relex.corpus import Document
from relex.testing import NCOV_OUTPUT, NCOV_TEXT, MLST_OUTPUT, MLST_TEXT

settings.register_profile("ci", deadline=None)
settings.load_profile("ci")

ZIKA_SENTENCE = ("Zika virus (ZIKV) is a flavivirus transmitted via mosquitoes and sex to cause "
                   "congenital neurodevelopmental defects, including microcephaly...")


@pytest.fixture
def ncov_doc():
    return Document("ncov", "NCP", NCOV_TEXT)


@pytest.fixture
def mlst_doc():
    return Document("mlst", "E. coli", MLST_TEXT)


@pytest.fixture
def ncov_output():
    return NCOV_OUTPUT


@pytest.fixture
def mlst_output():
    return MLST_OUTPUT


@pytest.fixture
def write_jsonl(tmp_path):
    def write(name, records):
        path = tmp_path / name
        with open(path, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write((rec if isinstance(rec, str) else json.dumps(rec)) + "\n")
        return path
    return write
