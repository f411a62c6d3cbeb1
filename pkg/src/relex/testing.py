"""Offline fixtures: a small synthetic corpus and a scripted LLM endpoint.

``write_desk_fixture`` lays out a corpus, gazetteer and (optionally) a
replay cache recorded against :func:`scripted_transport`, so the whole
pipeline can run deterministically without network access.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
import threading
import time
from pathlib import Path

import httpx

NCOV_TEXT = (
    "The New Coronavirus Pneumonia (NCP, also named as COVID-19 by WHO on Feb 11 2020, is now "
    "causing a severe public health emergency in China since. The number of diagnosed cases is "
    "more than 40,000 until the submission of this manuscript. Coronavirus has caused several "
    "epidemic situations world widely, but the present contagious disease caused by 2019 new "
    "Coronavirus is unprecedentedly fulminating. The published cohorts of 2019 new Coronavirus "
    "(n-Cov) are single-center studies, or retrospective studies. We here share the therapeutic "
    "experiences of NCP treatment with literature review. Combination of Ribavirin and "
    "Interferon-a is recommended by the 5(th) edition National Health Commission's Regimen "
    "(Revised Edition) because of the effect on MERS (Middle East Respiratory Syndrome), and the "
    "effectiveness of Lopinavir/Ritonavir and Remdisivir needs to be confirmed by randomized "
    "controlled trial (RCT), given the situation of no specific antivirus drug on NCP is unavailable."
)

NCOV_OUTPUT = ("[{'relation': 'treatment', 'entity1': 'combination of Ribavirin and Interferon', "
                 "'entity2': '2019 new Coronavirus (n-Cov)'}]")

MLST_TEXT = (
    "Escherichia coli O157:H7, an important food-borne pathogen, has become a major public health "
    "concern worldwide. The aim of this study was to investigate the molecular epidemiologic "
    "feature of E. coli O157:H7 strains in China. 105 E. coli O157:H7 isolates were collected from "
    "various hosts and places over 9 years. A multilocus sequence typing scheme (MLST) was applied "
    "for bacteria genotyping and polymerase chain reaction (PCR) was used for virulence factor "
    "identification."
)

MLST_OUTPUT = (
    "[{'relation': 'uses', 'head entity': 'multilocus sequence typing scheme (MLST)', "
    "'tail entity': 'Escherichia coli O157:H7 strains'}, "
    "{'relation': 'applied for', 'head entity': 'multilocus sequence typing scheme (MLST)', "
    "'tail entity': 'bacteria genotyping'}, "
    "{'relation': 'used for', 'head entity': 'polymerase chain reaction (PCR)', "
    "'tail entity': 'virulence factor identification'}, "
    "{'relation': 'identified', 'head entity': 'Escherichia coli O157:H7', "
    "'tail entity': '105 isolates'}, "
    "{'relation': 'collected', 'head entity': '105 E. coli O157:H7 isolates', "
    "'tail entity': 'various hosts and places over 9 years'}]"
)

VOCAB = {
    "VIRUS": ["SARS-CoV-2", "Zika virus", "influenza A", "MERS-CoV", "dengue virus"],
    "DRUG": ["remdesivir", "ribavirin", "dexamethasone", "favipiravir", "tocilizumab"],
    "DISEASE": ["pneumonia", "microcephaly", "acute respiratory distress syndrome", "myocarditis"],
    "CELL": ["alveolar macrophages", "T cells", "ACE2-expressing cells"],
}

_SENTENCE_FORMS = [
    "{a} was detected in samples from {n} patients.",
    "Infection with {a} is frequently reported in hospital cohorts.",
    "Treatment with {a} was evaluated in a randomized trial.",
    "Patients later developed {a} during follow-up.",
    "Elevated markers were observed in {a} after {n} days.",
    "{A} remains a focus of ongoing surveillance, e.g. in Fig. 2 of prior work.",
    "Samples were processed as described by Smith et al. in {n} laboratories.",
]


def _capitalize(s: str) -> str:
    return s[:1].upper() + s[1:]


def synthetic_documents(n: int = 18, seed: int = 7) -> list[dict]:
    rng = random.Random(seed)
    terms = [t for ts in VOCAB.values() for t in ts]
    docs = []
    for i in range(n):
        sentences = []
        for _ in range(rng.randint(3, 7)):
            form = rng.choice(_SENTENCE_FORMS)
            term = rng.choice(terms)
            sentences.append(form.format(a=term, A=_capitalize(term), n=rng.randint(2, 400)))
        docs.append({"doc_id": f"syn{i:03d}", "title": f"Synthetic abstract {i}",
                     "body": " ".join(sentences)})
    return docs


def desk_documents() -> list[dict]:
    return [
        {"doc_id": "ncov", "title": "Therapeutic experiences of NCP", "body": NCOV_TEXT},
        {"doc_id": "mlst", "title": "E. coli O157:H7 epidemiology", "body": MLST_TEXT},
        *synthetic_documents(),
    ]


def desk_gazetteer() -> list[tuple[str, str]]:
    terms = [(t, label) for label, ts in VOCAB.items() for t in ts]
    return terms + [("Coronavirus", "VIRUS"), ("coli", "BACTERIUM"),
                    ("multilocus sequence", "METHOD")]


_ENTITIES_RE = [
    re.compile(r'that involves both "(?P<h>.*?)" and "(?P<t>.*?)"\.'),
    re.compile(r'^Find every relations between "(?P<h>.*?)" and "(?P<t>.*?)" in the sentence'),
]


def prompt_entities(prompt: str) -> tuple[str, str] | None:
    for pat in _ENTITIES_RE:
        m = pat.search(prompt)
        if m:
            return m.group("h"), m.group("t")
    return None


def scripted_response(prompt: str) -> str:
    """A deterministic fake model output covering the parser's main cases."""
    if "Ribavirin" in prompt and "Coronavirus" in prompt:
        return NCOV_OUTPUT
    if "multilocus sequence" in prompt and "coli" in prompt:
        return MLST_OUTPUT
    ents = prompt_entities(prompt)
    if ents is None:
        return "I could not find any relations."
    head, tail = ents
    kind = int(hashlib.sha256(prompt.encode("utf-8")).hexdigest(), 16) % 5
    if kind == 0:
        return json.dumps([{"relation": "associated with", "entity1": head, "entity2": tail}])
    if kind == 1:
        return ("Here are the relations:\n```json\n"
                + json.dumps([{"relation": "observed with", "head entity": f"levels of {tail}",
                               "tail entity": f"{head} infection"},
                              {"relation": "reported in", "head entity": head,
                               "tail entity": "hospital cohorts"}], indent=1)
                + "\n```")
    if kind == 2:
        return "There is no explicit relation between these entities in the text."
    if kind == 3:
        return str([{"relation": "treats", "entity1": head},
                    {"relation": "co-occurs with", "entity1": tail, "entity2": head}])
    return str([{"relation": "", "entity1": head, "entity2": tail},
                {"relation": "affects", "subject": "patients", "object": tail}])


class ScriptedEndpoint:
    """httpx handler imitating an OpenAI-compatible server.

    Tracks request count and the peak number of concurrent requests.
    ``fail`` maps a substring of the prompt to an HTTP status to return.
    """

    def __init__(self, responder=scripted_response, delay: float = 0.0, fail: dict | None = None):
        self.responder = responder
        self.delay = delay
        self.fail = fail or {}
        self.requests = 0
        self.in_flight = 0
        self.peak_in_flight = 0
        self._lock = threading.Lock()

    def __call__(self, request: httpx.Request) -> httpx.Response:
        with self._lock:
            self.requests += 1
            self.in_flight += 1
            self.peak_in_flight = max(self.peak_in_flight, self.in_flight)
        try:
            if self.delay:
                time.sleep(self.delay)
            body = json.loads(request.content)
            prompt = body["messages"][-1]["content"] if "messages" in body else body["prompt"]
            for needle, status in self.fail.items():
                if needle in prompt:
                    return httpx.Response(status, text=f"scripted failure {status}")
            text = self.responder(prompt)
            if "messages" in body:
                choice = {"index": 0, "message": {"role": "assistant", "content": text}}
            else:
                choice = {"index": 0, "text": text}
            return httpx.Response(200, json={"choices": [choice], "model": body.get("model", "")})
        finally:
            with self._lock:
                self.in_flight -= 1


def scripted_transport(endpoint: ScriptedEndpoint | None = None) -> httpx.MockTransport:
    return httpx.MockTransport(endpoint or ScriptedEndpoint())


def write_desk_fixture(directory: str | Path, record_cache: bool = True,
                       timestamp: str = "2024-01-01T00:00:00+00:00") -> dict[str, Path]:
    """Write corpus.jsonl, gazetteer.tsv and, if asked, a recorded cache.jsonl.

    The cache is filled by running extraction once against the scripted
    endpoint; its timestamps are pinned so replayed stores are stable.
    """
    from .corpus import write_corpus, Document
    from .llm_client import EndpointConfig, GenerationParams, LLMClient, ResponseCache
    from .pipeline import PipelineConfig, extract

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {"corpus": d / "corpus.jsonl", "gazetteer": d / "gazetteer.tsv", "cache": d / "cache.jsonl"}
    write_corpus([Document(**rec) for rec in desk_documents()], paths["corpus"])
    with open(paths["gazetteer"], "w", encoding="utf-8") as fh:
        for term, label in desk_gazetteer():
            fh.write(f"{term}\t{label}\n")
    if record_cache:
        if paths["cache"].exists():
            paths["cache"].unlink()
        cache = ResponseCache()
        client = LLMClient(GenerationParams("scripted-model"), EndpointConfig("http://scripted.invalid/v1"),
                           cache, "record", transport=scripted_transport())
        with client:
            extract(PipelineConfig(corpus=paths["corpus"], gazetteer=paths["gazetteer"]), client)
        with open(paths["cache"], "w", encoding="utf-8") as fh:
            for rec in sorted(cache.records(), key=lambda r: r["prompt_hash"]):
                rec = dict(rec, timestamp=timestamp)
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    return paths
