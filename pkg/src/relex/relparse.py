"""Turn free-form LLM output into validated relation triples."""

from __future__ import annotations

import ast
import json
import logging
import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

from .ner import normalize

if TYPE_CHECKING:
    from .pairing import EntityPair

logger = logging.getLogger(__name__)

ACCEPTED = "accepted"
REJECTED = "rejected"

MISSING_ENTITY = "missing_entity"
MALFORMED = "malformed"
EMPTY_FIELD = "empty_field"

HEAD_ARG1 = "head->arg1"
HEAD_ARG2 = "head->arg2"


@dataclass(frozen=True)
class RelationTriple:
    arg1: str
    relation: str
    arg2: str

    def __post_init__(self) -> None:
        for name in ("arg1", "relation", "arg2"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value.strip():
                raise ValueError(f"{name} must be a non-empty string")

    def as_dict(self) -> dict[str, str]:
        return {"arg1": self.arg1, "relation": self.relation, "arg2": self.arg2}


@dataclass(frozen=True)
class Malformed:
    """An object that could not be read as a triple."""

    reason: str  # MALFORMED or EMPTY_FIELD
    obj: Any = None


@dataclass(frozen=True)
class ValidationOutcome:
    triple: RelationTriple
    status: str
    reason: str | None = None
    matched_orientation: str | None = None

    @property
    def accepted(self) -> bool:
        return self.status == ACCEPTED


# ---------------------------------------------------------------------------
# locating structured output

_CLOSERS = {"[": "]", "{": "}"}


def _string_end(text: str, i: int) -> int:
    """Index just past the quoted string opening at ``text[i]``, or -1.

    A quote char closes the string only when followed (after whitespace) by
    a structural character, so apostrophes inside single-quoted values
    (``'Crohn's disease'``) survive.
    """
    quote = text[i]
    j = i + 1
    n = len(text)
    while j < n:
        ch = text[j]
        if ch == "\\":
            j += 2
            continue
        if ch == quote:
            k = j + 1
            while k < n and text[k] in " \t\r\n":
                k += 1
            if k == n or text[k] in ":,]}":
                return j + 1
        j += 1
    return -1


def _balanced_end(text: str, start: int) -> int:
    """Index just past the bracket structure opening at ``text[start]``, or -1."""
    stack = [_CLOSERS[text[start]]]
    j = start + 1
    while j < len(text):
        ch = text[j]
        if ch in "'\"":
            end = _string_end(text, j)
            if end < 0:
                return -1
            j = end
            continue
        if ch in _CLOSERS:
            stack.append(_CLOSERS[ch])
        elif ch in "]}":
            if ch != stack.pop():
                return -1
            if not stack:
                return j + 1
        j += 1
    return -1


def _to_json(text: str) -> str:
    """Rewrite Python-style quoting as JSON, one string literal at a time."""
    out = []
    j = 0
    while j < len(text):
        ch = text[j]
        if ch not in "'\"":
            out.append(ch)
            j += 1
            continue
        end = _string_end(text, j)
        if end < 0:
            raise ValueError("unterminated string")
        inner = text[j + 1:end - 1]
        chars = []
        k = 0
        while k < len(inner):
            c = inner[k]
            if c == "\\" and k + 1 < len(inner):
                nxt = inner[k + 1]
                chars.append(nxt if nxt in "'" else c + nxt)
                k += 2
                continue
            chars.append('\\"' if c == '"' else c)
            k += 1
        out.append('"' + "".join(chars) + '"')
        j = end
    return "".join(out)


def _parse(fragment: str) -> Any:
    try:
        return json.loads(fragment)
    except json.JSONDecodeError:
        pass
    try:
        return json.loads(_to_json(fragment))
    except (ValueError, json.JSONDecodeError):
        pass
    try:
        return ast.literal_eval(fragment)
    except (ValueError, SyntaxError, MemoryError, RecursionError, TypeError):
        return None


def extract_objects(raw: str) -> list[dict]:
    """Find the first parseable array of objects (or a lone object) in ``raw``.

    Surrounding prose and code fences are ignored and single-quoted keys and
    values are accepted. Returns ``[]`` when nothing usable is found; never
    raises.
    """
    if not isinstance(raw, str):
        return []
    for m in re.finditer(r"[\[{]", raw):
        start = m.start()
        end = _balanced_end(raw, start)
        if end < 0:
            continue
        value = _parse(raw[start:end])
        if isinstance(value, dict):
            return [value]
        if isinstance(value, list):
            objs = [v for v in value if isinstance(v, dict)]
            if objs:
                return objs
    logger.debug("no structured objects in output: %.80r", raw)
    return []


# ---------------------------------------------------------------------------
# normalization and validation

ARG1_KEYS = ("entity1", "head entity", "head_entity", "subject", "arg1")
ARG2_KEYS = ("entity2", "tail entity", "tail_entity", "object", "arg2")
RELATION_KEYS = ("relation", "rel", "predicate")


def _key(k: Any) -> str:
    return " ".join(str(k).strip().lower().replace("_", " ").split())


_ALIASES = {
    **{_key(k): "arg1" for k in ARG1_KEYS},
    **{_key(k): "arg2" for k in ARG2_KEYS},
    **{_key(k): "relation" for k in RELATION_KEYS},
}


def normalize_triple(obj: Any) -> RelationTriple | Malformed:
    """Map key aliases onto (arg1, relation, arg2) and trim the values."""
    if not isinstance(obj, dict):
        return Malformed(MALFORMED, obj)
    fields: dict[str, Any] = {}
    for k, v in obj.items():
        slot = _ALIASES.get(_key(k))
        if slot is not None and slot not in fields:
            fields[slot] = v
    if len(fields) < 3:
        return Malformed(MALFORMED, obj)
    values = {}
    for slot, v in fields.items():
        if isinstance(v, bool) or not isinstance(v, (str, int, float)):
            return Malformed(MALFORMED, obj)
        values[slot] = str(v).strip()
    if not all(values.values()):
        return Malformed(EMPTY_FIELD, obj)
    return RelationTriple(values["arg1"], values["relation"], values["arg2"])


def contains(haystack: str, needle_canonical: str) -> bool:
    return needle_canonical in normalize(haystack)


def validate_containment(triple: RelationTriple, pair: "EntityPair") -> ValidationOutcome:
    """Accept a triple only if its arguments carry both target entities.

    Either orientation is fine since the model picks which entity is head.
    """
    head, tail = pair.head.canonical, pair.tail.canonical
    if contains(triple.arg1, head) and contains(triple.arg2, tail):
        return ValidationOutcome(triple, ACCEPTED, None, HEAD_ARG1)
    if contains(triple.arg2, head) and contains(triple.arg1, tail):
        return ValidationOutcome(triple, ACCEPTED, None, HEAD_ARG2)
    return ValidationOutcome(triple, REJECTED, MISSING_ENTITY, None)


def parse_completion(raw: str, pair: "EntityPair") -> tuple[int, list[ValidationOutcome], list[Malformed]]:
    """Run extraction, normalization and validation over one completion.

    Returns the number of objects found, the validation outcomes of the
    well-formed ones and the malformed leftovers.
    """
    objs = extract_objects(raw)
    outcomes: list[ValidationOutcome] = []
    bad: list[Malformed] = []
    for obj in objs:
        t = normalize_triple(obj)
        if isinstance(t, Malformed):
            bad.append(t)
            logger.info("rejected doc_id=%s pair=(%s, %s) reason=%s",
                        pair.doc_id, pair.head.surface, pair.tail.surface, t.reason)
            continue
        outcome = validate_containment(t, pair)
        if not outcome.accepted:
            logger.info("rejected doc_id=%s pair=(%s, %s) reason=%s",
                        pair.doc_id, pair.head.surface, pair.tail.surface, outcome.reason)
        outcomes.append(outcome)
    return len(objs), outcomes, bad
