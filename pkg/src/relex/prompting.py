"""Entity markers and zero-shot prompt templates."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .pairing import EntityPair, context_text

# Wording (quirks included) kept exactly as evaluated.
TEMPLATES: dict[int, str] = {
    1: ('extract all the relations inside the sentence in the sentence: " {context}" '
        'that involves both "{head}" and "{tail}". The results should be in JSON format '
        'that each JSON object has 3 keys which are "relation" and "entity1" and "entity2".'),
    2: ('Find every relations between "{head}" and "{tail}" in the sentence: " {context}" '
        'The results should be in JSON format.'),
}

_PLACEHOLDER = re.compile(r"\{(context|head|tail)\}")


class PromptError(ValueError):
    pass


@dataclass(frozen=True)
class MarkerConfig:
    open_marker: str = "[E]"
    close_marker: str = "[/E]"

    def __post_init__(self) -> None:
        if not self.open_marker or not self.close_marker:
            raise ValueError("markers must be non-empty")
        if self.open_marker == self.close_marker:
            raise ValueError("open and close markers must differ")


@dataclass(frozen=True)
class PromptInstance:
    template_id: int
    text: str
    marked_context: str
    pair: EntityPair | None = None


def mark_entities(
    context: str,
    head_span: tuple[int, int],
    tail_span: tuple[int, int],
    cfg: MarkerConfig = MarkerConfig(),
) -> str:
    """Wrap both spans with the same open/close markers.

    Head and tail get identical markers so the model picks the direction.
    """
    for start, end in (head_span, tail_span):
        if not 0 <= start < end <= len(context):
            raise PromptError(f"span [{start}, {end}) outside context of length {len(context)}")
    (s1, e1), (s2, e2) = sorted([tuple(head_span), tuple(tail_span)])
    if s2 < e1:
        raise PromptError("overlapping entity spans")
    for marker in (cfg.open_marker, cfg.close_marker):
        if marker in context:
            raise PromptError(f"marker {marker!r} already occurs in context")
    out = context
    for start, end in ((s2, e2), (s1, e1)):  # right to left keeps offsets valid
        out = out[:start] + cfg.open_marker + out[start:end] + cfg.close_marker + out[end:]
    return out


def strip_markers(text: str, cfg: MarkerConfig = MarkerConfig()) -> str:
    pattern = "|".join(re.escape(m) for m in sorted((cfg.open_marker, cfg.close_marker), key=len, reverse=True))
    return re.sub(pattern, "", text)


def render_prompt(
    template_id: int,
    marked_context: str,
    head_surface: str,
    tail_surface: str,
    templates: Mapping[int, str] = TEMPLATES,
    pair: EntityPair | None = None,
) -> PromptInstance:
    if template_id not in templates:
        raise PromptError(f"unknown template_id {template_id!r}; known: {sorted(templates)}")
    values = {"context": marked_context, "head": head_surface, "tail": tail_surface}
    text = _PLACEHOLDER.sub(lambda m: values[m.group(1)], templates[template_id])
    return PromptInstance(template_id, text, marked_context, pair)


def prompt_for_pair(
    pair: EntityPair,
    body: str,
    template_id: int = 1,
    templates: Mapping[int, str] = TEMPLATES,
    cfg: MarkerConfig = MarkerConfig(),
) -> PromptInstance:
    marked = mark_entities(context_text(pair, body), pair.head_span(), pair.tail_span(), cfg)
    return render_prompt(template_id, marked, pair.head.surface, pair.tail.surface, templates, pair)


def load_templates(path: str | Path) -> dict[int, str]:
    """Read ``<id>: <template>`` lines; ``#`` starts a comment line.

    Templates use the ``{context}``, ``{head}`` and ``{tail}`` placeholders.
    The built-in templates are included unless overridden by id.
    """
    templates = dict(TEMPLATES)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            ident, sep, text = line.rstrip("\n").partition(":")
            if not sep or not ident.strip().isdigit():
                raise PromptError(f"{path}:{lineno}: expected '<id>: <template>'")
            text = text.strip()
            if "{context}" not in text:
                raise PromptError(f"{path}:{lineno}: template lacks a {{context}} placeholder")
            templates[int(ident)] = text
    return templates
