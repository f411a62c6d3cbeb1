"""Two-annotator agreement: contingency tables, Cohen's kappa, reports."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

ANNOTATORS = ("I", "II")
VERDICTS = ("correct", "incorrect")


class AnnotationError(ValueError):
    pass


@dataclass(frozen=True)
class AnnotationRecord:
    item_id: str
    annotator: str
    verdict: str

    def __post_init__(self) -> None:
        if self.annotator not in ANNOTATORS:
            raise AnnotationError(f"annotator must be one of {ANNOTATORS}, got {self.annotator!r}")
        if self.verdict not in VERDICTS:
            raise AnnotationError(f"verdict must be one of {VERDICTS}, got {self.verdict!r}")

    @property
    def correct(self) -> bool:
        return self.verdict == "correct"


@dataclass(frozen=True)
class ContingencyTable:
    """2x2 joint verdict counts: ``a`` both correct, ``b`` only I, ``c`` only II, ``d`` neither."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self) -> None:
        if min(self.a, self.b, self.c, self.d) < 0:
            raise AnnotationError("cells must be non-negative")
        if self.n == 0:
            raise AnnotationError("contingency table is empty")

    @property
    def n(self) -> int:
        return self.a + self.b + self.c + self.d

    def swapped(self) -> "ContingencyTable":
        return ContingencyTable(self.a, self.c, self.b, self.d)


def build_contingency(records: Iterable[AnnotationRecord]) -> ContingencyTable:
    by_item: dict[str, dict[str, bool]] = defaultdict(dict)
    for r in records:
        if r.annotator in by_item[r.item_id]:
            raise AnnotationError(f"duplicate verdict from annotator {r.annotator} for item {r.item_id!r}")
        by_item[r.item_id][r.annotator] = r.correct
    if not by_item:
        raise AnnotationError("no annotated items")
    cells = {(True, True): 0, (True, False): 0, (False, True): 0, (False, False): 0}
    for item_id, votes in by_item.items():
        missing = [a for a in ANNOTATORS if a not in votes]
        if missing:
            raise AnnotationError(f"item {item_id!r} lacks a verdict from annotator {missing[0]}")
        cells[votes["I"], votes["II"]] += 1
    return ContingencyTable(cells[True, True], cells[True, False], cells[False, True], cells[False, False])


def kappa_fraction(t: ContingencyTable) -> Fraction:
    n = t.n
    p_o = Fraction(t.a + t.d, n)
    p_e = Fraction((t.a + t.b) * (t.a + t.c) + (t.c + t.d) * (t.b + t.d), n * n)
    if p_e == 1:
        raise AnnotationError("kappa undefined: chance agreement is 1")
    return (p_o - p_e) / (1 - p_e)


def cohen_kappa(t: ContingencyTable) -> float:
    """Cohen's kappa, (p_o - p_e) / (1 - p_e), computed exactly then rounded to float."""
    return float(kappa_fraction(t))


@dataclass(frozen=True)
class AgreementReport:
    total: int
    correct_i: int
    correct_ii: int
    correct_both: int
    kappa: float
    table: ContingencyTable

    @staticmethod
    def _pct(count: int, total: int) -> float:
        return 100.0 * count / total

    @property
    def pct_i(self) -> float:
        return self._pct(self.correct_i, self.total)

    @property
    def pct_ii(self) -> float:
        return self._pct(self.correct_ii, self.total)

    @property
    def pct_both(self) -> float:
        return self._pct(self.correct_both, self.total)

    def to_dict(self) -> dict:
        t = self.table
        return {
            "total": self.total,
            "correct_I": self.correct_i, "pct_I": self.pct_i,
            "correct_II": self.correct_ii, "pct_II": self.pct_ii,
            "correct_both": self.correct_both, "pct_both": self.pct_both,
            "kappa": self.kappa,
            "table": {"a": t.a, "b": t.b, "c": t.c, "d": t.d},
        }

    def row(self) -> list[str]:
        def cell(count):
            return f"{count} ({percent(count, self.total)}%)"
        return [str(self.total), cell(self.correct_i), cell(self.correct_ii),
                cell(self.correct_both), f"{self.kappa:.2f}"]


def percent(count: int, total: int) -> int:
    """Whole percent, rounded half up, computed exactly."""
    return math.floor(Fraction(100 * count, total) + Fraction(1, 2))


def agreement_report(records: Sequence[AnnotationRecord], total: int | None = None) -> AgreementReport:
    """Per-annotator and strict (both-correct) rates plus kappa.

    ``total`` defaults to the number of annotated items; percentages are
    relative to it. Kappa uses the annotated items only.
    """
    t = build_contingency(records)
    total = t.n if total is None else total
    if total < t.n:
        raise AnnotationError(f"total {total} is smaller than the {t.n} annotated items")
    return AgreementReport(total, t.a + t.b, t.a + t.c, t.a, cohen_kappa(t), t)


def records_from_table(t: ContingencyTable, prefix: str = "item") -> list[AnnotationRecord]:
    """Expand cell counts into per-item verdicts (both annotators)."""
    out = []
    joint = [("correct", "correct")] * t.a + [("correct", "incorrect")] * t.b \
        + [("incorrect", "correct")] * t.c + [("incorrect", "incorrect")] * t.d
    width = len(str(len(joint)))
    for k, (v1, v2) in enumerate(joint):
        item = f"{prefix}{k:0{width}d}"
        out.append(AnnotationRecord(item, "I", v1))
        out.append(AnnotationRecord(item, "II", v2))
    return out


def table_from_marginals(n: int, correct_i: int, correct_ii: int, correct_both: int) -> ContingencyTable:
    """Recover the 2x2 table from the per-annotator and strict-agreement counts."""
    b, c = correct_i - correct_both, correct_ii - correct_both
    return ContingencyTable(correct_both, b, c, n - correct_both - b - c)


# -- files -----------------------------------------------------------------

def load_annotations(path: str | Path) -> list[AnnotationRecord]:
    """Read a CSV with header ``item_id,annotator,verdict``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"item_id", "annotator", "verdict"} <= set(reader.fieldnames):
            raise AnnotationError(f"{path}: expected header item_id,annotator,verdict")
        out = []
        for lineno, row in enumerate(reader, start=2):
            try:
                out.append(AnnotationRecord(row["item_id"].strip(), row["annotator"].strip(),
                                            row["verdict"].strip().lower()))
            except (AnnotationError, AttributeError) as exc:
                raise AnnotationError(f"{path}:{lineno}: {exc}") from None
    return out


def write_annotations(records: Iterable[AnnotationRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["item_id", "annotator", "verdict"])
        for r in records:
            w.writerow([r.item_id, r.annotator, r.verdict])


def merge_annotations(*batches: Sequence[AnnotationRecord]) -> list[AnnotationRecord]:
    """Combine separately collected files; each must hold one distinct annotator."""
    seen: dict[str, int] = {}
    merged = []
    for k, batch in enumerate(batches):
        who = {r.annotator for r in batch}
        if len(who) > 1:
            raise AnnotationError(f"batch {k} mixes annotators {sorted(who)}")
        for a in who:
            if a in seen:
                raise AnnotationError(f"annotator {a} appears in batches {seen[a]} and {k}")
            seen[a] = k
        merged.extend(batch)
    return merged


def format_table(reports: Mapping[str, AgreementReport]) -> str:
    header = ["", "Total", "Correct I", "Correct II", "Correct I & II", "Kappa score"]
    rows = [header] + [[name, *rep.row()] for name, rep in reports.items()]
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = [" | ".join(cell.ljust(w) for cell, w in zip(r, widths)) for r in rows]
    lines.insert(1, "-+-".join("-" * w for w in widths))
    return "\n".join(lines)
