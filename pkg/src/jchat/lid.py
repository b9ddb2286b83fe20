"""
Language-based document filtering.

A document is retained only when its target-language probability is
strictly greater than the configured threshold ("exceed" read literally,
so p equal to the threshold rejects).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .model import AudioDocument, LidConfig


class MissingLidResult(Exception):
    """A document reached the language filter without a LID result."""

    def __init__(self, doc_id: str):
        super().__init__(f"no language-identification result for document {doc_id}")
        self.doc_id = doc_id


@dataclass
class LanguageIdResult:
    doc_id: str
    probabilities: dict[str, float]
    target_language: str

    @property
    def p_target(self) -> float:
        return self.probabilities.get(self.target_language, 0.0)

    def validate(self) -> list[str]:
        problems = []
        for lang, p in self.probabilities.items():
            if not (0 <= p <= 1):
                problems.append(f"probabilities[{lang}]: {p} outside [0, 1]")
        if sum(self.probabilities.values()) > 1 + 1e-6:
            problems.append("probabilities: sum exceeds 1")
        return problems


@dataclass
class LidPartition:
    retained: list[AudioDocument] = field(default_factory=list)
    rejected: list[AudioDocument] = field(default_factory=list)


def filter_by_language(docs: list[AudioDocument],
                       results: dict[str, LanguageIdResult],
                       config: LidConfig) -> LidPartition:
    """Partition docs by p_target > threshold, preserving input order."""
    partition = LidPartition()
    for doc in docs:
        result = results.get(doc.doc_id)
        if result is None:
            raise MissingLidResult(doc.doc_id)
        doc.lid = {
            "probabilities": dict(result.probabilities),
            "p_target": result.p_target,
        }
        if result.p_target > config.threshold:
            doc.stage_status["lid"] = "done"
            partition.retained.append(doc)
        else:
            doc.stage_status["lid"] = "rejected"
            partition.rejected.append(doc)
    return partition


def lid_yield_report(partition: LidPartition) -> dict[str, dict]:
    """Per-source retention: exact fraction plus a 1-decimal percentage.

    Sources with no documents report "n/a".
    """
    by_source: dict[str, dict[str, int]] = {}
    for doc in partition.retained:
        by_source.setdefault(doc.source, {"retained": 0, "total": 0})
        by_source[doc.source]["retained"] += 1
        by_source[doc.source]["total"] += 1
    for doc in partition.rejected:
        by_source.setdefault(doc.source, {"retained": 0, "total": 0})
        by_source[doc.source]["total"] += 1

    report = {}
    for source, counts in sorted(by_source.items()):
        if counts["total"] == 0:
            report[source] = {"retained": 0, "total": 0, "fraction": None, "percent": "n/a"}
        else:
            frac = Fraction(counts["retained"], counts["total"])
            report[source] = {
                "retained": counts["retained"],
                "total": counts["total"],
                "fraction": [frac.numerator, frac.denominator],
                "percent": f"{100 * float(frac):.1f}%",
            }
    return report
