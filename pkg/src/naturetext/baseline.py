"""Two-layer keyword classifier for biodiversity and its evaluation.

A sentence is positive iff it contains at least one *specific* keyword and
at least one *additional* keyword at non-identical spans. The additional
keywords are pooled across their thematic groups: the canonical positive
example pairs specific "forest" with additional "climate", which only a
pooled reading supports.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .evaluation import Confusion, Metrics, confusion_counts, metrics_from_confusion
from .gold import GoldRow
from .keywords import KeywordMatcher


class BaselineError(Exception):
    pass


@dataclass(frozen=True)
class TwoLayerRule:
    specific_patterns: tuple
    additional_patterns: tuple

    def __post_init__(self) -> None:
        if not self.specific_patterns or not self.additional_patterns:
            raise BaselineError("both keyword layers must be non-empty")


def _read_patterns(name: str) -> tuple:
    text = (resources.files("naturetext") / "resources" / name).read_text("utf-8")
    return tuple(line.rstrip("\r\n") for line in text.splitlines() if line.strip())


def load_two_layer_rule() -> TwoLayerRule:
    return TwoLayerRule(
        specific_patterns=_read_patterns("twolayer_specific.txt"),
        additional_patterns=_read_patterns("twolayer_additional.txt"),
    )


class TwoLayerClassifier:
    """Caches the two matchers so corpus-scale classification stays fast."""

    def __init__(self, rule: Optional[TwoLayerRule] = None):
        self.rule = rule or load_two_layer_rule()
        self._specific = KeywordMatcher(list(self.rule.specific_patterns))
        self._additional = KeywordMatcher(list(self.rule.additional_patterns))

    def classify(self, text: str) -> int:
        specific_spans = {
            (h.offset, h.offset + len(h.pattern.encode("utf-8")))
            for h in self._specific.find_all(text)
        }
        if not specific_spans:
            return 0
        additional_spans = {
            (h.offset, h.offset + len(h.pattern.encode("utf-8")))
            for h in self._additional.find_all(text)
        }
        if not additional_spans:
            return 0
        # A single token may not fill both layers: demand two distinct spans.
        return int(len(specific_spans | additional_spans) >= 2)


def classify_two_layer(text: str, rule: Optional[TwoLayerRule] = None) -> int:
    return TwoLayerClassifier(rule).classify(text)


@dataclass(frozen=True)
class BaselineReport:
    target: str
    metrics: Metrics
    confusion: Confusion
    false_positives: tuple  # sample of misclassified ids with text
    false_negatives: tuple

    def as_dict(self) -> dict:
        return {
            "target": self.target,
            "metrics": self.metrics.as_dict(),
            "confusion": self.confusion.as_dict(),
            "false_positives": list(self.false_positives),
            "false_negatives": list(self.false_negatives),
        }


def evaluate_baseline(
    rows: Sequence[GoldRow],
    target: str,
    rule: Optional[TwoLayerRule] = None,
    error_sample_size: int = 10,
) -> BaselineReport:
    """Metrics and confusion counts of the rule against a gold label column.

    Deterministic and independent of row order; the error samples are taken
    in sample_id order for stable reports.
    """
    if target not in ("biodiversity", "nature"):
        raise BaselineError(f"unsupported target {target!r}")
    classifier = TwoLayerClassifier(rule)
    predictions = {r.sample_id: classifier.classify(r.text) for r in rows}
    gold = {r.sample_id: r.label(target) for r in rows}
    confusion = confusion_counts(predictions, gold)
    metrics = metrics_from_confusion(confusion)
    by_id = {r.sample_id: r for r in rows}
    fps = sorted(
        sid for sid, pred in predictions.items() if pred == 1 and gold[sid] == 0
    )
    fns = sorted(
        sid for sid, pred in predictions.items() if pred == 0 and gold[sid] == 1
    )
    sample_fp = tuple(
        {"sample_id": sid, "text": by_id[sid].text} for sid in fps[:error_sample_size]
    )
    sample_fn = tuple(
        {"sample_id": sid, "text": by_id[sid].text} for sid in fns[:error_sample_size]
    )
    return BaselineReport(
        target=target,
        metrics=metrics,
        confusion=confusion,
        false_positives=sample_fp,
        false_negatives=sample_fn,
    )


def write_baseline_report(report: BaselineReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report.as_dict(), indent=2) + "\n", encoding="utf-8")


def confusion_text(confusion: Confusion) -> str:
    """Plain-text 2x2 confusion matrix (predicted x actual)."""
    rows = [
        ["", "actual 1", "actual 0"],
        ["pred 1", str(confusion.tp), str(confusion.fp)],
        ["pred 0", str(confusion.fn), str(confusion.tn)],
    ]
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    return "\n".join(
        "  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in rows
    ) + "\n"
