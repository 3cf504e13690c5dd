"""Binary classification metrics, stratified folds, cross-validation reports."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Protocol, Sequence

from .gold import GoldRow


class EvaluationError(Exception):
    pass


class RunnerError(EvaluationError):
    pass


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def as_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


@dataclass(frozen=True)
class Metrics:
    f1: float
    accuracy: float
    precision: float
    recall: float

    def as_dict(self) -> dict:
        return {
            "f1": self.f1,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
        }


METRIC_NAMES = ("f1", "accuracy", "precision", "recall")


def confusion_counts(
    predictions: Mapping[str, int], gold: Mapping[str, int]
) -> Confusion:
    if not gold:
        raise EvaluationError("empty evaluation set")
    if set(predictions) != set(gold):
        missing = set(gold) - set(predictions)
        extra = set(predictions) - set(gold)
        raise EvaluationError(
            f"prediction/gold id mismatch (missing={len(missing)}, extra={len(extra)})"
        )
    tp = fp = fn = tn = 0
    for sample_id, truth in gold.items():
        pred = predictions[sample_id]
        if pred == 1 and truth == 1:
            tp += 1
        elif pred == 1 and truth == 0:
            fp += 1
        elif pred == 0 and truth == 1:
            fn += 1
        else:
            tn += 1
    return Confusion(tp=tp, fp=fp, fn=fn, tn=tn)


def metrics_from_confusion(c: Confusion) -> Metrics:
    """Positive-class precision/recall/F1 plus accuracy; zero denominators
    yield 0 by convention, keeping every metric total."""
    precision = c.tp / (c.tp + c.fp) if (c.tp + c.fp) > 0 else 0.0
    recall = c.tp / (c.tp + c.fn) if (c.tp + c.fn) > 0 else 0.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if (precision + recall) > 0
        else 0.0
    )
    accuracy = (c.tp + c.tn) / c.total
    return Metrics(f1=f1, accuracy=accuracy, precision=precision, recall=recall)


def binary_metrics(
    predictions: Mapping[str, int], gold: Mapping[str, int]
) -> Metrics:
    return metrics_from_confusion(confusion_counts(predictions, gold))


@dataclass(frozen=True)
class FoldSpec:
    k: int
    seed: int
    dimension: str
    folds: tuple  # tuple of tuples of sample_ids (test split per fold)

    def test_ids(self, fold_index: int) -> tuple:
        return self.folds[fold_index]

    def train_ids(self, fold_index: int) -> list:
        return [
            sid
            for i, fold in enumerate(self.folds)
            if i != fold_index
            for sid in fold
        ]

    def to_json(self) -> str:
        return json.dumps(
            {
                "k": self.k,
                "seed": self.seed,
                "dimension": self.dimension,
                "folds": [list(f) for f in self.folds],
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "FoldSpec":
        data = json.loads(text)
        return cls(
            k=data["k"],
            seed=data["seed"],
            dimension=data["dimension"],
            folds=tuple(tuple(f) for f in data["folds"]),
        )


def make_folds(
    rows: Sequence[GoldRow], dimension: str, k: int = 5, seed: int = 0
) -> FoldSpec:
    """Stratified k-fold partition, deterministic under the seed.

    Positives and negatives are shuffled and dealt separately; size
    remainders go to the first folds for positives and the last folds for
    negatives, so fold sizes never differ by more than one while per-fold
    positive counts stay within one of each other.
    """
    if len(rows) < k:
        raise EvaluationError(f"need at least {k} samples, got {len(rows)}")
    positives = [r.sample_id for r in rows if r.label(dimension) == 1]
    negatives = [r.sample_id for r in rows if r.label(dimension) == 0]
    if len(positives) < k:
        raise EvaluationError(
            f"need at least {k} positive samples for stratification, got {len(positives)}"
        )
    rng = random.Random(seed)
    rng.shuffle(positives)
    rng.shuffle(negatives)

    def deal(ids: list, extras_first: bool) -> list[list]:
        base, rem = divmod(len(ids), k)
        sizes = [base + (1 if i < rem else 0) for i in range(k)]
        if not extras_first:
            sizes.reverse()
        parts = []
        cursor = 0
        for size in sizes:
            parts.append(ids[cursor : cursor + size])
            cursor += size
        return parts

    pos_parts = deal(positives, extras_first=True)
    neg_parts = deal(negatives, extras_first=False)
    folds = tuple(tuple(p + n) for p, n in zip(pos_parts, neg_parts))
    return FoldSpec(k=k, seed=seed, dimension=dimension, folds=folds)


class PredictionRunner(Protocol):
    name: str

    def predict(
        self, train_rows: Sequence[GoldRow], test_rows: Sequence[GoldRow]
    ) -> dict[str, int]: ...


class ConstantRunner:
    """Degenerate runner predicting a fixed label; useful as a sanity probe."""

    def __init__(self, value: int, name: str = "constant"):
        self.value = value
        self.name = name

    def predict(self, train_rows, test_rows) -> dict[str, int]:
        return {r.sample_id: self.value for r in test_rows}


class PredictionFileRunner:
    """Reads per-fold prediction files produced by an external trainer.

    Files are jsonl records {sample_id, prob, pred}; when only prob is
    present, pred = 1 iff prob >= threshold. The fold index is injected into
    the path template before each read.
    """

    def __init__(self, path_template: str, threshold: float = 0.5, name: str = "predfiles"):
        self.path_template = path_template
        self.threshold = threshold
        self.name = name
        self._fold_index = 0

    def set_fold(self, fold_index: int) -> None:
        self._fold_index = fold_index

    def predict(self, train_rows, test_rows) -> dict[str, int]:
        path = Path(self.path_template.format(fold=self._fold_index))
        if not path.exists():
            raise RunnerError(f"missing prediction file: {path}")
        preds: dict[str, int] = {}
        with path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                if "pred" in rec:
                    preds[rec["sample_id"]] = int(rec["pred"])
                elif "prob" in rec:
                    preds[rec["sample_id"]] = int(float(rec["prob"]) >= self.threshold)
                else:
                    raise RunnerError(f"{path}: record needs pred or prob")
        wanted = {r.sample_id for r in test_rows}
        missing = wanted - set(preds)
        if missing:
            raise RunnerError(
                f"{path}: predictions missing for {len(missing)} test ids"
            )
        return {sid: preds[sid] for sid in wanted}


@dataclass(frozen=True)
class CVReport:
    model: str
    dimension: str
    hyper: str
    fold_metrics: tuple  # tuple[Metrics, ...]
    mean: dict = field(default_factory=dict)
    std: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "dimension": self.dimension,
            "hyper": self.hyper,
            "folds": [m.as_dict() for m in self.fold_metrics],
            "mean": self.mean,
            "std": self.std,
        }


class CrossValidationError(EvaluationError):
    """Runner failure mid-run; carries whatever folds completed."""

    def __init__(self, message: str, partial: "CVReport"):
        super().__init__(message)
        self.partial = partial


def _aggregate(fold_metrics: Sequence[Metrics]) -> tuple[dict, dict]:
    mean = {}
    std = {}
    n = len(fold_metrics)
    for name in METRIC_NAMES:
        values = [getattr(m, name) for m in fold_metrics]
        mu = sum(values) / n if n else 0.0
        mean[name] = mu
        # Population std over the k fold values.
        std[name] = (sum((v - mu) ** 2 for v in values) / n) ** 0.5 if n else 0.0
    return mean, std


def cross_validate(
    runner: PredictionRunner,
    rows: Sequence[GoldRow],
    folds: FoldSpec,
    model: Optional[str] = None,
    hyper: str = "base",
) -> CVReport:
    """Evaluate a runner over every fold; mean/std aggregate the k folds."""
    by_id = {r.sample_id: r for r in rows}
    fold_metrics: list[Metrics] = []
    model_name = model or getattr(runner, "name", "model")
    for fold_index in range(folds.k):
        test_rows = [by_id[sid] for sid in folds.test_ids(fold_index)]
        train_rows = [by_id[sid] for sid in folds.train_ids(fold_index)]
        if hasattr(runner, "set_fold"):
            runner.set_fold(fold_index)
        try:
            predictions = runner.predict(train_rows, test_rows)
        except Exception as exc:
            mean, std = _aggregate(fold_metrics)
            partial = CVReport(
                model=model_name,
                dimension=folds.dimension,
                hyper=hyper,
                fold_metrics=tuple(fold_metrics),
                mean=mean,
                std=std,
            )
            raise CrossValidationError(
                f"runner failed on fold {fold_index}: {exc}", partial
            ) from exc
        gold = {r.sample_id: r.label(folds.dimension) for r in test_rows}
        fold_metrics.append(binary_metrics(predictions, gold))
    mean, std = _aggregate(fold_metrics)
    return CVReport(
        model=model_name,
        dimension=folds.dimension,
        hyper=hyper,
        fold_metrics=tuple(fold_metrics),
        mean=mean,
        std=std,
    )


def format_cell(mean: float, std: float) -> str:
    return f"{mean:.4f} ({std:.4f})"


def results_table(
    reports: Sequence[CVReport], metric: str = "f1"
) -> tuple[str, list[list[str]]]:
    """Comparison table: rows per (dimension, hyper), columns per model.

    Returns (aligned plain text, csv rows including header). The best cell
    per row is flagged with a trailing '*'.
    """
    if not reports:
        raise EvaluationError("no reports to tabulate")
    if metric not in METRIC_NAMES:
        raise EvaluationError(f"unknown metric {metric!r}")
    models: list[str] = []
    for report in reports:
        if report.model not in models:
            models.append(report.model)
    groups: dict[tuple[str, str], dict[str, CVReport]] = {}
    for report in reports:
        groups.setdefault((report.dimension, report.hyper), {})[report.model] = report
    header = ["dimension", "hyper"] + models
    csv_rows = [header]
    for (dimension, hyper), by_model in groups.items():
        best_model = max(
            by_model, key=lambda m: (by_model[m].mean[metric], -models.index(m))
        )
        cells = []
        for model in models:
            report = by_model.get(model)
            if report is None:
                cells.append("")
                continue
            cell = format_cell(report.mean[metric], report.std[metric])
            if model == best_model:
                cell += " *"
            cells.append(cell)
        csv_rows.append([dimension, hyper] + cells)
    widths = [max(len(row[i]) for row in csv_rows) for i in range(len(header))]
    lines = []
    for row in csv_rows:
        lines.append("  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n", csv_rows
