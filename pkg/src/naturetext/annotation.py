"""Annotator label storage, gold aggregation, and agreement statistics.

Four registered annotators label every sample on three binary dimensions.
Majorities resolve directly; 2-2 splits queue for human adjudication. The
derived nature label is the OR of the three dimension labels.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence

DIMENSIONS = ("water", "forest", "biodiversity")

NEEDS_ADJUDICATION = "NeedsAdjudication"


class AnnotationError(Exception):
    pass


class UndefinedKappaError(AnnotationError):
    """Chance agreement is 1 (one category everywhere): kappa has no value."""


class Resolution(str, Enum):
    UNANIMOUS = "Unanimous"
    MAJORITY = "Majority"
    ADJUDICATED = "Adjudicated"


@dataclass(frozen=True)
class AnnotationRecord:
    sample_id: str
    annotator_id: str
    water: int
    forest: int
    biodiversity: int
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        for dim in DIMENSIONS:
            if getattr(self, dim) not in (0, 1):
                raise AnnotationError(f"{dim} label must be 0 or 1")

    def label(self, dimension: str) -> int:
        if dimension not in DIMENSIONS:
            raise AnnotationError(f"unknown dimension {dimension!r}")
        return int(getattr(self, dimension))


@dataclass(frozen=True)
class GoldSample:
    sample_id: str
    text: str
    water: int
    forest: int
    biodiversity: int
    nature: int
    resolution: Resolution

    def __post_init__(self) -> None:
        if self.nature != (self.water or self.forest or self.biodiversity):
            raise AnnotationError(
                f"nature label of {self.sample_id!r} must be the OR of the dimensions"
            )


@dataclass(frozen=True)
class DimensionAgreement:
    kappa: Optional[float]  # None when undefined (single category throughout)
    agree_2of4: float
    agree_3of4: float
    agree_4of4: float
    n_samples: int


@dataclass(frozen=True)
class AgreementReport:
    dimensions: dict  # dimension -> DimensionAgreement


def _latest_votes(
    records: Iterable[AnnotationRecord], dimension: str
) -> dict[str, dict[str, int]]:
    """sample_id -> annotator_id -> vote, keeping the last record per pair."""
    votes: dict[str, dict[str, int]] = {}
    for rec in records:
        votes.setdefault(rec.sample_id, {})[rec.annotator_id] = rec.label(dimension)
    return votes


def _complete_vote_counts(
    records: Iterable[AnnotationRecord], dimension: str, n_raters: int
) -> list[tuple[int, int]]:
    votes = _latest_votes(records, dimension)
    if not votes:
        raise AnnotationError("no annotation records")
    counts = []
    for sample_id in votes:
        per_rater = votes[sample_id]
        if len(per_rater) != n_raters:
            raise AnnotationError(
                f"sample {sample_id!r} has {len(per_rater)} ratings, expected {n_raters}"
            )
        ones = sum(per_rater.values())
        counts.append((n_raters - ones, ones))
    if len(counts) < 2:
        raise AnnotationError("need at least 2 fully rated samples")
    return counts


def kappa_from_counts(counts: Sequence[tuple[int, ...]]) -> float:
    """Fleiss' kappa from per-item category counts (fixed rater total).

    Raises UndefinedKappaError when expected chance agreement is 1, instead
    of returning NaN.
    """
    n_items = len(counts)
    n_raters = sum(counts[0])
    n_categories = len(counts[0])
    p_i_sum = 0.0
    category_totals = [0] * n_categories
    for item in counts:
        if sum(item) != n_raters:
            raise AnnotationError("inconsistent rater totals across items")
        p_i_sum += (sum(c * c for c in item) - n_raters) / (n_raters * (n_raters - 1))
        for j, c in enumerate(item):
            category_totals[j] += c
    p_bar = p_i_sum / n_items
    total_votes = n_items * n_raters
    p_e = sum((t / total_votes) ** 2 for t in category_totals)
    if p_e == 1.0:
        raise UndefinedKappaError("all raters used a single category on every item")
    return (p_bar - p_e) / (1.0 - p_e)


def fleiss_kappa(
    records: Iterable[AnnotationRecord], dimension: str, n_raters: int = 4
) -> float:
    """Fleiss' kappa for one dimension over fully rated samples."""
    return kappa_from_counts(_complete_vote_counts(records, dimension, n_raters))


def agreement_breakdown(
    records: Iterable[AnnotationRecord], dimension: str, n_raters: int = 4
) -> tuple[float, float, float]:
    """Proportions of samples whose majority is 2, 3, or 4 of 4 votes."""
    counts = _complete_vote_counts(records, dimension, n_raters)
    tally = {2: 0, 3: 0, 4: 0}
    for item in counts:
        tally[max(item)] += 1
    n = len(counts)
    return (tally[2] / n, tally[3] / n, tally[4] / n)


def build_agreement_report(
    records: Iterable[AnnotationRecord], n_raters: int = 4
) -> AgreementReport:
    records = list(records)
    dims = {}
    for dimension in DIMENSIONS:
        counts = _complete_vote_counts(records, dimension, n_raters)
        try:
            kappa: Optional[float] = kappa_from_counts(counts)
        except UndefinedKappaError:
            kappa = None
        a2, a3, a4 = agreement_breakdown(records, dimension, n_raters)
        dims[dimension] = DimensionAgreement(
            kappa=kappa,
            agree_2of4=a2,
            agree_3of4=a3,
            agree_4of4=a4,
            n_samples=len(counts),
        )
    return AgreementReport(dimensions=dims)


def aggregate_votes(votes: Sequence[int]) -> int | str:
    """Majority outcome of four binary votes, or NeedsAdjudication on 2-2."""
    if len(votes) != 4 or any(v not in (0, 1) for v in votes):
        raise AnnotationError("expected exactly 4 binary votes")
    ones = sum(votes)
    if ones >= 3:
        return 1
    if ones <= 1:
        return 0
    return NEEDS_ADJUDICATION


class AnnotationStore:
    """Task set, per-annotator records, adjudications, and gold assembly.

    Writes are serialized by the caller (the HTTP layer holds a lock); reads
    are safe at any time. An optional append-only journal makes the store
    durable across restarts.
    """

    def __init__(
        self,
        tasks: Sequence[tuple[str, str]],
        annotators: Sequence[str],
        journal_path: Optional[str | Path] = None,
    ):
        if len(set(a for a in annotators)) != len(annotators):
            raise AnnotationError("annotator ids must be unique")
        self.task_order = [sample_id for sample_id, _ in tasks]
        self.texts = {sample_id: text for sample_id, text in tasks}
        if len(self.texts) != len(tasks):
            raise AnnotationError("duplicate sample_id in task set")
        self.annotators = tuple(annotators)
        self.records: dict[tuple[str, str], AnnotationRecord] = {}
        self.resolutions: dict[tuple[str, str], tuple[int, str]] = {}
        self.audit_log: list[dict] = []
        self.journal_path = Path(journal_path) if journal_path else None
        if self.journal_path and self.journal_path.exists():
            self._replay_journal()

    # -- journaling ---------------------------------------------------------

    def _journal(self, event: dict) -> None:
        if self.journal_path is None:
            return
        self.journal_path.parent.mkdir(parents=True, exist_ok=True)
        with self.journal_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, ensure_ascii=False) + "\n")

    def _replay_journal(self) -> None:
        with self.journal_path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                event = json.loads(line)
                if event["type"] == "annotation":
                    self._apply_annotation(
                        AnnotationRecord(
                            sample_id=event["sample_id"],
                            annotator_id=event["annotator_id"],
                            water=event["water"],
                            forest=event["forest"],
                            biodiversity=event["biodiversity"],
                            timestamp=event.get("timestamp", 0.0),
                        )
                    )
                elif event["type"] == "resolution":
                    self.resolutions[(event["sample_id"], event["dimension"])] = (
                        event["value"],
                        event["resolver_id"],
                    )

    # -- annotations --------------------------------------------------------

    def _apply_annotation(self, record: AnnotationRecord) -> None:
        if record.sample_id not in self.texts:
            raise AnnotationError(f"unknown sample {record.sample_id!r}")
        if record.annotator_id not in self.annotators:
            raise AnnotationError(f"unknown annotator {record.annotator_id!r}")
        self.records[(record.sample_id, record.annotator_id)] = record

    def submit_annotation(self, record: AnnotationRecord) -> None:
        """Persist a record; resubmission by the same annotator overwrites."""
        if record.timestamp == 0.0:
            record = AnnotationRecord(
                sample_id=record.sample_id,
                annotator_id=record.annotator_id,
                water=record.water,
                forest=record.forest,
                biodiversity=record.biodiversity,
                timestamp=time.time(),
            )
        self._apply_annotation(record)
        self._journal(
            {
                "type": "annotation",
                "sample_id": record.sample_id,
                "annotator_id": record.annotator_id,
                "water": record.water,
                "forest": record.forest,
                "biodiversity": record.biodiversity,
                "timestamp": record.timestamp,
            }
        )

    def all_records(self) -> list[AnnotationRecord]:
        return list(self.records.values())

    def record_for(self, sample_id: str, annotator_id: str) -> Optional[AnnotationRecord]:
        return self.records.get((sample_id, annotator_id))

    def next_task(self, annotator_id: str) -> Optional[tuple[str, str]]:
        """First task (in task order) the annotator has not labeled yet."""
        if annotator_id not in self.annotators:
            raise AnnotationError(f"unknown annotator {annotator_id!r}")
        for sample_id in self.task_order:
            if (sample_id, annotator_id) not in self.records:
                return sample_id, self.texts[sample_id]
        return None

    def progress(self) -> dict[str, int]:
        done = {a: 0 for a in self.annotators}
        for _, annotator_id in self.records:
            done[annotator_id] += 1
        return done

    def is_complete(self, sample_id: str) -> bool:
        return all((sample_id, a) in self.records for a in self.annotators)

    def votes(self, sample_id: str, dimension: str) -> list[int]:
        return [
            self.records[(sample_id, a)].label(dimension)
            for a in self.annotators
            if (sample_id, a) in self.records
        ]

    # -- aggregation and adjudication ---------------------------------------

    def aggregate_labels(self, sample_id: str) -> dict[str, int | str]:
        """Per-dimension majority outcome; 2-2 splits flag NeedsAdjudication."""
        if sample_id not in self.texts:
            raise AnnotationError(f"unknown sample {sample_id!r}")
        if not self.is_complete(sample_id):
            raise AnnotationError(f"sample {sample_id!r} is not fully annotated")
        return {
            dim: aggregate_votes(self.votes(sample_id, dim)) for dim in DIMENSIONS
        }

    def pending_adjudications(self) -> list[dict]:
        pending = []
        for sample_id in self.task_order:
            if not self.is_complete(sample_id):
                continue
            for dim, outcome in self.aggregate_labels(sample_id).items():
                if outcome == NEEDS_ADJUDICATION and (sample_id, dim) not in self.resolutions:
                    pending.append(
                        {
                            "sample_id": sample_id,
                            "dimension": dim,
                            "text": self.texts[sample_id],
                            "votes": self.votes(sample_id, dim),
                        }
                    )
        return pending

    def resolve_adjudication(
        self, sample_id: str, dimension: str, value: int, resolver_id: str
    ) -> None:
        """Record the adjudicated value for a pending 2-2 split."""
        if value not in (0, 1):
            raise AnnotationError("adjudication value must be 0 or 1")
        key = (sample_id, dimension)
        pending_keys = {
            (p["sample_id"], p["dimension"]) for p in self.pending_adjudications()
        }
        if key not in pending_keys:
            raise AnnotationError(
                f"sample {sample_id!r} dimension {dimension!r} is not pending adjudication"
            )
        self.resolutions[key] = (value, resolver_id)
        entry = {
            "type": "resolution",
            "sample_id": sample_id,
            "dimension": dimension,
            "value": value,
            "resolver_id": resolver_id,
            "timestamp": time.time(),
        }
        self.audit_log.append(entry)
        self._journal(entry)

    # -- gold ---------------------------------------------------------------

    def _resolved_label(self, sample_id: str, dimension: str) -> tuple[int, bool]:
        outcome = aggregate_votes(self.votes(sample_id, dimension))
        if outcome == NEEDS_ADJUDICATION:
            key = (sample_id, dimension)
            if key not in self.resolutions:
                raise AnnotationError(
                    f"sample {sample_id!r} dimension {dimension!r} awaits adjudication"
                )
            return self.resolutions[key][0], True
        return int(outcome), False

    def gold_sample(self, sample_id: str) -> GoldSample:
        if not self.is_complete(sample_id):
            raise AnnotationError(f"sample {sample_id!r} is not fully annotated")
        labels = {}
        adjudicated = False
        unanimous = True
        for dim in DIMENSIONS:
            value, was_adjudicated = self._resolved_label(sample_id, dim)
            labels[dim] = value
            adjudicated = adjudicated or was_adjudicated
            if max(
                sum(self.votes(sample_id, dim)),
                4 - sum(self.votes(sample_id, dim)),
            ) != 4:
                unanimous = False
        if adjudicated:
            resolution = Resolution.ADJUDICATED
        elif unanimous:
            resolution = Resolution.UNANIMOUS
        else:
            resolution = Resolution.MAJORITY
        return GoldSample(
            sample_id=sample_id,
            text=self.texts[sample_id],
            water=labels["water"],
            forest=labels["forest"],
            biodiversity=labels["biodiversity"],
            nature=int(labels["water"] or labels["forest"] or labels["biodiversity"]),
            resolution=resolution,
        )

    def export_blockers(self) -> list[str]:
        blockers = []
        for sample_id in self.task_order:
            if not self.is_complete(sample_id):
                blockers.append(f"{sample_id}: missing annotations")
        for item in self.pending_adjudications():
            blockers.append(
                f"{item['sample_id']}: {item['dimension']} pending adjudication"
            )
        return blockers

    def export_gold(
        self,
        csv_path: Optional[str | Path] = None,
        jsonl_path: Optional[str | Path] = None,
    ) -> tuple[list[GoldSample], dict[str, int]]:
        """All gold samples plus a label-distribution summary.

        Refuses (listing every blocker) while any sample is unannotated or a
        2-2 split is unresolved.
        """
        blockers = self.export_blockers()
        if blockers:
            raise AnnotationError(
                "export refused, unresolved samples remain: " + "; ".join(blockers)
            )
        gold = [self.gold_sample(sample_id) for sample_id in self.task_order]
        distribution = {
            "samples": len(gold),
            "water": sum(g.water for g in gold),
            "forest": sum(g.forest for g in gold),
            "biodiversity": sum(g.biodiversity for g in gold),
            "nature": sum(g.nature for g in gold),
        }
        if csv_path is not None:
            write_gold_csv(gold, csv_path)
        if jsonl_path is not None:
            write_gold_jsonl(gold, jsonl_path)
        return gold, distribution


GOLD_CSV_HEADER = ["sample_id", "text", "water", "forest", "biodiversity", "nature"]


def write_gold_csv(gold: Iterable[GoldSample], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(GOLD_CSV_HEADER)
        for g in gold:
            writer.writerow(
                [g.sample_id, g.text, g.water, g.forest, g.biodiversity, g.nature]
            )


def write_gold_jsonl(gold: Iterable[GoldSample], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for g in gold:
            fh.write(
                json.dumps(
                    {
                        "sample_id": g.sample_id,
                        "text": g.text,
                        "water": g.water,
                        "forest": g.forest,
                        "biodiversity": g.biodiversity,
                        "nature": g.nature,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_records_jsonl(path: str | Path) -> list[AnnotationRecord]:
    records = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            records.append(
                AnnotationRecord(
                    sample_id=rec["sample_id"],
                    annotator_id=rec["annotator_id"],
                    water=rec["water"],
                    forest=rec["forest"],
                    biodiversity=rec["biodiversity"],
                    timestamp=rec.get("timestamp", 0.0),
                )
            )
    return records
