"""Earnings-call exposure aggregation by company, industry, and country.

Labels arrive from files (model predictions or gold-format exports); this
module only counts and averages. Means are unweighted at every level:
transcript to company-year, company to industry.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

EXPOSURE_DIMENSIONS = ("water", "forest", "biodiversity", "nature")


class CaseStudyError(Exception):
    pass


@dataclass(frozen=True)
class LabeledSentence:
    doc_id: str
    sent_id: str
    water: int
    forest: int
    biodiversity: int
    nature: int

    def label(self, dimension: str) -> int:
        return int(getattr(self, dimension))


@dataclass(frozen=True)
class TranscriptMeta:
    doc_id: str
    company_id: str
    year: int
    country: str


@dataclass(frozen=True)
class TranscriptScore:
    doc_id: str
    company_id: str
    year: int
    positive_counts: dict  # dimension -> count
    total_sentences: int

    def exposure(self, dimension: str) -> float:
        return self.positive_counts[dimension] / self.total_sentences


@dataclass(frozen=True)
class CompanyExposure:
    company_id: str
    year: int
    exposures: dict  # dimension -> mean exposure
    n_calls: int


def load_labeled_sentences(path: str | Path) -> list[LabeledSentence]:
    rows = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            for key in ("doc_id", "sent_id", *EXPOSURE_DIMENSIONS):
                if key not in rec:
                    raise CaseStudyError(f"{path}:{lineno}: missing field {key!r}")
            rows.append(
                LabeledSentence(
                    doc_id=rec["doc_id"],
                    sent_id=rec["sent_id"],
                    water=int(rec["water"]),
                    forest=int(rec["forest"]),
                    biodiversity=int(rec["biodiversity"]),
                    nature=int(rec["nature"]),
                )
            )
    if not rows:
        raise CaseStudyError(f"no labeled sentences in {path}")
    return rows


def load_transcript_meta(path: str | Path) -> dict[str, TranscriptMeta]:
    meta = {}
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"doc_id", "company_id", "year", "country"}
        missing = required - set(reader.fieldnames or [])
        if missing:
            raise CaseStudyError(f"{path}: missing columns {sorted(missing)}")
        for record in reader:
            doc_id = record["doc_id"]
            if doc_id in meta:
                raise CaseStudyError(f"duplicate transcript metadata for {doc_id!r}")
            meta[doc_id] = TranscriptMeta(
                doc_id=doc_id,
                company_id=record["company_id"],
                year=int(record["year"]),
                country=record["country"],
            )
    return meta


def load_industry_map(path: str | Path) -> dict[str, str]:
    """company_id -> Fama-French-49 industry code."""
    mapping = {}
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"company_id", "industry_code"} - set(reader.fieldnames or [])
        if missing:
            raise CaseStudyError(f"{path}: missing columns {sorted(missing)}")
        for record in reader:
            mapping[record["company_id"]] = record["industry_code"]
    return mapping


def score_transcript(
    doc_id: str,
    sentences: Sequence[LabeledSentence],
    meta: TranscriptMeta,
) -> TranscriptScore:
    if not sentences:
        raise CaseStudyError(f"transcript {doc_id!r} has no sentences")
    counts = {
        dim: sum(s.label(dim) for s in sentences) for dim in EXPOSURE_DIMENSIONS
    }
    return TranscriptScore(
        doc_id=doc_id,
        company_id=meta.company_id,
        year=meta.year,
        positive_counts=counts,
        total_sentences=len(sentences),
    )


def score_transcripts(
    labeled: Iterable[LabeledSentence], meta: Mapping[str, TranscriptMeta]
) -> list[TranscriptScore]:
    """One score per transcript, ordered by doc_id for stable output."""
    by_doc: dict[str, list[LabeledSentence]] = {}
    for sentence in labeled:
        by_doc.setdefault(sentence.doc_id, []).append(sentence)
    missing = sorted(set(by_doc) - set(meta))
    if missing:
        raise CaseStudyError(f"transcripts without metadata: {missing}")
    return [
        score_transcript(doc_id, by_doc[doc_id], meta[doc_id])
        for doc_id in sorted(by_doc)
    ]


def company_yearly_exposure(scores: Sequence[TranscriptScore]) -> list[CompanyExposure]:
    """Unweighted mean exposure per (company, year) over its transcripts."""
    if not scores:
        raise CaseStudyError("no transcript scores")
    groups: dict[tuple[str, int], list[TranscriptScore]] = {}
    for score in scores:
        groups.setdefault((score.company_id, score.year), []).append(score)
    out = []
    for (company_id, year) in sorted(groups):
        members = groups[(company_id, year)]
        exposures = {
            dim: sum(m.exposure(dim) for m in members) / len(members)
            for dim in EXPOSURE_DIMENSIONS
        }
        out.append(
            CompanyExposure(
                company_id=company_id,
                year=year,
                exposures=exposures,
                n_calls=len(members),
            )
        )
    return out


def _code_sort_key(code: str):
    return (0, int(code)) if code.isdigit() else (1, code)


@dataclass(frozen=True)
class IndustryRow:
    rank: int
    industry_code: str
    exposures: dict  # dimension -> mean over companies
    n_companies: int


def industry_aggregate(
    exposures: Sequence[CompanyExposure],
    industry_map: Mapping[str, str],
    top_n: Optional[int] = 20,
) -> tuple[list[IndustryRow], list[str]]:
    """Ranked industry table (descending nature exposure) plus the exclusion
    manifest of companies absent from the industry map.

    Companies with several yearly rows are first averaged into one company
    mean; ranking ties break toward the lower industry code.
    """
    if not exposures:
        raise CaseStudyError("no company exposures")
    per_company: dict[str, list[CompanyExposure]] = {}
    for exposure in exposures:
        per_company.setdefault(exposure.company_id, []).append(exposure)
    excluded = sorted(c for c in per_company if c not in industry_map)
    by_industry: dict[str, list[dict]] = {}
    for company_id, rows in sorted(per_company.items()):
        if company_id in excluded:
            continue
        company_mean = {
            dim: sum(r.exposures[dim] for r in rows) / len(rows)
            for dim in EXPOSURE_DIMENSIONS
        }
        by_industry.setdefault(industry_map[company_id], []).append(company_mean)
    if not by_industry:
        raise CaseStudyError("industry map covers no companies")
    ranked = []
    for code, companies in by_industry.items():
        means = {
            dim: sum(c[dim] for c in companies) / len(companies)
            for dim in EXPOSURE_DIMENSIONS
        }
        ranked.append((code, means, len(companies)))
    ranked.sort(key=lambda item: (-item[1]["nature"], _code_sort_key(item[0])))
    if top_n is not None:
        ranked = ranked[:top_n]
    rows = [
        IndustryRow(rank=i + 1, industry_code=code, exposures=means, n_companies=n)
        for i, (code, means, n) in enumerate(ranked)
    ]
    return rows, excluded


@dataclass(frozen=True)
class CountryRow:
    country: str
    mention_rate: float
    n_calls: int


def country_mention_rate(
    scores: Sequence[TranscriptScore], meta: Mapping[str, TranscriptMeta]
) -> list[CountryRow]:
    """Per country: fraction of calls with at least one nature-positive sentence."""
    if not scores:
        raise CaseStudyError("no transcript scores")
    missing = sorted({s.doc_id for s in scores} - set(meta))
    if missing:
        raise CaseStudyError(f"transcripts without metadata: {missing}")
    tally: dict[str, list[int]] = {}
    for score in scores:
        country = meta[score.doc_id].country
        tally.setdefault(country, []).append(
             1 if score.positive_counts["nature"] >= 1 else 0
        )
    return [
        CountryRow(
            country=country,
            mention_rate=sum(flags) / len(flags),
            n_calls=len(flags),
        )
        for country, flags in sorted(tally.items())
    ]


# -- csv writers -------------------------------------------------------------


def write_industry_csv(rows: Sequence[IndustryRow], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["rank", "industry_code", *EXPOSURE_DIMENSIONS, "n_companies"]
        )
        for row in rows:
            writer.writerow(
                [
                    row.rank,
                    row.industry_code,
                    *[f"{row.exposures[d]:.6f}" for d in EXPOSURE_DIMENSIONS],
                    row.n_companies,
                ]
            )


def write_country_csv(rows: Sequence[CountryRow], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["country", "mention_rate", "n_calls"])
        for row in rows:
            writer.writerow([row.country, f"{row.mention_rate:.6f}", row.n_calls])


def write_long_format_csv(
    exposures: Sequence[CompanyExposure], path: str | Path
) -> None:
    """Plot-ready long format: one row per (company, year, dimension)."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["company_id", "year", "dimension", "exposure", "n_calls"])
        for exposure in exposures:
            for dim in EXPOSURE_DIMENSIONS:
                writer.writerow(
                    [
                        exposure.company_id,
                        exposure.year,
                        dim,
                        f"{exposure.exposures[dim]:.6f}",
                        exposure.n_calls,
                    ]
                )
