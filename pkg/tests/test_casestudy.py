import json
import random

import pytest

from naturetext.casestudy import (
    CaseStudyError,
    CompanyExposure,
    LabeledSentence,
    TranscriptMeta,
    company_yearly_exposure,
    country_mention_rate,
    industry_aggregate,
    load_industry_map,
    load_labeled_sentences,
    load_transcript_meta,
    score_transcript,
    score_transcripts,
    write_country_csv,
    write_industry_csv,
    write_long_format_csv,
)


def labeled(doc_id, i, water=0, forest=0, bio=0):
    return LabeledSentence(
        doc_id=doc_id,
        sent_id=f"{doc_id}#{i}",
        water=water,
        forest=forest,
        biodiversity=bio,
        nature=int(water or forest or bio),
    )


def meta(doc_id, company="C1", year=2021, country="US"):
    return TranscriptMeta(doc_id=doc_id, company_id=company, year=year, country=country)


# -- transcript scoring -----------------------------------------------------------


def test_exposure_ratio():
    sentences = [labeled("t", i) for i in range(48)] + [
        labeled("t", 48, bio=1),
        labeled("t", 49, water=1),
    ]
    score = score_transcript("t", sentences, meta("t"))
    assert score.total_sentences == 50
    assert score.exposure("nature") == pytest.approx(0.04)
    assert score.exposure("water") == pytest.approx(0.02)


def test_zero_positives():
    sentences = [labeled("t", i) for i in range(10)]
    score = score_transcript("t", sentences, meta("t"))
    assert all(score.exposure(d) == 0.0 for d in ("water", "forest", "biodiversity", "nature"))


def test_empty_transcript_rejected():
    with pytest.raises(CaseStudyError):
        score_transcript("t", [], meta("t"))


def test_counts_match_recount_oracle():
    rng = random.Random(8)
    sentences = []
    for i in range(200):
        water = int(rng.random() < 0.1)
        forest = int(rng.random() < 0.05)
        bio = int(rng.random() < 0.08)
        sentences.append(labeled("t", i, water, forest, bio))
    score = score_transcript("t", sentences, meta("t"))
    for dim in ("water", "forest", "biodiversity", "nature"):
        assert score.positive_counts[dim] == sum(s.label(dim) for s in sentences)


def test_nature_count_dominates_dimensions_under_gold_schema():
    rng = random.Random(9)
    sentences = [
        labeled("t", i, int(rng.random() < 0.2), int(rng.random() < 0.2), int(rng.random() < 0.2))
        for i in range(100)
    ]
    score = score_transcript("t", sentences, meta("t"))
    assert score.positive_counts["nature"] >= max(
        score.positive_counts[d] for d in ("water", "forest", "biodiversity")
    )


# -- company aggregation ------------------------------------------------------------


def test_company_mean():
    scores = score_transcripts(
        [labeled("a", 0, bio=1)] + [labeled("a", i) for i in range(1, 25)]
        + [labeled("b", 0, bio=1), labeled("b", 1, bio=1)]
        + [labeled("b", i) for i in range(2, 25)],
        {"a": meta("a"), "b": meta("b")},
    )
    exposures = company_yearly_exposure(scores)
    assert len(exposures) == 1
    company = exposures[0]
    assert company.n_calls == 2
    # (1/25 + 2/25) / 2
    assert company.exposures["nature"] == pytest.approx(0.06)


def test_single_call_mean_is_identity():
    scores = score_transcripts(
        [labeled("a", 0, water=1)] + [labeled("a", i) for i in range(1, 10)],
        {"a": meta("a")},
    )
    exposures = company_yearly_exposure(scores)
    assert exposures[0].exposures["water"] == scores[0].exposure("water")


# -- industry aggregation ------------------------------------------------------------


def exposure(company, nature, year=2021):
    values = {"water": 0.0, "forest": 0.0, "biodiversity": 0.0, "nature": nature}
    return CompanyExposure(company_id=company, year=year, exposures=values, n_calls=1)


def test_industry_ranking_order():
    rows, excluded = industry_aggregate(
        [exposure("a", 0.01), exposure("b", 0.03)],
        {"a": "10", "b": "2"},
    )
    assert excluded == []
    assert [r.industry_code for r in rows] == ["2", "10"]
    assert rows[0].rank == 1


def test_unmapped_company_goes_to_exclusion_manifest():
    rows, excluded = industry_aggregate(
        [exposure("a", 0.01), exposure("ghost", 0.5)],
        {"a": "10"},
    )
    assert excluded == ["ghost"]
    assert [r.industry_code for r in rows] == ["10"]


def test_tie_breaks_by_lower_code():
    rows, _ = industry_aggregate(
        [exposure("a", 0.02), exposure("b", 0.02)],
        {"a": "31", "b": "2"},
    )
    assert [r.industry_code for r in rows] == ["2", "31"]


def test_top_n_view():
    exposures = [exposure(f"c{i}", i / 100) for i in range(30)]
    mapping = {f"c{i}": str(i) for i in range(30)}
    rows, _ = industry_aggregate(exposures, mapping, top_n=20)
    assert len(rows) == 20
    assert rows[0].exposures["nature"] == pytest.approx(0.29)


# -- country rates --------------------------------------------------------------------


def test_country_proportion():
    metas = {f"t{i}": meta(f"t{i}", company=f"c{i}", country="X") for i in range(4)}
    scores = score_transcripts(
        [labeled(f"t{i}", 0, bio=1) for i in range(3)]
        + [labeled("t3", 0)]
        + [labeled(f"t{i}", 1) for i in range(4)],
        metas,
    )
    rows = country_mention_rate(scores, metas)
    assert rows == [type(rows[0])(country="X", mention_rate=0.75, n_calls=4)]


def test_country_all_zero():
    metas = {"t0": meta("t0", country="Y")}
    scores = score_transcripts([labeled("t0", 0), labeled("t0", 1)], metas)
    rows = country_mention_rate(scores, metas)
    assert rows[0].mention_rate == 0.0


# -- committed fixture oracle ----------------------------------------------------------


def load_fixture(fixtures_dir):
    base = fixtures_dir / "casestudy"
    labeled_rows = load_labeled_sentences(base / "labeled_sentences.jsonl")
    metas = load_transcript_meta(base / "transcripts.csv")
    mapping = load_industry_map(base / "industry_map.csv")
    return labeled_rows, metas, mapping


def test_fixture_matches_hand_computed_oracle(fixtures_dir):
    labeled_rows, metas, mapping = load_fixture(fixtures_dir)
    assert len(labeled_rows) == 200
    scores = score_transcripts(labeled_rows, metas)
    by_doc = {s.doc_id: s for s in scores}
    # Hand-computed transcript nature exposures.
    assert by_doc["T1"].exposure("nature") == pytest.approx(2 / 40)
    assert by_doc["T2"].exposure("nature") == 0.0
    assert by_doc["T3"].exposure("nature") == pytest.approx(3 / 30)
    assert by_doc["T4"].exposure("nature") == pytest.approx(6 / 30)
    assert by_doc["T5"].exposure("nature") == pytest.approx(3 / 30)

    exposures = company_yearly_exposure(scores)
    by_company = {e.company_id: e for e in exposures}
    assert by_company["C1"].exposures["nature"] == pytest.approx(0.025)
    assert by_company["C2"].exposures["nature"] == pytest.approx(0.15)
    assert by_company["C3"].exposures["nature"] == pytest.approx(0.05)
    assert by_company["C3"].exposures["water"] == pytest.approx(1 / 60)

    rows, excluded = industry_aggregate(exposures, mapping)
    assert excluded == []
    assert [(r.rank, r.industry_code) for r in rows] == [(1, "1"), (2, "31")]
    assert rows[0].exposures["nature"] == pytest.approx(0.15)
    assert rows[1].exposures["nature"] == pytest.approx(0.0375)

    country_rows = country_mention_rate(scores, metas)
    assert [(r.country, r.mention_rate) for r in country_rows] == [
        ("BR", 1.0),
        ("ID", 0.5),
        ("US", 0.5),
    ]


def test_fixture_outputs_permutation_invariant(tmp_path, fixtures_dir):
    labeled_rows, metas, mapping = load_fixture(fixtures_dir)

    def run(rows, tag):
        scores = score_transcripts(rows, metas)
        exposures = company_yearly_exposure(scores)
        industry_rows, _ = industry_aggregate(exposures, mapping)
        country_rows = country_mention_rate(scores, metas)
        paths = {
            "industry": tmp_path / f"industry_{tag}.csv",
            "country": tmp_path / f"country_{tag}.csv",
            "long": tmp_path / f"long_{tag}.csv",
        }
        write_industry_csv(industry_rows, paths["industry"])
        write_country_csv(country_rows, paths["country"])
        write_long_format_csv(exposures, paths["long"])
        return {k: p.read_bytes() for k, p in paths.items()}

    rng = random.Random(123)
    shuffled = list(labeled_rows)
    rng.shuffle(shuffled)
    first = run(labeled_rows, "a")
    second = run(shuffled, "b")
    assert first == second  # byte-identical outputs


def test_missing_metadata_rejected():
    with pytest.raises(CaseStudyError, match="without metadata"):
        score_transcripts([labeled("mystery", 0)], {})
