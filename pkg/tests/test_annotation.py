import itertools
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from naturetext.annotation import (
    NEEDS_ADJUDICATION,
    AnnotationError,
    AnnotationRecord,
    AnnotationStore,
    GoldSample,
    Resolution,
    UndefinedKappaError,
    aggregate_votes,
    agreement_breakdown,
    build_agreement_report,
    fleiss_kappa,
    kappa_from_counts,
    read_records_jsonl,
)

ANNOTATORS = ("a1", "a2", "a3", "a4")


def store_with(n_samples=3, journal_path=None):
    tasks = [(f"s{i}", f"Sentence number {i}.") for i in range(n_samples)]
    return AnnotationStore(tasks=tasks, annotators=ANNOTATORS, journal_path=journal_path)


def record(sample_id, annotator_id, water=0, forest=0, biodiversity=0):
    return AnnotationRecord(
        sample_id=sample_id,
        annotator_id=annotator_id,
        water=water,
        forest=forest,
        biodiversity=biodiversity,
    )


def label_sample(store, sample_id, water_votes, forest_votes=(0, 0, 0, 0), bio_votes=(0, 0, 0, 0)):
    for annotator, w, f, b in zip(ANNOTATORS, water_votes, forest_votes, bio_votes):
        store.submit_annotation(record(sample_id, annotator, w, f, b))


# -- submission -----------------------------------------------------------------


def test_submit_and_progress():
    store = store_with()
    store.submit_annotation(record("s0", "a1", water=1))
    assert store.progress()["a1"] == 1
    assert store.next_task("a1") == ("s1", "Sentence number 1.")


def test_resubmit_latest_wins():
    store = store_with()
    store.submit_annotation(record("s0", "a1", water=1))
    store.submit_annotation(record("s0", "a1", water=0))
    assert store.record_for("s0", "a1").water == 0
    assert store.progress()["a1"] == 1


def test_unknown_annotator_rejected():
    store = store_with()
    with pytest.raises(AnnotationError, match="unknown annotator"):
        store.submit_annotation(record("s0", "intruder"))


def test_unknown_sample_rejected():
    store = store_with()
    with pytest.raises(AnnotationError, match="unknown sample"):
        store.submit_annotation(record("nope", "a1"))


def test_labels_must_be_binary():
    with pytest.raises(AnnotationError):
        AnnotationRecord(sample_id="s", annotator_id="a", water=2, forest=0, biodiversity=0)


# -- aggregation ------------------------------------------------------------------


def test_majority_three_to_one():
    assert aggregate_votes([1, 1, 1, 0]) == 1


def test_split_needs_adjudication():
    assert aggregate_votes([1, 1, 0, 0]) == NEEDS_ADJUDICATION


def test_unanimous_zero():
    assert aggregate_votes([0, 0, 0, 0]) == 0


def test_aggregate_all_sixteen_patterns():
    for votes in itertools.product((0, 1), repeat=4):
        ones = sum(votes)
        expected = 1 if ones >= 3 else 0 if ones <= 1 else NEEDS_ADJUDICATION
        assert aggregate_votes(list(votes)) == expected


def test_aggregate_requires_complete_sample():
    store = store_with()
    store.submit_annotation(record("s0", "a1", water=1))
    with pytest.raises(AnnotationError, match="not fully annotated"):
        store.aggregate_labels("s0")


# -- adjudication ------------------------------------------------------------------


def full_store_with_split():
    store = store_with(n_samples=2)
    label_sample(store, "s0", water_votes=(0, 0, 0, 0), forest_votes=(1, 1, 0, 0))
    label_sample(store, "s1", water_votes=(1, 1, 1, 1))
    return store


def test_pending_adjudication_listed():
    store = full_store_with_split()
    pending = store.pending_adjudications()
    assert len(pending) == 1
    assert pending[0]["sample_id"] == "s0"
    assert pending[0]["dimension"] == "forest"
    assert sorted(pending[0]["votes"]) == [0, 0, 1, 1]


def test_resolution_sets_gold_and_clears_queue():
    store = full_store_with_split()
    store.resolve_adjudication("s0", "forest", 1, resolver_id="a1")
    assert store.pending_adjudications() == []
    gold = store.gold_sample("s0")
    assert gold.forest == 1
    assert gold.resolution is Resolution.ADJUDICATED
    assert gold.nature == 1  # recomputed as OR of finals
    assert len(store.audit_log) == 1


def test_resolving_non_pending_rejected():
    store = full_store_with_split()
    with pytest.raises(AnnotationError, match="not pending"):
        store.resolve_adjudication("s1", "water", 1, resolver_id="a1")


def test_gold_resolution_categories():
    store = store_with(n_samples=3)
    label_sample(store, "s0", water_votes=(1, 1, 1, 1))  # unanimous
    label_sample(store, "s1", water_votes=(1, 1, 1, 0))  # majority
    label_sample(store, "s2", water_votes=(1, 1, 0, 0))  # adjudicated
    store.resolve_adjudication("s2", "water", 0, resolver_id="a2")
    assert store.gold_sample("s0").resolution is Resolution.UNANIMOUS
    assert store.gold_sample("s1").resolution is Resolution.MAJORITY
    assert store.gold_sample("s2").resolution is Resolution.ADJUDICATED


def test_gold_nature_invariant_enforced():
    with pytest.raises(AnnotationError, match="OR"):
        GoldSample(
            sample_id="s",
            text="t",
            water=1,
            forest=0,
            biodiversity=0,
            nature=0,
            resolution=Resolution.MAJORITY,
        )


# -- Fleiss' kappa -------------------------------------------------------------------
#
# Hand-derived reference values (independent formula walk, frozen before the
# implementation existed):
#   counts are per-item (category0, category1) vote pairs with 4 raters
HAND_TABLES = [
    # perfect agreement, both categories present -> exactly 1.0
    ([(4, 0), (0, 4), (4, 0)], 1.0),
    # category-1 counts [4, 4, 0, 2] -> kappa = 29/45
    ([(0, 4), (0, 4), (4, 0), (2, 2)], 29 / 45),
    # symmetric 3/1 splits -> 0.0
    ([(1, 3), (3, 1)], 0.0),
    # all 2-2 splits -> -1/3
    ([(2, 2), (2, 2)], -1 / 3),
    # counts [4, 3, 2, 1, 0] -> 1/3
    ([(0, 4), (1, 3), (2, 2), (3, 1), (4, 0)], 1 / 3),
    # high raw agreement, skewed margins -> -1/11
    ([(0, 4), (0, 4), (1, 3)], -1 / 11),
]


@pytest.mark.parametrize("counts,expected", HAND_TABLES)
def test_kappa_matches_hand_derived_values(counts, expected):
    assert kappa_from_counts(counts) == pytest.approx(expected, abs=1e-9)


def test_kappa_perfect_agreement_exactly_one():
    store = store_with(n_samples=2)
    label_sample(store, "s0", water_votes=(1, 1, 1, 1))
    label_sample(store, "s1", water_votes=(0, 0, 0, 0))
    assert fleiss_kappa(store.all_records(), "water") == 1.0


def test_kappa_undefined_is_distinct_not_nan():
    store = store_with(n_samples=2)
    label_sample(store, "s0", water_votes=(0, 0, 0, 0))
    label_sample(store, "s1", water_votes=(0, 0, 0, 0))
    with pytest.raises(UndefinedKappaError):
        fleiss_kappa(store.all_records(), "water")


def test_kappa_requires_exactly_four_ratings():
    store = store_with(n_samples=2)
    label_sample(store, "s0", water_votes=(1, 1, 1, 1))
    store.submit_annotation(record("s1", "a1", water=1))
    with pytest.raises(AnnotationError, match="expected 4"):
        fleiss_kappa(store.all_records(), "water")


@settings(max_examples=300)
@given(
    st.lists(st.integers(min_value=0, max_value=4), min_size=2, max_size=12).filter(
        lambda ones: 0 < sum(ones) < 4 * len(ones)
    )
)
def test_kappa_category_swap_invariance(ones_per_item):
    counts = [(4 - ones, ones) for ones in ones_per_item]
    swapped = [(ones, 4 - ones) for ones in ones_per_item]
    assert kappa_from_counts(counts) == pytest.approx(kappa_from_counts(swapped), abs=1e-12)


def test_kappa_latest_record_wins_in_free_function():
    records = []
    for annotator in ANNOTATORS:
        records.append(record("s0", annotator, water=1))
        records.append(record("s1", annotator, water=0))
    records.append(record("s0", "a4", water=0))  # overrides the earlier vote
    kappa = fleiss_kappa(records, "water")
    assert kappa == pytest.approx(kappa_from_counts([(1, 3), (4, 0)]), abs=1e-12)


# -- agreement breakdown ---------------------------------------------------------------


def test_breakdown_direct_count():
    store = store_with(n_samples=3)
    label_sample(store, "s0", water_votes=(1, 1, 1, 1))  # 4/4
    label_sample(store, "s1", water_votes=(1, 1, 1, 0))  # 3/4
    label_sample(store, "s2", water_votes=(1, 1, 0, 0))  # 2/4
    assert agreement_breakdown(store.all_records(), "water") == pytest.approx(
        (1 / 3, 1 / 3, 1 / 3)
    )


def test_breakdown_all_unanimous():
    store = store_with(n_samples=2)
    label_sample(store, "s0", water_votes=(0, 0, 0, 0))
    label_sample(store, "s1", water_votes=(1, 1, 1, 1))
    assert agreement_breakdown(store.all_records(), "water") == (0.0, 0.0, 1.0)


@settings(max_examples=200)
@given(st.lists(st.integers(min_value=0, max_value=4), min_size=2, max_size=20))
def test_breakdown_proportions_sum_to_one(ones_per_item):
    records = []
    for i, ones in enumerate(ones_per_item):
        for j, annotator in enumerate(ANNOTATORS):
            records.append(record(f"s{i}", annotator, water=1 if j < ones else 0))
    a2, a3, a4 = agreement_breakdown(records, "water")
    n = len(ones_per_item)
    # Exact as fractions of n: the three counts partition the items.
    assert round((a2 + a3 + a4) * n) == n
    assert a2 + a3 + a4 == pytest.approx(1.0, abs=1e-12)


def test_agreement_report_mixed_defined_and_undefined():
    store = store_with(n_samples=2)
    label_sample(
        store, "s0", water_votes=(1, 1, 1, 1), forest_votes=(0, 0, 0, 0),
        bio_votes=(1, 1, 0, 0),
    )
    label_sample(
        store, "s1", water_votes=(0, 0, 0, 0), forest_votes=(0, 0, 0, 0),
        bio_votes=(1, 1, 1, 1),
    )
    report = build_agreement_report(store.all_records())
    assert report.dimensions["water"].kappa == 1.0
    assert report.dimensions["forest"].kappa is None  # undefined, not NaN
    assert report.dimensions["biodiversity"].kappa is not None


# -- gold export -------------------------------------------------------------------


def resolved_store(n=10):
    store = store_with(n_samples=n)
    for i in range(n):
        votes = (1, 1, 1, 1) if i % 3 == 0 else (0, 0, 0, 0)
        label_sample(store, f"s{i}", water_votes=votes, bio_votes=(0, 0, 0, 1) if i % 4 == 0 else (0, 0, 0, 0))
    return store


def test_export_writes_rows_and_distribution(tmp_path):
    store = resolved_store(10)
    csv_path = tmp_path / "gold.csv"
    jsonl_path = tmp_path / "gold.jsonl"
    gold, distribution = store.export_gold(csv_path=csv_path, jsonl_path=jsonl_path)
    assert len(gold) == 10
    assert distribution["samples"] == 10
    assert distribution["water"] == 4
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "sample_id,text,water,forest,biodiversity,nature"
    assert len(lines) == 11
    for rec in map(json.loads, jsonl_path.read_text().strip().splitlines()):
        assert rec["nature"] == (rec["water"] or rec["forest"] or rec["biodiversity"])


def test_export_refused_while_pending(tmp_path):
    store = full_store_with_split()
    with pytest.raises(AnnotationError, match="pending adjudication"):
        store.export_gold()


def test_export_refused_while_unannotated():
    store = store_with(n_samples=2)
    label_sample(store, "s0", water_votes=(1, 1, 1, 1))
    with pytest.raises(AnnotationError, match="missing annotations"):
        store.export_gold()


# -- journal persistence --------------------------------------------------------------


def test_journal_replay_restores_state(tmp_path):
    journal = tmp_path / "journal.jsonl"
    store = store_with(n_samples=2, journal_path=journal)
    label_sample(store, "s0", water_votes=(1, 1, 0, 0))
    store.resolve_adjudication("s0", "water", 1, resolver_id="a1")
    label_sample(store, "s1", water_votes=(1, 1, 1, 1))

    revived = store_with(n_samples=2, journal_path=journal)
    assert revived.gold_sample("s0").water == 1
    assert revived.gold_sample("s0").resolution is Resolution.ADJUDICATED
    assert revived.progress() == store.progress()


def test_read_records_jsonl_roundtrip(tmp_path):
    path = tmp_path / "records.jsonl"
    with path.open("w", encoding="utf-8") as fh:
        for annotator in ANNOTATORS:
            fh.write(
                json.dumps(
                    {
                        "sample_id": "s0",
                        "annotator_id": annotator,
                        "water": 1,
                        "forest": 0,
                        "biodiversity": 0,
                    }
                )
                + "\n"
            )
    records = read_records_jsonl(path)
    assert len(records) == 4
    assert all(r.water == 1 for r in records)
