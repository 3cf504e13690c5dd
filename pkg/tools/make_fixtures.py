#!/usr/bin/env python3
"""Build the frozen test fixtures: the 200-sentence gold dataset and the
case-study aggregation fixture.

The gold fixture is engineered so the two-layer keyword rule produces known
confusion counts (verified here with a standalone naive scanner, not the
package engine):

    biodiversity target: TP=26 FP=8  FN=22 TN=144
    nature target:       TP=30 FP=4  FN=30 TN=136

Run from the repository root:  python3 tools/make_fixtures.py
"""

from __future__ import annotations

import csv
import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "tests" / "fixtures"
RESOURCES = ROOT / "src" / "naturetext" / "resources"


def read_patterns(name: str) -> list[str]:
    text = (RESOURCES / name).read_text("utf-8")
    return [line.rstrip("\r\n") for line in text.splitlines() if line.strip()]


SPECIFIC = read_patterns("twolayer_specific.txt")
ADDITIONAL = read_patterns("twolayer_additional.txt")


def naive_spans(text: str, patterns: list[str]) -> set[tuple[int, int]]:
    """All span positions of any pattern: padded lowercase byte scan."""
    padded = b" " + text.encode("utf-8").lower() + b" "
    spans = set()
    for pat in patterns:
        pat_bytes = pat.encode("utf-8").lower()
        for start in range(len(padded) - len(pat_bytes) + 1):
            if padded[start : start + len(pat_bytes)] == pat_bytes:
                spans.add((start, start + len(pat_bytes)))
    return spans


def naive_two_layer(text: str) -> int:
    spec = naive_spans(text, SPECIFIC)
    if not spec:
        return 0
    add = naive_spans(text, ADDITIONAL)
    if not add:
        return 0
    return int(len(spec | add) >= 2)


# --- gold fixture groups -----------------------------------------------------
# (text, water, forest, biodiversity); predicted status is asserted per group.

GROUP_A = [  # predicted positive, biodiversity = 1
    ("We restored native habitat to protect endangered species along the pipeline route.", 0, 0, 1),
    ("Our biodiversity action plan protects nesting birds at every quarry site.", 0, 0, 1),
    ("The reserve shelters rare species of fish and supports local biodiversity.", 0, 0, 1),
    ("Dredging damaged the coral reef, and marine life has not recovered.", 0, 0, 1),
    ("Invasive species threaten the island's fragile ecosystem.", 0, 0, 1),
    ("We fund wetland restoration so migratory birds can return to the marsh.", 1, 0, 1),
    ("Runoff from the plant polluted the freshwater ecosystem downstream.", 1, 0, 1),
    ("Our rangers patrol the tropical forest to stop illegal wildlife trade.", 0, 1, 1),
    ("The mine expansion would destroy habitat for threatened amphibians.", 0, 0, 1),
    ("We planted mangroves to rebuild coastal habitat for juvenile fish.", 1, 0, 1),
    ("Herbicide drift harmed pollinators and reduced species counts in the protected valley.", 0, 0, 1),
    ("An oil spill coated seabirds and closed the marine sanctuary.", 1, 0, 1),
    ("The dam blocks fish migration and fragments aquatic habitat.", 1, 0, 1),
    ("Overgrazing destroyed the natural grassland ecosystem and its wildlife.", 0, 0, 1),
    ("Our nurseries raise coral fragments to rebuild reefs damaged by warming water.", 1, 0, 1),
    ("Poachers hunt endangered species inside the park despite protection funding.", 0, 0, 1),
    ("The chemical spill destroyed local flora and contaminated the surrounding environment.", 0, 0, 1),
    ("Bats lost their roosts when the old forest habitat was cleared.", 0, 1, 1),
    ("Our survey recorded forty fish species in the restored river ecosystem.", 1, 0, 1),
    ("Deforestation for the new estate wiped out orchid habitat.", 0, 1, 1),
    ("The refinery's discharge threatens a marine ecosystem rich in coral.", 1, 0, 1),
    ("Beekeepers reported collapsing hives after spraying near protected habitat.", 0, 0, 1),
    ("We monitor birds, insects, and soil life to gauge ecosystem health.", 0, 0, 1),
    ("Sonar testing disturbs marine species far beyond the drill site.", 0, 0, 1),
    ("The new preserve links two forest habitats so large fauna can roam.", 0, 1, 1),
    ("Plastic waste in the bay chokes turtles and threatens aquatic wildlife.", 1, 0, 1),
]

GROUP_B = [  # predicted positive, biodiversity = 0, water or forest = 1
    ("Our freshwater intake upgrade cut water use at the coastal refinery.", 1, 0, 0),
    ("The mill now buys certified forest timber to lower its climate impact.", 0, 1, 0),
    ("Drought cut output at the freshwater bottling plant for the third year.", 1, 0, 0),
    ("We log tropical hardwood under a strict forest rotation plan.", 0, 1, 0),
]

GROUP_C = [  # predicted positive, all labels 0
    ("Management's ecosystem of suppliers will protect our margin position.", 0, 0, 0),
    ("A new species of financial products appeared on the watch list this quarter.", 0, 0, 0),
    ("Legal threats forced us to shelve the Marine Division's expansion.", 0, 0, 0),
    ("Our flora-themed fragrance line is marketed as protecting skin health.", 0, 0, 0),
]

GROUP_D = [  # not predicted, biodiversity = 1
    ("The coral reef recovered slowly after the dredging stopped.", 0, 0, 1),
    ("We counted seventeen wild orchid varieties on the ridge.", 0, 0, 1),
    ("Rare beetles returned to the meadow after mowing ceased.", 0, 0, 1),
    ("The wolf pack's range now overlaps the northern grazing leases.", 0, 0, 1),
    ("Otters vanished from the delta after the spill.", 0, 0, 1),
    ("Songbird counts fell by half along the new highway.", 0, 0, 1),
    ("The hatchery released ten thousand salmon fry into the spawning beds.", 0, 0, 1),
    ("Grizzly sightings doubled inside the rewilded valley.", 0, 0, 1),
    ("Lichen cover on the cliffs is the best gauge of recovery.", 0, 0, 1),
    ("The herbarium catalog added ninety pressed plants from the survey.", 0, 0, 1),
    ("Pollinator gardens on our rooftops drew six bee varieties.", 0, 0, 1),
    ("Frogs reappeared in the restored oxbow within two seasons.", 0, 0, 1),
    ("The island fox population tripled after the cull of feral cats.", 0, 0, 1),
    ("Moth diversity collapsed under the new sodium lighting.", 0, 0, 1),
    ("Seagrass beds spread across the lagoon for the first time in years.", 0, 0, 1),
    ("Our biologists tagged twelve turtles nesting on the spoil banks.", 0, 0, 1),
    ("Vultures abandoned the cliffs when the quarry blasting began.", 0, 0, 1),
    ("The peat bog still holds orchids found nowhere else in the region.", 0, 0, 1),
    ("Beavers rebuilt their dams upstream of the mill pond.", 0, 0, 1),
    ("Swallows returned to the cooling towers this spring.", 0, 0, 1),
    ("The reef sharks left when the charter boats moved in.", 0, 0, 1),
    ("Field mice overran the fallow plots north of the depot.", 0, 0, 1),
]

GROUP_E = [  # not predicted, water or forest = 1, biodiversity = 0
    ("Drought forced a second round of irrigation cuts at the Arizona sites.", 1, 0, 0),
    ("Flooding along the river delayed barge shipments for a week.", 1, 0, 0),
    ("The reservoir dropped nine feet, forcing the utility to buy power.", 1, 0, 0),
    ("New sanitation lines cut leakage losses across the municipal grid.", 1, 0, 0),
    ("Timber harvest volumes fell under the revised cutting quota.", 0, 1, 0),
    ("Pulp prices rose after the sawmill fire idled two lines.", 0, 1, 0),
    ("The plantation replanted eucalyptus on the burned hillsides.", 0, 1, 0),
    ("Groundwater pumping permits were cut by a third in the basin.", 1, 0, 0),
]

F_SPECIALS = [
    ("Our climate of open communication kept attrition low.", 0, 0, 0),
    ("The marine division reported record charter revenue.", 0, 0, 0),
    ("A watered-down proposal passed the committee vote.", 0, 0, 0),
    ("The utility protected its dividend by trimming capital spending.", 0, 0, 0),
]

F_SUBJECTS = [
    "The board", "Management", "The finance team", "Our sales group",
    "The audit committee", "The regional office", "The operations team",
    "Procurement", "The treasury desk", "Investor relations",
    "The tax group", "Our billing unit",
]
F_ACTIONS = [
    "approved the quarterly dividend",
    "reviewed hedging costs",
    "renegotiated supplier contracts",
    "published updated guidance",
    "closed the Denver facility",
    "raised full-year margin targets",
    "completed the debt refinancing",
    "expanded the loyalty program",
    "launched a new billing platform",
    "consolidated two data hubs",
    "tightened travel budgets",
]
F_TAILS = [
    "in March.", "after the annual meeting.", "despite softer demand.",
    "ahead of schedule.", "for the third straight quarter.",
    "under the revised plan.", "with minimal disruption.",
    "as volumes recovered.", "following the board review.",
    "to support the buyback.", "once funding cleared.", "by a wide vote.",
]


def build_group_f(n_needed: int) -> list[tuple[str, int, int, int]]:
    rows = list(F_SPECIALS)
    i = 0
    while len(rows) < n_needed:
        subject = F_SUBJECTS[i % len(F_SUBJECTS)]
        action = F_ACTIONS[(i // len(F_SUBJECTS)) % len(F_ACTIONS)]
        tail = F_TAILS[i % len(F_TAILS)]
        rows.append((f"{subject} {action} {tail}", 0, 0, 0))
        i += 1
    return rows[:n_needed]


def build_gold_fixture() -> list[dict]:
    group_f = build_group_f(136)
    groups = [
        ("A", GROUP_A, 1, 26),
        ("B", GROUP_B, 1, 4),
        ("C", GROUP_C, 1, 4),
        ("D", GROUP_D, 0, 22),
        ("E", GROUP_E, 0, 8),
        ("F", group_f, 0, 136),
    ]
    rows = []
    for name, group, predicted, expected_size in groups:
        assert len(group) == expected_size, f"group {name}: {len(group)} != {expected_size}"
        for text, water, forest, bio in group:
            got = naive_two_layer(text)
            assert got == predicted, f"group {name}: {text!r} predicted={got}"
            if name in ("A", "D"):
                assert bio == 1
            else:
                assert bio == 0, f"group {name}: {text!r}"
            if name in ("B", "E"):
                assert water or forest
            if name in ("C", "F"):
                assert not (water or forest)
            rows.append(
                {
                    "text": text,
                    "water": water,
                    "forest": forest,
                    "biodiversity": bio,
                    "nature": int(water or forest or bio),
                }
            )
    texts = [r["text"] for r in rows]
    assert len(set(texts)) == len(texts), "duplicate fixture sentences"
    assert len(rows) == 200

    rng = random.Random(2024)
    rng.shuffle(rows)
    for i, row in enumerate(rows):
        row_id = f"g{i+1:03d}"
        rows[i] = {"sample_id": row_id, **row}

    # Confirm the engineered confusion counts before freezing anything.
    def confusion(target):
        tp = fp = fn = tn = 0
        for row in rows:
            pred = naive_two_layer(row["text"])
            truth = row[target]
            if pred and truth:
                tp += 1
            elif pred and not truth:
                fp += 1
            elif not pred and truth:
                fn += 1
            else:
                tn += 1
        return tp, fp, fn, tn

    assert confusion("biodiversity") == (26, 8, 22, 144), confusion("biodiversity")
    assert confusion("nature") == (30, 4, 30, 136), confusion("nature")
    return rows


def write_gold_fixture(rows: list[dict]) -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    csv_path = FIXTURES / "gold_fixture_200.csv"
    with csv_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "text", "water", "forest", "biodiversity", "nature"])
        for row in rows:
            writer.writerow(
                [row["sample_id"], row["text"], row["water"], row["forest"],
                 row["biodiversity"], row["nature"]]
            )
    jsonl_path = FIXTURES / "gold_fixture_200.jsonl"
    with jsonl_path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    print(f"wrote {csv_path} and {jsonl_path} ({len(rows)} rows)")


# --- case-study fixture --------------------------------------------------------


def build_casestudy_fixture() -> None:
    out = FIXTURES / "casestudy"
    out.mkdir(parents=True, exist_ok=True)

    # (doc_id, company, country, n_sentences, positives as (water, forest, bio) rows)
    transcripts = [
        ("T1", "C1", "US", 40, [(1, 0, 0), (0, 0, 1)]),
        ("T2", "C1", "US", 40, []),
        ("T3", "C2", "BR", 30, [(1, 0, 0), (0, 1, 0), (0, 0, 1)]),
        ("T4", "C2", "BR", 30, [(1, 0, 0), (1, 0, 0), (0, 1, 0), (0, 1, 0), (0, 0, 1), (0, 0, 1)]),
        ("T5", "C3", "ID", 30, [(1, 1, 1), (0, 0, 1), (0, 0, 1)]),
        ("T6", "C3", "ID", 30, []),
    ]
    rows = []
    for doc_id, _, _, n_sentences, positives in transcripts:
        for i in range(n_sentences):
            if i < len(positives):
                water, forest, bio = positives[i]
            else:
                water = forest = bio = 0
            rows.append(
                {
                    "doc_id": doc_id,
                    "sent_id": f"{doc_id}#{i}",
                    "water": water,
                    "forest": forest,
                    "biodiversity": bio,
                    "nature": int(water or forest or bio),
                }
            )
    assert len(rows) == 200
    rng = random.Random(77)
    rng.shuffle(rows)
    with (out / "labeled_sentences.jsonl").open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")

    with (out / "transcripts.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["doc_id", "company_id", "year", "country"])
        for doc_id, company, country, _, _ in transcripts:
            writer.writerow([doc_id, company, 2021, country])

    with (out / "industry_map.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["company_id", "industry_code"])
        writer.writerow(["C1", "31"])
        writer.writerow(["C2", "1"])
        writer.writerow(["C3", "31"])
    print(f"wrote case-study fixture under {out}")


if __name__ == "__main__":
    write_gold_fixture(build_gold_fixture())
    build_casestudy_fixture()
