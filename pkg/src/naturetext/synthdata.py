"""Deterministic synthetic gold datasets for demos and harness tests.

Rows are lexically separable: each positive dimension plants distinctive
vocabulary in the text, so both the fold machinery and a small trained
classifier have a learnable signal. Output is reproducible from the seed.
"""

from __future__ import annotations

import random

from .gold import GoldRow

WATER_WORDS = [
    "reservoir", "aquifer", "rainfall", "irrigation", "desalination",
    "wastewater", "drought", "flooding", "groundwater", "watershed",
]
FOREST_WORDS = [
    "timberland", "sawmill", "plywood", "reforestation", "logging",
    "woodland", "lumber", "pulpwood", "silviculture", "plantation",
]
BIODIVERSITY_WORDS = [
    "wildlife", "pollinators", "songbirds", "amphibians", "coral",
    "orchids", "mammals", "insects", "fauna", "habitat",
]
NEUTRAL_WORDS = [
    "the", "company", "reported", "quarterly", "revenue", "growth",
    "margin", "guidance", "board", "approved", "capital", "spending",
    "our", "team", "launched", "program", "across", "regions", "costs",
    "fell", "demand", "recovered", "supply", "contracts", "planning",
    "review", "targets", "dividend", "buyback", "outlook", "segment",
    "energy", "emissions", "strategy", "update", "investors", "analysts",
]


def synthetic_gold(
    n: int = 2200,
    seed: int = 7,
    water_rate: float = 0.16,
    forest_rate: float = 0.13,
    biodiversity_rate: float = 0.15,
) -> list[GoldRow]:
    rng = random.Random(seed)
    rows = []
    for i in range(n):
        water = int(rng.random() < water_rate)
        forest = int(rng.random() < forest_rate)
        bio = int(rng.random() < biodiversity_rate)
        words = rng.choices(NEUTRAL_WORDS, k=rng.randint(6, 14))
        if water:
            for _ in range(rng.randint(1, 2)):
                words.insert(rng.randrange(len(words) + 1), rng.choice(WATER_WORDS))
        if forest:
            for _ in range(rng.randint(1, 2)):
                words.insert(rng.randrange(len(words) + 1), rng.choice(FOREST_WORDS))
        if bio:
            for _ in range(rng.randint(1, 2)):
                words.insert(rng.randrange(len(words) + 1), rng.choice(BIODIVERSITY_WORDS))
        text = " ".join(words) + "."
        rows.append(
            GoldRow(
                sample_id=f"syn{i:05d}",
                text=text,
                water=water,
                forest=forest,
                biodiversity=bio,
                nature=int(water or forest or bio),
            )
        )
    return rows
