"""Reading and writing gold-labeled sentence datasets (csv / jsonl)."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

LABEL_COLUMNS = ("water", "forest", "biodiversity", "nature")


class GoldDataError(Exception):
    pass


@dataclass(frozen=True)
class GoldRow:
    sample_id: str
    text: str
    water: int
    forest: int
    biodiversity: int
    nature: int

    def label(self, target: str) -> int:
        if target not in LABEL_COLUMNS:
            raise GoldDataError(f"missing label column {target!r}")
        return int(getattr(self, target))


def _row_from_mapping(mapping: dict, where: str) -> GoldRow:
    for key in ("sample_id", "text", *LABEL_COLUMNS):
        if key not in mapping or mapping[key] in (None, ""):
            raise GoldDataError(f"{where}: missing field {key!r}")
    try:
        labels = {col: int(mapping[col]) for col in LABEL_COLUMNS}
    except (TypeError, ValueError):
        raise GoldDataError(f"{where}: labels must be 0/1 integers") from None
    for col, value in labels.items():
        if value not in (0, 1):
            raise GoldDataError(f"{where}: {col} must be 0 or 1, got {value}")
    if labels["nature"] != (labels["water"] or labels["forest"] or labels["biodiversity"]):
        raise GoldDataError(
            f"{where}: nature label must be the OR of water/forest/biodiversity"
        )
    return GoldRow(
        sample_id=str(mapping["sample_id"]),
        text=str(mapping["text"]),
        **labels,
    )


def load_gold(path: str | Path) -> list[GoldRow]:
    """Load a gold dataset; validates labels and the derived nature column."""
    path = Path(path)
    if not path.exists():
        raise GoldDataError(f"gold dataset not found: {path}")
    rows: list[GoldRow] = []
    seen: set[str] = set()
    if path.suffix == ".csv":
        with path.open("r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in ("sample_id", "text", *LABEL_COLUMNS) if c not in (reader.fieldnames or [])]
            if missing:
                raise GoldDataError(f"{path}: missing label column(s) {missing}")
            for lineno, record in enumerate(reader, start=2):
                rows.append(_row_from_mapping(record, f"{path}:{lineno}"))
    else:
        with path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                rows.append(_row_from_mapping(json.loads(line), f"{path}:{lineno}"))
    for row in rows:
        if row.sample_id in seen:
            raise GoldDataError(f"duplicate sample_id {row.sample_id!r}")
        seen.add(row.sample_id)
    if not rows:
        raise GoldDataError(f"gold dataset is empty: {path}")
    return rows


def write_gold(rows: Sequence[GoldRow], path: str | Path) -> None:
    path = Path(path)
    if path.suffix == ".csv":
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample_id", "text", *LABEL_COLUMNS])
            for r in rows:
                writer.writerow(
                    [r.sample_id, r.text, r.water, r.forest, r.biodiversity, r.nature]
                )
    else:
        with path.open("w", encoding="utf-8") as fh:
            for r in rows:
                fh.write(
                    json.dumps(
                        {
                            "sample_id": r.sample_id,
                            "text": r.text,
                            "water": r.water,
                            "forest": r.forest,
                            "biodiversity": r.biodiversity,
                            "nature": r.nature,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
