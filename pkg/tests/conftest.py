import json
from pathlib import Path

import pytest

from naturetext.corpus import CorpusStore, Document, SourceKind

FIXTURES = Path(__file__).parent / "fixtures"


def make_store(texts, source_kind=SourceKind.ANNUAL_REPORT):
    """Store with one single-sentence document per text (no segmentation surprises)."""
    store = CorpusStore()
    for i, text in enumerate(texts):
        store.add_document(
            Document(doc_id=f"d{i:04d}", source_kind=source_kind, text=text)
        )
    return store


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def write_jsonl(path: Path, records) -> Path:
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    return path
