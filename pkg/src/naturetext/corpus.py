"""Document ingestion, sentence segmentation, and corpus statistics."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

import numpy as np


class CorpusError(Exception):
    """Malformed input or a violated ingestion contract."""


class SourceKind(str, Enum):
    ANNUAL_REPORT = "AR"
    SUSTAINABILITY_REPORT = "SR"
    EARNINGS_CALL = "EC"


@dataclass(frozen=True)
class Document:
    doc_id: str
    source_kind: SourceKind
    text: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise CorpusError("doc_id must be non-empty")
        if not self.text:
            raise CorpusError(f"document {self.doc_id!r} has empty text")


@dataclass(frozen=True)
class Sentence:
    sent_id: str
    doc_id: str
    ordinal: int
    text: str
    token_count: int


@dataclass(frozen=True)
class SentenceStats:
    count: int
    mean: float
    std: float
    min: int
    p25: int
    p50: int
    p75: int
    max: int

    def as_dict(self) -> dict:
        return {
            "count": self.count,
            "mean": self.mean,
            "std": self.std,
            "min": self.min,
            "p25": self.p25,
            "p50": self.p50,
            "p75": self.p75,
            "max": self.max,
        }


# Tokens ending in "." that never terminate a sentence, even before an
# uppercase word. Checked case-sensitively against the token as written.
ABBREVIATIONS = frozenset(
    {
        "Mr.",
        "Mrs.",
        "Ms.",
        "Dr.",
        "Prof.",
        "Inc.",
        "Corp.",
        "Ltd.",
        "Co.",
        "Jr.",
        "Sr.",
        "St.",
        "U.S.",
        "U.K.",
        "U.N.",
        "E.U.",
        "No.",
        "no.",
        "approx.",
        "etc.",
        "vs.",
        "e.g.",
        "i.e.",
        "Fig.",
        "Jan.",
        "Feb.",
        "Mar.",
        "Apr.",
        "Jun.",
        "Jul.",
        "Aug.",
        "Sep.",
        "Sept.",
        "Oct.",
        "Nov.",
        "Dec.",
    }
)

_TERMINATORS = ".!?"


def _ends_with_abbreviation(text: str, dot_index: int) -> bool:
    start = dot_index
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    return text[start : dot_index + 1] in ABBREVIATIONS


def split_sentence_texts(text: str) -> list[str]:
    """Split raw text into sentence strings.

    A run of {., !, ?} ends a sentence when followed by whitespace plus an
    uppercase letter, or by end of text. A single "." whose preceding token
    is on the abbreviation list does not split. Text without any terminator
    comes back as one sentence. Each returned sentence has its whitespace
    runs collapsed to single spaces, so splitting is insensitive to line
    wrapping in the source document.
    """
    pieces: list[str] = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        if text[i] not in _TERMINATORS:
            i += 1
            continue
        run_end = i
        while run_end + 1 < n and text[run_end + 1] in _TERMINATORS:
            run_end += 1
        nxt = run_end + 1
        while nxt < n and text[nxt].isspace():
            nxt += 1
        if nxt >= n:
            boundary = True
        elif nxt > run_end + 1 and text[nxt].isupper():
            single_dot = run_end == i and text[i] == "."
            boundary = not (single_dot and _ends_with_abbreviation(text, i))
        else:
            boundary = False
        if boundary:
            pieces.append(text[start : run_end + 1])
            start = nxt
            i = nxt
        else:
            i = run_end + 1
    if start < n:
        pieces.append(text[start:])
    collapsed = [" ".join(p.split()) for p in pieces]
    return [c for c in collapsed if c]


def segment_sentences(document: Document) -> list[Sentence]:
    """Segment a document into Sentence records, deterministic per input."""
    out = []
    for ordinal, sent_text in enumerate(split_sentence_texts(document.text)):
        out.append(
            Sentence(
                sent_id=f"{document.doc_id}#{ordinal}",
                doc_id=document.doc_id,
                ordinal=ordinal,
                text=sent_text,
                token_count=len(sent_text.split()),
            )
        )
    return out


class CorpusStore:
    """Ordered collection of documents and their segmented sentences.

    Built single-writer during ingestion, read-only afterwards. Documents
    keep ingestion order; sentences keep (document order, ordinal) order.
    """

    def __init__(self) -> None:
        self._documents: dict[str, Document] = {}
        self._sentences: list[Sentence] = []
        self._sent_ids: set[str] = set()

    def __len__(self) -> int:
        return len(self._documents)

    def add_document(
        self, document: Document, sentences: Optional[list[Sentence]] = None
    ) -> None:
        """Add a document, segmenting it unless pre-segmented sentences are given."""
        if document.doc_id in self._documents:
            raise CorpusError(f"duplicate doc_id {document.doc_id!r}")
        if sentences is None:
            sentences = segment_sentences(document)
        last_ordinal = -1
        for s in sentences:
            if s.doc_id != document.doc_id:
                raise CorpusError(
                    f"sentence {s.sent_id!r} does not belong to document {document.doc_id!r}"
                )
            if s.ordinal <= last_ordinal:
                raise CorpusError(
                    f"ordinals not strictly increasing in document {document.doc_id!r}"
                )
            if s.sent_id in self._sent_ids:
                raise CorpusError(f"duplicate sent_id {s.sent_id!r}")
            last_ordinal = s.ordinal
        self._documents[document.doc_id] = document
        self._sentences.extend(sentences)
        self._sent_ids.update(s.sent_id for s in sentences)

    def documents(self) -> list[Document]:
        return list(self._documents.values())

    def get_document(self, doc_id: str) -> Document:
        return self._documents[doc_id]

    def sentences(self, source_kind: Optional[SourceKind] = None) -> list[Sentence]:
        if source_kind is None:
            return list(self._sentences)
        return [
            s
            for s in self._sentences
            if self._documents[s.doc_id].source_kind == source_kind
        ]


def _parse_source_kind(value: str, where: str) -> SourceKind:
    try:
        return SourceKind(value)
    except ValueError:
        raise CorpusError(
            f"malformed record at {where}: unknown source_kind {value!r}"
        ) from None


def _ingest_jsonl_file(path: Path, store: CorpusStore) -> None:
    # Supports two record shapes: full documents (doc_id, source_kind, text)
    # and pre-segmented sentences (sent_id, doc_id, ordinal, text) for users
    # who bring their own segmenter. Shapes may not be mixed per doc_id.
    pending: dict[str, list[dict]] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"malformed record at {where}: {exc}") from None
            if not isinstance(record, dict):
                raise CorpusError(f"malformed record at {where}: not an object")
            if "sent_id" in record:
                for key in ("sent_id", "doc_id", "ordinal", "text"):
                    if key not in record:
                        raise CorpusError(
                            f"malformed record at {where}: missing field {key!r}"
                        )
                record["_where"] = where
                pending.setdefault(record["doc_id"], []).append(record)
            else:
                for key in ("doc_id", "source_kind", "text"):
                    if key not in record:
                        raise CorpusError(
                            f"malformed record at {where}: missing field {key!r}"
                        )
                doc = Document(
                    doc_id=record["doc_id"],
                    source_kind=_parse_source_kind(record["source_kind"], where),
                    text=record["text"],
                    meta=record.get("meta", {}) or {},
                )
                store.add_document(doc)
    for doc_id, records in pending.items():
        kinds = {r.get("source_kind") for r in records} - {None}
        if len(kinds) > 1:
            raise CorpusError(
                f"conflicting source_kind values for pre-segmented doc {doc_id!r}"
            )
        kind = _parse_source_kind(kinds.pop(), records[0]["_where"]) if kinds else SourceKind.ANNUAL_REPORT
        sentences = [
            Sentence(
                sent_id=r["sent_id"],
                doc_id=doc_id,
                ordinal=int(r["ordinal"]),
                text=r["text"],
                token_count=len(str(r["text"]).split()),
            )
            for r in records
        ]
        doc = Document(
            doc_id=doc_id,
            source_kind=kind,
            text=" ".join(s.text for s in sentences),
            meta={},
        )
        store.add_document(doc, sentences=sentences)


def ingest_documents(
    paths: Iterable[str | Path],
    format: str = "jsonl",
    default_source_kind: SourceKind = SourceKind.ANNUAL_REPORT,
) -> CorpusStore:
    """Load documents from jsonl files or a directory of plain-text files.

    jsonl records carry doc_id, source_kind ("AR"|"SR"|"EC"), text, and an
    optional meta object. Plain-text files become one document each, named
    by file stem and tagged default_source_kind. Duplicate doc_ids are
    rejected; ingestion order is preserved.
    """
    store = CorpusStore()
    for raw in paths:
        path = Path(raw)
        if not path.exists():
            raise CorpusError(f"unreadable file: {path}")
        if format == "jsonl":
            _ingest_jsonl_file(path, store)
        elif format == "plain_text_dir":
            if not path.is_dir():
                raise CorpusError(f"not a directory: {path}")
            for txt in sorted(path.glob("*.txt")):
                text = txt.read_text(encoding="utf-8")
                store.add_document(
                    Document(
                        doc_id=txt.stem,
                        source_kind=default_source_kind,
                        text=text,
                        meta={},
                    )
                )
        else:
            raise CorpusError(f"unknown ingest format {format!r}")
    return store


def nearest_rank(sorted_values: list[int], q: float) -> int:
    """Nearest-rank quantile: the ceil(q*n)-th order statistic (1-indexed)."""
    n = len(sorted_values)
    rank = max(1, math.ceil(q * n))
    return sorted_values[rank - 1]


def corpus_stats(
    store: CorpusStore, source_kind: Optional[SourceKind] = None
) -> SentenceStats:
    """Token-count statistics over the store's sentences, optionally filtered.

    Quantiles are nearest-rank order statistics; std is the population
    standard deviation.
    """
    counts = [s.token_count for s in store.sentences(source_kind)]
    if not counts:
        raise CorpusError("no sentences in selection")
    arr = np.asarray(counts, dtype=np.float64)
    ordered = sorted(counts)
    return SentenceStats(
        count=len(counts),
        mean=float(arr.mean()),
        std=float(arr.std()),
        min=ordered[0],
        p25=nearest_rank(ordered, 0.25),
        p50=nearest_rank(ordered, 0.50),
        p75=nearest_rank(ordered, 0.75),
        max=ordered[-1],
    )


def write_sentences_jsonl(sentences: Iterable[Sentence], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for s in sentences:
            fh.write(
                json.dumps(
                    {
                        "sent_id": s.sent_id,
                        "doc_id": s.doc_id,
                        "ordinal": s.ordinal,
                        "text": s.text,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
