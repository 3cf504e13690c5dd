"""Keyword dictionaries, multi-pattern scanning, frequency buckets, samplers.

Matching semantics: every pattern is searched case-insensitively as a raw
substring of the sentence text padded with one leading and one trailing
space. Patterns are stored verbatim, so a leading or trailing space in a
pattern is significant (" lake" requires a word start, "hunt " a word end,
while a bare stem like "environ" matches anywhere, including inside longer
words).
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .corpus import CorpusStore, Sentence, SourceKind


class KeywordError(Exception):
    """Invalid keyword set or an unsatisfiable sampling request."""


class Dimension(str, Enum):
    WATER = "water"
    FOREST = "forest"
    BIODIVERSITY = "biodiversity"


@dataclass(frozen=True)
class KeywordPattern:
    raw: str
    dimension: Dimension

    def __post_init__(self) -> None:
        if not self.raw.strip():
            raise KeywordError("pattern must be non-empty after trimming")


@dataclass(frozen=True)
class KeywordHit:
    """One pattern occurrence.

    offset is the byte position where the raw pattern begins, relative to
    the start of the sentence's UTF-8 text. It is -1 when a leading-space
    pattern matched against the virtual padding space in front of the
    sentence.
    """

    pattern: str
    offset: int


class KeywordSet:
    """Ordered, de-duplicated patterns for one dimension (listing order kept)."""

    def __init__(self, dimension: Dimension, patterns: Sequence[KeywordPattern]):
        raws = [p.raw for p in patterns]
        if len(set(raws)) != len(raws):
            dupes = sorted({r for r in raws if raws.count(r) > 1})
            raise KeywordError(f"duplicate patterns in set: {dupes}")
        if not raws:
            raise KeywordError("keyword set must not be empty")
        self.dimension = dimension
        self.patterns: tuple[KeywordPattern, ...] = tuple(patterns)
        self._matcher: Optional[KeywordMatcher] = None

    @property
    def raw_patterns(self) -> list[str]:
        return [p.raw for p in self.patterns]

    @property
    def matcher(self) -> "KeywordMatcher":
        if self._matcher is None:
            self._matcher = KeywordMatcher(self.raw_patterns)
        return self._matcher


def _resource_text(name: str) -> str:
    return (resources.files("naturetext") / "resources" / name).read_text("utf-8")


def load_keyword_set(dimension: Dimension | str) -> KeywordSet:
    """Load the bundled pattern list for a dimension (spaces are verbatim)."""
    dimension = Dimension(dimension)
    text = _resource_text(f"keywords_{dimension.value}.txt")
    return parse_keyword_lines(text.splitlines(), dimension)


def parse_keyword_lines(lines: Iterable[str], dimension: Dimension) -> KeywordSet:
    patterns = [
        KeywordPattern(raw=line, dimension=dimension)
        for line in (ln.rstrip("\r\n") for ln in lines)
        if line.strip()
    ]
    return KeywordSet(dimension, patterns)


def load_keyword_file(path: str | Path, dimension: Dimension | str) -> KeywordSet:
    return parse_keyword_lines(
        Path(path).read_text("utf-8").splitlines(), Dimension(dimension)
    )


def pad_for_scan(text: str) -> bytes:
    """The exact byte string the matcher scans: lowercased, space-padded."""
    return b" " + text.encode("utf-8").lower() + b" "


class KeywordMatcher:
    """Dictionary automaton over bytes with a dense transition table.

    Built once per pattern list: a trie plus breadth-first failure links,
    collapsed into a full (states x 256) goto table so the scan itself is a
    single table lookup per input byte. Case folding is ASCII-only, applied
    to both patterns and scanned text at the byte level.
    """

    def __init__(self, patterns: Sequence[str]):
        if not patterns:
            raise KeywordError("matcher needs at least one pattern")
        self.patterns = list(patterns)
        self._pattern_bytes = [p.encode("utf-8").lower() for p in self.patterns]
        self._build()

    def _build(self) -> None:
        children: list[dict[int, int]] = [{}]
        terminal: list[list[int]] = [[]]
        for idx, pat in enumerate(self._pattern_bytes):
            node = 0
            for byte in pat:
                nxt = children[node].get(byte)
                if nxt is None:
                    children.append({})
                    terminal.append([])
                    nxt = len(children) - 1
                    children[node][byte] = nxt
                node = nxt
            terminal[node].append(idx)

        n_states = len(children)
        table = np.zeros((n_states, 256), dtype=np.int64)
        fail = [0] * n_states
        out: list[tuple[int, ...]] = [()] * n_states
        queue: deque[int] = deque()
        for byte, child in children[0].items():
            table[0, byte] = child
            fail[child] = 0
            queue.append(child)
        while queue:
            state = queue.popleft()
            out[state] = tuple(terminal[state]) + out[fail[state]]
            # Collapse failure transitions into the dense row.
            table[state] = table[fail[state]]
            for byte, child in children[state].items():
                table[state, byte] = child
                fail[child] = int(table[fail[state], byte])
                queue.append(child)

        self._table = table
        self._table_rows = table.tolist()
        self._flat = table.reshape(-1)
        self._out = out
        self._has_out = np.array([bool(o) for o in out], dtype=bool)
        self._pattern_lens = [len(p) for p in self._pattern_bytes]

    def _events_scalar(self, data: bytes) -> list[tuple[int, int]]:
        """All raw occurrences as (pattern_index, start_byte) in scan order."""
        rows = self._table_rows
        out = self._out
        lens = self._pattern_lens
        events: list[tuple[int, int]] = []
        state = 0
        for pos, byte in enumerate(data):
            state = rows[state][byte]
            hits = out[state]
            if hits:
                for pidx in hits:
                    events.append((pidx, pos - lens[pidx] + 1))
        return events

    @staticmethod
    def _select_non_overlapping(
        starts: list[int], length: int
    ) -> list[int]:
        kept = []
        cursor = -1
        for s in starts:
            if s >= cursor:
                kept.append(s)
                cursor = s + length
        return kept

    def find_all(self, text: str) -> list[KeywordHit]:
        """Non-overlapping occurrences of every pattern, by pattern then position.

        Occurrences of the same pattern are selected greedily left to right;
        different patterns are reported independently and may overlap each
        other.
        """
        events = self._events_scalar(pad_for_scan(text))
        by_pattern: dict[int, list[int]] = {}
        for pidx, start in events:
            by_pattern.setdefault(pidx, []).append(start)
        hits: list[KeywordHit] = []
        for pidx in sorted(by_pattern):
            starts = sorted(by_pattern[pidx])
            for s in self._select_non_overlapping(starts, self._pattern_lens[pidx]):
                hits.append(KeywordHit(pattern=self.patterns[pidx], offset=s - 1))
        return hits

    def matched_pattern_indexes(self, texts: Sequence[str], chunk_rows: int = 4096) -> list[frozenset[int]]:
        """Set of matched pattern indexes per text, scanned corpus-batched.

        Runs the automaton over many texts in lockstep (one gather per byte
        column) so large corpora scan at array speed. Produces exactly the
        patterns find_all() would report per text.
        """
        sets: list[frozenset[int]] = []
        flat = self._flat
        has_out = self._has_out
        out = self._out
        for base in range(0, len(texts), chunk_rows):
            chunk = texts[base : base + chunk_rows]
            padded = [pad_for_scan(t) for t in chunk]
            width = max(len(p) for p in padded)
            mat = np.zeros((len(padded), width), dtype=np.uint8)
            for r, p in enumerate(padded):
                mat[r, : len(p)] = np.frombuffer(p, dtype=np.uint8)
            states = np.zeros(len(padded), dtype=np.int64)
            found: list[set[int]] = [set() for _ in padded]
            for col in range(width):
                states = flat[states * 256 + mat[:, col]]
                flagged = has_out[states]
                if flagged.any():
                    for r in np.nonzero(flagged)[0]:
                        found[r].update(out[states[r]])
            sets.extend(frozenset(f) for f in found)
        return sets


def match_sentence(sentence: Sentence, keyword_set: KeywordSet) -> list[KeywordHit]:
    """All non-overlapping pattern occurrences in one sentence."""
    return keyword_set.matcher.find_all(sentence.text)


@dataclass(frozen=True)
class FrequencyTable:
    dimension: Dimension
    counts: dict  # pattern raw -> number of distinct matching sentences
    total_matched_sentences: int
    total_sentences: int

    def __post_init__(self) -> None:
        bad = [p for p, c in self.counts.items() if c > self.total_sentences]
        if bad or self.total_matched_sentences > self.total_sentences:
            raise KeywordError("counts exceed corpus size")


def _matched_sets(store: CorpusStore, keyword_set: KeywordSet) -> tuple[list[Sentence], list[frozenset[int]]]:
    sentences = store.sentences()
    if not sentences:
        raise KeywordError("empty corpus")
    sets = keyword_set.matcher.matched_pattern_indexes([s.text for s in sentences])
    return sentences, sets


def keyword_frequency_table(store: CorpusStore, keyword_set: KeywordSet) -> FrequencyTable:
    """Per-pattern count of distinct sentences containing >=1 occurrence."""
    sentences, sets = _matched_sets(store, keyword_set)
    raws = keyword_set.raw_patterns
    counts = {raw: 0 for raw in raws}
    matched = 0
    for pattern_set in sets:
        if pattern_set:
            matched += 1
            for pidx in pattern_set:
                counts[raws[pidx]] += 1
    return FrequencyTable(
        dimension=keyword_set.dimension,
        counts=counts,
        total_matched_sentences=matched,
        total_sentences=len(sentences),
    )


def appearance_rate(store: CorpusStore, keyword_set: KeywordSet) -> float:
    """Fraction of sentences matching at least one pattern of the set."""
    table = keyword_frequency_table(store, keyword_set)
    return table.total_matched_sentences / table.total_sentences


DEFAULT_CUT_POINTS = (0.1, 0.2, 0.4, 0.6, 1.0)


@dataclass(frozen=True)
class BucketAssignment:
    """Bucket index (1..5) per pattern, plus the rank order used to build it.

    Patterns are ranked by descending sentence count (ties by listing
    order). Walking the ranking, a pattern lands in the first bucket whose
    cumulative-share cut point covers the running total at the pattern's
    completion; the top-ranked pattern is bucket 1 unconditionally, since a
    single dominant keyword can blow straight past the first cut point.
    Zero-count patterns go to bucket 5.
    """

    cut_points: tuple
    bucket_of: dict  # pattern raw -> bucket index
    rank_of: dict  # pattern raw -> rank position (0 = most frequent)


def bucketize(
    table: FrequencyTable, cut_points: Sequence[float] = DEFAULT_CUT_POINTS
) -> BucketAssignment:
    total = sum(table.counts.values())
    if total <= 0:
        raise KeywordError("all-zero frequency table cannot be bucketed")
    listing = list(table.counts.keys())
    order = {raw: i for i, raw in enumerate(listing)}
    ranked = sorted(listing, key=lambda raw: (-table.counts[raw], order[raw]))
    # Exact cut-point comparison; shares like 3/10 must not straddle a cut
    # because of float rounding.
    cuts = [Fraction(str(cut)) for cut in cut_points]
    bucket_of: dict[str, int] = {}
    rank_of: dict[str, int] = {}
    running = 0
    for rank, raw in enumerate(ranked):
        rank_of[raw] = rank
        count = table.counts[raw]
        if count == 0:
            bucket_of[raw] = len(cuts)
            continue
        running += count
        share = Fraction(running, total)
        bucket = next(
            i + 1 for i, cut in enumerate(cuts) if share <= cut or i == len(cuts) - 1
        )
        bucket_of[raw] = 1 if rank == 0 else bucket
    return BucketAssignment(
        cut_points=tuple(cut_points), bucket_of=bucket_of, rank_of=rank_of
    )


def quota_split(group_sizes: Sequence[int], n_total: int) -> list[int]:
    """Per-group take counts: even quotas, remainder to the lowest-index
    groups, shortfall from underfilled groups redistributed round-robin."""
    n_groups = len(group_sizes)
    base, rem = divmod(n_total, n_groups)
    quotas = [base + (1 if i < rem else 0) for i in range(n_groups)]
    take = [min(q, size) for q, size in zip(quotas, group_sizes)]
    shortfall = n_total - sum(take)
    while shortfall > 0:
        progressed = False
        for i in range(n_groups):
            if shortfall == 0:
                break
            if take[i] < group_sizes[i]:
                take[i] += 1
                shortfall -= 1
                progressed = True
        if not progressed:
            break
    return take


def sentence_bucket(
    pattern_set: frozenset, assignment: BucketAssignment, raws: Sequence[str]
) -> int:
    """Bucket of the rarest matched pattern (highest rank position)."""
    rarest = max(pattern_set, key=lambda pidx: assignment.rank_of[raws[pidx]])
    return assignment.bucket_of[raws[rarest]]


def bucket_balanced_sample(
    store: CorpusStore,
    keyword_set: KeywordSet,
    assignment: BucketAssignment,
    n_total: int,
    seed: int,
) -> list[Sentence]:
    """Sample matched sentences evenly across frequency buckets.

    Each sentence belongs to the bucket of its rarest matched pattern, so
    minority keywords are represented. Draws are uniform without
    replacement and fully determined by the seed.
    """
    if n_total < 5:
        raise KeywordError("n_total must be at least 5")
    sentences, sets = _matched_sets(store, keyword_set)
    raws = keyword_set.raw_patterns
    n_buckets = len(assignment.cut_points)
    candidates: list[list[Sentence]] = [[] for _ in range(n_buckets)]
    for sentence, pattern_set in zip(sentences, sets):
        if pattern_set:
            candidates[sentence_bucket(pattern_set, assignment, raws) - 1].append(sentence)
    available = sum(len(c) for c in candidates)
    if available < n_total:
        raise KeywordError(
            f"only {available} matched sentences available, need {n_total}"
        )
    take = quota_split([len(c) for c in candidates], n_total)
    rng = random.Random(seed)
    sample: list[Sentence] = []
    for bucket_candidates, k in zip(candidates, take):
        if k:
            sample.extend(rng.sample(bucket_candidates, k))
    return sample


def keyword_filter_sample(
    store: CorpusStore,
    keyword_set: KeywordSet,
    per_source_cap: int,
    seed: int = 0,
) -> list[Sentence]:
    """Up to per_source_cap matching sentences per source kind, seeded."""
    if per_source_cap < 1:
        raise KeywordError("per_source_cap must be >= 1")
    sentences, sets = _matched_sets(store, keyword_set)
    matched_ids = {
        s.sent_id for s, pattern_set in zip(sentences, sets) if pattern_set
    }
    rng = random.Random(seed)
    sample: list[Sentence] = []
    for kind in SourceKind:
        pool = [s for s in store.sentences(kind) if s.sent_id in matched_ids]
        if not pool:
            continue
        k = min(per_source_cap, len(pool))
        sample.extend(rng.sample(pool, k))
    return sample
