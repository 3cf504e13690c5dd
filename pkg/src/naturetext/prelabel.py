"""Prompt rendering, scorer backends, response parsing, band sampling.

The scoring backend is pluggable: anything with a ``score(prompt) -> str``
method works. A deterministic keyword-heuristic mock ships for offline runs
and tests; an HTTP-JSON adapter covers hosted models.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Protocol, Sequence

import requests

from .corpus import Sentence
from .keywords import Dimension, KeywordSet, load_keyword_set, quota_split


class PreLabelError(Exception):
    pass


class ParseError(PreLabelError):
    """Unusable scorer response; carries the raw text for the manifest."""

    def __init__(self, message: str, raw: str):
        super().__init__(f"{message}: {raw!r}")
        self.raw = raw


class BackendError(PreLabelError):
    pass


@dataclass(frozen=True)
class PreLabelScore:
    sent_id: str
    dimension: str
    verdict: str  # "Yes" | "No"
    confidence: int
    effective_score: int

    def __post_init__(self) -> None:
        if self.verdict not in ("Yes", "No"):
            raise PreLabelError(f"invalid verdict {self.verdict!r}")
        if not 0 <= self.confidence <= 100:
            raise PreLabelError(f"confidence out of range: {self.confidence}")
        expected = 0 if self.verdict == "No" else self.confidence
        if self.effective_score != expected:
            raise PreLabelError(
                f"effective_score {self.effective_score} inconsistent with "
                f"verdict {self.verdict!r} and confidence {self.confidence}"
            )


def make_score(
    sent_id: str, dimension: str, verdict: str, confidence: int
) -> PreLabelScore:
    """Build a score, zeroing the effective score for "No" verdicts."""
    return PreLabelScore(
        sent_id=sent_id,
        dimension=dimension,
        verdict=verdict,
        confidence=confidence,
        effective_score=0 if verdict == "No" else confidence,
    )


class ScoreBand(str, Enum):
    ZERO = "Zero"
    LOW_MID = "LowMid"
    HIGH = "High"


def score_band(effective_score: int) -> ScoreBand:
    """Zero = 0, LowMid = 1..74, High = 75..100 (75 counts as High)."""
    if not 0 <= effective_score <= 100:
        raise PreLabelError(f"score out of range: {effective_score}")
    if effective_score == 0:
        return ScoreBand.ZERO
    if effective_score < 75:
        return ScoreBand.LOW_MID
    return ScoreBand.HIGH


def _resource_text(name: str) -> str:
    from importlib import resources

    return (resources.files("naturetext") / "resources" / name).read_text("utf-8")


def prompt_template() -> str:
    return _resource_text("prompt_template.txt")


def load_guideline(dimension: Dimension | str) -> str:
    return _resource_text(f"guideline_{Dimension(dimension).value}.txt").strip()


def render_prompt(guideline: str, text: str) -> str:
    """Substitute guideline and text into the scoring prompt template.

    Substitution is verbatim; a "|" inside the text is not escaped and can
    confuse a scorer that relies on the delimiters.
    """
    if not guideline:
        raise PreLabelError("guideline must be non-empty")
    if not text:
        raise PreLabelError("text must be non-empty")
    return prompt_template().replace("{guideline}", guideline).replace("{text}", text)


_VERDICT_RE = re.compile(r"\b(yes|no)\b", re.IGNORECASE)
_INT_RE = re.compile(r"\d+")


def parse_response(raw: str) -> tuple[str, int]:
    """Extract (verdict, confidence) from a scorer reply.

    Takes the first standalone yes/no token and the first integer after it;
    tolerant of case, punctuation, and surrounding prose.
    """
    verdict_match = _VERDICT_RE.search(raw)
    if verdict_match is None:
        raise ParseError("no Yes/No verdict found", raw)
    verdict = "Yes" if verdict_match.group(1).lower() == "yes" else "No"
    int_match = _INT_RE.search(raw, verdict_match.end())
    if int_match is None:
        raise ParseError("no confidence integer found", raw)
    confidence = int(int_match.group(0))
    if not 0 <= confidence <= 100:
        raise ParseError(f"confidence {confidence} out of range", raw)
    return verdict, confidence


class ScorerBackend(Protocol):
    def score(self, prompt: str) -> str: ...


_TEXT_DELIM_RE = re.compile(r"Provided text: \|(.*)\|", re.DOTALL)


class MockBackend:
    """Offline scorer: keyword presence in the |text| payload drives a canned
    Yes/No + confidence so all three score bands occur deterministically."""

    def __init__(self, keyword_set: Optional[KeywordSet] = None, dimension: Dimension | str = Dimension.WATER):
        self.keyword_set = keyword_set or load_keyword_set(dimension)
        self.calls = 0

    def score(self, prompt: str) -> str:
        self.calls += 1
        match = _TEXT_DELIM_RE.search(prompt)
        if match is None:
            raise BackendError("prompt has no |text| payload")
        text = match.group(1)
        distinct = {h.pattern for h in self.keyword_set.matcher.find_all(text)}
        if not distinct:
            return "No, 95"
        if len(distinct) == 1:
            return "Yes, 40"
        return "Yes, 90"


class ScriptedBackend:
    """Test double returning a fixed answer per prompt hash (or a default)."""

    def __init__(self, by_hash: Optional[dict[str, str]] = None, default: Optional[str] = None):
        self.by_hash = by_hash or {}
        self.default = default
        self.prompts: list[str] = []

    @staticmethod
    def prompt_hash(prompt: str) -> str:
        return hashlib.sha256(prompt.encode("utf-8")).hexdigest()

    def score(self, prompt: str) -> str:
        self.prompts.append(prompt)
        key = self.prompt_hash(prompt)
        if key in self.by_hash:
            return self.by_hash[key]
        if self.default is not None:
            return self.default
        raise BackendError(f"no scripted answer for prompt hash {key[:12]}")


class HttpBackend:
    """HTTP-JSON adapter: POST {model, prompt} to an endpoint, read {text}.

    The bearer token is taken from an environment variable so it never lands
    in configs or manifests.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        token_env: str = "NATURETEXT_BACKEND_TOKEN",
        timeout: float = 30.0,
    ):
        self.endpoint = endpoint
        self.model = model
        self.token_env = token_env
        self.timeout = timeout

    def score(self, prompt: str) -> str:
        import os

        headers = {}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            response = requests.post(
                self.endpoint,
                json={"model": self.model, "prompt": prompt},
                headers=headers,
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise BackendError(f"backend request failed: {exc}") from exc
        if response.status_code != 200:
            raise BackendError(f"backend returned HTTP {response.status_code}")
        payload = response.json()
        if "text" not in payload:
            raise BackendError("backend response missing 'text' field")
        return payload["text"]


@dataclass(frozen=True)
class ScoreFailure:
    sent_id: str
    error: str


@dataclass
class PreLabelBatchResult:
    scores: list[PreLabelScore]
    failures: list[ScoreFailure]


def text_sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def read_scores_jsonl(path: str | Path) -> list[PreLabelScore]:
    scores = []
    path = Path(path)
    if not path.exists():
        return scores
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            scores.append(
                PreLabelScore(
                    sent_id=rec["sent_id"],
                    dimension=rec["dimension"],
                    verdict=rec["verdict"],
                    confidence=rec["confidence"],
                    effective_score=rec["effective_score"],
                )
            )
    return scores


def _score_record(score: PreLabelScore, text_hash: str) -> str:
    return json.dumps(
        {
            "sent_id": score.sent_id,
            "dimension": score.dimension,
            "verdict": score.verdict,
            "confidence": score.confidence,
            "effective_score": score.effective_score,
            "text_sha256": text_hash,
        },
        ensure_ascii=False,
    )


def prelabel_batch(
    sentences: Sequence[Sentence],
    dimension: Dimension | str,
    backend: ScorerBackend,
    budget: int,
    store_path: Optional[str | Path] = None,
    guideline: Optional[str] = None,
    max_attempts: int = 3,
    retry_base_delay: float = 0.5,
    max_in_flight: int = 4,
) -> PreLabelBatchResult:
    """Score up to `budget` sentences, resumable and fault-tolerant.

    Already-persisted sent_ids are never re-queried. Each new score is
    appended to the store as soon as it arrives (single writer); per-sentence
    failures after bounded retries are reported in the failure manifest
    instead of aborting the batch.
    """
    if budget < 1:
        raise PreLabelError("budget must be >= 1")
    dimension = Dimension(dimension)
    if guideline is None:
        guideline = load_guideline(dimension)

    cached: dict[str, PreLabelScore] = {}
    if store_path is not None:
        for score in read_scores_jsonl(store_path):
            if score.dimension == dimension.value:
                cached[score.sent_id] = score

    selected = list(sentences[:budget])
    scores: list[PreLabelScore] = []
    failures: list[ScoreFailure] = []
    to_query = [s for s in selected if s.sent_id not in cached]

    def attempt(sentence: Sentence) -> str:
        prompt = render_prompt(guideline, sentence.text)
        last_error: Exception = BackendError("no attempt made")
        for attempt_no in range(max_attempts):
            try:
                return backend.score(prompt)
            except Exception as exc:  # noqa: BLE001 - backend faults are data here
                last_error = exc
                if attempt_no < max_attempts - 1:
                    time.sleep(retry_base_delay * (2**attempt_no))
        raise last_error

    store_handle = None
    if store_path is not None:
        Path(store_path).parent.mkdir(parents=True, exist_ok=True)
        store_handle = Path(store_path).open("a", encoding="utf-8")
    try:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            futures = [(s, pool.submit(attempt, s)) for s in to_query]
            for sentence, future in futures:
                try:
                    raw = future.result()
                    verdict, confidence = parse_response(raw)
                except Exception as exc:  # noqa: BLE001
                    failures.append(ScoreFailure(sent_id=sentence.sent_id, error=str(exc)))
                    continue
                score = make_score(sentence.sent_id, dimension.value, verdict, confidence)
                cached[sentence.sent_id] = score
                if store_handle is not None:
                    store_handle.write(_score_record(score, text_sha256(sentence.text)) + "\n")
                    store_handle.flush()
    finally:
        if store_handle is not None:
            store_handle.close()

    for sentence in selected:
        if sentence.sent_id in cached:
            scores.append(cached[sentence.sent_id])
    return PreLabelBatchResult(scores=scores, failures=failures)


BAND_ORDER = (ScoreBand.ZERO, ScoreBand.LOW_MID, ScoreBand.HIGH)


def band_balanced_sample(
    scores: Iterable[PreLabelScore], n_total: int, seed: int
) -> list[str]:
    """Draw sent_ids evenly from the Zero / LowMid / High score bands.

    Quota remainders go to Zero then LowMid; a band short of its quota hands
    the shortfall round-robin to the other bands. Uniform without
    replacement, deterministic under the seed.
    """
    if n_total < 3:
        raise PreLabelError("n_total must be >= 3")
    bands: dict[ScoreBand, list[str]] = {band: [] for band in BAND_ORDER}
    total = 0
    for score in scores:
        bands[score_band(score.effective_score)].append(score.sent_id)
        total += 1
    if total < n_total:
        raise PreLabelError(f"only {total} scored sentences, need {n_total}")
    groups = [bands[band] for band in BAND_ORDER]
    take = quota_split([len(g) for g in groups], n_total)
    rng = random.Random(seed)
    sampled: list[str] = []
    for group, k in zip(groups, take):
        if k:
            sampled.extend(rng.sample(group, k))
    return sampled
