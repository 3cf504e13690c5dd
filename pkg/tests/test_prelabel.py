import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from naturetext.corpus import Sentence
from naturetext.keywords import Dimension
from naturetext.prelabel import (
    BackendError,
    MockBackend,
    ParseError,
    PreLabelError,
    ScoreBand,
    ScriptedBackend,
    band_balanced_sample,
    load_guideline,
    make_score,
    parse_response,
    prelabel_batch,
    read_scores_jsonl,
    render_prompt,
    score_band,
)


def sent(sid, text):
    return Sentence(sent_id=sid, doc_id="d", ordinal=0, text=text, token_count=len(text.split()))


# -- prompt rendering -----------------------------------------------------------


def test_render_prompt_substitution():
    prompt = render_prompt("G", "T")
    assert "Provided guideline: <G>" in prompt
    assert "Provided text: |T|" in prompt


def test_render_prompt_pipe_not_escaped():
    prompt = render_prompt("G", "a|b")
    assert "Provided text: |a|b|" in prompt


def test_render_prompt_empty_inputs():
    with pytest.raises(PreLabelError):
        render_prompt("", "T")
    with pytest.raises(PreLabelError):
        render_prompt("G", "")


def test_guidelines_load_for_all_dimensions():
    for dim in Dimension:
        assert len(load_guideline(dim)) > 50


# -- response parsing -----------------------------------------------------------


def test_parse_canonical():
    assert parse_response("Yes, 85") == ("Yes", 85)


def test_parse_no_zeroes_effective_score():
    verdict, confidence = parse_response("no 10")
    score = make_score("s", "water", verdict, confidence)
    assert score.effective_score == 0
    assert score.confidence == 10


def test_parse_rejects_missing_verdict():
    with pytest.raises(ParseError):
        parse_response("Maybe 50")


def test_parse_rejects_missing_integer():
    with pytest.raises(ParseError):
        parse_response("Yes, definitely")


def test_parse_rejects_out_of_range():
    with pytest.raises(ParseError):
        parse_response("Yes 150")


def test_parse_tolerates_prose_and_case():
    assert parse_response("The answer is YES. Confidence: 73 out of 100.") == ("Yes", 73)


def test_parse_verdict_must_be_standalone_token():
    with pytest.raises(ParseError):
        parse_response("yesterday 40")


# -- score bands ------------------------------------------------------------------


def test_band_boundaries():
    assert score_band(0) is ScoreBand.ZERO
    assert score_band(74) is ScoreBand.LOW_MID
    assert score_band(75) is ScoreBand.HIGH


@given(st.integers(min_value=0, max_value=100))
def test_band_partition_is_total_and_exclusive(score):
    band = score_band(score)
    if score == 0:
        assert band is ScoreBand.ZERO
    elif score < 75:
        assert band is ScoreBand.LOW_MID
    else:
        assert band is ScoreBand.HIGH


# -- batch scoring -----------------------------------------------------------------


def test_batch_mock_passthrough():
    backend = ScriptedBackend(default="Yes 90")
    sentences = [sent(f"s{i}", f"text {i}") for i in range(4)]
    result = prelabel_batch(sentences, "water", backend, budget=10)
    assert [s.effective_score for s in result.scores] == [90, 90, 90, 90]
    assert result.failures == []


def test_batch_budget_cap():
    backend = ScriptedBackend(default="Yes 50")
    sentences = [sent(f"s{i}", f"text {i}") for i in range(10)]
    result = prelabel_batch(sentences, "water", backend, budget=5)
    assert len(result.scores) == 5
    assert backend.prompts and len(backend.prompts) == 5


class FlakyBackend:
    """Fails permanently for one marked sentence, succeeds otherwise."""

    def __init__(self, poison="POISON"):
        self.poison = poison

    def score(self, prompt):
        if self.poison in prompt:
            raise BackendError("backend unreachable")
        return "Yes 60"


def test_batch_partial_failure_manifest():
    sentences = [sent(f"s{i}", f"text {i}") for i in range(5)]
    sentences[2] = sent("s2", "text POISON 2")
    result = prelabel_batch(
        sentences, "water", FlakyBackend(), budget=5,
        max_attempts=3, retry_base_delay=0.0, max_in_flight=1,
    )
    assert len(result.scores) == 4
    assert len(result.failures) == 1
    assert result.failures[0].sent_id == "s2"
    assert "unreachable" in result.failures[0].error


def test_batch_resume_never_requeries(tmp_path):
    store_path = tmp_path / "scores.jsonl"
    backend = ScriptedBackend(default="Yes 80")
    sentences = [sent(f"s{i}", f"text {i}") for i in range(3)]
    first = prelabel_batch(sentences, "water", backend, budget=3, store_path=store_path)
    assert len(first.scores) == 3
    calls_after_first = len(backend.prompts)
    second = prelabel_batch(sentences, "water", backend, budget=3, store_path=store_path)
    assert len(second.scores) == 3
    assert len(backend.prompts) == calls_after_first  # nothing re-queried
    assert len(read_scores_jsonl(store_path)) == 3


def test_batch_parse_failures_recorded():
    backend = ScriptedBackend(default="gibberish")
    sentences = [sent("s0", "text")]
    result = prelabel_batch(
        sentences, "water", backend, budget=1, retry_base_delay=0.0
    )
    assert result.scores == []
    assert len(result.failures) == 1


def test_render_parse_round_trip_with_hash_scripted_backend():
    guideline = load_guideline("forest")
    text = "The forest is harvested."
    prompt = render_prompt(guideline, text)
    backend = ScriptedBackend(by_hash={ScriptedBackend.prompt_hash(prompt): "No 30"})
    result = prelabel_batch(
        [sent("s0", text)], "forest", backend, budget=1
    )
    assert result.scores[0].verdict == "No"
    assert result.scores[0].effective_score == 0


def test_mock_backend_is_deterministic_and_covers_bands():
    backend = MockBackend(dimension="water")
    zero = render_prompt("G", "nothing relevant at all")
    low = render_prompt("G", "just one water word")
    high = render_prompt("G", "the ocean and the river")
    assert parse_response(backend.score(zero)) == ("No", 95)
    assert parse_response(backend.score(low)) == ("Yes", 40)
    assert parse_response(backend.score(high)) == ("Yes", 90)
    assert backend.score(high) == backend.score(high)


# -- band-balanced sampling ----------------------------------------------------------


def scores_with_bands(zero, lowmid, high):
    scores = []
    for i in range(zero):
        scores.append(make_score(f"z{i}", "water", "No", 90))
    for i in range(lowmid):
        scores.append(make_score(f"m{i}", "water", "Yes", 40))
    for i in range(high):
        scores.append(make_score(f"h{i}", "water", "Yes", 90))
    return scores


def test_band_sample_even_thirds():
    sample = band_balanced_sample(scores_with_bands(10, 10, 10), 9, seed=1)
    assert len(sample) == 9
    prefixes = [sid[0] for sid in sample]
    assert prefixes.count("z") == 3
    assert prefixes.count("m") == 3
    assert prefixes.count("h") == 3


def test_band_sample_redistributes_scarce_band():
    sample = band_balanced_sample(scores_with_bands(10, 10, 1), 9, seed=1)
    prefixes = [sid[0] for sid in sample]
    assert prefixes.count("h") == 1
    assert prefixes.count("z") + prefixes.count("m") == 8


def test_band_sample_remainder_goes_to_zero_then_lowmid():
    sample = band_balanced_sample(scores_with_bands(10, 10, 10), 11, seed=2)
    prefixes = [sid[0] for sid in sample]
    assert prefixes.count("z") == 4
    assert prefixes.count("m") == 4
    assert prefixes.count("h") == 3


def test_band_sample_deterministic():
    scores = scores_with_bands(20, 20, 20)
    runs = [band_balanced_sample(scores, 12, seed=7) for _ in range(3)]
    assert runs[0] == runs[1] == runs[2]


def test_band_sample_errors():
    with pytest.raises(PreLabelError):
        band_balanced_sample(scores_with_bands(1, 1, 1), 2, seed=0)
    with pytest.raises(PreLabelError, match="only"):
        band_balanced_sample(scores_with_bands(1, 1, 1), 9, seed=0)
