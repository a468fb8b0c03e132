import pytest
from hypothesis import given, strategies as st

from sumctx.context import (AssemblyConfig, ContextAssembly, build_context, length_stats,
                            omitted_range, parse_serialized, speaker2_turns)
from sumctx.corpus import Dialogue, Persona
from sumctx.errors import BackendError, BudgetError, SumctxError
from sumctx.summarize import ExtractiveSummarizer, SummarizerBackend

from conftest import HUNTING_TURNS, random_dialogue
from oracles import index_oracle

EXTRACTIVE = ExtractiveSummarizer()


class Recording(SummarizerBackend):
    def __init__(self, text="SUMMARY"):
        from sumctx.summarize import BackendDescriptor
        self.descriptor = BackendDescriptor("rec")
        self.calls = []
        self.text = text

    def summarize(self, turns):
        self.calls.append([t.index for t in turns])
        return self.text


class Failing(Recording):
    def summarize(self, turns):
        raise BackendError("down")


def test_omitted_range_request_seven_two_complete():
    # Request at turn 7 (step 8), two complete turns -> turns 1-4 summarized.
    assert list(omitted_range(8, 2)) == [1, 2, 3, 4]


def test_omitted_range_first_step_is_empty():
    assert len(omitted_range(2, 0)) == 0


def test_omitted_range_n12_i4():
    omitted, complete, request = index_oracle(12, 4)
    assert (omitted, complete, request) == ([1, 2, 3, 4, 5, 6], [7, 8, 9, 10], 11)
    assert list(omitted_range(12, 4)) == omitted


@pytest.mark.parametrize("n", [1, 3, 0, -2])
def test_omitted_range_rejects_odd_or_small(n):
    with pytest.raises(SumctxError):
        omitted_range(n, 0)


@pytest.mark.parametrize("n", range(2, 31, 2))
@pytest.mark.parametrize("i", range(0, 13, 2))
def test_omitted_range_matches_oracle(n, i):
    assert list(omitted_range(n, i)) == index_oracle(n, i)[0]


def test_speaker2_turns(hunting_dialogue):
    assert [t.index for t in speaker2_turns(hunting_dialogue, range(1, 4))] == [2]
    assert speaker2_turns(hunting_dialogue, range(1, 1)) == []
    assert [t.index for t in speaker2_turns(hunting_dialogue, range(1, 8))] == [2, 4, 6]
    assert speaker2_turns(hunting_dialogue, range(1, 4))[0].text.startswith("You must be very fast")
    with pytest.raises(SumctxError):
        speaker2_turns(hunting_dialogue, range(1, 9))


def test_two_complete_turns_with_summary(hunting_dialogue):
    rec = Recording()
    a = build_context(hunting_dialogue, 8, AssemblyConfig(2, True), rec)
    assert rec.calls == [[2, 4]]
    assert a.summary_range_end == 4
    assert [t.index for t in a.complete_turns] == [5, 6]
    assert a.request_text == HUNTING_TURNS[6]
    s = a.serialize()
    order = [s.index(m) for m in ("<persona>", "<summary>", "<sp1>", "<sp2>", "<request>")]
    assert order == sorted(order)


def test_first_step_has_only_persona_and_request(hunting_dialogue):
    rec = Recording()
    a = build_context(hunting_dialogue, 2, AssemblyConfig(0, True), rec)
    assert a.summary_text is None and rec.calls == []
    assert a.complete_turns == ()
    assert a.serialize() == f"<persona> {hunting_dialogue.persona.text} <request> {HUNTING_TURNS[0]}"


def test_window_wider_than_history_means_no_summary(hunting_dialogue):
    rec = Recording()
    a = build_context(hunting_dialogue, 8, AssemblyConfig(10, True), rec)
    assert a.summary_text is None and rec.calls == []
    assert [t.index for t in a.complete_turns] == [1, 2, 3, 4, 5, 6]


def test_token_accounting(hunting_dialogue):
    a = build_context(hunting_dialogue, 8, AssemblyConfig(2, True), EXTRACTIVE)
    from sumctx.tokenizer import count_tokens, DEFAULT_TOKENIZER
    assert a.total_tokens == sum(a.segment_token_counts.values())
    assert a.total_tokens == count_tokens(DEFAULT_TOKENIZER, a.serialize())
    # marker + "Speaker 2:" fragments of turn 2 (14 tokens) and turn 4 (13 tokens)
    assert a.segment_token_counts["summary"] == 1 + 14 + 13


def test_budget_drops_oldest_complete_turns(hunting_dialogue):
    full = build_context(hunting_dialogue, 8, AssemblyConfig(6, False))
    t5 = 1 + len(HUNTING_TURNS[4].split())
    t6 = 1 + len(HUNTING_TURNS[5].split())
    t1 = 1 + len(HUNTING_TURNS[0].split())
    budget = full.total_tokens - t1  # must drop exactly turn 1
    a = build_context(hunting_dialogue, 8, AssemblyConfig(6, False, max_input_tokens=budget))
    assert a.dropped_turn_indices == (1,)
    assert [t.index for t in a.complete_turns] == [2, 3, 4, 5, 6]
    assert a.total_tokens <= budget
    tight = a.segment_token_counts["persona"] + a.segment_token_counts["request"] + t5 + t6
    b = build_context(hunting_dialogue, 8, AssemblyConfig(6, False, max_input_tokens=tight))
    assert b.dropped_turn_indices == (1, 2, 3, 4)


def test_budget_drops_summary_last_then_errors(hunting_dialogue):
    base = build_context(hunting_dialogue, 8, AssemblyConfig(2, True), EXTRACTIVE)
    floor = base.segment_token_counts["persona"] + base.segment_token_counts["request"]
    a = build_context(hunting_dialogue, 8, AssemblyConfig(2, True, max_input_tokens=floor),
                      EXTRACTIVE)
    assert a.summary_dropped and a.summary_text is None and a.dropped_turn_indices == (5, 6)
    with pytest.raises(BudgetError):
        build_context(hunting_dialogue, 8, AssemblyConfig(2, True, max_input_tokens=floor - 1),
                      EXTRACTIVE)


def test_summarizer_failure_carries_dialogue_and_range(hunting_dialogue):
    with pytest.raises(BackendError) as info:
        build_context(hunting_dialogue, 8, AssemblyConfig(2, True), Failing())
    assert info.value.dialogue_id == "hunting" and info.value.turn_range == (1, 4)


def test_config_validation():
    with pytest.raises(SumctxError):
        AssemblyConfig(3)
    with pytest.raises(SumctxError):
        AssemblyConfig(2, max_input_tokens=0)


def test_length_stats():
    def fake(total):
        return ContextAssembly("d", 2, Persona(("p",)), None, (), "r", {}, total)
    s = length_stats([fake(71)])
    assert (s.avg_tokens, s.max_tokens, s.count) == (71, 71, 1)
    s = length_stats([fake(100), fake(200)])
    assert (s.avg_tokens, s.max_tokens) == (150, 200)
    with pytest.raises(SumctxError):
        length_stats([])


def test_sample_corpus_length_grows_with_window(sample_corpus):
    def avg(i):
        cfg = AssemblyConfig(i, False)
        return length_stats([build_context(d, n, cfg) for d in sample_corpus
                             for n in range(2, len(d) + 1, 2)]).avg_tokens
    assert avg(0) < avg(10)


# -- properties over the whole (n, i) space --------------------------------

long_dialogue = Dialogue.from_texts("long", ["p one.", "p two."],
                                    [f"turn number {k} says hello" for k in range(1, 21)])


@pytest.mark.parametrize("n", range(2, 21, 2))
@pytest.mark.parametrize("i", range(0, 11, 2))
@pytest.mark.parametrize("summary", [False, True])
def test_window_size_and_summary_presence(n, i, summary):
    a = build_context(long_dialogue, n, AssemblyConfig(i, summary), EXTRACTIVE)
    assert len(a.complete_turns) == min(i, n - 2)
    assert (a.summary_text is not None) == (summary and n - 2 > i)
    omitted, complete, request = index_oracle(n, i)
    assert [t.index for t in a.complete_turns] == complete
    assert a.request_text == long_dialogue.turn(request).text


@given(st.integers(0, 10_000), st.integers(1, 8), st.booleans())
def test_serialization_round_trip_and_monotone_length(seed, half_step, summary):
    import random
    d = random_dialogue(random.Random(seed), "r", max_turns=18)
    n = 2 * half_step
    if len(d) < n - 1:
        return
    prev = -1
    for i in range(0, 12, 2):
        a = build_context(d, n, AssemblyConfig(i, summary), EXTRACTIVE)
        fields = parse_serialized(a.serialize())
        assert fields["persona"] == d.persona.text
        assert fields["summary"] == a.summary_text
        assert fields["turns"] == [(int(t.speaker), t.text) for t in a.complete_turns]
        assert fields["request"] == a.request_text
        assert a.total_tokens <= 1024
        if not summary:
            assert a.total_tokens >= prev
            prev = a.total_tokens
        again = build_context(d, n, AssemblyConfig(i, summary), EXTRACTIVE)
        assert again.serialize() == a.serialize()
