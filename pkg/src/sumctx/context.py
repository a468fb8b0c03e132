"""Decoder input assembly with summary substitution.

At step ``n`` the model produces turn ``n``, which is always a Speaker 2 turn.
Turn ``n-1`` is the Speaker 1 request. The ``i`` turns just before the request
go in verbatim. Everything older, i.e. turns ``1..n-2-i``, is left out, and
with summaries on it is replaced by a summary of its Speaker 2 turns. The
segments appear in this order:

    persona, summary (optional), complete turns, request

Every segment starts with its marker token.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

from .corpus import Dialogue, Persona, Speaker, Turn
from .errors import BackendError, BudgetError, SumctxError
from .tokenizer import DEFAULT_MARKERS, DEFAULT_TOKENIZER, SegmentMarkers, TokenizerSpec, count_tokens


class PrefixSummarizer(Protocol):
    def summarize_prefix(self, dialogue: Dialogue, range_end: int) -> str: ...


@dataclass(frozen=True)
class AssemblyConfig:
    complete_turns: int = 0
    include_summary: bool = False
    max_input_tokens: int = 1024
    max_response_tokens: int = 200
    markers: SegmentMarkers = DEFAULT_MARKERS
    tokenizer: TokenizerSpec = DEFAULT_TOKENIZER

    def __post_init__(self):
        if self.complete_turns < 0 or self.complete_turns % 2:
            raise SumctxError(
                f"complete_turns must be a non-negative even integer, got {self.complete_turns}")
        if self.max_input_tokens < 1 or self.max_response_tokens < 1:
            raise SumctxError("token limits must be positive")


@dataclass(frozen=True)
class ContextAssembly:
    dialogue_id: str
    step: int
    persona: Persona
    summary_text: str | None
    complete_turns: tuple[Turn, ...]
    request_text: str
    segment_token_counts: dict = field(hash=False, compare=True)
    total_tokens: int
    markers: SegmentMarkers = DEFAULT_MARKERS
    summary_range_end: int = 0
    dropped_turn_indices: tuple[int, ...] = ()
    summary_dropped: bool = False

    @property
    def context_size(self) -> int:
        """Number of turns before the request."""
        return self.step - 2

    def serialize(self) -> str:
        m = self.markers
        parts = [m.persona, self.persona.text]
        if self.summary_text is not None:
            parts += [m.summary, self.summary_text]
        for t in self.complete_turns:
            parts += [m.for_speaker(t.speaker), t.text]
        parts += [m.request, self.request_text]
        return " ".join(p for p in parts if p)

    def to_dict(self) -> dict:
        return {
            "dialogueId": self.dialogue_id,
            "step": self.step,
            "persona": list(self.persona.sentences),
            "summaryText": self.summary_text,
            "summaryRangeEnd": self.summary_range_end,
            "completeTurns": [{"index": t.index, "speaker": int(t.speaker), "text": t.text}
                              for t in self.complete_turns],
            "requestText": self.request_text,
            "segmentTokenCounts": dict(self.segment_token_counts),
            "totalTokens": self.total_tokens,
            "droppedTurnIndices": list(self.dropped_turn_indices),
            "summaryDropped": self.summary_dropped,
            "serialized": self.serialize(),
        }


@dataclass(frozen=True)
class LengthStats:
    avg_tokens: float
    max_tokens: int
    count: int

    def to_dict(self) -> dict:
        return {"avgTokens": self.avg_tokens, "maxTokens": self.max_tokens, "count": self.count}


def omitted_range(n: int, i: int) -> range:
    """Turn indices left out of the input at step ``n`` with ``i`` complete turns.

    Always a prefix ``1..n-2-i``; empty when every prior turn fits.
    """
    if n < 2 or n % 2:
        raise SumctxError(f"step must be even and >= 2, got {n}")
    if i < 0:
        raise SumctxError(f"complete turns must be >= 0, got {i}")
    return range(1, max(1, n - 1 - i))


def speaker2_turns(dialogue: Dialogue, turn_range: range) -> list[Turn]:
    if len(turn_range) == 0:
        return []
    if turn_range[0] < 1 or turn_range[-1] > len(dialogue):
        raise SumctxError(
            f"range {turn_range[0]}-{turn_range[-1]} outside dialogue {dialogue.id} "
            f"of {len(dialogue)} turns")
    return [dialogue.turn(k) for k in turn_range if dialogue.turn(k).speaker == Speaker.TWO]


def _segment_cost(spec: TokenizerSpec, text: str) -> int:
    return 1 + count_tokens(spec, text)


def build_context(dialogue: Dialogue, n: int, config: AssemblyConfig,
                  summarizer: PrefixSummarizer | None = None) -> ContextAssembly:
    """Assemble the model input for generating turn ``n`` of ``dialogue``.

    Over budget, the oldest complete turns go first, then the summary.
    The persona and request are never dropped. Raises BudgetError if
    persona plus request alone exceed ``config.max_input_tokens``.
    """
    omitted = omitted_range(n, config.complete_turns)
    if len(dialogue) < n - 1:
        raise SumctxError(f"dialogue {dialogue.id} has {len(dialogue)} turns, "
                          f"step {n} needs {n - 1}")
    request = dialogue.turn(n - 1)
    first_complete = len(omitted) + 1
    complete = [dialogue.turn(k) for k in range(first_complete, n - 1)]

    summary_text = None
    summary_end = 0
    if config.include_summary and len(omitted):
        if summarizer is None:
            raise SumctxError("summary requested but no summarizer given")
        summary_end = omitted[-1]
        try:
            summary_text = summarizer.summarize_prefix(dialogue, summary_end)
        except BackendError as exc:
            raise BackendError(str(exc), dialogue.id, (1, summary_end)) from exc

    spec = config.tokenizer
    persona_cost = _segment_cost(spec, dialogue.persona.text)
    request_cost = _segment_cost(spec, request.text)
    summary_cost = _segment_cost(spec, summary_text) if summary_text is not None else 0
    turn_costs = [_segment_cost(spec, t.text) for t in complete]

    dropped = []
    summary_dropped = False
    budget = config.max_input_tokens

    def total():
        return persona_cost + summary_cost + sum(turn_costs) + request_cost

    while total() > budget and complete:
        dropped.append(complete.pop(0).index)
        turn_costs.pop(0)
    if total() > budget and summary_text is not None:
        summary_text, summary_cost, summary_dropped = None, 0, True
    if total() > budget:
        raise BudgetError(f"dialogue {dialogue.id} step {n}: persona and request need "
                          f"{total()} tokens, budget is {budget}")

    counts = {"persona": persona_cost, "turns": sum(turn_costs), "request": request_cost}
    if summary_text is not None:
        counts["summary"] = summary_cost
    return ContextAssembly(
        dialogue_id=dialogue.id, step=n, persona=dialogue.persona,
        summary_text=summary_text, complete_turns=tuple(complete),
        request_text=request.text, segment_token_counts=counts, total_tokens=total(),
        markers=config.markers, summary_range_end=summary_end,
        dropped_turn_indices=tuple(dropped), summary_dropped=summary_dropped)


def response_steps(dialogue: Dialogue) -> list[int]:
    """Every step with a gold Speaker 2 response available."""
    return list(range(2, len(dialogue) + 1, 2))


def length_stats(assemblies: Sequence[ContextAssembly]) -> LengthStats:
    if not assemblies:
        raise SumctxError("length_stats needs at least one assembly")
    totals = [a.total_tokens for a in assemblies]
    return LengthStats(sum(totals) / len(totals), max(totals), len(totals))


def parse_serialized(text: str, markers: SegmentMarkers = DEFAULT_MARKERS) -> dict:
    """Split a serialized assembly back into its fields.

    Inverse of :meth:`ContextAssembly.serialize` for segment texts that are
    already whitespace-normalized.
    """
    by_marker = {markers.persona: "persona", markers.summary: "summary",
                 markers.turn1: "sp1", markers.turn2: "sp2", markers.request: "request"}
    segments: list[tuple[str, list[str]]] = []
    for tok in text.split(" "):
        if tok in by_marker:
            segments.append((by_marker[tok], []))
        elif segments:
            segments[-1][1].append(tok)
        else:
            raise SumctxError("serialized assembly must start with a marker")
    out = {"persona": None, "summary": None, "turns": [], "request": None}
    for kind, words in segments:
        value = " ".join(words)
        if kind in ("sp1", "sp2"):
            out["turns"].append((1 if kind == "sp1" else 2, value))
        else:
            out[kind] = value
    return out


def write_assemblies_jsonl(assemblies: Iterable[ContextAssembly]) -> str:
    return "".join(json.dumps(a.to_dict(), ensure_ascii=False) + "\n" for a in assemblies)
