"""Summarization backends, the prefix-keyed summary cache, and summarizer scoring."""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from .context import speaker2_turns
from .corpus import Dialogue, SummPair, Turn, parse_named_dialogue
from .errors import BackendError, CacheError, CorpusError, SumctxError
from .metrics import MetricReport, evaluate
from .remote import join_url, post_json
from .tokenizer import DEFAULT_TOKENIZER, TokenizerSpec, count_tokens

log = logging.getLogger(__name__)

EXTRACTIVE = "extractive"
REMOTE = "remote"
DEFAULT_SUMMARY_TOKENS = 60


@dataclass(frozen=True)
class BackendDescriptor:
    id: str
    kind: str = EXTRACTIVE
    deterministic: bool = True
    max_summary_tokens: int = DEFAULT_SUMMARY_TOKENS
    endpoint: str | None = None

    def __post_init__(self):
        if self.kind not in (EXTRACTIVE, REMOTE):
            raise SumctxError(f"unknown summarizer kind {self.kind!r}")
        if self.kind == EXTRACTIVE and not self.deterministic:
            raise SumctxError("extractive backends are deterministic")
        if self.kind == REMOTE and not self.endpoint:
            raise SumctxError(f"remote summarizer {self.id!r} needs an endpoint")
        if self.max_summary_tokens < 1:
            raise SumctxError("max_summary_tokens must be positive")

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass(frozen=True)
class SummaryRecord:
    dialogue_id: str
    range_end: int
    backend_id: str
    text: str
    created_at: str

    @property
    def key(self) -> tuple[str, int, str]:
        return (self.dialogue_id, self.range_end, self.backend_id)

    def to_dict(self) -> dict:
        return {"dialogueId": self.dialogue_id, "rangeEnd": self.range_end,
                "backendId": self.backend_id, "text": self.text, "createdAt": self.created_at}

    @classmethod
    def from_dict(cls, d: dict) -> "SummaryRecord":
        return cls(d["dialogueId"], int(d["rangeEnd"]), d["backendId"], d["text"], d["createdAt"])


def _fragment(turn: Turn) -> str:
    return f"Speaker {int(turn.speaker)}: {turn.text}"


def summarize_extractive(turns: Sequence[Turn], max_summary_tokens: int = DEFAULT_SUMMARY_TOKENS,
                         tokenizer: TokenizerSpec = DEFAULT_TOKENIZER) -> str:
    """Concatenate whole ``Speaker k: text`` fragments, oldest first, under a token budget.

    Stops at the first fragment that would overflow. The first fragment is
    always kept even if it alone is over budget, so the result is never a
    cut-off turn.
    """
    picked: list[str] = []
    for turn in turns:
        trial = " ".join(picked + [_fragment(turn)])
        if picked and count_tokens(tokenizer, trial) > max_summary_tokens:
            break
        picked.append(_fragment(turn))
    return " ".join(picked)


def remote_request_body(turns: Sequence[Turn], max_summary_tokens: int) -> dict:
    return {"turns": [{"speaker": int(t.speaker), "text": t.text} for t in turns],
            "max_tokens": max_summary_tokens}


def summarize_remote(endpoint: str, turns: Sequence[Turn],
                     max_summary_tokens: int = DEFAULT_SUMMARY_TOKENS, **http) -> str:
    return post_json(join_url(endpoint, "summarize"),
                     remote_request_body(turns, max_summary_tokens), "summary", **http)


class SummarizerBackend:
    """Base class: subclasses implement :meth:`summarize` over a turn list."""

    descriptor: BackendDescriptor

    @property
    def id(self) -> str:
        return self.descriptor.id

    def summarize(self, turns: Sequence[Turn]) -> str:
        raise NotImplementedError

    def summarize_prefix(self, dialogue: Dialogue, range_end: int) -> str:
        return self.summarize(speaker2_turns(dialogue, range(1, range_end + 1)))


class ExtractiveSummarizer(SummarizerBackend):
    def __init__(self, id: str = EXTRACTIVE, max_summary_tokens: int = DEFAULT_SUMMARY_TOKENS,
                 tokenizer: TokenizerSpec = DEFAULT_TOKENIZER):
        self.descriptor = BackendDescriptor(id, EXTRACTIVE, True, max_summary_tokens)
        self.tokenizer = tokenizer

    def summarize(self, turns):
        return summarize_extractive(turns, self.descriptor.max_summary_tokens, self.tokenizer)


class RemoteSummarizer(SummarizerBackend):
    def __init__(self, endpoint: str, id: str = REMOTE, deterministic: bool = False,
                 max_summary_tokens: int = DEFAULT_SUMMARY_TOKENS, **http):
        self.descriptor = BackendDescriptor(id, REMOTE, deterministic, max_summary_tokens,
                                            endpoint)
        self.http = http

    def summarize(self, turns):
        if not turns:
            return ""
        return summarize_remote(self.descriptor.endpoint, turns,
                                self.descriptor.max_summary_tokens, **self.http)


def make_summarizer(descriptor: BackendDescriptor,
                    tokenizer: TokenizerSpec = DEFAULT_TOKENIZER) -> SummarizerBackend:
    if descriptor.kind == EXTRACTIVE:
        return ExtractiveSummarizer(descriptor.id, descriptor.max_summary_tokens, tokenizer)
    return RemoteSummarizer(descriptor.endpoint, descriptor.id, descriptor.deterministic,
                            descriptor.max_summary_tokens)


class SummaryCache:
    """Summaries keyed by (dialogue id, prefix end, backend id).

    With a path, the cache is an append-only JSONL file that is read fully
    when the cache is opened. Later records override earlier ones with the
    same key.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self.records: dict[tuple[str, int, str], SummaryRecord] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            try:
                with self.path.open(encoding="utf-8") as fh:
                    for lineno, line in enumerate(fh, start=1):
                        if line.strip():
                            rec = SummaryRecord.from_dict(json.loads(line))
                            self.records[rec.key] = rec
            except OSError as exc:
                raise CacheError(f"cannot read cache {self.path}: {exc}") from exc
            except (ValueError, KeyError) as exc:
                raise CacheError(f"{self.path} line {lineno}: bad record ({exc})") from exc

    def __len__(self):
        return len(self.records)

    def get(self, dialogue_id: str, range_end: int, backend_id: str) -> SummaryRecord | None:
        return self.records.get((dialogue_id, range_end, backend_id))

    def put(self, record: SummaryRecord) -> None:
        with self._lock:
            self.records[record.key] = record
            if self.path is not None:
                try:
                    with self.path.open("a", encoding="utf-8") as fh:
                        fh.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")
                except OSError as exc:
                    raise CacheError(f"cannot append to cache {self.path}: {exc}") from exc

    def get_or_compute(self, dialogue: Dialogue, range_end: int,
                       backend: SummarizerBackend) -> SummaryRecord:
        if range_end < 0:
            raise SumctxError(f"range_end must be >= 0, got {range_end}")
        if range_end == 0:
            return SummaryRecord(dialogue.id, 0, backend.id, "", _now())
        hit = self.get(dialogue.id, range_end, backend.id)
        if hit is not None:
            return hit
        text = backend.summarize_prefix(dialogue, range_end)
        record = SummaryRecord(dialogue.id, range_end, backend.id, text, _now())
        self.put(record)
        return record


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class CachedSummarizer(SummarizerBackend):
    """A backend whose prefix summaries go through a :class:`SummaryCache`."""

    def __init__(self, backend: SummarizerBackend, cache: SummaryCache):
        self.backend = backend
        self.cache = cache
        self.descriptor = backend.descriptor

    def summarize(self, turns):
        return self.backend.summarize(turns)

    def summarize_prefix(self, dialogue, range_end):
        return self.cache.get_or_compute(dialogue, range_end, self.backend).text


def precompute(corpus: Sequence[Dialogue], backend: SummarizerBackend,
               cache: SummaryCache) -> int:
    """Fill ``cache`` with every prefix summary the standard grid can ask for.

    Omitted ranges always end on an even turn index, so one summary per
    even prefix length covers every (step, complete turns) pair. Returns the
    number of records computed (cache misses).
    """
    before = len(cache)
    for d in corpus:
        for end in range(2, len(d) - 1, 2):
            try:
                cache.get_or_compute(d, end, backend)
            except BackendError as exc:
                raise BackendError(str(exc), d.id, (1, end)) from exc
    return len(cache) - before


def score_summarizer(backend: SummarizerBackend, pairs: Sequence[SummPair],
                     tokenizer: TokenizerSpec = DEFAULT_TOKENIZER) -> MetricReport:
    """ROUGE of ``backend`` summaries against SAMSum-style reference summaries.

    Every turn of the parsed dialogue is given to the backend, not only
    Speaker 2's. Pairs whose dialogue cannot be split into ``Name: text`` lines
    are skipped and counted in ``report.skipped``.
    """
    if not pairs:
        raise SumctxError("score_summarizer needs at least one pair")
    scored = []
    skipped = 0
    for pair in pairs:
        try:
            turns = parse_named_dialogue(pair.dialogue_text)
        except CorpusError as exc:
            log.warning("skipping summary pair %s: %s", pair.id, exc)
            skipped += 1
            continue
        scored.append((backend.summarize(turns), pair.reference_summary))
    if not scored:
        raise SumctxError(f"all {skipped} summary pairs were unparseable")
    report = evaluate(scored, tokenizer, keep_per_example=True)
    report.skipped = skipped
    return report
