"""Token counting and segment markers.

Counting goes through a :class:`TokenizerSpec` so that length accounting can
follow whatever tokenizer the downstream model uses. The built-in kind splits
on whitespace. The ``external`` kind keeps one subprocess per command alive
and talks to it one line at a time: the text goes in with newlines escaped
as ``\\n``, and a decimal count comes back.
"""

from __future__ import annotations

import atexit
import re
import shlex
import subprocess
import threading
from dataclasses import dataclass
from typing import Iterable

from .errors import MarkerCollisionError, SumctxError, TokenizerError

WHITESPACE = "whitespace"
EXTERNAL = "external"

_RUN = re.compile(r"\S+")


@dataclass(frozen=True)
class TokenizerSpec:
    id: str = "whitespace"
    kind: str = WHITESPACE
    command: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.id:
            raise TokenizerError("tokenizer id must be non-empty")
        if self.kind not in (WHITESPACE, EXTERNAL):
            raise TokenizerError(f"unknown tokenizer kind {self.kind!r}")
        if isinstance(self.command, str):
            object.__setattr__(self, "command", tuple(shlex.split(self.command)))
        else:
            object.__setattr__(self, "command", tuple(self.command))
        if self.kind == EXTERNAL and not self.command:
            raise TokenizerError("external tokenizer needs a command")

    def to_dict(self) -> dict:
        d = {"id": self.id, "kind": self.kind}
        if self.command:
            d["command"] = list(self.command)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TokenizerSpec":
        return cls(id=d.get("id", d.get("kind", WHITESPACE)),
                   kind=d.get("kind", WHITESPACE),
                   command=tuple(d.get("command", ())))


DEFAULT_TOKENIZER = TokenizerSpec()


@dataclass(frozen=True)
class SegmentMarkers:
    persona: str = "<persona>"
    summary: str = "<summary>"
    turn1: str = "<sp1>"
    turn2: str = "<sp2>"
    request: str = "<request>"

    def __post_init__(self):
        values = self.as_tuple()
        if any(not m or _RUN.fullmatch(m) is None for m in values):
            raise SumctxError("segment markers must be non-empty and contain no whitespace")
        if len(set(values)) != len(values):
            raise SumctxError("segment markers must be pairwise distinct")

    def as_tuple(self) -> tuple[str, ...]:
        return (self.persona, self.summary, self.turn1, self.turn2, self.request)

    def for_speaker(self, speaker: int) -> str:
        return self.turn1 if int(speaker) == 1 else self.turn2

    def to_dict(self) -> dict:
        return {"persona": self.persona, "summary": self.summary, "turn1": self.turn1,
                "turn2": self.turn2, "request": self.request}


DEFAULT_MARKERS = SegmentMarkers()


class _ExternalCounter:
    """One long-lived tokenizer subprocess; calls are serialized by a lock."""

    def __init__(self, command: tuple[str, ...]):
        self.command = command
        self._lock = threading.Lock()
        self._proc: subprocess.Popen | None = None

    def _start(self):
        try:
            self._proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, encoding="utf-8", bufsize=1)
        except OSError as exc:
            raise TokenizerError(f"cannot start tokenizer {self.command[0]!r}: {exc}") from exc

    def count(self, text: str) -> int:
        with self._lock:
            if self._proc is None or self._proc.poll() is not None:
                self._start()
            try:
                self._proc.stdin.write(text.replace("\n", "\\n") + "\n")
                self._proc.stdin.flush()
                reply = self._proc.stdout.readline()
            except (OSError, ValueError) as exc:
                self.close()
                raise TokenizerError(f"tokenizer process failed: {exc}") from exc
        reply = reply.strip()
        if not reply.isdigit():
            raise TokenizerError(f"tokenizer replied {reply!r}, expected a decimal count")
        return int(reply)

    def close(self):
        if self._proc is not None:
            try:
                self._proc.stdin.close()
                self._proc.wait(timeout=2)
            except Exception:
                self._proc.kill()
            self._proc = None


_external: dict[tuple[str, ...], _ExternalCounter] = {}
_external_lock = threading.Lock()


def _counter_for(spec: TokenizerSpec) -> _ExternalCounter:
    with _external_lock:
        counter = _external.get(spec.command)
        if counter is None:
            counter = _external[spec.command] = _ExternalCounter(spec.command)
        return counter


@atexit.register
def _close_external():
    for counter in _external.values():
        counter.close()


def count_tokens(spec: TokenizerSpec, text: str,
                 markers: SegmentMarkers | None = None) -> int:
    """Number of tokens in ``text`` under ``spec``.

    When ``markers`` is given, each marker occurrence counts as exactly one
    token and only the text between markers is sent to the tokenizer.
    """
    if markers is not None:
        pattern = "|".join(re.escape(m) for m in markers.as_tuple())
        pieces = re.split(f"({pattern})", text)
        marker_set = set(markers.as_tuple())
        return sum(1 if p in marker_set else count_tokens(spec, p) for p in pieces if p)
    if spec.kind == WHITESPACE:
        return len(_RUN.findall(text))
    if not text:
        return 0
    return _counter_for(spec).count(text)


def tokenize(text: str) -> list[str]:
    """Whitespace tokens of ``text``; metric computations work on these."""
    return text.split()


def truncate_tokens(text: str, max_tokens: int) -> str:
    """First ``max_tokens`` whitespace tokens, re-joined with single spaces.

    Text already within the limit is returned unchanged.
    """
    tokens = text.split()
    if len(tokens) <= max_tokens:
        return text
    return " ".join(tokens[:max_tokens])


def validate_markers(markers: SegmentMarkers, corpus: Iterable) -> list[tuple[str, int]]:
    """(dialogue id, turn index) pairs whose text contains a marker.

    Persona sentences are checked too and reported with turn index 0.
    An empty list means the corpus is safe to serialize with these markers.
    """
    values = markers.as_tuple()
    hits = []
    for d in corpus:
        if any(m in s for s in d.persona.sentences for m in values):
            hits.append((d.id, 0))
        for t in d.turns:
            if any(m in t.text for m in values):
                hits.append((d.id, t.index))
    return hits


def require_clean(markers: SegmentMarkers, corpus: Iterable) -> None:
    hits = validate_markers(markers, corpus)
    if hits:
        raise MarkerCollisionError(hits)
