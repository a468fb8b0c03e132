"""Dialogue and summarization-pair records, plus the importers that build them.

Two dialogue formats are understood:

* the canonical JSONL schema (one dialogue per line), which is also what
  :func:`write_dialogues_jsonl` emits, and
* the public Persona-Chat numbered-line text format, read by
  :func:`parse_personachat_native`.

Dialogues are validated on construction: speakers must strictly alternate,
starting with Speaker 1 at index 1.
"""

from __future__ import annotations

import enum
import io
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, TextIO

from .errors import CorpusError

log = logging.getLogger(__name__)

MIN_PERSONA_SENTENCES = 5


class Speaker(enum.IntEnum):
    ONE = 1
    TWO = 2

    @classmethod
    def for_index(cls, index: int) -> "Speaker":
        return cls.ONE if index % 2 == 1 else cls.TWO


@dataclass(frozen=True)
class Turn:
    index: int
    speaker: Speaker
    text: str

    def __post_init__(self):
        if self.index < 1:
            raise CorpusError(f"turn index must be >= 1, got {self.index}")
        if not self.text.strip():
            raise CorpusError(f"turn {self.index} has empty text")
        object.__setattr__(self, "speaker", Speaker(self.speaker))


@dataclass(frozen=True)
class Persona:
    sentences: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        if not self.sentences:
            raise CorpusError("persona needs at least one sentence")

    @property
    def text(self) -> str:
        return " ".join(self.sentences)


@dataclass(frozen=True)
class Dialogue:
    id: str
    persona: Persona
    turns: tuple[Turn, ...]

    def __post_init__(self):
        object.__setattr__(self, "turns", tuple(self.turns))
        if not self.id:
            raise CorpusError("dialogue id must be non-empty")
        if not self.turns:
            raise CorpusError(f"dialogue {self.id} has no turns")
        for pos, turn in enumerate(self.turns, start=1):
            if turn.index != pos:
                raise CorpusError(
                    f"dialogue {self.id}: turn at position {pos} has index {turn.index}")
            if turn.speaker != Speaker.for_index(pos):
                raise CorpusError(
                    f"dialogue {self.id}: speaker alternation violated at turn {pos}")

    def __len__(self) -> int:
        return len(self.turns)

    def turn(self, index: int) -> Turn:
        """Return the turn with 1-based ``index``."""
        if not 1 <= index <= len(self.turns):
            raise IndexError(f"dialogue {self.id} has no turn {index}")
        return self.turns[index - 1]

    @classmethod
    def from_texts(cls, id: str, persona: Iterable[str], texts: Iterable[str]) -> "Dialogue":
        turns = [Turn(i, Speaker.for_index(i), t) for i, t in enumerate(texts, start=1)]
        return cls(id, Persona(tuple(persona)), tuple(turns))


@dataclass(frozen=True)
class SummPair:
    id: str
    dialogue_text: str
    reference_summary: str

    def __post_init__(self):
        if not self.dialogue_text.strip() or not self.reference_summary.strip():
            raise CorpusError(f"summary pair {self.id} has empty dialogue or summary")


def _lines(stream: str | TextIO | Iterable[str]) -> Iterable[str]:
    if isinstance(stream, str):
        return io.StringIO(stream)
    return stream


def check_unique_ids(dialogues: Iterable[Dialogue]) -> None:
    seen = set()
    for d in dialogues:
        if d.id in seen:
            raise CorpusError(f"duplicate dialogue id {d.id!r}")
        seen.add(d.id)


def persona_warnings(dialogues: Iterable[Dialogue]) -> list[str]:
    """Ids of dialogues whose persona is shorter than the usual five sentences."""
    short = [d.id for d in dialogues if len(d.persona.sentences) < MIN_PERSONA_SENTENCES]
    for did in short:
        log.warning("dialogue %s: persona has fewer than %d sentences",
                    did, MIN_PERSONA_SENTENCES)
    return short


# -- Persona-Chat native text format ---------------------------------------

_NUMBERED = re.compile(r"^(\d+) (.*)$", re.DOTALL)
_YOUR_PERSONA = "your persona:"
_PARTNER_PERSONA = "partner's persona:"


def parse_personachat_native(stream, id_prefix: str = "pc") -> list[Dialogue]:
    """Parse the numbered-line Persona-Chat format.

    Every line starts with a line number; a number of 1 opens a new
    dialogue. ``your persona:`` lines give Speaker 2's profile, other lines
    hold ``speaker1<TAB>speaker2[<TAB>ignored...]``. Partner persona lines are
    dropped. Dialogue ids are ``{id_prefix}-{ordinal:05d}`` in encounter order.
    """
    dialogues: list[Dialogue] = []
    persona: list[str] = []
    texts: list[str] = []
    start_line = 0

    def flush():
        if not persona and not texts:
            return
        did = f"{id_prefix}-{len(dialogues):05d}"
        try:
            dialogues.append(Dialogue.from_texts(did, persona, texts))
        except CorpusError as exc:
            raise CorpusError(str(exc), line=start_line) from None

    for lineno, raw in enumerate(_lines(stream), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        m = _NUMBERED.match(line)
        if m is None:
            raise CorpusError("expected a leading line number", line=lineno)
        number, body = int(m.group(1)), m.group(2)
        if number == 1:
            flush()
            persona, texts, start_line = [], [], lineno

        if body.startswith(_YOUR_PERSONA):
            if texts:
                raise CorpusError("persona line after dialogue lines", line=lineno)
            sentence = body[len(_YOUR_PERSONA):].strip()
            if not sentence:
                raise CorpusError("empty persona sentence", line=lineno)
            persona.append(sentence)
            continue
        if body.startswith(_PARTNER_PERSONA):
            if texts:
                raise CorpusError("persona line after dialogue lines", line=lineno)
            continue

        fields = body.split("\t")
        utterances = [f.strip() for f in fields[:2]]
        if not utterances[0] or (len(utterances) > 1 and not utterances[1]):
            raise CorpusError("empty utterance", line=lineno)
        if len(texts) % 2 == 1:
            raise CorpusError("dialogue continues after an unanswered request", line=lineno)
        if not persona:
            raise CorpusError("dialogue lines before any persona line", line=lineno)
        texts.extend(utterances)

    flush()
    return dialogues


# -- canonical JSONL ----------------------------------------------------------

_DIALOGUE_KEYS = {"id", "persona", "turns"}
_TURN_KEYS = {"speaker", "text"}


def _dialogue_from_obj(obj, lineno: int) -> Dialogue:
    if not isinstance(obj, dict):
        raise CorpusError("expected a JSON object", line=lineno)
    for key in ("id", "persona", "turns"):
        if key not in obj:
            raise CorpusError(f"missing field {key!r}", line=lineno)
    extra = set(obj) - _DIALOGUE_KEYS
    if extra:
        raise CorpusError(f"unknown field {sorted(extra)[0]!r}", line=lineno)
    did = obj["id"]
    if not isinstance(did, str) or not did:
        raise CorpusError("field 'id' must be a non-empty string", line=lineno)
    persona = obj["persona"]
    if (not isinstance(persona, list) or not persona
            or not all(isinstance(s, str) and s.strip() for s in persona)):
        raise CorpusError("field 'persona' must be a non-empty list of strings", line=lineno)
    turns_obj = obj["turns"]
    if not isinstance(turns_obj, list) or not turns_obj:
        raise CorpusError("field 'turns' must be a non-empty list", line=lineno)

    turns = []
    for pos, t in enumerate(turns_obj, start=1):
        if not isinstance(t, dict) or set(t) != _TURN_KEYS:
            raise CorpusError(f"field 'turns[{pos - 1}]' must have exactly speaker and text",
                              line=lineno)
        speaker, text = t["speaker"], t["text"]
        if speaker not in (1, 2) or isinstance(speaker, bool):
            raise CorpusError(f"field 'turns[{pos - 1}].speaker' must be 1 or 2", line=lineno)
        if not isinstance(text, str) or not text.strip():
            raise CorpusError(f"field 'turns[{pos - 1}].text' must be non-empty", line=lineno)
        if speaker != Speaker.for_index(pos):
            raise CorpusError(
                f"dialogue {did}: speaker alternation violated at turn {pos}", line=lineno)
        turns.append(Turn(pos, Speaker(speaker), text))
    return Dialogue(did, Persona(tuple(persona)), tuple(turns))


def parse_dialogues_jsonl(stream) -> list[Dialogue]:
    dialogues = []
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(_lines(stream), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"invalid JSON: {exc.msg}", line=lineno) from None
        d = _dialogue_from_obj(obj, lineno)
        if d.id in seen:
            raise CorpusError(f"duplicate dialogue id {d.id!r} (first on line {seen[d.id]})",
                              line=lineno)
        seen[d.id] = lineno
        dialogues.append(d)
    return dialogues


def dialogue_to_obj(d: Dialogue) -> dict:
    return {
        "id": d.id,
        "persona": list(d.persona.sentences),
        "turns": [{"speaker": int(t.speaker), "text": t.text} for t in d.turns],
    }


def write_dialogues_jsonl(dialogues: Iterable[Dialogue]) -> str:
    return "".join(json.dumps(dialogue_to_obj(d), ensure_ascii=False) + "\n"
                   for d in dialogues)


def load_corpus(path: str | Path) -> list[Dialogue]:
    """Load a corpus, choosing the parser by extension (``.jsonl`` or native text)."""
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        if path.suffix == ".jsonl":
            return parse_dialogues_jsonl(fh)
        return parse_personachat_native(fh)


# -- SAMSum ---------------------------------------------------------------------

def parse_samsum_json(stream) -> list[SummPair]:
    text = stream if isinstance(stream, str) else stream.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"invalid JSON: {exc.msg}") from None
    if not isinstance(data, list):
        raise CorpusError("SAMSum file must hold a JSON array")
    pairs = []
    for idx, rec in enumerate(data):
        if not isinstance(rec, dict):
            raise CorpusError(f"record {idx}: expected an object")
        for key in ("id", "dialogue", "summary"):
            if not isinstance(rec.get(key), str):
                raise CorpusError(f"record {idx}: field {key!r} missing or not a string")
        try:
            pairs.append(SummPair(rec["id"], rec["dialogue"], rec["summary"]))
        except CorpusError as exc:
            raise CorpusError(f"record {idx}: {exc}") from None
    return pairs


_NAMED_LINE = re.compile(r"^\s*([^:\n]+?)\s*:\s*(.+?)\s*$")


def parse_named_dialogue(text: str) -> list[Turn]:
    """Split ``Name: utterance`` lines into turns.

    The first name seen is mapped to Speaker 1 and every other name to
    Speaker 2. Alternation is not enforced since chat logs rarely follow it.
    """
    turns = []
    first_name = None
    for raw in text.splitlines():
        if not raw.strip():
            continue
        m = _NAMED_LINE.match(raw)
        if m is None:
            raise CorpusError(f"cannot split speaker from {raw.strip()[:40]!r}")
        name, utterance = m.groups()
        if first_name is None:
            first_name = name
        speaker = Speaker.ONE if name == first_name else Speaker.TWO
        turns.append(Turn(len(turns) + 1, speaker, utterance))
    if not turns:
        raise CorpusError("dialogue has no lines")
    return turns
