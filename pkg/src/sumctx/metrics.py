"""BLEU-4 and ROUGE-1/2/L over whitespace tokens.

BLEU takes one reference per candidate and supports two aggregations:
corpus-level, which pools clipped n-gram counts and lengths before the
geometric mean, and the macro average of sentence-level scores. ROUGE is
always reported as the macro-averaged F1.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .errors import SumctxError, TokenizerError
from .tokenizer import DEFAULT_TOKENIZER, WHITESPACE, TokenizerSpec, tokenize

MAX_ORDER = 4
EPSILON = 1e-9


class Aggregation(str, enum.Enum):
    CORPUS = "corpus"
    MACRO = "macro"


class Smoothing(str, enum.Enum):
    NONE = "none"
    ADD_EPSILON = "add_epsilon"


def ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    if n < 1:
        raise SumctxError(f"n-gram order must be >= 1, got {n}")
    return Counter(tuple(tokens[k:k + n]) for k in range(len(tokens) - n + 1))


@dataclass
class BleuStats:
    """Sufficient statistics for BLEU; adding two of them pools a corpus."""
    matches: list[int] = field(default_factory=lambda: [0] * MAX_ORDER)
    totals: list[int] = field(default_factory=lambda: [0] * MAX_ORDER)
    cand_len: int = 0
    ref_len: int = 0

    def __add__(self, other: "BleuStats") -> "BleuStats":
        return BleuStats([a + b for a, b in zip(self.matches, other.matches)],
                         [a + b for a, b in zip(self.totals, other.totals)],
                         self.cand_len + other.cand_len, self.ref_len + other.ref_len)

    def precisions(self, smoothing: Smoothing = Smoothing.NONE) -> list[float]:
        out = []
        for m, t in zip(self.matches, self.totals):
            if smoothing == Smoothing.ADD_EPSILON and m == 0:
                out.append(EPSILON / max(t, 1))
            else:
                out.append(m / t if t else 0.0)
        return out

    def brevity_penalty(self) -> float:
        if self.cand_len == 0:
            return 0.0
        return min(1.0, math.exp(1 - self.ref_len / self.cand_len))

    def score(self, smoothing: Smoothing = Smoothing.NONE) -> float:
        if self.cand_len == 0:
            return 0.0
        ps = self.precisions(smoothing)
        if min(ps) <= 0:
            return 0.0
        log_mean = sum(math.log(p) for p in ps) / MAX_ORDER
        return self.brevity_penalty() * math.exp(log_mean)


def bleu_stats(candidate: Sequence[str], reference: Sequence[str]) -> BleuStats:
    stats = BleuStats(cand_len=len(candidate), ref_len=len(reference))
    for n in range(1, MAX_ORDER + 1):
        cand, ref = ngram_counts(candidate, n), ngram_counts(reference, n)
        stats.matches[n - 1] = sum(min(c, ref[g]) for g, c in cand.items())
        stats.totals[n - 1] = max(0, len(candidate) - n + 1)
    return stats


def bleu4(candidates: Sequence[Sequence[str]], references: Sequence[Sequence[str]],
          aggregation: Aggregation = Aggregation.CORPUS,
          smoothing: Smoothing = Smoothing.ADD_EPSILON) -> float:
    if len(candidates) != len(references):
        raise SumctxError(f"{len(candidates)} candidates but {len(references)} references")
    if not candidates:
        raise SumctxError("bleu4 needs at least one pair")
    aggregation, smoothing = Aggregation(aggregation), Smoothing(smoothing)
    per_pair = [bleu_stats(c, r) for c, r in zip(candidates, references)]
    if aggregation == Aggregation.CORPUS:
        pooled = BleuStats()
        for s in per_pair:
            pooled = pooled + s
        return pooled.score(smoothing)
    return math.fsum(s.score(smoothing) for s in per_pair) / len(per_pair)


def _prf(overlap: int, cand_total: int, ref_total: int) -> tuple[float, float, float]:
    p = overlap / cand_total if cand_total else 0.0
    r = overlap / ref_total if ref_total else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int = 1):
    """(precision, recall, F1) of clipped n-gram overlap."""
    if n not in (1, 2):
        raise SumctxError(f"rouge_n supports n in {{1, 2}}, got {n}")
    cand, ref = ngram_counts(candidate, n), ngram_counts(reference, n)
    overlap = sum((cand & ref).values())
    return _prf(overlap, sum(cand.values()), sum(ref.values()))


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    # Two rolling rows of the standard table.
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]):
    return _prf(lcs_length(candidate, reference), len(candidate), len(reference))


@dataclass
class MetricReport:
    bleu4: float
    rouge1: float
    rouge2: float
    rougeL: float
    count: int
    aggregation: Aggregation = Aggregation.CORPUS
    smoothing: Smoothing = Smoothing.ADD_EPSILON
    tokenizer: str = "whitespace"
    lowercase: bool = True
    skipped: int = 0
    per_example: list[dict] | None = None

    def to_dict(self) -> dict:
        d = {
            "bleu4": self.bleu4, "rouge1F": self.rouge1, "rouge2F": self.rouge2,
            "rougeLF": self.rougeL, "count": self.count, "skipped": self.skipped,
            "aggregation": self.aggregation.value, "smoothing": self.smoothing.value,
            "tokenizer": self.tokenizer, "lowercase": self.lowercase,
        }
        if self.per_example is not None:
            d["perExample"] = self.per_example
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls(d["bleu4"], d["rouge1F"], d["rouge2F"], d["rougeLF"], d["count"],
                   Aggregation(d["aggregation"]), Smoothing(d["smoothing"]),
                   d.get("tokenizer", "whitespace"), d.get("lowercase", True),
                   d.get("skipped", 0), d.get("perExample"))

    def percentages(self) -> dict[str, str]:
        return {"BLEU-4": as_percent(self.bleu4), "ROUGE-1": as_percent(self.rouge1),
                "ROUGE-2": as_percent(self.rouge2), "ROUGE-L": as_percent(self.rougeL)}


def as_percent(score: float) -> str:
    return f"{100 * score:.2f}"


def evaluate(pairs: Sequence[tuple[str, str]], tokenizer: TokenizerSpec = DEFAULT_TOKENIZER,
             aggregation: Aggregation = Aggregation.CORPUS,
             smoothing: Smoothing = Smoothing.ADD_EPSILON,
             keep_per_example: bool = False) -> MetricReport:
    """Score ``(candidate, reference)`` text pairs after lowercasing."""
    if not pairs:
        raise SumctxError("evaluate needs at least one pair")
    if tokenizer.kind != WHITESPACE:
        raise TokenizerError("metrics need token lists; only whitespace tokenizers expose them")
    aggregation, smoothing = Aggregation(aggregation), Smoothing(smoothing)
    cands = [tokenize(c.lower()) for c, _ in pairs]
    refs = [tokenize(r.lower()) for _, r in pairs]
    r1 = [rouge_n(c, r, 1)[2] for c, r in zip(cands, refs)]
    r2 = [rouge_n(c, r, 2)[2] for c, r in zip(cands, refs)]
    rl = [rouge_l(c, r)[2] for c, r in zip(cands, refs)]
    per_example = None
    if keep_per_example:
        per_example = [
            {"bleu4": bleu_stats(c, r).score(smoothing), "rouge1F": a, "rouge2F": b, "rougeLF": l}
            for c, r, a, b, l in zip(cands, refs, r1, r2, rl)]
    k = len(pairs)
    return MetricReport(
        bleu4=bleu4(cands, refs, aggregation, smoothing),
        rouge1=math.fsum(r1) / k, rouge2=math.fsum(r2) / k, rougeL=math.fsum(rl) / k,
        count=k, aggregation=aggregation, smoothing=smoothing, tokenizer=tokenizer.id,
        per_example=per_example)
