"""Experiment grid: every (complete turns, summary on/off) cell over a corpus.

Each cell builds an assembly for every even step of every dialogue,
generates a response with a pluggable generator, and scores it against the
gold Speaker 2 turn. Scores are reported overall and broken down by context
size, i.e. the number of turns before the request.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

from .context import (AssemblyConfig, ContextAssembly, LengthStats, build_context,
                      length_stats, response_steps)
from .corpus import Dialogue, Speaker
from .errors import SumctxError
from .metrics import Aggregation, MetricReport, Smoothing, as_percent, bleu4, evaluate
from .remote import join_url, post_json
from .summarize import (BackendDescriptor, CachedSummarizer, SummarizerBackend,
                        SummaryCache, make_summarizer)
from .tokenizer import (DEFAULT_MARKERS, DEFAULT_TOKENIZER, SegmentMarkers, TokenizerSpec,
                        require_clean, tokenize, truncate_tokens)

log = logging.getLogger(__name__)

ECHO, RETRIEVAL, REMOTE = "echo", "retrieval", "remote"
REMOTE_CONCURRENCY = 4


# -- generators -----------------------------------------------------------------

def generate_echo(assembly: ContextAssembly, max_response_tokens: int = 200) -> str:
    return truncate_tokens(assembly.request_text, max_response_tokens)


def _tf(text: str) -> Counter:
    return Counter(tokenize(text.lower()))


def _norm(vec: Counter) -> float:
    return math.sqrt(sum(v * v for v in vec.values()))


class RetrievalPool:
    """Candidate responses with precomputed term-frequency vectors.

    ``owners`` optionally tags each response with the dialogue it came from,
    so a dialogue's own turns can be excluded when answering it.
    """

    def __init__(self, responses: Sequence[str], owners: Sequence[str] | None = None):
        if not responses:
            raise SumctxError("retrieval pool is empty")
        self.responses = list(responses)
        self.owners = list(owners) if owners is not None else [None] * len(responses)
        self.vectors = [_tf(r) for r in self.responses]
        self.norms = [_norm(v) for v in self.vectors]

    @classmethod
    def from_corpus(cls, corpus: Sequence[Dialogue]) -> "RetrievalPool":
        texts, owners = [], []
        for d in corpus:
            for t in d.turns:
                if t.speaker == Speaker.TWO:
                    texts.append(t.text)
                    owners.append(d.id)
        return cls(texts, owners)

    def best(self, query: str, exclude_owner: str | None = None) -> int:
        q = _tf(query)
        qn = _norm(q)
        best_idx, best_sim = None, -1.0
        for idx, (vec, norm) in enumerate(zip(self.vectors, self.norms)):
            if exclude_owner is not None and self.owners[idx] == exclude_owner:
                continue
            dot = sum(c * vec[w] for w, c in q.items())
            sim = dot / (qn * norm) if qn and norm else 0.0
            if sim > best_sim:
                best_idx, best_sim = idx, sim
        if best_idx is None:
            raise SumctxError("retrieval pool has no usable candidates")
        return best_idx


def generate_retrieval(assembly: ContextAssembly, pool: RetrievalPool,
                       max_response_tokens: int = 200, leave_out_own: bool = True) -> str:
    """Pool response with the highest unigram cosine to the serialized assembly.

    Ties go to the lowest pool index.
    """
    exclude = assembly.dialogue_id if leave_out_own else None
    idx = pool.best(assembly.serialize(), exclude)
    return truncate_tokens(pool.responses[idx], max_response_tokens)


def remote_generate_body(assembly: ContextAssembly, max_response_tokens: int) -> dict:
    return {"context": assembly.serialize(), "max_tokens": max_response_tokens}


def generate_remote(endpoint: str, assembly: ContextAssembly,
                    max_response_tokens: int = 200, **http) -> str:
    reply = post_json(join_url(endpoint, "generate"),
                      remote_generate_body(assembly, max_response_tokens), "response", **http)
    return truncate_tokens(reply, max_response_tokens)


@dataclass(frozen=True)
class GeneratorDescriptor:
    id: str = ECHO
    kind: str = ECHO
    endpoint: str | None = None

    def __post_init__(self):
        if self.kind not in (ECHO, RETRIEVAL, REMOTE):
            raise SumctxError(f"unknown generator kind {self.kind!r}")
        if self.kind == REMOTE and not self.endpoint:
            raise SumctxError(f"remote generator {self.id!r} needs an endpoint")

    def to_dict(self) -> dict:
        d = {"id": self.id, "kind": self.kind}
        if self.endpoint:
            d["endpoint"] = self.endpoint
        return d


class Generator:
    def __init__(self, descriptor: GeneratorDescriptor, corpus: Sequence[Dialogue] = (),
                 **http):
        self.descriptor = descriptor
        self.http = http
        self.pool = RetrievalPool.from_corpus(corpus) if descriptor.kind == RETRIEVAL else None

    def __call__(self, assembly: ContextAssembly, max_response_tokens: int) -> str:
        kind = self.descriptor.kind
        if kind == ECHO:
            return generate_echo(assembly, max_response_tokens)
        if kind == RETRIEVAL:
            return generate_retrieval(assembly, self.pool, max_response_tokens)
        return generate_remote(self.descriptor.endpoint, assembly, max_response_tokens,
                               **self.http)


# -- grid -------------------------------------------------------------------------

_GRID_KEYS = {
    "completeTurnsList", "summaryModes", "contextSizeBins", "maxInputTokens",
    "maxResponseTokens", "maxSummaryTokens", "aggregation", "smoothing",
    "limitDialogues", "jobs",
}


@dataclass
class GridConfig:
    complete_turns_list: list[int] = field(default_factory=lambda: [0, 2, 4, 6, 8, 10])
    summary_modes: list[bool] = field(default_factory=lambda: [False, True])
    context_size_bins: list[int] = field(default_factory=lambda: [0, 2, 4, 6, 8, 10, 12])
    summarizer: BackendDescriptor = field(default_factory=lambda: BackendDescriptor("extractive"))
    generator: GeneratorDescriptor = field(default_factory=GeneratorDescriptor)
    max_input_tokens: int = 1024
    max_response_tokens: int = 200
    tokenizer: TokenizerSpec = DEFAULT_TOKENIZER
    markers: SegmentMarkers = DEFAULT_MARKERS
    aggregation: Aggregation = Aggregation.CORPUS
    smoothing: Smoothing = Smoothing.ADD_EPSILON
    limit_dialogues: int | None = None
    jobs: int = 1
    remote_concurrency: int = REMOTE_CONCURRENCY

    def __post_init__(self):
        if not self.complete_turns_list or not self.summary_modes or not self.context_size_bins:
            raise SumctxError("grid lists must be non-empty")
        bins = self.context_size_bins
        if any(later <= earlier for earlier, later in zip(bins, bins[1:])):
            raise SumctxError(f"context size bins must be strictly increasing: {bins}")
        for i in self.complete_turns_list:
            if i < 0 or i % 2:
                raise SumctxError(f"complete turns must be even and >= 0, got {i}")
        self.aggregation = Aggregation(self.aggregation)
        self.smoothing = Smoothing(self.smoothing)

    @classmethod
    def from_dict(cls, d: dict, **overrides) -> "GridConfig":
        unknown = set(d) - _GRID_KEYS
        if unknown:
            raise SumctxError(f"unknown grid config key {sorted(unknown)[0]!r}")
        kwargs = {}
        names = {"completeTurnsList": "complete_turns_list", "summaryModes": "summary_modes",
                 "contextSizeBins": "context_size_bins", "maxInputTokens": "max_input_tokens",
                 "maxResponseTokens": "max_response_tokens", "aggregation": "aggregation",
                 "smoothing": "smoothing", "limitDialogues": "limit_dialogues", "jobs": "jobs"}
        for key, attr in names.items():
            if key in d:
                kwargs[attr] = d[key]
        kwargs.update(overrides)
        if "maxSummaryTokens" in d:
            base = kwargs.get("summarizer", BackendDescriptor("extractive"))
            kwargs["summarizer"] = replace(base, max_summary_tokens=d["maxSummaryTokens"])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {
            "completeTurnsList": self.complete_turns_list, "summaryModes": self.summary_modes,
            "contextSizeBins": self.context_size_bins, "maxInputTokens": self.max_input_tokens,
            "maxResponseTokens": self.max_response_tokens,
            "aggregation": self.aggregation.value, "smoothing": self.smoothing.value,
            "limitDialogues": self.limit_dialogues,
        }

    def assembly_config(self, i: int, include_summary: bool) -> AssemblyConfig:
        return AssemblyConfig(i, include_summary, self.max_input_tokens,
                              self.max_response_tokens, self.markers, self.tokenizer)


@dataclass(frozen=True)
class GenerationRecord:
    dialogue_id: str
    step: int
    assembly: ContextAssembly
    candidate: str
    reference: str

    @property
    def context_size(self) -> int:
        return self.step - 2


@dataclass
class CellResult:
    complete_turns: int
    include_summary: bool
    metric_report: MetricReport
    length_stats: LengthStats
    per_context_size: dict[int, tuple[float, int]]
    omitted_count: int = 0
    clipped_count: int = 0

    def to_dict(self) -> dict:
        return {
            "completeTurns": self.complete_turns,
            "includeSummary": self.include_summary,
            "metricReport": self.metric_report.to_dict(),
            "lengthStats": self.length_stats.to_dict(),
            "perContextSize": {str(b): {"bleu4": s, "count": c}
                               for b, (s, c) in self.per_context_size.items()},
            "omittedCount": self.omitted_count,
            "clippedCount": self.clipped_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CellResult":
        ls = d["lengthStats"]
        return cls(d["completeTurns"], d["includeSummary"],
                   MetricReport.from_dict(d["metricReport"]),
                   LengthStats(ls["avgTokens"], ls["maxTokens"], ls["count"]),
                   {int(b): (v["bleu4"], v["count"]) for b, v in d["perContextSize"].items()},
                   d.get("omittedCount", 0), d.get("clippedCount", 0))


@dataclass(frozen=True)
class CellFailure:
    complete_turns: int
    include_summary: bool
    error: str


class GridResults(list):
    """List of CellResult; cells that aborted are listed in ``failures``."""

    def __init__(self, results=(), failures=()):
        super().__init__(results)
        self.failures: list[CellFailure] = list(failures)


def context_bin(size: int, bins: Sequence[int]) -> tuple[int, bool]:
    """Largest bin not above ``size``; the flag is set when ``size`` overflows the last bin."""
    if size > bins[-1]:
        return bins[-1], True
    chosen = bins[0]
    for b in bins:
        if b <= size:
            chosen = b
    return chosen, False


def bin_is_omitted(bin_value: int, complete_turns: int, include_summary: bool) -> bool:
    """Summary rows have no entry where no summary is possible."""
    return include_summary and bin_value <= complete_turns


def run_cell(corpus: Sequence[Dialogue], i: int, include_summary: bool, config: GridConfig,
             summarizer: SummarizerBackend | None, generator: Generator,
             jobs: int = 1) -> tuple[CellResult, list[GenerationRecord]]:
    acfg = config.assembly_config(i, include_summary)

    def one_dialogue(d: Dialogue) -> list[GenerationRecord]:
        out = []
        for n in response_steps(d):
            a = build_context(d, n, acfg, summarizer if include_summary else None)
            cand = generator(a, config.max_response_tokens)
            out.append(GenerationRecord(d.id, n, a, cand, d.turn(n).text))
        return out

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(one_dialogue, corpus))
    else:
        chunks = [one_dialogue(d) for d in corpus]
    records = [r for chunk in chunks for r in chunk]
    if not records:
        raise SumctxError("corpus has no dialogue with a Speaker 2 turn")

    report = evaluate([(r.candidate, r.reference) for r in records], config.tokenizer,
                      config.aggregation, config.smoothing)
    stats = length_stats([r.assembly for r in records])

    by_bin: dict[int, list[GenerationRecord]] = {}
    omitted = clipped = 0
    for r in records:
        b, was_clipped = context_bin(r.context_size, config.context_size_bins)
        clipped += was_clipped
        if bin_is_omitted(b, i, include_summary):
            omitted += 1
            continue
        by_bin.setdefault(b, []).append(r)
    per_bin = {}
    for b in config.context_size_bins:
        recs = by_bin.get(b)
        if not recs:
            continue
        score = bleu4([tokenize(r.candidate.lower()) for r in recs],
                      [tokenize(r.reference.lower()) for r in recs],
                      config.aggregation, config.smoothing)
        per_bin[b] = (score, len(recs))
    if clipped:
        log.info("cell i=%d summary=%s: %d examples clipped into bin %d",
                 i, include_summary, clipped, config.context_size_bins[-1])
    cell = CellResult(i, include_summary, report, stats, per_bin, omitted, clipped)
    return cell, records


def run_grid(corpus: Sequence[Dialogue], config: GridConfig,
             summarizer: SummarizerBackend | None = None,
             generator: Generator | None = None,
             cache: SummaryCache | None = None) -> GridResults:
    """Run every cell of the grid. A failing cell is logged and skipped."""
    if not corpus:
        raise SumctxError("run_grid needs a non-empty corpus")
    if config.limit_dialogues is not None:
        corpus = list(corpus)[:config.limit_dialogues]
    require_clean(config.markers, corpus)

    if summarizer is None:
        summarizer = make_summarizer(config.summarizer, config.tokenizer)
    summarizer = CachedSummarizer(summarizer, cache if cache is not None else SummaryCache())
    if generator is None:
        generator = Generator(config.generator, corpus)

    jobs = max(1, config.jobs)
    if REMOTE in (config.generator.kind, summarizer.descriptor.kind):
        jobs = min(jobs, config.remote_concurrency)

    results = GridResults()
    for include_summary in config.summary_modes:
        for i in config.complete_turns_list:
            try:
                cell, _ = run_cell(corpus, i, include_summary, config, summarizer,
                                   generator, jobs)
            except SumctxError as exc:
                log.error("cell i=%d summary=%s aborted: %s", i, include_summary, exc)
                results.failures.append(CellFailure(i, include_summary, str(exc)))
                continue
            results.append(cell)
    return results


# -- reports ------------------------------------------------------------------------

TABLE1_HEADER = ["Complete Turns", "Includes Summary?", "BLEU-4 (%)", "ROUGE-1 (%)",
                 "ROUGE-2 (%)", "ROUGE-L (%)", "Avg. Length", "Max. Length"]

_DISCREPANCY_NOTE = (
    "Cells marked '-' in summary rows are context sizes at or below the number of "
    "complete turns, where nothing is left to summarize. This includes context size 0 "
    "for the 0-complete-turn summary row.")


def _yes_no(flag: bool) -> str:
    return "Yes" if flag else "No"


def _md_table(header: list[str], rows: list[list[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines) + "\n"


def _csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _ordered(results: Sequence[CellResult]) -> list[CellResult]:
    return sorted(results, key=lambda c: (c.include_summary, c.complete_turns))


def render_table1(results: Sequence[CellResult]) -> tuple[str, str]:
    md_rows, csv_rows = [], []
    for c in _ordered(results):
        m = c.metric_report
        pct = m.percentages()
        md_rows.append([str(c.complete_turns), _yes_no(c.include_summary), pct["BLEU-4"],
                        pct["ROUGE-1"], pct["ROUGE-2"], pct["ROUGE-L"],
                        f"{c.length_stats.avg_tokens:.0f}", str(c.length_stats.max_tokens)])
        csv_rows.append([c.complete_turns, _yes_no(c.include_summary),
                         f"{m.bleu4:.6f}", f"{m.rouge1:.6f}", f"{m.rouge2:.6f}",
                         f"{m.rougeL:.6f}", f"{c.length_stats.avg_tokens:.4f}",
                         c.length_stats.max_tokens, m.count])
    csv_header = ["complete_turns", "includes_summary", "bleu4", "rouge1_f", "rouge2_f",
                  "rougeL_f", "avg_length", "max_length", "count"]
    return _md_table(TABLE1_HEADER, md_rows), _csv(csv_header, csv_rows)


def render_table2(results: Sequence[CellResult], bins: Sequence[int]) -> tuple[str, str]:
    ordered = sorted(results, key=lambda c: (c.complete_turns, c.include_summary))
    md_rows, csv_rows = [], []
    for c in ordered:
        md = [str(c.complete_turns), _yes_no(c.include_summary)]
        row: list = [c.complete_turns, _yes_no(c.include_summary)]
        for b in bins:
            if b in c.per_context_size:
                score, count = c.per_context_size[b]
                md.append(as_percent(score))
                row += [f"{score:.6f}", count]
            else:
                md.append("-")
                row += ["", 0]
        md_rows.append(md)
        csv_rows.append(row)
    header = ["Complete Turns", "Includes Summary?"] + [str(b) for b in bins]
    csv_header = ["complete_turns", "includes_summary"]
    for b in bins:
        csv_header += [f"bleu4_ctx{b}", f"count_ctx{b}"]
    md = "BLEU-4 (%) per context size\n\n" + _md_table(header, md_rows)
    if any(c.include_summary for c in results):
        md += "\n" + _DISCREPANCY_NOTE + "\n"
    return md, _csv(csv_header, csv_rows)


def render_report(results: Sequence[CellResult], bins: Sequence[int]) -> dict[str, str]:
    """table1/table2 as markdown and CSV, keyed by output file name."""
    if not results:
        raise SumctxError("no cell results to render")
    t1_md, t1_csv = render_table1(results)
    t2_md, t2_csv = render_table2(results, bins)
    return {"table1.md": t1_md, "table1.csv": t1_csv, "table2.md": t2_md, "table2.csv": t2_csv}


def results_to_json(results: GridResults, config: GridConfig) -> str:
    payload = {
        "grid": config.to_dict(),
        "cells": [c.to_dict() for c in results],
        "failures": [{"completeTurns": f.complete_turns, "includeSummary": f.include_summary,
                      "error": f.error} for f in getattr(results, "failures", [])],
    }
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"


def results_from_json(text: str) -> tuple[GridResults, list[int]]:
    payload = json.loads(text)
    cells = [CellResult.from_dict(c) for c in payload["cells"]]
    failures = [CellFailure(f["completeTurns"], f["includeSummary"], f["error"])
                for f in payload.get("failures", [])]
    return GridResults(cells, failures), payload["grid"]["contextSizeBins"]


def manifest(config: GridConfig) -> dict:
    return {
        "tokenizer": config.tokenizer.to_dict(),
        "markers": config.markers.to_dict(),
        "smoothing": config.smoothing.value,
        "aggregation": config.aggregation.value,
        "lowercase": True,
        "summarizer": config.summarizer.to_dict(),
        "generator": config.generator.to_dict(),
        "maxInputTokens": config.max_input_tokens,
        "maxResponseTokens": config.max_response_tokens,
        "lengthIncludesPersonaAndMarkers": True,
        "grid": config.to_dict(),
    }
