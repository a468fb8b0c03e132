"""Command-line entry point.

Exit codes: 0 on success, 1 on domain errors (bad corpus, backend failure,
budget), 2 on usage errors (bad flags, missing input files).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import corpus as corpus_mod
from .context import AssemblyConfig, build_context, write_assemblies_jsonl
from .errors import SumctxError
from .harness import (ECHO, REMOTE, RETRIEVAL, GeneratorDescriptor, GridConfig, manifest,
                      render_report, results_from_json, results_to_json, run_grid)
from .metrics import Aggregation, Smoothing, evaluate
from .summarize import (EXTRACTIVE, BackendDescriptor, CachedSummarizer, SummaryCache,
                        make_summarizer, precompute, score_summarizer)
from .tokenizer import DEFAULT_MARKERS, SegmentMarkers, TokenizerSpec, validate_markers

log = logging.getLogger("sumctx")

_CONFIG_KEYS = {"tokenizer", "markers", "paths", "verbosity", "endpoints", "concurrency"}


class UsageError(Exception):
    pass


@dataclass
class GlobalConfig:
    tokenizer: TokenizerSpec = field(default_factory=TokenizerSpec)
    markers: SegmentMarkers = DEFAULT_MARKERS
    paths: dict = field(default_factory=dict)
    verbosity: int = 0
    endpoints: dict = field(default_factory=dict)
    concurrency: int = 4

    @classmethod
    def load(cls, path: str | None) -> "GlobalConfig":
        if path is None:
            return cls()
        p = Path(path)
        if not p.exists():
            raise UsageError(f"config file not found: {path}")
        data = json.loads(p.read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(data) - _CONFIG_KEYS
        if unknown:
            raise UsageError(f"unknown config key {sorted(unknown)[0]!r}")
        cfg = cls()
        if "tokenizer" in data:
            cfg.tokenizer = TokenizerSpec.from_dict(data["tokenizer"])
        if "markers" in data:
            try:
                cfg.markers = SegmentMarkers(**data["markers"])
            except TypeError as exc:
                raise UsageError(f"bad markers config: {exc}") from None
        for key in ("paths", "endpoints"):
            if key in data:
                if not isinstance(data[key], dict):
                    raise UsageError(f"config key {key!r} must be an object")
                setattr(cfg, key, data[key])
        cfg.verbosity = int(data.get("verbosity", 0))
        cfg.concurrency = int(data.get("concurrency", 4))
        return cfg


def _existing(path: str | None, what: str) -> Path:
    if path is None:
        raise UsageError(f"missing {what} path")
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} not found: {path}")
    return p


def _pick(flag, cfg: GlobalConfig, key: str):
    return flag if flag is not None else cfg.paths.get(key)


def _summarizer_descriptor(backend_id: str, cfg: GlobalConfig, endpoint: str | None,
                           max_tokens: int) -> BackendDescriptor:
    if backend_id == EXTRACTIVE:
        return BackendDescriptor(EXTRACTIVE, EXTRACTIVE, True, max_tokens)
    if backend_id == REMOTE:
        url = endpoint or cfg.endpoints.get("summarizer")
        if not url:
            raise UsageError("remote summarizer needs --summarizer-endpoint or endpoints.summarizer")
        return BackendDescriptor(REMOTE, REMOTE, False, max_tokens, url)
    raise UsageError(f"unknown summarizer {backend_id!r} (expected extractive or remote)")


def _generator_descriptor(gen_id: str, cfg: GlobalConfig, endpoint: str | None):
    if gen_id in (ECHO, RETRIEVAL):
        return GeneratorDescriptor(gen_id, gen_id)
    if gen_id == REMOTE:
        url = endpoint or cfg.endpoints.get("generator")
        if not url:
            raise UsageError("remote generator needs --generator-endpoint or endpoints.generator")
        return GeneratorDescriptor(REMOTE, REMOTE, url)
    raise UsageError(f"unknown generator {gen_id!r} (expected echo, retrieval or remote)")


def _write(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


# -- subcommands ------------------------------------------------------------------

def cmd_ingest(args, cfg: GlobalConfig) -> int:
    src = _existing(_pick(args.input, cfg, "input"), "input")
    fmt = args.format
    if fmt == "auto":
        fmt = "jsonl" if src.suffix == ".jsonl" else "native"
    with src.open(encoding="utf-8") as fh:
        if fmt == "jsonl":
            dialogues = corpus_mod.parse_dialogues_jsonl(fh)
        else:
            dialogues = corpus_mod.parse_personachat_native(fh, id_prefix=args.id_prefix)
    corpus_mod.persona_warnings(dialogues)
    for did, idx in validate_markers(cfg.markers, dialogues):
        log.warning("marker collision in dialogue %s turn %d", did, idx)
    _write(corpus_mod.write_dialogues_jsonl(dialogues), args.out)
    n_turns = sum(len(d) for d in dialogues)
    print(f"{len(dialogues)} dialogues, {n_turns} turns",
          file=sys.stderr if args.out is None else sys.stdout)
    return 0


def _load_corpus(path: str | None, cfg: GlobalConfig):
    return corpus_mod.load_corpus(_existing(_pick(path, cfg, "corpus"), "corpus"))


def cmd_build_context(args, cfg: GlobalConfig) -> int:
    if args.step < 2 or args.step % 2:
        raise UsageError(f"--step must be even and >= 2 (Speaker 2 turns), got {args.step}")
    if args.turns < 0 or args.turns % 2:
        raise UsageError(f"--turns must be even and >= 0, got {args.turns}")
    dialogues = _load_corpus(args.corpus, cfg)
    by_id = {d.id: d for d in dialogues}
    if args.dialogue not in by_id:
        raise SumctxError(f"no dialogue {args.dialogue!r} in corpus")
    config = AssemblyConfig(args.turns, args.summary == "on", args.max_input_tokens,
                            args.max_response_tokens, cfg.markers, cfg.tokenizer)
    desc = _summarizer_descriptor(args.summarizer, cfg, args.summarizer_endpoint,
                                  args.max_summary_tokens)
    summarizer = make_summarizer(desc, cfg.tokenizer)
    if args.cache:
        summarizer = CachedSummarizer(summarizer, SummaryCache(args.cache))
    assembly = build_context(by_id[args.dialogue], args.step, config, summarizer)
    if args.json:
        sys.stdout.write(write_assemblies_jsonl([assembly]))
    else:
        print(assembly.serialize())
    return 0


def cmd_summarize(args, cfg: GlobalConfig) -> int:
    dialogues = _load_corpus(args.corpus, cfg)
    desc = _summarizer_descriptor(args.backend, cfg, args.summarizer_endpoint,
                                  args.max_summary_tokens)
    cache = SummaryCache(args.out)
    added = precompute(dialogues, make_summarizer(desc, cfg.tokenizer), cache)
    print(f"{added} summaries computed, {len(cache)} in cache")
    return 0


def cmd_score_summarizer(args, cfg: GlobalConfig) -> int:
    src = _existing(args.samsum, "SAMSum file")
    pairs = corpus_mod.parse_samsum_json(src.read_text(encoding="utf-8"))
    desc = _summarizer_descriptor(args.backend, cfg, args.summarizer_endpoint,
                                  args.max_summary_tokens)
    report = score_summarizer(make_summarizer(desc, cfg.tokenizer), pairs, cfg.tokenizer)
    _write(json.dumps(report.to_dict(), indent=2) + "\n", args.out)
    return 0


def cmd_evaluate(args, cfg: GlobalConfig) -> int:
    src = _existing(args.input, "input")
    pairs = []
    with src.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                pairs.append((obj["candidate"], obj["reference"]))
            except (ValueError, KeyError, TypeError):
                raise SumctxError(f"line {lineno}: expected {{\"candidate\", \"reference\"}}")
    report = evaluate(pairs, cfg.tokenizer, args.aggregation, args.smoothing,
                      keep_per_example=args.per_example)
    _write(json.dumps(report.to_dict(), indent=2) + "\n", args.out)
    return 0


def _write_report(results, bins, out_dir: Path):
    for name, text in render_report(results, bins).items():
        (out_dir / name).write_text(text, encoding="utf-8")


def cmd_experiment(args, cfg: GlobalConfig) -> int:
    dialogues = _load_corpus(args.corpus, cfg)
    grid = {}
    if args.grid:
        grid = json.loads(_existing(args.grid, "grid config").read_text(encoding="utf-8"))
        if not isinstance(grid, dict):
            raise UsageError("grid config must hold a JSON object")
    max_summary = grid.get("maxSummaryTokens", args.max_summary_tokens)
    overrides = {
        "summarizer": _summarizer_descriptor(args.summarizer, cfg, args.summarizer_endpoint,
                                             max_summary),
        "generator": _generator_descriptor(args.generator, cfg, args.generator_endpoint),
        "tokenizer": cfg.tokenizer,
        "markers": cfg.markers,
        "remote_concurrency": cfg.concurrency,
    }
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    elif "jobs" not in grid:
        overrides["jobs"] = 1
    try:
        config = GridConfig.from_dict(grid, **overrides)
    except TypeError as exc:
        raise UsageError(f"bad grid config: {exc}") from None
    cache = SummaryCache(args.cache) if args.cache else None
    results = run_grid(dialogues, config, cache=cache)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.json").write_text(results_to_json(results, config), encoding="utf-8")
    (out / "manifest.json").write_text(json.dumps(manifest(config), indent=2) + "\n",
                                       encoding="utf-8")
    if results:
        _write_report(results, config.context_size_bins, out)
    print(f"{len(results)} cells, {len(results.failures)} failed -> {out}")
    return 1 if results.failures else 0


def cmd_report(args, cfg: GlobalConfig) -> int:
    src = _existing(args.results, "results file")
    results, bins = results_from_json(src.read_text(encoding="utf-8"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_report(results, bins, out)
    return 0


def cmd_serve_stub(args, cfg: GlobalConfig) -> int:
    from .stub_server import serve
    print(f"stub listening on http://{args.host}:{args.port}", flush=True)
    serve(args.host, args.port, fixed_summary=args.fixed_summary,
          fixed_response=args.fixed_response)
    return 0


# -- parser -----------------------------------------------------------------------

def _add_summarizer_flags(p, flag="--summarizer"):
    p.add_argument(flag, default=EXTRACTIVE, help="summarizer backend: extractive or remote")
    p.add_argument("--summarizer-endpoint", help="base URL of a remote summarizer")
    p.add_argument("--max-summary-tokens", type=int, default=60)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sumctx", description="Summary-substituted dialogue context tools.")
    parser.add_argument("--config", help="JSON config file (flags override it)")
    parser.add_argument("-v", "--verbose", action="count", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert a corpus to canonical JSONL")
    p.add_argument("--input", help="Persona-Chat text or dialogue JSONL")
    p.add_argument("--format", choices=["auto", "native", "jsonl"], default="auto")
    p.add_argument("--id-prefix", default="pc")
    p.add_argument("--out", help="output JSONL (default stdout)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build-context", help="print the assembled input for one step")
    p.add_argument("--corpus")
    p.add_argument("--dialogue", required=True)
    p.add_argument("--step", type=int, required=True, help="even index of the turn to generate")
    p.add_argument("--turns", type=int, default=0, help="number of complete turns")
    p.add_argument("--summary", choices=["on", "off"], default="off")
    p.add_argument("--max-input-tokens", type=int, default=1024)
    p.add_argument("--max-response-tokens", type=int, default=200)
    p.add_argument("--cache", help="summary cache JSONL")
    p.add_argument("--json", action="store_true", help="print the assembly as JSON")
    _add_summarizer_flags(p)
    p.set_defaults(func=cmd_build_context)

    p = sub.add_parser("summarize", help="precompute prefix summaries into a cache")
    p.add_argument("--corpus")
    p.add_argument("--out", required=True, help="cache JSONL (appended)")
    _add_summarizer_flags(p, "--backend")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("score-summarizer", help="ROUGE of a summarizer on SAMSum pairs")
    p.add_argument("--samsum", required=True)
    p.add_argument("--out")
    _add_summarizer_flags(p, "--backend")
    p.set_defaults(func=cmd_score_summarizer)

    p = sub.add_parser("evaluate", help="BLEU/ROUGE of candidate/reference JSONL")
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.add_argument("--aggregation", choices=[a.value for a in Aggregation], default="corpus")
    p.add_argument("--smoothing", choices=[s.value for s in Smoothing], default="add_epsilon")
    p.add_argument("--per-example", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run the complete-turns x summary grid")
    p.add_argument("--corpus")
    p.add_argument("--grid", help="grid config JSON")
    p.add_argument("--generator", default=ECHO, help="echo, retrieval or remote")
    p.add_argument("--generator-endpoint")
    p.add_argument("--cache", help="summary cache JSONL")
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", required=True, help="output directory")
    _add_summarizer_flags(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="re-render tables from results.json")
    p.add_argument("--results", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve-stub", help="run the local stub summarizer/generator server")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--fixed-summary")
    p.add_argument("--fixed-response")
    p.set_defaults(func=cmd_serve_stub)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = GlobalConfig.load(args.config)
        verbosity = args.verbose if args.verbose is not None else cfg.verbosity
        logging.basicConfig(level=logging.DEBUG if verbosity > 1 else
                            logging.INFO if verbosity == 1 else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"sumctx: error: {exc}", file=sys.stderr)
        return 2
    except SumctxError as exc:
        print(f"sumctx: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
