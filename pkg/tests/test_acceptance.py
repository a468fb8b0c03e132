"""Acceptance suite: one PASS/FAIL line per criterion, printed even under capture.

Run alone with ``pytest -v tests/test_acceptance.py``. Each test prints its line
first and then asserts, so a failing criterion still reports what it measured.
"""

import json
import math
import random
import time

import pytest

from sumctx.cli import main
from sumctx.context import AssemblyConfig, build_context
from sumctx.corpus import Dialogue, parse_dialogues_jsonl, parse_named_dialogue, write_dialogues_jsonl
from sumctx.errors import BackendError
from sumctx.harness import GridConfig, generate_remote, remote_generate_body, run_grid
from sumctx.metrics import Smoothing, bleu4, evaluate, rouge_l, rouge_n
from sumctx.stub_server import running_stub
from sumctx.summarize import (BackendDescriptor, ExtractiveSummarizer, SummarizerBackend,
                              score_summarizer, summarize_extractive, summarize_remote)

from conftest import GOLDEN, SAMPLE_CORPUS, random_dialogue
from oracles import all_strings, index_oracle, naive_rouge1_f, subsequences

LCS_DEADLINE = 60.0


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")


# -- 1: metric oracles -------------------------------------------------------------

def _lcs_sweep(deadline):
    """rouge_l against subsequence enumeration on every ordered pair, until the deadline."""
    strings = list(all_strings("abc", 8))
    subs = [subsequences(s) for s in strings]
    total = len(strings) ** 2
    checked = mismatches = 0
    start = time.perf_counter()
    for ai, a in enumerate(strings):
        for bi, b in enumerate(strings):
            common = subs[ai] & subs[bi]
            lcs = max(map(len, common))
            p = lcs / len(a) if a else 0.0
            r = lcs / len(b) if b else 0.0
            f = 2 * p * r / (p + r) if p + r else 0.0
            got = rouge_l(a, b)
            if max(abs(got[0] - p), abs(got[1] - r), abs(got[2] - f)) > 1e-12:
                mismatches += 1
            checked += 1
        if time.perf_counter() - start > deadline:
            break
    return checked, total, mismatches, time.perf_counter() - start


HAND_BLEU = [
    (["abcd"], ["abcde"], Smoothing.ADD_EPSILON, math.exp(1 - 5 / 4)),
    (["abcdef"], ["abcdxf"], Smoothing.NONE, (5 / 6 * 3 / 5 * 2 / 4 * 1 / 3) ** 0.25),
    (["abcd", "abcdef"], ["abcde", "abcdxf"], Smoothing.NONE,
     math.exp(1 - 11 / 10) * (9 / 10 * 6 / 8 * 4 / 6 * 2 / 4) ** 0.25),
    (["aabb"], ["ab"], Smoothing.ADD_EPSILON, (2 / 4 * 1 / 3 * 1e-9 / 2 * 1e-9 / 1) ** 0.25),
    (["abcde"], ["abcde"], Smoothing.NONE, 1.0),
    (["abcdefgh"], ["abcd"], Smoothing.NONE, (4 / 8 * 3 / 7 * 2 / 6 * 1 / 5) ** 0.25),
]


def test_criterion_1_metric_oracles(capsys):
    start = time.perf_counter()
    bleu_ok = all(
        abs(bleu4([list(c) for c in cs], [list(r) for r in rs], smoothing=sm) - v) <= 1e-9
        for cs, rs, sm, v in HAND_BLEU)
    s = "the cat sat on the mat".split()
    ident = evaluate([(" ".join(s), " ".join(s))])
    identity_ok = (bleu4([s], [s]) == 1.0 and rouge_n(s, s, 1)[2] == 1.0
                   and rouge_n(s, s, 2)[2] == 1.0 and rouge_l(s, s)[2] == 1.0
                   and (ident.bleu4, ident.rouge1, ident.rouge2, ident.rougeL) == (1, 1, 1, 1))
    remaining = LCS_DEADLINE - (time.perf_counter() - start)
    checked, total, mismatches, _ = _lcs_sweep(remaining)
    elapsed = time.perf_counter() - start
    sweep_ok = checked == total and mismatches == 0
    ok = bleu_ok and identity_ok and sweep_ok and elapsed < 60
    report(capsys, 1, ok,
           f"bleu hand values {'ok' if bleu_ok else 'MISMATCH'}; "
           f"identity pairs {'ok' if identity_ok else 'MISMATCH'}; "
           f"exhaustive LCS sweep checked {checked}/{total} pairs "
           f"({mismatches} mismatches) in {elapsed:.1f}s (limit 60s)")
    assert ok


# -- 2: assembly arithmetic ----------------------------------------------------------

class Recording(SummarizerBackend):
    descriptor = BackendDescriptor("recording")

    def __init__(self):
        self.calls = []

    def summarize(self, turns):
        self.calls.append([t.index for t in turns])
        return "S"


def test_criterion_2_assembly_arithmetic(capsys, hunting_dialogue):
    start = time.perf_counter()
    rec = Recording()
    a = build_context(hunting_dialogue, 8, AssemblyConfig(2, True), rec)
    fixture_ok = (rec.calls == [[2, 4]] and a.summary_range_end == 4
                  and [t.index for t in a.complete_turns] == [5, 6]
                  and a.request_text == hunting_dialogue.turn(7).text)

    d = Dialogue.from_texts("sweep", ["p"], [f"t{k}" for k in range(1, 21)])
    failures = []
    cases = 0
    for n in range(2, 21, 2):
        for i in range(0, 11, 2):
            for include in (False, True):
                rec = Recording()
                a = build_context(d, n, AssemblyConfig(i, include), rec)
                omitted, complete, request = index_oracle(n, i)
                present = a.summary_text is not None
                expected_calls = [[k for k in omitted if k % 2 == 0]] if include and omitted else []
                if (len(a.complete_turns) != min(i, n - 2)
                        or [t.index for t in a.complete_turns] != complete
                        or present != (include and n - 2 > i)
                        or rec.calls != expected_calls
                        or a.request_text != d.turn(request).text):
                    failures.append((n, i, include))
                cases += 1
    elapsed = time.perf_counter() - start
    ok = fixture_ok and not failures and elapsed < 10
    report(capsys, 2, ok,
           f"step-8 fixture {'exact' if fixture_ok else 'MISMATCH'}; sweep {cases - len(failures)}"
           f"/{cases} cases ok in {elapsed:.2f}s (limit 10s)")
    assert ok, failures[:5]


# -- 3: length trend -----------------------------------------------------------------

def test_criterion_3_length_trend(capsys, sample_corpus):
    start = time.perf_counter()
    cells = {(c.complete_turns, c.include_summary): c for c in run_grid(sample_corpus, GridConfig())}
    off = [cells[i, False].length_stats.avg_tokens for i in range(0, 11, 2)]
    on = [cells[i, True].length_stats.avg_tokens for i in range(0, 11, 2)]
    increasing = all(b > a for a, b in zip(off, off[1:]))
    dominated = all(y >= x for x, y in zip(off, on))
    elapsed = time.perf_counter() - start
    ok = increasing and dominated and elapsed < 10
    report(capsys, 3, ok,
           f"summary-off avg {[round(x, 1) for x in off]} strictly increasing={increasing}; "
           f"summary-on avg {[round(x, 1) for x in on]} >= off={dominated}; "
           f"{elapsed:.2f}s (limit 10s)")
    assert ok


# -- 4: grid structure ---------------------------------------------------------------

def _table2_dashes_ok(md, bins):
    rows = [line.strip("|").split("|") for line in md.splitlines()
            if line.startswith("| ") and line[2].isdigit()]
    for row in rows:
        cells = [c.strip() for c in row]
        i, summary = int(cells[0]), cells[1] == "Yes"
        for b, cell in zip(bins, cells[2:]):
            if (cell == "-") != (summary and b <= i):
                return False
    return len(rows) == 12


def test_criterion_4_grid_structure(capsys, tmp_path):
    start = time.perf_counter()
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        rc = main(["experiment", "--corpus", str(SAMPLE_CORPUS), "--out", str(out)])
        runs.append((rc, out))
    elapsed = time.perf_counter() - start
    (rc_a, a), (rc_b, b) = runs
    n_cells = len(json.loads((a / "results.json").read_text())["cells"])
    dashes = _table2_dashes_ok((a / "table2.md").read_text(), [0, 2, 4, 6, 8, 10, 12])
    identical = all((a / f).read_bytes() == (b / f).read_bytes()
                    for f in ("table1.csv", "table2.csv"))
    ok = rc_a == rc_b == 0 and n_cells == 12 and dashes and identical and elapsed < 60
    report(capsys, 4, ok,
           f"{n_cells} cells; dashes exactly at bin<=i in summary rows={dashes}; "
           f"CSVs byte-identical across runs={identical}; {elapsed:.2f}s for both runs (limit 60s)")
    assert ok


# -- 5: round trip and protocol ------------------------------------------------------

def test_criterion_5_round_trip_and_protocol(capsys, hunting_dialogue):
    rng = random.Random(5)
    dialogues = [random_dialogue(rng, f"d{k}") for k in range(1000)]
    unicode_extra = Dialogue.from_texts("ü-1", ["café «ok»"], ["naïve\ttab", "emoji 🎉 \"q\""])
    dialogues.append(unicode_extra)
    round_trip = parse_dialogues_jsonl(write_dialogues_jsonl(dialogues)) == dialogues

    turns = [hunting_dialogue.turn(2), hunting_dialogue.turn(4)]
    golden = json.loads((GOLDEN / "summarize_request.json").read_text())
    with running_stub() as (url, state):
        summary = summarize_remote(url, turns, 60)
        sum_ok = state.requests[0] == ("/summarize", golden) and summary == summarize_extractive(turns, 60)
        a = build_context(hunting_dialogue, 8, AssemblyConfig(2, True), ExtractiveSummarizer())
        gen_ok = (generate_remote(url, a, 200) == a.request_text
                  and state.requests[1] == ("/generate", remote_generate_body(a, 200)))
    delays = []
    with running_stub(fail_always=True) as (url, state):
        try:
            summarize_remote(url, turns, sleep=delays.append)
            retry_ok = False
        except BackendError:
            retry_ok = len(state.requests) == 3 and delays == [0.5, 1.0]
    with running_stub(fail_first=2) as (url, state):
        recover_ok = generate_remote(url, a, 200, sleep=delays.append) == a.request_text \
            and len(state.requests) == 3
    with running_stub(bad_schema=True) as (url, _):
        with pytest.raises(BackendError):
            summarize_remote(url, turns, sleep=delays.append)
    ok = round_trip and sum_ok and gen_ok and retry_ok and recover_ok
    report(capsys, 5, ok,
           f"JSONL round trip of {len(dialogues)} dialogues identical={round_trip}; "
           f"summarize contract={sum_ok}; generate contract={gen_ok}; "
           f"3-attempt failure path={retry_ok}; recovery after 2 failures={recover_ok}")
    assert ok


# -- 6: summarizer scoring -----------------------------------------------------------

class ReferenceStub(SummarizerBackend):
    descriptor = BackendDescriptor("reference")

    def __init__(self, pairs):
        self.table = {tuple(t.text for t in parse_named_dialogue(p.dialogue_text)):
                      p.reference_summary for p in pairs}

    def summarize(self, turns):
        return self.table[tuple(t.text for t in turns)]


def test_criterion_6_summarizer_scoring(capsys, samsum_pairs):
    ident = score_summarizer(ReferenceStub(samsum_pairs), samsum_pairs)
    identity_ok = (ident.rouge1, ident.rouge2, ident.rougeL) == (1.0, 1.0, 1.0)
    pair = samsum_pairs[0]
    got = score_summarizer(ExtractiveSummarizer(), [pair]).rouge1
    cand = summarize_extractive(parse_named_dialogue(pair.dialogue_text)).lower().split()
    oracle = naive_rouge1_f(cand, pair.reference_summary.lower().split())
    hand = 9 / 22
    extractive_ok = abs(got - hand) <= 1e-9 and abs(oracle - hand) <= 1e-9
    ok = identity_ok and extractive_ok
    report(capsys, 6, ok,
           f"identity stub ROUGE-1/2/L = {ident.rouge1}/{ident.rouge2}/{ident.rougeL}; "
           f"extractive ROUGE-1 on pair {pair.id} = {got:.12f} vs hand value 9/22 = {hand:.12f}")
    assert ok
