"""Acceptance criteria, one test each.  Every test prints a single PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines are printed even
when pytest captures output.
"""
import random
import time
from pathlib import Path

import pytest

from bridgescope.cli import main
from bridgescope.config import Matching
from bridgescope.facts import v_source_tx
from bridgescope.ingest import read_trace_file, render_trace_file
from bridgescope.monitor import DecisionLog, Monitor, encode_request, pending_from_sequence, replay
from bridgescope.properties import check_all
from bridgescope.report import load_report
from bridgescope.sequences import sequences_for
from bridgescope.simulator import Injection, ScenarioSpec, gen_dataset

import fuzz

FIXTURES = Path(__file__).parent / "fixtures"

CRITERION_1 = ScenarioSpec(seed=1, benign_count=1000, injections=(
    Injection("UDE", count=50), Injection("IEP", count=50), Injection("UU", count=50)))


@pytest.fixture
def verdict_line(capsys):
    def emit(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[acceptance {n}] {'PASS' if ok else 'FAIL'}: {detail}")
    return emit


@pytest.fixture(scope="module")
def c1_data():
    return gen_dataset(CRITERION_1)


def _analyze(dirpath: Path, out: Path, *extra, traces=("src.trace", "dst.trace")) -> tuple[int, str]:
    args = ["analyze", *(str(dirpath / t) for t in traces), "--actions", str(dirpath / "relayer.log"),
            "--config", str(dirpath / "config.json"), "-o", str(out), *extra]
    code = main(args)
    return code, out.read_text(encoding="utf-8")


def test_1_detection_completeness(c1_data, verdict_line):
    start = time.perf_counter()
    found = check_all(c1_data.dataset(), c1_data.config)
    elapsed = time.perf_counter() - start
    got = {(v.key, v.bug.value) for v in found}
    expected = {(k, bug) for k, (bug, _) in c1_data.labels.items()}
    on_benign = [v for v in found if v.key in c1_data.benign_keys]
    ok = len(found) == 150 and got == expected and not on_benign and elapsed < 10
    verdict_line(1, ok, f"{len(found)} violations (want 150), labels match={got == expected}, "
                        f"benign hits={len(on_benign)}, {elapsed:.2f}s (< 10s)")
    assert ok


def test_2_zero_false_positives(verdict_line):
    lds = gen_dataset(ScenarioSpec(seed=2, benign_count=10_000))
    start = time.perf_counter()
    found = check_all(lds.dataset(), lds.config)
    elapsed = time.perf_counter() - start
    ok = found == [] and elapsed < 60
    verdict_line(2, ok, f"{len(found)} violations on 10000 benign transfers, {elapsed:.2f}s (< 60s)")
    assert ok


def test_3_oracle_equivalence(verdict_line):
    bad = []
    for seed in range(10_000):
        s = fuzz.random_state_set(random.Random(seed))
        if fuzz.disagreements(s):
            bad.append(seed)
    verdict_line(3, not bad, f"{10_000 - len(bad)}/10000 state sets agree with the nested-loop oracle"
                             + (f"; first disagreeing seed {bad[0]}" if bad else ""))
    assert not bad


def test_4_attack_shaped_fixtures(tmp_path, verdict_line):
    code_q, out_q = _analyze(FIXTURES / "qubit", tmp_path / "q.jsonl")
    code_t, out_t = _analyze(FIXTURES / "thorchain1", tmp_path / "t.jsonl")
    _, sq = load_report(out_q)
    _, st = load_report(out_t)
    ok = (sq["counts"] == {"UDE": 20, "IEP": 0, "UU": 0} and code_q == 1
          and st["counts"] == {"UDE": 0, "IEP": 9, "UU": 0} and code_t == 1)
    verdict_line(4, ok, f"qubit-shaped {sq['counts']} exit {code_q}; "
                        f"thorchain#1-shaped {st['counts']} exit {code_t}")
    assert ok


def _sequence_block(seq) -> int:
    if seq.source_trace is not None:
        return seq.source_trace.block
    if seq.unlock_action is not None:
        return seq.unlock_action.block
    return seq.unlock_event.block


def test_5_monitor_offline_equivalence(c1_data, tmp_path, verdict_line):
    ds = c1_data.dataset()
    offline = {v.sequence.key for v in check_all(ds, c1_data.config)}
    seqs = sorted(sequences_for(ds), key=lambda s: (_sequence_block(s), s.key))
    log_path = tmp_path / "decisions.log"
    mon = Monitor(c1_data.config, log_=DecisionLog(log_path))
    aborted = set()
    for i, seq in enumerate(seqs):
        d = mon.screen_line(encode_request(pending_from_sequence(seq), f"req-{i}"))
        if d.verdict.value == "abort":
            aborted.add(seq.key)
    pairs = list(replay(DecisionLog.load(log_path), c1_data.config))
    abort_pairs = [(a, b) for a, b in pairs if a["verdict"] == "abort"]
    reproducible = all(a == b for a, b in pairs)
    ok = aborted == offline and len(offline) == 150 and reproducible and len(abort_pairs) == 150
    verdict_line(5, ok, f"{len(seqs)} requests, {len(aborted)} aborts vs {len(offline)} offline, "
                        f"sets equal={aborted == offline}, replay reproduced "
                        f"{sum(a == b for a, b in abort_pairs)}/{len(abort_pairs)} aborts")
    assert ok


def _permuted_copy(src: Path, dst: Path, seed: int) -> None:
    dst.mkdir()
    rng = random.Random(seed)
    for f in src.iterdir():
        lines = f.read_text(encoding="utf-8").splitlines(keepends=True)
        if f.suffix in (".trace", ".log"):
            header, body = lines[:1], lines[1:]
            rng.shuffle(body)
            lines = header + body
        (dst / f.name).write_text("".join(lines), encoding="utf-8")


def test_6_determinism_and_round_trip(tmp_path, verdict_line):
    spec = tmp_path / "spec.json"
    spec.write_text('{"seed": 1, "benign": 1000, "injections": [{"class": "UDE", "count": 50}, '
                    '{"class": "IEP", "count": 50}, {"class": "UU", "count": 50}]}')
    a, b = tmp_path / "a", tmp_path / "b"
    main(["simulate", str(spec), "--out", str(a)])
    main(["simulate", str(spec), "--out", str(b)])
    names = sorted(p.name for p in a.iterdir())
    simulate_same = names == sorted(p.name for p in b.iterdir()) and all(
        (a / n).read_bytes() == (b / n).read_bytes() for n in names)

    canonical = [p for d in (a, *(FIXTURES / n for n in ("qubit", "thorchain1", "modes")))
                 for p in sorted(d.iterdir()) if p.suffix in (".trace", ".log")]
    round_trip = all(render_trace_file(read_trace_file(p)).encode() == p.read_bytes()
                     for p in canonical)

    _, first = _analyze(a, tmp_path / "r1.jsonl")
    _, second = _analyze(a, tmp_path / "r2.jsonl")
    outputs = {first, second}
    for seed in range(3):
        perm = tmp_path / f"p{seed}"
        _permuted_copy(a, perm, seed)
        _, text = _analyze(perm, tmp_path / f"rp{seed}.jsonl", traces=("dst.trace", "src.trace"))
        outputs.add(text)
    analyze_same = len(outputs) == 1
    ok = simulate_same and round_trip and analyze_same
    verdict_line(6, ok, f"simulate byte-identical={simulate_same}, {len(canonical)} files round-trip="
                        f"{round_trip}, analyze identical over 2 runs + 3 permutations={analyze_same}")
    assert ok


def test_7_mode_ordering(tmp_path, verdict_line):
    rng = random.Random(7)
    violations, separating = 0, 0
    for _ in range(1000):
        t = fuzz.random_source_trace(rng)
        inj = v_source_tx(t, fuzz.FUZZ_CFG, Matching.INJECTIVE).holds
        lit = v_source_tx(t, fuzz.FUZZ_CFG, Matching.PAPER_LITERAL).holds
        violations += inj and not lit
        separating += lit and not inj
    code_lit, _ = _analyze(FIXTURES / "modes", tmp_path / "lit.jsonl", "--matching", "paper-literal")
    code_inj, out_inj = _analyze(FIXTURES / "modes", tmp_path / "inj.jsonl", "--matching", "injective")
    rows, _ = load_report(out_inj)
    fixture_separates = code_lit == 0 and code_inj == 1 and [r["failed_conjunct"] for r in rows] == [
        "shared-lock"]
    ok = violations == 0 and fixture_separates
    verdict_line(7, ok, f"injective-accepted but literal-rejected: {violations}/1000 "
                        f"({separating} traces separate the modes); committed fixture exits "
                        f"literal={code_lit} injective={code_inj}")
    assert ok
