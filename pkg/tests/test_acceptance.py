"""The eight acceptance criteria, one test each; every test reports a single PASS/FAIL line."""

from __future__ import annotations

import random
import time

from fimall.cutelim import eliminate_cuts
from fimall.derivation import check_local, restrict, tree_signature
from fimall.encoder import build_star_derivation, encode_cfg, encode_signature, encode_type_pred, inject_fault, \
    lockstep_bisim
from fimall.fixtures import PROGRAMS, cut_corpus, hanoi, load_program, zero_derivations
from fimall.gen import random_derivation
from fimall.runtime import run_program
from fimall.session import Guarded, Unguarded, guard_check, typecheck
from fimall.syntax import show
from fimall.validity import Invalid, Valid, check_validity, oracle_bounded_check

from test_encoder import CFG_ROWS, TYPE_ROWS, TYPES, Y

RESULTS: dict = {}


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})"
    RESULTS[n] = line
    print(line)
    assert ok, line


def test_1_validity_fixtures():
    t = time.perf_counter()
    fin = check_validity(hanoi())
    t_fin = time.perf_counter() - t
    t = time.perf_counter()
    inf = check_validity(hanoi(infinite=True))
    t_inf = time.perf_counter() - t
    ok = (isinstance(fin, Valid) and isinstance(inf, Invalid) and inf.cycle == "†4 → †"
          and t_fin < 1 and t_inf < 1)
    record(1, ok, f"hanoi {type(fin).__name__} in {t_fin:.2f}s, restarting hanoi "
                  f"{type(inf).__name__} cycle {getattr(inf, 'cycle', None)} in {t_inf:.2f}s")


def test_2_guard_verdicts():
    t = time.perf_counter()
    loop = guard_check(load_program("loop.ssn"))["Loop"]
    pp = guard_check(load_program("pingpong.ssn"))
    dt = time.perf_counter() - t
    ok = (isinstance(loop, Unguarded) and isinstance(pp["Ping"], Unguarded) and isinstance(pp["Pong"], Guarded)
          and dt < 1)
    record(2, ok, f"Loop {type(loop).__name__}, Ping {type(pp['Ping']).__name__}, "
                  f"Pong {type(pp['Pong']).__name__} in {dt:.2f}s")


def test_3_oracle_agreement():
    rng = random.Random(2024)
    t = time.perf_counter()
    seen = bad = valid = 0
    while seen < 500:
        d = random_derivation(rng)
        if d is None:
            continue
        assert len(d.nodes) <= 8 and d.n <= 2 and not check_local(d)
        seen += 1
        if check_validity(d):
            valid += 1
            bad += not oracle_bounded_check(d, 3)
        else:
            bad += bool(oracle_bounded_check(d, 5))
    dt = time.perf_counter() - t
    record(3, bad == 0 and dt < 60, f"{seen} derivations, {valid} valid, {bad} disagreements in {dt:.1f}s")


def test_4_cut_elimination():
    t = time.perf_counter()
    corpus = cut_corpus()
    failures, worst = [], 0
    for name, d in corpus.items():
        prev = None
        for depth in range(1, 9):
            r = eliminate_cuts(d, depth)
            out = r.derivation
            worst = max(worst, r.treat_events)
            if not out.is_cut_free() or check_local(out, allow_open=True) or r.treat_events > 100_000:
                failures.append((name, depth))
            if prev is not None and tree_signature(restrict(out, depth - 1)) != tree_signature(prev):
                failures.append((name, depth, "prefix"))
            prev = out
    dt = time.perf_counter() - t
    ok = len(corpus) >= 20 and not failures and dt < 120
    record(4, ok, f"{len(corpus)} proofs x depths 1..8, {len(failures)} failures, "
                  f"max treat events {worst}, {dt:.1f}s")


def test_5_encoder_rows():
    cfg_bad = [want for c, l, r, want in CFG_ROWS if show(encode_cfg(c, l, r)) != want]
    type_bad = [want for typ, want in TYPE_ROWS if show(encode_type_pred(TYPES, typ, Y)) != want]
    done = encode_signature(load_program("closewait.ssn")).base.lookup("Done")
    if show(done.body) != "1" or done.params:
        type_bad.append("Done")
    rows = (len(CFG_ROWS), len(TYPE_ROWS) + 1)
    ok = rows == (15, 6) and not cfg_bad and not type_bad
    record(5, ok, f"{rows[0]} configuration rows, {rows[1]} type rows, {len(cfg_bad) + len(type_bad)} mismatches")


def test_6_star_derivations():
    guarded = faults = caught = 0
    problems = []
    for name in PROGRAMS:
        prog = load_program(name)
        typings = typecheck(prog)
        for main, v in guard_check(prog, typings).items():
            if not isinstance(v, Guarded):
                continue
            guarded += 1
            td = typings[main]
            star = build_star_derivation(prog, main, td)
            if not check_validity(star, local=False) or not lockstep_bisim(td, star).agree:
                problems.append(main)
            bad, _ = inject_fault(star)
            if bad is not None:
                faults += 1
                caught += not lockstep_bisim(td, bad).agree
    ok = guarded > 0 and not problems and faults > 0 and caught == faults
    record(6, ok, f"{guarded} guarded definitions, {len(problems)} invalid or diverging, "
                  f"{caught}/{faults} injected faults detected")


CLOSED = [("closewait.ssn", "CloseWait"), ("closewait.ssn", "Unit"), ("drain.ssn", "DrainTwo"),
          ("drain.ssn", "CopyTwo"), ("drain.ssn", "Two"), ("server.ssn", "Session"), ("server.ssn", "Server")]
DIVERGING = [("loop.ssn", "LoopMain"), ("pingpong.ssn", "PingPong")]
SEEDS = [None, 1, 2, 3, 4, 5]


def test_7_runtime_progress():
    problems = []
    for name, main in CLOSED + DIVERGING:
        prog = load_program(name)
        kinds = set()
        for seed in SEEDS:
            r = run_program(prog, main, 10_000, seed)
            kinds.add(r.outcome.kind)
            if (name, main) in DIVERGING and r.external_receives:
                problems.append((main, seed, "external receive"))
        want = {"BudgetExhausted"} if (name, main) in DIVERGING else {"Empty", "ExternalPoised"}
        if len(kinds) != 1 or not kinds <= want:
            problems.append((main, sorted(kinds)))
    record(7, not problems, f"{len(CLOSED)} guarded closed, {len(DIVERGING)} diverging, "
                            f"round-robin plus {len(SEEDS) - 1} seeds, problems {problems or 'none'}")


def test_8_no_proof_of_zero():
    ds = zero_derivations()
    rejected = [k for k, d in ds.items() if not check_local(d) and isinstance(check_validity(d), Invalid)]
    record(8, len(ds) >= 10 and len(rejected) == len(ds), f"{len(rejected)}/{len(ds)} derivations of . |- 0 rejected")
