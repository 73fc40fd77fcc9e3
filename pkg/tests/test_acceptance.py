"""Acceptance suite: one test and one printed verdict line per criterion.

Tolerances and time limits are pinned below. A criterion that misses its
target fails here; nothing is relaxed to make it pass.
"""

import contextlib
import functools
import hashlib
import io
import os
import random
import subprocess
import sys
import time
from pathlib import Path

import pytest

from asymtrust import bitsets as bs
from asymtrust.cli import main
from asymtrust.fixtures import (
    bca_explore,
    bca_n4,
    coin_n4,
    consensus_layered,
    consensus_n4,
    fd_system,
    golden_scenarios,
    norb1_scenario,
    random_b3,
    rb3_threshold7,
    rb_selective,
)
from asymtrust.properties import (
    Verdict,
    check_bca,
    check_coin,
    check_consensus,
    check_rb,
    check_rb_ensemble,
    check_round_progress,
    check_send_once,
    combine,
)
from asymtrust.protocols.factory import ProtocolKind
from asymtrust.sim.explorer import explore
from asymtrust.sim.runner import run
from asymtrust.sim.scenario import Schedule
from asymtrust.sim.trace import parse_trace
from asymtrust.trust import canonical_quorums, check_q3, maximal_guild, symmetric_reduction, tolerated_system

H, V, VAC = Verdict.HOLDS, Verdict.VIOLATED, Verdict.VACUOUS

FD_QUORUMS = {
    "p1": "{3,4} {4,5,6}", "p2": "{3,4} {4,5,6}", "p3": "{3,5,6}",
    "p4": "{4,5,6}", "p5": "{3,5,6}", "p6": "{3,5,6}",
}
COIN_ROUNDS = 1000
COIN_BIAS = 0.05
C3_SEEDS = 100
C7_SEEDS = 1000
C7_DECIDED = 0.99
C7_BAND = (1.8, 2.2)
C6_BOUND = 40
C6_FAULT_FREE_BOUND = 10
GOLDEN = Path(__file__).parent / "golden_traces.txt"

pytestmark = pytest.mark.acceptance


def _verdicts(reports):
    return {r.prop: r for r in reports}


@functools.lru_cache(maxsize=None)
def c2_traces():
    return (run(norb1_scenario()), run(norb1_scenario(variant="E")), run(norb1_scenario(ProtocolKind.RB3)))


@functools.lru_cache(maxsize=None)
def c3_traces():
    return tuple(run(rb3_threshold7(s)) for s in range(C3_SEEDS))


@functools.lru_cache(maxsize=None)
def c5_trace():
    return run(coin_n4(0, rounds=COIN_ROUNDS))


@functools.lru_cache(maxsize=None)
def c7_traces():
    return tuple(run(consensus_n4(s)) for s in range(C7_SEEDS))


def test_criterion_1_fixture_fidelity(tmp_path, acceptance):
    with contextlib.redirect_stdout(io.StringIO()):
        main(["fixtures", "--out", str(tmp_path)])
    system = str(tmp_path / "systems" / "fd.system")
    t0 = time.perf_counter()
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code_q = main(["--records", "analyze", system, "--faults", "5,6"])
    elapsed = time.perf_counter() - t0
    rec = [line.split("\t") for line in buf.getvalue().splitlines()]
    b3 = ["b3", "true", ""] in rec
    quorums = {r[1]: r[2] for r in rec if r[0] == "quorums"}
    depths = [r[3] for r in rec if r[0] == "process"]
    guild = next(r[1] for r in rec if r[0] == "guild")
    ok = code_q == 0 and b3 and quorums == FD_QUORUMS and depths[:4] == ["1", "1", "0", "0"] and guild == "none"
    acceptance(1, ok, f"B3={b3} quorums-match={quorums == FD_QUORUMS} depths={','.join(depths)} guild={guild}",
               elapsed, 1.0)
    assert ok and elapsed < 1.0


def test_criterion_2_impossibility(acceptance):
    t0 = time.perf_counter()
    eprime, e, full = c2_traces()
    bad = _verdicts(check_rb(eprime, d=1))["rb.totality"]
    good = _verdicts(check_rb(e, d=1))["rb.totality"]
    rb3 = check_rb(full, d=3)
    elapsed = time.perf_counter() - t0
    witness = str(bad.witnesses[0]) if bad.witnesses else ""
    pair = " output p2 dar-deliver" in witness and "p1 no dar-deliver" in witness
    rb3_ok = all(r.verdict in (H, VAC) for r in rb3)
    ok = bad.verdict is V and pair and good.verdict is H and rb3_ok
    acceptance(2, ok, f"E' totality={bad.verdict.value} witness=[{witness}]  E totality={good.verdict.value}  "
                      f"RB3@d=3 {sorted({r.verdict.value for r in rb3})}", elapsed, 1.0)
    assert ok and elapsed < 1.0


def test_criterion_3_rb_ensemble(acceptance):
    t0 = time.perf_counter()
    traces = c3_traces()
    per = [check_rb(t, 3) for t in traces]
    elapsed = time.perf_counter() - t0
    clean = sum(all(r.verdict is H for r in reps) for reps in per)
    ens = check_rb_ensemble(traces, 3)
    ok = clean == C3_SEEDS and all(r.verdict is H for r in ens)
    acceptance(3, ok, f"{clean}/{C3_SEEDS} traces with validity/consistency/integrity/totality all HOLD at d=3",
               elapsed, 30.0)
    assert ok and elapsed < 30.0


def test_criterion_4_tolerated_system(acceptance):
    t0 = time.perf_counter()
    systems = [fd_system()] + [random_b3(4 + s % 4, random.Random(1000 + s)) for s in range(24)]
    failures = []
    fault_sets = 0
    for idx, fps in enumerate(systems):
        qs = canonical_quorums(fps)
        tol = tolerated_system(qs, fps)
        if not check_q3(tol, fps.n) or not check_q3(symmetric_reduction(fps), fps.n):
            failures.append(f"#{idx} not Q3")
        for faults in range(1 << fps.n):
            fault_sets += 1
            if maximal_guild(qs, fps, faults) and not any(faults & ~t == 0 for t in tol):
                failures.append(f"#{idx} F={bs.fmt(faults)} has a guild but is not tolerated")
                break
    elapsed = time.perf_counter() - t0
    ok = not failures and all(f.n <= 7 for f in systems)
    acceptance(4, ok, f"{len(systems)} systems (F_D + {len(systems) - 1} random, n<=7), {fault_sets} fault sets; "
                      f"failures={failures[:3] or 'none'}", elapsed, 60.0)
    assert ok and elapsed < 60.0


def test_criterion_5_common_coin(acceptance):
    t0 = time.perf_counter()
    tr = c5_trace()
    rep = _verdicts(check_coin(tr))
    elapsed = time.perf_counter() - t0
    bias = rep["cc.no-bias"]
    freq = bias.params.get("freq", float("nan"))
    samples = bias.params.get("samples", 0)
    ok = (samples == COIN_ROUNDS and rep["cc.matching"].verdict is H and rep["cc.unpredictability"].verdict is H
          and abs(freq - 0.5) < COIN_BIAS)
    acceptance(5, ok, f"{samples} rounds, matching={rep['cc.matching'].verdict.value} "
                      f"unpredictability={rep['cc.unpredictability'].verdict.value} freq(1)={freq:.3f} "
                      f"|bias|={abs(freq - 0.5):.3f} < {COIN_BIAS}", elapsed, 30.0)
    assert ok and elapsed < 30.0


def test_criterion_6_bca_exploration(acceptance):
    t0 = time.perf_counter()
    parts, ok = [], True
    for inputs in ((0, 0, 1), (0, 1, 1)):
        res = explore(bca_explore(inputs), C6_BOUND)
        rep = _verdicts(check_bca(res))
        good = rep["bca.agreement"].verdict is H and rep["bca.binding"].verdict is H
        ok &= good
        parts.append(f"split {''.join(map(str, inputs))}: {res.states} states agreement="
                     f"{rep['bca.agreement'].verdict.value} binding={rep['bca.binding'].verdict.value}"
                     f"({rep['bca.binding'].params.get('checks', 0)} checks)")
    for v in (0, 1):
        res = explore(bca_explore((v, v, v)), C6_BOUND)
        rep = _verdicts(check_bca(res))
        good = (rep["bca.validity"].verdict is H and rep["bca.termination"].verdict is H
                and res.decided_values == {v} and res.undecided_leaves == 0)
        ok &= good
        parts.append(f"unanimous {v}: {res.states} states decided={sorted(res.decided_values, key=str)}")
    elapsed = time.perf_counter() - t0
    acceptance(6, ok, "n=4, p4 silent, bound 40; " + "; ".join(parts), elapsed, 300.0)
    assert ok and elapsed < 300.0


def test_criterion_6_fault_free_bounded(acceptance):
    """Supplementary: four correct processes, only a shallow bound is tractable."""
    t0 = time.perf_counter()
    sc = bca_n4((0, 0, 1, 1), schedule=Schedule.FIFO_ROUND_ROBIN).replace(horizon=C6_FAULT_FREE_BOUND)
    res = explore(sc, C6_FAULT_FREE_BOUND)
    rep = _verdicts(check_bca(res))
    elapsed = time.perf_counter() - t0
    ok = rep["bca.agreement"].verdict is H and rep["bca.binding"].verdict is not V
    acceptance(6, ok, f"four correct processes, inputs 0011, bound {C6_FAULT_FREE_BOUND}; "
                      f"{res.states} states agreement={rep['bca.agreement'].verdict.value} "
                      f"binding={rep['bca.binding'].verdict.value} (no decision within the bound)",
               elapsed, label="criterion 6 supplement")
    assert ok


def test_criterion_7_consensus(acceptance):
    t0 = time.perf_counter()
    traces = c7_traces()
    rep = _verdicts(check_consensus(traces, threshold=C7_DECIDED, round_band=C7_BAND))
    elapsed = time.perf_counter() - t0
    term = rep["c.termination"]
    mean = rep["c.rounds"].params.get("mean_round", float("nan"))
    frac = term.params.get("fraction", 0.0)
    ok = (rep["c.agreement"].verdict is H and rep["c.validity"].verdict is H and frac >= C7_DECIDED
          and rep["c.rounds"].verdict is H)
    acceptance(7, ok, f"{C7_SEEDS} seeds, agreement={rep['c.agreement'].verdict.value} "
                      f"validity={rep['c.validity'].verdict.value} decided={frac:.3f} (>= {C7_DECIDED}) "
                      f"mean round={mean:.3f} in [{C7_BAND[0]}, {C7_BAND[1]}]", elapsed, 300.0)
    assert ok and elapsed < 300.0


def test_criterion_8_mutations(acceptance):
    t0 = time.perf_counter()
    rb_ok = check_rb_ensemble([run(rb_selective(ProtocolKind.RB3, s)) for s in range(20)], 3)
    no_amp = [rb_selective(ProtocolKind.RB3, s) for s in range(20)]
    no_amp = [sc.replace(params=dict(sc.params, amplify=False)) for sc in no_amp]
    rb_bad = check_rb_ensemble([run(sc) for sc in no_amp], 3)
    rb_flip = _verdicts(rb_ok)["rb.totality"].verdict is H and _verdicts(rb_bad)["rb.totality"].verdict is V

    base = bca_n4()
    loose = base.replace(params=dict(base.params, echo3_once=False))
    bca_ok = combine("send-once", [check_send_once(run(base.replace(seed=s))) for s in range(100)])
    bca_bad = combine("send-once", [check_send_once(run(loose.replace(seed=s))) for s in range(100)])
    bca_flip = bca_ok.verdict is H and bca_bad.verdict is V

    c_ok = combine("c.round-progress", [check_round_progress(run(consensus_layered(s))) for s in range(5)])
    c_bad = combine("c.round-progress",
                    [check_round_progress(run(consensus_layered(s, revive=False))) for s in range(5)])
    c_flip = c_ok.verdict is H and c_bad.verdict is V
    elapsed = time.perf_counter() - t0
    ok = rb_flip and bca_flip and c_flip
    acceptance(8, ok, f"amplification dropped: rb.totality {_verdicts(rb_bad)['rb.totality'].verdict.value}; "
                      f"echo3 guard removed: send-once {bca_bad.verdict.value} "
                      f"({bca_bad.params.get('violated', 0)}/100); "
                      f"revive disabled: c.round-progress {c_bad.verdict.value}", elapsed)
    assert ok


def _replay_all(traces) -> list[str]:
    bad = []
    for t in traces:
        text = t.to_text()
        fresh = run(parse_trace(text).scenario()).to_text()
        if fresh != text:
            bad.append(t.scenario().name)
    return bad


def test_criterion_9_determinism(acceptance):
    t0 = time.perf_counter()
    traces = [*c2_traces(), *c3_traces(), c5_trace(), run(bca_explore()), *c7_traces()]
    diverged = _replay_all(traces)
    # the same check in a fresh interpreter with another hash seed
    env = dict(os.environ, PYTHONHASHSEED="4242")
    code = (
        "import hashlib,sys\n"
        "from asymtrust.fixtures import golden_scenarios\n"
        "from asymtrust.sim.runner import run\n"
        "for k, sc in golden_scenarios().items():\n"
        "    print(k, hashlib.sha256(run(sc).to_text().encode()).hexdigest())\n"
    )
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True).stdout
    fresh = dict(line.split() for line in out.splitlines())
    here = {k: hashlib.sha256(run(sc).to_text().encode()).hexdigest() for k, sc in golden_scenarios().items()}
    pinned = dict(line.split() for line in GOLDEN.read_text().splitlines())
    golden_bad = sorted(k for k in pinned if pinned[k] != here.get(k) or pinned[k] != fresh.get(k))
    elapsed = time.perf_counter() - t0
    same = not diverged and not golden_bad
    detail = (f"{len(traces)} traces replayed byte-identically={not diverged}; {len(pinned)} golden hashes match "
              f"in-process and under PYTHONHASHSEED=4242: {not golden_bad}; a second platform was not available, "
              f"so that part is unverified")
    acceptance(9, None if same else False, detail, elapsed)
    assert same, (diverged[:5], golden_bad)
