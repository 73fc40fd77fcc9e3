"""Checkers on real traces, on hand-edited traces, and on the protocol mutations."""

import pytest

from asymtrust.fixtures import (
    bca_n4,
    coin_n4,
    consensus_layered,
    consensus_n4,
    norb1_scenario,
    rb_selective,
    threshold,
)
from asymtrust.properties import (
    MAX_WITNESSES,
    BindingNeedsEnumeration,
    Report,
    Verdict,
    Witness,
    WrongProtocol,
    check_all,
    check_bca,
    check_coin,
    check_consensus,
    check_d1echo,
    check_monotonicity,
    check_one_echo3,
    check_rb,
    check_round_progress,
    check_send_once,
    combine,
    exit_code,
    parse_record,
)
from asymtrust.protocols.factory import ProtocolKind
from asymtrust.sim.runner import run
from asymtrust.sim.scenario import Scenario
from asymtrust.sim.trace import parse_trace

H, V, VAC, INC = Verdict.HOLDS, Verdict.VIOLATED, Verdict.VACUOUS, Verdict.INCONCLUSIVE


def rb_n4(seed=1, sender=0):
    return Scenario(fps=threshold(4, 1), faults=0b1000, protocol=ProtocolKind.RB3, params={"sender": sender},
                    inputs={sender: "m"}, seed=seed)


def verdicts(reports):
    return {r.prop: r.verdict for r in reports}


def edit(trace, fn):
    """Apply ``fn`` to the event lines of a trace and parse the result."""
    lines = trace.to_text().splitlines()
    head = [x for x in lines if x.startswith("# ")]
    body = [x for x in lines if not x.startswith("# ")]
    body = fn(body)
    return parse_trace("\n".join(head[:-1] + body + head[-1:]) + "\n")


def outputs_named(body, name):
    return [k for k, x in enumerate(body) if x.split("\t")[1] == "output" and x.split("\t")[3].startswith(name)]


def set_status(trace, status):
    text = trace.to_text().replace("status=complete", f"status={status}").replace("status=stopped", f"status={status}")
    return parse_trace(text)


# -- reliable broadcast -----------------------------------------------------------------


def test_rb_holds_on_clean_run():
    assert set(verdicts(check_rb(run(rb_n4()))).values()) == {H}


def test_rb_changed_payload_breaks_consistency_and_validity():
    def fn(body):
        k = outputs_named(body, "dar-deliver")[1]
        body[k] = body[k].replace("v=m", "v=z")
        return body

    v = verdicts(check_rb(edit(run(rb_n4()), fn)))
    assert v["rb.consistency"] is V and v["rb.validity"] is V and v["rb.integrity"] is V
    assert v["rb.totality"] is H


def test_rb_second_delivery_breaks_integrity():
    def fn(body):
        k = outputs_named(body, "dar-deliver")[0]
        return body + [body[k].replace(body[k].split("\t")[0], "999.0", 1)]

    rep = {r.prop: r for r in check_rb(edit(run(rb_n4()), fn))}
    assert rep["rb.integrity"].verdict is V
    assert "999.0 output" in rep["rb.integrity"].witnesses[0].second


def test_rb_missing_delivery_is_violation_only_on_complete_traces():
    def fn(body):
        k = outputs_named(body, "dar-deliver")[2]
        return body[:k] + body[k + 1:]

    cut = edit(run(rb_n4()), fn)
    rep = {r.prop: r for r in check_rb(cut)}
    assert rep["rb.totality"].verdict is V and rep["rb.validity"].verdict is V
    assert rep["rb.totality"].witnesses[0].second.startswith("end@208 p")
    horizon = set_status(cut, "horizon")
    v = verdicts(check_rb(horizon))
    assert v["rb.totality"] is INC and v["rb.validity"] is INC


def test_norb1_flips_between_executions():
    bad = {r.prop: r for r in check_rb(run(norb1_scenario()), d=1)}
    assert bad["rb.totality"].verdict is V
    assert str(bad["rb.totality"].witnesses[0]) == "33.1 output p2 dar-deliver v=0 ; end@34 p1 no dar-deliver"
    assert verdicts(check_rb(run(norb1_scenario(variant="E")), d=1))["rb.totality"] is H
    assert set(verdicts(check_rb(run(norb1_scenario(ProtocolKind.RB3)), d=3)).values()) == {VAC}


def test_faulty_sender_makes_validity_hold():
    rep = check_rb(run(norb1_scenario()), d=1)
    assert rep[0].verdict is H and rep[0].note == "sender faulty"


def test_d1echo_on_honest_and_scripted_runs():
    assert check_d1echo(run(rb_n4())).verdict is H
    assert check_d1echo(run(norb1_scenario(ProtocolKind.RB3))).verdict in (H, VAC)


def test_monotonicity():
    traces = [run(rb_n4(s)) for s in range(3)]
    assert check_monotonicity(traces, 1, 3).verdict is H
    premature = [run(norb1_scenario())]
    # RB[1] fails on E', so the implication is vacuous
    assert check_monotonicity(premature, 1, 2).verdict is VAC
    with pytest.raises(ValueError):
        check_monotonicity(traces, 3, 3)


def test_amplification_mutation_breaks_totality():
    ok = verdicts(check_rb(run(rb_selective(ProtocolKind.RB3)), d=3))
    bad = verdicts(check_rb(run(rb_selective(ProtocolKind.RB_PREMATURE)), d=3))
    assert ok["rb.totality"] is H and bad["rb.totality"] is V


# -- send-once --------------------------------------------------------------------------------


def test_send_once_catches_duplicated_send():
    tr = run(bca_n4(seed=2))
    assert check_send_once(tr).verdict is H

    def fn(body):
        k = next(k for k, x in enumerate(body) if "\tsend\t" in x and "BCA_ECHO2" in x)
        return body + [body[k].replace(body[k].split("\t")[0], "9999.0", 1)]

    rep = check_send_once(edit(tr, fn))
    assert rep.verdict is V and "9999.0" in rep.witnesses[0].second


def test_echo3_guard_mutation_breaks_send_once():
    base = bca_n4(seed=0)
    loose = base.replace(params=dict(base.params, echo3_once=False))
    flips = [check_send_once(run(loose.replace(seed=s))).verdict for s in range(40)]
    assert V in flips
    assert all(check_send_once(run(base.replace(seed=s))).verdict is H for s in range(40))


# -- coin -------------------------------------------------------------------------------------


def test_coin_holds_and_detects_tampering():
    tr = run(coin_n4(0, rounds=4))
    assert set(verdicts(check_coin(tr)).values()) <= {H}

    def fn(body):
        k = outputs_named(body, "output-coin")[0]
        v = body[k].split("v=")[1][0]
        body[k] = body[k].replace(f"v={v}", f"v={1 - int(v)}")
        return body

    v = verdicts(check_coin(edit(tr, fn)))
    assert v["cc.identity"] is V and v["cc.matching"] is V


def test_coin_output_before_release_breaks_unpredictability():
    tr = run(coin_n4(0, rounds=1))

    def fn(body):
        k = outputs_named(body, "output-coin")[0]
        line = body.pop(k)
        return [line.replace(line.split("\t")[0], "0.0", 1)] + body

    assert verdicts(check_coin(edit(tr, fn)))["cc.unpredictability"] is V


def test_no_bias_over_many_rounds():
    rep = {r.prop: r for r in check_coin(run(coin_n4(0, rounds=400)))}
    assert rep["cc.no-bias"].verdict is H
    assert rep["cc.no-bias"].params["samples"] == 400


# -- crusader agreement -------------------------------------------------------------------------


def test_bca_clean_and_tampered():
    tr = run(bca_n4((0, 0, 0, 0), seed=1))
    assert set(verdicts(check_bca(tr)).values()) == {H}
    assert check_one_echo3(tr).verdict is H

    def fn(body):
        k = outputs_named(body, "bca-decide")[0]
        body[k] = body[k].replace("v=0", "v=1")
        return body

    v = verdicts(check_bca(edit(tr, fn)))
    assert v["bca.agreement"] is V and v["bca.validity"] is V


def test_bca_binding_needs_exploration():
    with pytest.raises(BindingNeedsEnumeration):
        check_bca(run(bca_n4()), binding=True)


# -- consensus ----------------------------------------------------------------------------------


def test_consensus_ensemble():
    traces = [run(consensus_n4(s)) for s in range(6)]
    v = {r.prop: r for r in check_consensus(traces, round_band=(1.0, 10.0))}
    assert v["c.agreement"].verdict is H and v["c.validity"].verdict is H
    assert v["c.termination"].verdict is H and v["c.termination"].params["decided"] == 6
    assert v["c.rounds"].verdict is H
    narrow = {r.prop: r.verdict for r in check_consensus(traces, round_band=(0.0, 0.5))}
    assert narrow["c.rounds"] is V


def test_revive_mutation_breaks_round_progress():
    good = run(consensus_layered(0))
    bad = run(consensus_layered(0, revive=False))
    assert check_round_progress(good).verdict is H
    rep = check_round_progress(bad)
    assert rep.verdict is V and "never enters round" in rep.witnesses[0].second


def test_wrong_protocol_is_rejected():
    with pytest.raises(WrongProtocol):
        check_rb(run(bca_n4()))
    with pytest.raises(WrongProtocol):
        check_consensus([run(rb_n4())])


# -- reports ------------------------------------------------------------------------------------


def test_record_round_trip():
    r = Report("x.y", V, (Witness("1.2 output p1 a", "end@3 p2 no a"),), {"d": 3}, "note here")
    back = parse_record(r.record())
    assert back.prop == "x.y" and back.verdict is V and back.witnesses == r.witnesses
    assert back.params == {"d": "3"} and back.note == "note here"


def test_violation_needs_witness():
    with pytest.raises(ValueError):
        Report("p", V)


@pytest.mark.parametrize("parts,expected", [
    ([H, VAC], H), ([VAC, VAC], VAC), ([H, INC], INC), ([INC, V, H], V),
])
def test_combine_precedence(parts, expected):
    reps = [Report("p", v, (Witness("a", "b"),) if v is V else ()) for v in parts]
    assert combine("p", reps).verdict is expected
    assert exit_code(reps) == (1 if V in parts else 0)


def test_combine_caps_witnesses():
    reps = [Report("p", V, (Witness(f"a{i}", "b"),)) for i in range(25)]
    out = combine("p", reps)
    assert len(out.witnesses) == MAX_WITNESSES and out.params["witnesses"] == 25
    assert out.witnesses[3].first == "[3] a3"


def test_check_all_dispatch():
    props = [r.prop for r in check_all([run(bca_n4())])]
    assert props == ["bca.termination", "bca.validity", "bca.agreement", "bca.one-echo3", "send-once"]
    props = [r.prop for r in check_all([run(consensus_n4(0))])]
    assert "c.round-progress" in props and "c.round-causality" in props
    assert check_all([]) == []
