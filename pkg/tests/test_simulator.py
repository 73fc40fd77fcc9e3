import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asymtrust import bitsets as bs
from asymtrust.fixtures import bca_explore, bca_n4, coin_n4, consensus_n4, norb1_scenario, rb3_threshold7
from asymtrust.protocols.factory import ProtocolKind
from asymtrust.protocols.messages import Kind, Message
from asymtrust.sim.adversary import script_from_trace
from asymtrust.sim.explorer import ExplosionGuard, exhaustive_schedules, explore, uniform_threshold
from asymtrust.sim.runner import HorizonExhausted, dealer_table, run
from asymtrust.sim.scenario import AdversarySpec, Scenario, Schedule, Strategy, ValidationError, parse_schedule
from asymtrust.sim.scheduler import Scheduler
from asymtrust.sim.trace import COMPLETE, HORIZON, TraceFormatError, parse_trace
from asymtrust.trust import canonical_quorums
from asymtrust.fixtures import threshold


# -- determinism and the trace format -----------------------------------------------------


@pytest.mark.parametrize("make", [lambda: rb3_threshold7(3), lambda: bca_n4(seed=5), lambda: coin_n4(2, rounds=3),
                                  lambda: consensus_n4(7), norb1_scenario])
def test_same_scenario_same_trace(make):
    a, b = run(make()), run(make())
    assert a.to_text() == b.to_text()
    assert parse_trace(a.to_text()).to_text() == a.to_text()


def test_different_seeds_differ():
    assert run(rb3_threshold7(1)).to_text() != run(rb3_threshold7(2)).to_text()


def test_trace_header_carries_scenario():
    sc = bca_n4(seed=4)
    tr = run(sc)
    assert tr.digest == sc.digest()
    assert tr.scenario().digest() == sc.digest()
    assert tr.complete and tr.status == COMPLETE


def test_scenario_json_round_trip():
    for sc in (norb1_scenario(), consensus_n4(3), bca_explore()):
        assert Scenario.from_json(sc.canonical_json()).digest() == sc.digest()


def test_trace_parse_errors():
    good = run(bca_n4()).to_text()
    with pytest.raises(TraceFormatError, match="not an asymtrust trace"):
        parse_trace("junk\n" + good)
    with pytest.raises(TraceFormatError, match="missing header"):
        parse_trace(good.splitlines()[0] + "\n")


def test_trace_bad_event_line_reports_line_number():
    lines = run(bca_n4()).to_text().splitlines()
    lines[7] = "nonsense"
    with pytest.raises(TraceFormatError, match="line 8"):
        parse_trace("\n".join(lines))


def test_horizon_is_reported():
    sc = rb3_threshold7(0).replace(horizon=5)
    tr = run(sc)
    assert tr.status == HORIZON and tr.delivered == 5 and not tr.complete
    with pytest.raises(HorizonExhausted):
        run(sc, strict=True)


def test_schedule_aliases():
    assert parse_schedule("fifo") is Schedule.FIFO_ROUND_ROBIN
    assert parse_schedule("adversarial_delay") is Schedule.ADVERSARIAL_DELAY
    with pytest.raises(ValidationError):
        parse_schedule("lifo")


# -- scheduler -------------------------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(list(Schedule)), st.integers(1, 12))
def test_scheduler_delivers_everything_and_bounds_overtaking(seed, policy, max_delay):
    n, correct = 4, 0b0111
    sch = Scheduler(policy, n, correct, seed, max_delay)
    rng = random.Random(seed)
    fair, order = set(), []
    for _ in range(200):
        if len(sch) and rng.random() < 0.5:
            order.append(sch.pop().seq)
        else:
            src, dst = rng.randrange(n), rng.randrange(n)
            env = sch.post(src, dst, Message(Kind.SEND, src, "m"))
            if env.fair:
                fair.add(env.seq)
    while len(sch):
        order.append(sch.pop().seq)
    assert sorted(order) == list(range(len(order)))
    for k, s in enumerate(order):
        if s in fair:
            assert sum(1 for x in order[:k] if x > s) <= max_delay


def test_fifo_delivers_per_link_in_order():
    sch = Scheduler(Schedule.FIFO_ROUND_ROBIN, 3, 0b111, 0, 100)
    for k in range(5):
        sch.post(0, 1, Message(Kind.SEND, 0, f"m{k}"))
    got = [sch.pop().msg.value for _ in range(5)]
    assert got == [f"m{k}" for k in range(5)]


def test_adversarial_delay_bounds_overtaking():
    sch = Scheduler(Schedule.ADVERSARIAL_DELAY, 4, 0b1111, 0, 4)
    first = sch.post(0, 1, Message(Kind.SEND, 0, "first"))
    for k in range(50):
        sch.post(2, 3, Message(Kind.SEND, 2, f"x{k}"))
    popped = [sch.pop().seq for _ in range(6)]
    assert first.seq in popped


def test_take_specific_message():
    sch = Scheduler(Schedule.RANDOM_SEEDED, 2, 0b11, 0, 10)
    a = sch.post(0, 1, Message(Kind.SEND, 0, "a"))
    b = sch.post(1, 0, Message(Kind.SEND, 1, "b"))
    assert sch.take(b.seq) is b
    assert sch.pending() == [a]


# -- adversaries -------------------------------------------------------------------------------


def test_scripted_adversary_sends_exactly_its_rules():
    tr = run(norb1_scenario())
    adv = [e for e in tr.events if e.kind == "adversary"]
    sc = norb1_scenario()
    assert len(adv) == sum(len(r.to) for r in sc.adversary.script)


def test_script_from_trace_replays_byzantine_sends():
    base = bca_n4(seed=3).replace(faults=bs.from_labels([4]),
                                  adversary=AdversarySpec(Strategy.EQUIVOCATE))
    tr = run(base)
    rules = script_from_trace(tr)
    assert rules and all(r.sender == 3 for r in rules)
    again = run(base.replace(adversary=AdversarySpec(Strategy.SCRIPTED, rules)))
    ours = [(e.t, e.peer, e.text) for e in tr.events if e.kind == "adversary"]
    theirs = [(e.t, e.peer, e.text) for e in again.events if e.kind == "adversary"]
    assert ours == theirs


def test_scripted_rule_must_come_from_faulty_process():
    sc = norb1_scenario().replace(faults=0)
    with pytest.raises((ValueError, ValidationError)):
        run(sc)


# -- coins ------------------------------------------------------------------------------------


def test_dealer_table_follows_seed():
    assert dealer_table(bca_n4()) is None
    a, b = dealer_table(coin_n4(1, rounds=20)), dealer_table(coin_n4(2, rounds=20))
    assert a.coins != b.coins
    assert dealer_table(coin_n4(1, rounds=20)).coins == a.coins


# -- exhaustive exploration ---------------------------------------------------------------------


def test_uniform_threshold_detection():
    assert uniform_threshold(canonical_quorums(threshold(4, 1)))
    from asymtrust.fixtures import fd_system

    assert not uniform_threshold(canonical_quorums(fd_system()))


def test_one_step_schedules_match_distinct_pending_messages():
    sc = bca_explore()
    traces = list(exhaustive_schedules(sc, 1))
    # three proposers each send one echo to all four processes, silent p4 included
    assert len(traces) == 12
    assert {t.status for t in traces} == {HORIZON}
    firsts = {next((e.actor, e.peer) for e in t.events if e.kind == "deliver") for t in traces}
    assert len(firsts) == 12


def test_commuting_deliveries_are_merged():
    # no single echo triggers a send, so any two first deliveries commute: 12 * 11 orders, 66 states
    assert len(list(exhaustive_schedules(bca_explore(), 2))) == 12 * 11 // 2


def test_schedule_cap():
    with pytest.raises(ExplosionGuard):
        list(exhaustive_schedules(bca_explore(), 4, cap=10))


@pytest.mark.parametrize("bound", [4, 8, 12])
def test_counter_abstraction_agrees_with_concrete_exploration(bound):
    sc = bca_explore()
    conc = explore(sc, bound, d=6, symmetry=False, complete_leaves=False)
    abst = explore(sc, bound, d=6, symmetry=True, complete_leaves=False)
    assert abst.symmetry and not conc.symmetry
    assert abst.states <= conc.states
    assert conc.decided_values == abst.decided_values
    assert bool(conc.agreement_violations) == bool(abst.agreement_violations)
    assert bool(conc.binding_violations) == bool(abst.binding_violations)


def test_explore_to_completion_on_split_inputs():
    res = explore(bca_explore((0, 0, 1)), 40)
    assert res.symmetry
    assert not res.agreement_violations and not res.binding_violations
    assert res.undecided_leaves == 0
    assert res.decided_values <= {0, 1, None}


def test_explore_rejects_byzantine_faults():
    sc = bca_explore().replace(adversary=AdversarySpec(Strategy.EQUIVOCATE))
    with pytest.raises(ValueError):
        explore(sc, 4)


def test_explore_state_cap():
    with pytest.raises(ExplosionGuard):
        explore(bca_explore(), 40, cap=50)
