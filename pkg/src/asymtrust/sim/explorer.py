"""Exhaustive enumeration of delivery orders for small scenarios.

The explorer walks every choice of which in-flight message to deliver next,
depth-first, up to ``bound`` deliveries. Global states (every correct
engine's state plus the multiset of in-flight messages, plus the number of
deliveries so far) are deduplicated, so each distinct state is expanded once.
Faulty processes must be silent here; messages addressed to them are
discarded at send time since nothing can observe their delivery.

When every process's quorums are exactly the sets of one fixed size, a
quorum or kernel test depends only on how many distinct senders were seen,
and correct senders emit each message once. The explorer then keys states
on per-process counters instead of sender masks, with in-flight messages
stripped of their sender, and treats processes that are alike (same depth
class) as interchangeable. That quotient is exact for these systems
(it is the usual counter abstraction for threshold protocols), and it is
what makes depth-40 enumeration on four processes tractable.

For crusader agreement the explorer also computes, per state, the set of
non-bottom values that depth-d processes decide in some extension; this is
what the binding property quantifies over.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Iterator

from .. import bitsets as bs
from ..protocols.base import ALL
from ..protocols.factory import ProtocolKind
from ..protocols.messages import with_sender
from .runner import Simulation
from .scenario import Scenario, Strategy
from .trace import COMPLETE, HORIZON, Trace


class ExplosionGuard(RuntimeError):
    """The number of distinct states exceeded the configured cap."""


_UNSET = object()


def uniform_threshold(qs) -> bool:
    """True if every process's quorums are all subsets of one common size."""
    full = bs.full(qs.n)
    sizes = {bs.size(q) for row in qs.quorums for q in row}
    if len(sizes) != 1:
        return False
    (q,) = sizes
    every = set(bs.subsets_of_size(full, q))
    return all(set(row) == every for row in qs.quorums)


_ERASED: dict = {}


def _erase(msg):
    e = _ERASED.get(msg)
    if e is None:
        e = (msg.kind.value, -1 if msg.value is None else msg.value, msg.counter or 0, msg.round or 0,
             msg.quorum or 0)
        _ERASED[msg] = e
    return e


def _decision(kind: ProtocolKind, eng):
    if kind is ProtocolKind.BCA:
        return eng.decided if eng.has_decided else _UNSET
    if kind is ProtocolKind.CONSENSUS:
        return eng.decided[0] if eng.decided is not None else _UNSET
    if kind in (ProtocolKind.RB3, ProtocolKind.RB_PREMATURE):
        return "delivered" if eng.delivered else _UNSET
    raise ValueError(f"exploration does not support {kind.value}")


@dataclass
class BindingViolation:
    path: tuple  # deliveries leading to the first-decision state
    first: dict  # process -> decided value at that state
    reachable: frozenset  # non-bottom values decided in some extension


@dataclass
class ExplorationResult:
    d: float
    bound: int
    states: int = 0
    leaves: int = 0
    truncated_leaves: int = 0  # leaves cut by the bound (before completion)
    agreement_violations: list = field(default_factory=list)
    binding_checks: int = 0
    binding_violations: list[BindingViolation] = field(default_factory=list)
    undecided_leaves: int = 0  # completed leaves where some depth-d process never decided
    decided_values: set = field(default_factory=set)  # every value decided by a depth-d process
    complete_leaves: bool = True
    symmetry: bool = False  # states keyed by the counter abstraction
    inputs: dict = field(default_factory=dict)  # proposals of the correct processes


class _Explorer:
    """Concrete exploration: states keyed on full engine state and in-flight multiset."""

    def __init__(self, sc: Scenario, bound: int, d, cap: int, complete_leaves: bool, completion_limit: int,
                 symmetry: bool = False):
        if sc.adversary.strategy is not Strategy.SILENT or sc.adversary.script:
            raise ValueError("exhaustive exploration supports only silent faulty processes")
        sim = Simulation(sc)
        sim.start()
        self.kind = sc.protocol
        self.n = sc.n
        self.qs = sim.qs
        self.correct = sim.correct
        self.depth_set = sim.ec.depth_class(d)
        self.procs = tuple(bs.members(self.correct))
        self.engines0 = tuple(sim.es.engines[i] for i in self.procs)
        self.slot = {p: k for k, p in enumerate(self.procs)}
        self.bound = bound
        self.cap = cap
        self.complete_leaves = complete_leaves
        self.completion_limit = completion_limit
        self.memo: dict = {}
        self.result = ExplorationResult(d=d, bound=bound, complete_leaves=complete_leaves, symmetry=symmetry)
        self.result.inputs = {p: sc.inputs[p] for p in self.procs if p in sc.inputs}
        self.path: list = []
        for e in self.engines0:
            self._stamp(e)
        self.pending0 = self._initial_pending(
            [(env.src, env.dst, env.msg) for env in sim.sched.pending() if self.correct >> env.dst & 1]
        )

    # -- state representation ---------------------------------------------------

    def _initial_pending(self, items):
        pending: dict = {}
        for item in items:
            pending[item] = pending.get(item, 0) + 1
        return pending

    def _stamp(self, eng) -> None:
        # engines are never mutated after this point, so their key can be cached
        eng._xkey = eng.key()

    def _targets(self, d):
        return self.procs if d == ALL else ((d,) if self.correct >> d & 1 else ())

    def _deliver(self, engines, pending, item):
        src, dst, msg = item
        k = self.slot[dst]
        eng = engines[k].clone()
        step = eng.step(msg)
        self._stamp(eng)
        new_engines = engines[:k] + (eng,) + engines[k + 1 :]
        new_pending = dict(pending)
        c = new_pending[item]
        if c == 1:
            del new_pending[item]
        else:
            new_pending[item] = c - 1
        for d, m in step.sends:
            for t in self._targets(d):
                it = (dst, t, m)
                new_pending[it] = new_pending.get(it, 0) + 1
        return new_engines, new_pending

    @staticmethod
    def _order(item):
        src, dst, msg = item
        return (dst, src, _erase(msg))

    def _choices(self, engines, pending):
        return sorted(pending, key=self._order)

    def _key(self, engines, pending, depth):
        return (depth, tuple(e._xkey for e in engines), frozenset(pending.items()))

    def _label(self, item):
        return item

    # -- search -----------------------------------------------------------------

    def _decisions(self, engines) -> dict:
        out = {}
        for k, p in enumerate(self.procs):
            if self.depth_set >> p & 1:
                v = _decision(self.kind, engines[k])
                if v is not _UNSET:
                    out[p] = v
        return out

    def _complete(self, engines, pending):
        """Deterministic first-choice run to quiescence from a cut leaf."""
        steps = 0
        while steps < self.completion_limit:
            choices = self._choices(engines, pending)
            if not choices:
                break
            engines, pending = self._deliver(engines, pending, choices[0])
            steps += 1
        return engines, pending

    @staticmethod
    def _non_bot(decisions: dict) -> frozenset:
        return frozenset(v for v in decisions.values() if v is not None)

    def visit(self, engines, pending, depth: int, parent_decided: bool) -> frozenset:
        key = self._key(engines, pending, depth)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        res = self.result
        res.states += 1
        if res.states > self.cap:
            raise ExplosionGuard(f"more than {self.cap} distinct states")
        decisions = self._decisions(engines)
        vals = self._non_bot(decisions)
        res.decided_values.update(decisions.values())
        if len(vals) > 1:
            res.agreement_violations.append((tuple(self.path), dict(decisions)))
        choices = self._choices(engines, pending) if depth < self.bound else None
        if not choices:
            res.leaves += 1
            reach = vals
            if choices is None and self._choices(engines, pending):
                res.truncated_leaves += 1
                if self.complete_leaves:
                    fin_engines, fin_pending = self._complete(engines, pending)
                    fin = self._decisions(fin_engines)
                    res.decided_values.update(fin.values())
                    reach = reach | self._non_bot(fin)
                    if len(self._non_bot(fin)) > 1:
                        res.agreement_violations.append((tuple(self.path) + ("<completion>",), fin))
                    if not self._choices(fin_engines, fin_pending) and len(fin) < bs.size(self.depth_set):
                        res.undecided_leaves += 1
            elif len(decisions) < bs.size(self.depth_set):
                res.undecided_leaves += 1
        else:
            reach = vals
            for item in choices:
                self.path.append(self._label(item))
                e2, p2 = self._deliver(engines, pending, item)
                reach = reach | self.visit(e2, p2, depth + 1, bool(decisions))
                self.path.pop()
        if decisions and not parent_decided:
            res.binding_checks += 1
            if len(reach) > 1:
                res.binding_violations.append(BindingViolation(tuple(self.path), dict(decisions), reach))
        self.memo[key] = reach
        return reach


def _bump(box: tuple, e, delta: int) -> tuple:
    """Add ``delta`` copies of ``e`` to a sorted (message, count) tuple."""
    d = dict(box)
    c = d.get(e, 0) + delta
    if c:
        d[e] = c
    else:
        del d[e]
    return tuple(sorted(d.items()))


class _CounterExplorer(_Explorer):
    """Counter abstraction with process symmetry for uniform threshold systems.

    A slot's behaviour depends only on how many distinct senders it has heard
    per message (capped at the quorum size) and on how many messages of each
    sender-free form are addressed to it. A delivery is replayed with the
    lowest sender the slot has not counted yet, so sender masks stay
    canonical and a slot's transition is a function of its counter key and
    the message; those transitions are cached. Slots of one depth class with
    equal keys and inboxes are interchangeable: the global key is the sorted
    tuple of slot keys and only one of several equal slots is expanded.
    """

    def __init__(self, sc, bound, d, cap, complete_leaves, completion_limit):
        qs = sc.validate()
        self.limit = bs.size(qs.quorums[0][0])
        self.templates: dict = {}
        self.trans: dict = {}
        super().__init__(sc, bound, d, cap, complete_leaves, completion_limit, symmetry=True)
        self.flags = tuple(self.depth_set >> p & 1 for p in self.procs)
        self.width = len(self.procs)

    def _stamp(self, eng) -> None:
        eng._xkey = eng.count_key(self.limit)

    def _erase(self, msg):
        e = _erase(msg)
        self.templates.setdefault(e, msg)
        return e

    def _initial_pending(self, items):
        boxes: list[tuple] = [() for _ in self.procs]
        for src, dst, msg in items:
            k = self.slot[dst]
            boxes[k] = _bump(boxes[k], self._erase(msg), 1)
        return tuple(boxes)

    def _step(self, eng, e):
        hit = self.trans.get((eng._xkey, e))
        if hit is not None:
            return hit
        msg = self.templates[e]
        mask = eng.heard(msg)
        sender = (~mask & (mask + 1)).bit_length() - 1
        if sender >= self.n:
            sender = 0  # every sender counted already; the count is saturated anyway
        nxt = eng.clone()
        step = nxt.step(with_sender(msg, sender))
        self._stamp(nxt)
        sends = tuple((d, self._erase(m)) for d, m in step.sends)
        hit = self.trans[(eng._xkey, e)] = (nxt, sends)
        return hit

    def _deliver(self, engines, pending, item):
        k, e = item
        nxt, sends = self._step(engines[k], e)
        boxes = list(pending)
        boxes[k] = _bump(boxes[k], e, -1)
        for d, em in sends:
            if d == ALL:
                for j in range(self.width):
                    boxes[j] = _bump(boxes[j], em, 1)
            elif self.correct >> d & 1:
                j = self.slot[d]
                boxes[j] = _bump(boxes[j], em, 1)
        return engines[:k] + (nxt,) + engines[k + 1 :], tuple(boxes)

    def _key(self, engines, pending, depth):
        flags = self.flags
        return (depth, tuple(sorted((flags[k], engines[k]._xkey, pending[k]) for k in range(self.width))))

    def _choices(self, engines, pending):
        seen, out = set(), []
        for k in range(self.width):
            sk = (self.flags[k], engines[k]._xkey, pending[k])
            if sk in seen:
                continue
            seen.add(sk)
            out.extend((k, e) for e, _ in pending[k])
        return out

    def _label(self, item):
        k, e = item
        return (self.procs[k], self.templates[e].encode())


def explore(sc: Scenario, bound: int = 40, d=6, *, cap: int = 5_000_000, complete_leaves: bool = True,
            completion_limit: int = 10_000, symmetry: bool | None = None) -> ExplorationResult:
    """Enumerate all delivery orders of ``sc`` up to ``bound`` deliveries.

    Raises ExplosionGuard once more than ``cap`` distinct states are seen.
    """
    qs = sc.validate()
    can = uniform_threshold(qs) and sc.protocol is ProtocolKind.BCA
    if symmetry and not can:
        raise ValueError("the counter abstraction needs crusader agreement on a uniform threshold system")
    if can if symmetry is None else symmetry:
        ex = _CounterExplorer(sc, bound, d, cap, complete_leaves, completion_limit)
    else:
        ex = _Explorer(sc, bound, d, cap, complete_leaves, completion_limit)
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 4 * bound + 1000))
    try:
        ex.visit(ex.engines0, ex.pending0, 0, False)
    finally:
        sys.setrecursionlimit(limit)
    return ex.result


def exhaustive_schedules(sc: Scenario, bound: int, *, cap: int = 100_000) -> Iterator[Trace]:
    """Yield one trace per distinct delivery order of length up to ``bound``.

    Prefixes that reach an already-seen global state are not extended again,
    so each distinct state's continuations appear once. The traces carry the
    usual header; a trace cut by the bound has status ``horizon``.
    """
    seen: set = set()
    count = [0]
    procs_sim = Simulation(sc)
    procs_sim.start()

    def rec(sim: Simulation, depth: int) -> Iterator[Trace]:
        pend = sim.sched.pending()
        choices = []
        labels = set()
        for env in pend:
            lab = (env.src, env.dst, env.msg)
            if lab not in labels:
                labels.add(lab)
                choices.append(env.seq)
        if not choices or depth >= bound:
            count[0] += 1
            if count[0] > cap:
                raise ExplosionGuard(f"more than {cap} schedules")
            yield sim.finish(COMPLETE if not choices else HORIZON)
            return
        for seq in choices:
            child = _fork(sim)
            child.deliver(child.sched.take(seq))
            key = (depth + 1, tuple(e.key() for e in child.es.engines),
                   frozenset((e.src, e.dst, e.msg) for e in child.sched.pending()),
                   len(child.sched))
            if key in seen:
                continue
            seen.add(key)
            yield from rec(child, depth + 1)

    yield from rec(procs_sim, 0)


def _fork(sim: Simulation) -> Simulation:
    import copy

    new = copy.copy(sim)
    new.es = copy.copy(sim.es)
    new.es.engines = [e.clone() for e in sim.es.engines]
    new.sched = copy.deepcopy(sim.sched)
    new.trace = Trace(sim.trace.scenario_json, sim.trace.digest, sim.trace.context, dict(sim.trace.meta),
                      list(sim.trace.events))
    if hasattr(sim.adv, "fired"):
        new.adv = copy.copy(sim.adv)
        new.adv.fired = list(sim.adv.fired)
    elif type(sim.adv).__name__ != "Silent":
        new.adv = copy.deepcopy(sim.adv)
    return new


__all__ = ["ExplorationResult", "ExplosionGuard", "explore", "exhaustive_schedules"]
