"""Byzantine strategies. They control only the faulty processes' sends.

A faulty process has no honest engine of its own; whatever it sends is
decided here. Correct processes' messages and dealer shares cannot be forged:
messages are stamped with the sender that actually emits them, and coin
shares are checked against the dealer table by the receivers.
"""

from __future__ import annotations

import random

from .. import bitsets as bs
from ..protocols.base import ALL
from ..protocols.factory import EngineSet, ProtocolKind
from ..protocols.messages import Kind, Message, decode
from .scenario import Rule, Scenario, Strategy

Action = tuple[int, int, Message]  # (faulty sender, recipient or ALL, message)


class Adversary:
    lazy = False

    def __init__(self, sc: Scenario, es: EngineSet):
        self.sc = sc
        self.es = es
        self.faulty = tuple(bs.members(sc.faults))

    def start(self) -> list[Action]:
        return []

    def on_time(self, t: int) -> list[Action]:
        return []

    def on_deliver(self, dst: int, msg: Message) -> list[Action]:
        return []

    def describe(self) -> str:
        return self.sc.adversary.strategy.value


class Silent(Adversary):
    pass


class DelayMax(Adversary):
    """Faulty processes follow the protocol but every message they send is held
    back until nothing else is in flight."""

    lazy = True

    def __init__(self, sc, es):
        super().__init__(sc, es)
        self.engines = {i: es.make(i) for i in self.faulty}

    def start(self):
        out = []
        for i in self.faulty:
            ev = self.es.start_event(i, _inputs(self.sc))
            if ev is not None:
                out.extend((i, d, m) for d, m in self.engines[i].step(ev).sends)
        return out

    def on_deliver(self, dst, msg):
        return [(dst, d, m) for d, m in self.engines[dst].step(msg).sends]


class Equivocate(Adversary):
    """Each faulty process runs two honest copies with conflicting inputs and
    shows copy A to one seeded half of the system and copy B to the other."""

    def __init__(self, sc, es):
        super().__init__(sc, es)
        rng = random.Random(f"equivocate:{sc.seed}")
        order = list(range(sc.n))
        rng.shuffle(order)
        half = max(1, len(order) // 2)
        self.groups = (frozenset(order[:half]), frozenset(order[half:]))
        self.shadows = {i: (es.make(i), es.make(i)) for i in self.faulty}

    def describe(self):
        a, b = (bs.fmt(bs.mask(g)) for g in self.groups)
        return f"EQUIVOCATE groups={a}|{b}"

    def _alt_inputs(self):
        k = self.es.kind
        base = _inputs(self.sc)
        params = self.sc.adversary.params
        if k in (ProtocolKind.RB3, ProtocolKind.RB_PREMATURE):
            sender = self.es.meta["sender"]
            m = str(base.get(sender, "m"))
            alt = str(params.get("alt", m + "x"))
            return {sender: m}, {sender: alt}, alt
        if k in (ProtocolKind.BCA, ProtocolKind.CONSENSUS):
            a = {i: 0 for i in range(self.sc.n)}
            b = {i: 1 for i in range(self.sc.n)}
            return a, b, None
        return base, base, None

    def _route(self, copy: int, src: int, sends) -> list[Action]:
        out = []
        group = self.groups[copy]
        for d, m in sends:
            targets = sorted(group) if d == ALL else ([d] if d in group else [])
            out.extend((src, t, m) for t in targets)
        return out

    def start(self):
        ins_a, ins_b, alt = self._alt_inputs()
        out = []
        for i in self.faulty:
            for copy, ins in enumerate((ins_a, ins_b)):
                eng = self.shadows[i][copy]
                ev = self.es.start_event(i, ins)
                if ev is not None:
                    out.extend(self._route(copy, i, eng.step(ev).sends))
                elif copy == 1 and alt is not None:
                    # a faulty echoer pretends it heard the alternative payload
                    primed = Message(Kind.SEND, self.es.meta["sender"], alt)
                    out.extend(self._route(copy, i, eng.step(primed).sends))
        return out

    def on_deliver(self, dst, msg):
        out = []
        for copy, eng in enumerate(self.shadows[dst]):
            out.extend(self._route(copy, dst, eng.step(msg).sends))
        return out


class Scripted(Adversary):
    """Ordered trigger/action rules; every rule fires at most once."""

    def __init__(self, sc, es):
        super().__init__(sc, es)
        self.rules = list(sc.adversary.script)
        self.fired = [False] * len(self.rules)
        for r in self.rules:
            if not sc.faults >> r.sender & 1:
                raise ValueError(f"scripted rule sends as correct process p{r.sender + 1}")
        self.lazy = bool(sc.adversary.params.get("lazy", False))

    def _fire(self, idx: int, rule: Rule) -> list[Action]:
        self.fired[idx] = True
        msg = decode(rule.send, rule.sender)
        return [(rule.sender, d, msg) for d in rule.to]

    def start(self):
        out = []
        for idx, r in enumerate(self.rules):
            if r.trigger == "start":
                out.extend(self._fire(idx, r))
        return out

    def on_time(self, t):
        out = []
        for idx, r in enumerate(self.rules):
            if not self.fired[idx] and r.trigger == "time" and r.time <= t:
                out.extend(self._fire(idx, r))
        return out

    def on_deliver(self, dst, msg):
        out = []
        enc = None
        for idx, r in enumerate(self.rules):
            if self.fired[idx] or r.trigger != "deliver" or r.at != dst:
                continue
            if r.on_from is not None and r.on_from != msg.sender:
                continue
            enc = enc or msg.encode()
            if enc == r.on:
                out.extend(self._fire(idx, r))
        return out


_STRATEGIES = {
    Strategy.SILENT: Silent,
    Strategy.EQUIVOCATE: Equivocate,
    Strategy.DELAY_MAX: DelayMax,
    Strategy.SCRIPTED: Scripted,
}


def make_adversary(sc: Scenario, es: EngineSet) -> Adversary:
    return _STRATEGIES[sc.adversary.strategy](sc, es)


def _inputs(sc: Scenario) -> dict:
    return dict(sc.inputs)


def script_from_trace(trace) -> tuple[Rule, ...]:
    """Rules that replay every faulty send of ``trace`` at the same logical time."""
    from .trace import ADVERSARY

    rules = []
    for e in trace.events:
        if e.kind == ADVERSARY:
            rules.append(Rule(e.actor, e.text, (e.peer,), "time", time=e.t))
    return tuple(rules)
