"""Deterministic discrete-event execution of a scenario."""

from __future__ import annotations

from .. import bitsets as bs
from ..protocols.base import ALL
from ..protocols.coin import ReleaseCoin, dealer_setup
from ..protocols.factory import ProtocolKind, protocol_factory
from ..protocols.rb import Broadcast
from ..trust import ExecutionContext
from .adversary import make_adversary
from .scenario import Scenario
from .scheduler import Scheduler
from .trace import (
    ADVERSARY, COMPLETE, DELIVER, DROP, HORIZON, INPUT, OUTPUT, SEND, STOPPED,
    ContextInfo, Event, Trace,
)


class HorizonExhausted(RuntimeError):
    """Raised by ``run(strict=True)``; the incomplete trace is attached."""

    def __init__(self, trace: Trace):
        super().__init__(f"horizon exhausted after {trace.delivered} deliveries, {trace.pending} pending")
        self.trace = trace


def dealer_table(sc: Scenario, qs=None):
    """The coin table a scenario's dealer hands out, or None for coin-free protocols.

    The dealer seed defaults to the scenario seed, so a seed sweep also sweeps coins.
    """
    if sc.protocol not in (ProtocolKind.CC, ProtocolKind.CONSENSUS):
        return None
    qs = qs or sc.validate()
    params = sc.params
    rounds = int(params.get("rounds", 1)) if sc.protocol is ProtocolKind.CC else int(params.get("max_rounds", 30))
    return dealer_setup(qs, rounds, int(params.get("dealer_seed", sc.seed)))


def build_engines(sc: Scenario, qs):
    return protocol_factory(sc.protocol, qs, dict(sc.params), dealer_table(sc, qs))


def normalized_inputs(sc: Scenario) -> dict:
    if sc.protocol in (ProtocolKind.RB3, ProtocolKind.RB_PREMATURE):
        return {i: str(v) for i, v in sc.inputs.items()}
    return {i: int(v) for i, v in sc.inputs.items()}


_FINAL = {
    ProtocolKind.RB3: "dar-deliver",
    ProtocolKind.RB_PREMATURE: "dar-deliver",
    ProtocolKind.BCA: "bca-decide",
    ProtocolKind.CONSENSUS: "c-decide",
    ProtocolKind.CC: "output-coin",
}


def _input_text(ev) -> str:
    if isinstance(ev, Broadcast):
        return f"dar-broadcast v={ev.payload}"
    if isinstance(ev, ReleaseCoin):
        return f"release-coin k={ev.round}"
    name = "bca-propose" if type(ev).__name__ == "Propose" else "c-propose"
    return f"{name} v={ev.value}"


class Simulation:
    """One execution in progress. ``run`` drives it to the end."""

    def __init__(self, sc: Scenario):
        self.sc = sc
        self.qs = sc.validate()
        self.es = build_engines(sc, self.qs)
        self.ec = ExecutionContext.derive(self.qs, sc.fps, sc.faults)
        self.correct = self.ec.correct
        self.n = sc.n
        self.adv = make_adversary(sc, self.es)
        # faulty processes listed as "silent" send nothing whatever the strategy
        self.muted = bs.from_labels(int(x) for x in sc.adversary.params.get("silent", ()))
        self.sched = Scheduler(sc.schedule, self.n, self.correct, sc.seed, sc.fairness_bound)
        meta = dict(self.es.meta)
        meta["adversary"] = self.adv.describe()
        meta["max_delay"] = sc.fairness_bound
        self.trace = Trace(sc.canonical_json(), sc.digest(), ContextInfo.from_execution(self.ec), meta)
        self.t = 0
        self.k = 0
        self.final = _FINAL[sc.protocol]
        self.watch = 0
        if sc.stop_depth is not None:
            self.watch = self.ec.depth_class(sc.stop_depth)
        self.done = 0
        self.cc_rounds = int(self.es.meta.get("rounds", 1))

    # -- recording ------------------------------------------------------------

    def _ev(self, kind, actor, text="", msg=None, peer=None, mid=None, note="") -> None:
        self.trace.events.append(Event(self.t, self.k, kind, actor, text, msg, peer, mid, note))
        self.k += 1

    def _post(self, src: int, dst: int, msg, kind: str, lazy: bool = False) -> None:
        targets = range(self.n) if dst == ALL else (dst,)
        text = msg.encode()
        for d in targets:
            env = self.sched.post(src, d, msg, lazy)
            self._ev(kind, src, text, msg, d, env.seq)

    def _apply(self, i: int, step) -> None:
        for d, m in step.sends:
            self._post(i, d, m, SEND)
        for o in step.outputs:
            self._ev(OUTPUT, i, o.encode(), None)
            if o.name == self.final and (self.sc.protocol is not ProtocolKind.CC or o.round == self.cc_rounds):
                self.done |= 1 << i

    def _adversary(self, actions) -> None:
        for src, dst, msg in actions:
            if self.muted >> src & 1:
                continue
            self._post(src, dst, msg, ADVERSARY, self.adv.lazy)

    # -- driving --------------------------------------------------------------

    def start(self) -> None:
        inputs = normalized_inputs(self.sc)
        for i in bs.members(self.correct):
            ev = self.es.start_event(i, inputs)
            if ev is None:
                continue
            self._ev(INPUT, i, _input_text(ev))
            self._apply(i, self.es.engines[i].step(ev))
        self._adversary(self.adv.start())
        self._adversary(self.adv.on_time(0))

    def deliver(self, env) -> None:
        self.t += 1
        self.k = 0
        text = env.msg.encode()
        self._ev(DELIVER, env.dst, text, env.msg, env.src, env.seq)
        if self.correct >> env.dst & 1:
            step = self.es.engines[env.dst].step(env.msg)
            for note in step.notes:
                self._ev(DROP, env.dst, text, env.msg, env.src, env.seq, note.replace(" ", "_"))
            self._apply(env.dst, step)
        else:
            self._adversary(self.adv.on_deliver(env.dst, env.msg))
        self._adversary(self.adv.on_time(self.t))

    def stopped(self) -> bool:
        return bool(self.watch) and self.done & self.watch == self.watch

    def finish(self, status: str) -> Trace:
        self.trace.status = status
        self.trace.delivered = self.t
        self.trace.pending = len(self.sched)
        return self.trace


def run(sc: Scenario, *, strict: bool = False) -> Trace:
    """Execute ``sc`` and return its trace; identical inputs give identical traces."""
    sim = Simulation(sc)
    sim.start()
    status = COMPLETE
    while True:
        if sim.stopped():
            status = STOPPED
            break
        if not len(sim.sched):
            break
        if sim.t >= sc.horizon:
            status = HORIZON
            break
        sim.deliver(sim.sched.pop())
    trace = sim.finish(status)
    if strict and status == HORIZON:
        raise HorizonExhausted(trace)
    return trace
