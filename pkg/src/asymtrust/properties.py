"""Post-hoc property checkers over traces and trace ensembles.

Every checker quantifies over the depth classes stored in the trace header,
which the simulator computed with the trust-core depth map; nothing here
recomputes depths. Liveness properties ("eventually") are judged at the end
of a trace that quiesced or met its stop condition. A trace cut by the
horizon yields INCONCLUSIVE for them, never VIOLATED.
"""

from __future__ import annotations

import enum
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import bitsets as bs
from .protocols.factory import ProtocolKind
from .sim.explorer import ExplorationResult
from .sim.trace import ADVERSARY, DELIVER, INPUT, OUTPUT, SEND, Event, Trace


class Verdict(str, enum.Enum):
    HOLDS = "HOLDS"
    VIOLATED = "VIOLATED"
    VACUOUS = "VACUOUS"
    INCONCLUSIVE = "INCONCLUSIVE"


class WrongProtocol(ValueError):
    """A checker was handed a trace of another protocol."""


class BindingNeedsEnumeration(ValueError):
    """Binding quantifies over all extensions; one trace cannot show it."""


@dataclass(frozen=True)
class Witness:
    """Two event references that together exhibit a violation."""

    first: str
    second: str

    def __str__(self) -> str:
        return f"{self.first} ; {self.second}"


@dataclass
class Report:
    prop: str
    verdict: Verdict
    witnesses: tuple[Witness, ...] = ()
    params: dict = field(default_factory=dict)
    note: str = ""

    def __post_init__(self):
        if self.verdict is Verdict.VIOLATED and not self.witnesses:
            raise ValueError(f"{self.prop}: a violation needs a witness")

    @property
    def ok(self) -> bool:
        return self.verdict is not Verdict.VIOLATED

    def record(self) -> str:
        """Tab-separated record: property, verdict, params, witnesses, note."""
        params = " ".join(f"{k}={_fmt_param(v)}" for k, v in sorted(self.params.items()))
        wit = " | ".join(str(w) for w in self.witnesses)
        return f"{self.prop}\t{self.verdict.value}\t{params}\t{wit}\t{self.note}"

    def human(self) -> str:
        params = " ".join(f"{k}={_fmt_param(v)}" for k, v in sorted(self.params.items()))
        out = f"{self.prop:<22} {self.verdict.value:<12} {params}"
        if self.note:
            out += f"  ({self.note})"
        for w in self.witnesses[:3]:
            out += f"\n    witness: {w}"
        if len(self.witnesses) > 3:
            out += f"\n    ... {len(self.witnesses) - 3} more"
        return out


def _fmt_param(v) -> str:
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt_param(x) for x in v)
    return str(v)


def parse_record(line: str) -> Report:
    prop, verdict, params, wit, note = line.rstrip("\n").split("\t")
    pd = dict(tok.split("=", 1) for tok in params.split()) if params else {}
    ws = []
    for chunk in wit.split(" | ") if wit else ():
        a, _, b = chunk.partition(" ; ")
        ws.append(Witness(a, b))
    return Report(prop, Verdict(verdict), tuple(ws), pd, note)


def exit_code(reports: Iterable[Report]) -> int:
    """Nonzero iff some report is VIOLATED."""
    return 1 if any(r.verdict is Verdict.VIOLATED for r in reports) else 0


MAX_WITNESSES = 10  # kept per ensemble report; the total goes into params


def combine(prop: str, reports: Sequence[Report], params: dict | None = None) -> Report:
    """Fold per-trace reports of one property into an ensemble verdict.

    VIOLATED wins, then INCONCLUSIVE, then HOLDS; VACUOUS only if every
    trace was vacuous. Witnesses are prefixed with the trace index.
    """
    counts = {v.value: 0 for v in Verdict}
    witnesses = []
    for idx, r in enumerate(reports):
        counts[r.verdict.value] += 1
        if r.verdict is Verdict.VIOLATED:
            witnesses.extend(Witness(f"[{idx}] {w.first}", w.second) for w in r.witnesses)
    if counts["VIOLATED"]:
        verdict = Verdict.VIOLATED
    elif counts["INCONCLUSIVE"]:
        verdict = Verdict.INCONCLUSIVE
    elif counts["HOLDS"]:
        verdict = Verdict.HOLDS
    else:
        verdict = Verdict.VACUOUS
    p = dict(params or (reports[0].params if reports else {}))
    p["traces"] = len(reports)
    if len(witnesses) > MAX_WITNESSES:
        p["witnesses"] = len(witnesses)
        witnesses = witnesses[:MAX_WITNESSES]
    p.update({k.lower(): v for k, v in counts.items() if v})
    return Report(prop, verdict, tuple(witnesses), p)


# -- trace helpers ---------------------------------------------------------------


def ref(e: Event) -> str:
    return f"{e.t}.{e.k} {e.kind} p{e.actor + 1} {e.text}".rstrip()


def absent(trace: Trace, p: int, what: str) -> str:
    return f"end@{trace.delivered} p{p + 1} no {what}"


def _protocol(trace: Trace) -> ProtocolKind:
    return ProtocolKind(json.loads(trace.scenario_json)["protocol"]["kind"])


def _require(trace: Trace, *kinds: ProtocolKind) -> None:
    k = _protocol(trace)
    if k not in kinds:
        raise WrongProtocol(f"expected {'/'.join(x.value for x in kinds)} trace, got {k.value}")


def _value(e: Event):
    v = e.output_fields.get("v")
    if v == "bot":
        return None
    return int(v) if v is not None and v.lstrip("-").isdigit() else v


def _round(e: Event):
    k = e.output_fields.get("k")
    return None if k is None else int(k)


def _outputs(trace: Trace, name: str, members: int | None = None) -> list[Event]:
    return [
        e for e in trace.events
        if e.kind == OUTPUT and e.output_name == name and (members is None or members >> e.actor & 1)
    ]


def _inputs(trace: Trace, name: str) -> list[Event]:
    return [e for e in trace.events if e.kind == INPUT and e.output_name == name]


def _first_per_process(events: list[Event]) -> dict[int, Event]:
    out: dict[int, Event] = {}
    for e in events:
        out.setdefault(e.actor, e)
    return out


def _cls(trace: Trace, d) -> int:
    return trace.context.depth_class(d)


# -- reliable broadcast ------------------------------------------------------------


def check_rb(trace: Trace, d=3) -> list[Report]:
    """Validity, Consistency, Integrity and Totality of RB[d] on one trace."""
    _require(trace, ProtocolKind.RB3, ProtocolKind.RB_PREMATURE)
    params = {"d": d}
    cls = _cls(trace, d)
    names = ("rb.validity", "rb.consistency", "rb.integrity", "rb.totality")
    if not cls:
        return [Report(n, Verdict.VACUOUS, params=params, note="depth class empty") for n in names]
    sender = int(trace.meta["sender"])
    sender_correct = not trace.context.faults >> sender & 1
    bcast = next((e for e in _inputs(trace, "dar-broadcast") if e.actor == sender), None)
    payload = None if bcast is None else bcast.output_fields.get("v")
    deliveries = _outputs(trace, "dar-deliver", cls)
    first = _first_per_process(deliveries)
    missing = [p for p in bs.members(cls) if p not in first]

    # validity
    if not sender_correct or bcast is None:
        validity = Report(names[0], Verdict.HOLDS, params=params,
                          note="sender faulty" if not sender_correct else "nothing broadcast")
    else:
        wrong = [e for e in first.values() if e.output_fields.get("v") != payload]
        if wrong:
            validity = Report(names[0], Verdict.VIOLATED, tuple(Witness(ref(bcast), ref(e)) for e in wrong), params)
        elif missing and trace.complete:
            validity = Report(names[0], Verdict.VIOLATED,
                              tuple(Witness(ref(bcast), absent(trace, p, "dar-deliver")) for p in missing), params)
        elif missing:
            validity = Report(names[0], Verdict.INCONCLUSIVE, params=params, note="horizon reached")
        else:
            validity = Report(names[0], Verdict.HOLDS, params=params)

    # consistency
    ws = []
    firsts = list(first.values())
    for e in firsts[1:]:
        if e.output_fields.get("v") != firsts[0].output_fields.get("v"):
            ws.append(Witness(ref(firsts[0]), ref(e)))
    consistency = Report(names[1], Verdict.VIOLATED if ws else Verdict.HOLDS, tuple(ws), params)

    # integrity
    ws = []
    for e in deliveries:
        if first[e.actor] is not e:
            ws.append(Witness(ref(first[e.actor]), ref(e)))
    if sender_correct:
        for e in firsts:
            if bcast is None or e.output_fields.get("v") != payload or e.stamp < bcast.stamp:
                ws.append(Witness(ref(bcast) if bcast else "no dar-broadcast", ref(e)))
    integrity = Report(names[2], Verdict.VIOLATED if ws else Verdict.HOLDS, tuple(ws), params)

    # totality
    if not firsts or not missing:
        totality = Report(names[3], Verdict.HOLDS, params=params)
    elif trace.complete:
        totality = Report(names[3], Verdict.VIOLATED,
                          tuple(Witness(ref(firsts[0]), absent(trace, p, "dar-deliver")) for p in missing), params)
    else:
        totality = Report(names[3], Verdict.INCONCLUSIVE, params=params, note="horizon reached")
    return [validity, consistency, integrity, totality]


def check_rb_ensemble(traces: Sequence[Trace], d=3) -> list[Report]:
    per = [check_rb(t, d) for t in traces]
    return [combine(per[0][i].prop, [r[i] for r in per], {"d": d}) for i in range(4)] if per else []


def check_monotonicity(traces: Sequence[Trace], d, d2) -> Report:
    """If RB[d] holds on the ensemble then RB[d2] holds (or is vacuous) for d2 > d."""
    if not d2 > d:
        raise ValueError("monotonicity needs d2 > d")
    params = {"d": d, "d2": d2}
    low = [r for t in traces for r in check_rb(t, d)]
    high = [(i, r) for i, t in enumerate(traces) for r in check_rb(t, d2)]
    if all(r.verdict is Verdict.VACUOUS for _, r in high):
        return Report("rb.monotonicity", Verdict.VACUOUS, params=params, note=f"depth-{_fmt_param(d2)} class empty")
    if not all(r.verdict is Verdict.HOLDS or r.verdict is Verdict.VACUOUS for r in low):
        return Report("rb.monotonicity", Verdict.VACUOUS, params=params, note=f"RB[{_fmt_param(d)}] does not hold")
    bad = [(i, r) for i, r in high if r.verdict not in (Verdict.HOLDS, Verdict.VACUOUS)]
    if not bad:
        return Report("rb.monotonicity", Verdict.HOLDS, params=params)
    ws = []
    for i, r in bad:
        for w in r.witnesses or (Witness(f"RB[{_fmt_param(d)}] holds", f"{r.prop} {r.verdict.value}"),):
            ws.append(Witness(f"[{i}] {w.first}", w.second))
    return Report("rb.monotonicity", Verdict.VIOLATED, tuple(ws), params)


def check_d1echo(trace: Trace, qs=None) -> Report:
    """A correct READYAFTERECHO(1,m) follows ECHO(m) receipts from a full quorum."""
    _require(trace, ProtocolKind.RB3, ProtocolKind.RB_PREMATURE)
    qs = qs or trace.scenario().validate()
    correct = trace.context.correct
    heard: dict[int, dict] = defaultdict(dict)  # process -> payload -> sender mask
    ws = []
    checked = 0
    seen = set()
    for e in trace.events:
        if e.kind == DELIVER and e.msg is not None and e.msg.kind.value == "ECHO":
            box = heard[e.actor]
            box[e.msg.value] = box.get(e.msg.value, 0) | 1 << e.peer
        elif e.kind == SEND and e.msg.kind.value == "READYAFTERECHO" and e.msg.counter == 1:
            if not correct >> e.actor & 1 or e.actor in seen:
                continue
            seen.add(e.actor)
            checked += 1
            got = heard[e.actor].get(e.msg.value, 0)
            if not any(q & got == q for q in qs.quorums[e.actor]):
                ws.append(Witness(ref(e), f"echo senders {bs.fmt(got)} hold no quorum of p{e.actor + 1}"))
    verdict = Verdict.VIOLATED if ws else (Verdict.HOLDS if checked else Verdict.VACUOUS)
    return Report("rb.d1echo", verdict, tuple(ws), {"checked": checked})


# -- send-once guards --------------------------------------------------------------


def _guard(msg):
    k = msg.kind.value
    if k == "ECHO":
        return ("ECHO",)
    if k == "READYAFTERECHO":
        return ("READYAFTERECHO", msg.counter)
    if k in ("BCA_ECHO2", "BCA_ECHO3"):
        return (k, msg.round)
    if k == "REVIVE2":
        return (k, msg.value, msg.round)
    return None


def check_send_once(trace: Trace) -> Report:
    """Each guarded message kind leaves a correct process at most once per recipient."""
    correct = trace.context.correct
    first: dict = {}
    ws = []
    for e in trace.events:
        if e.kind != SEND or not correct >> e.actor & 1:
            continue
        g = _guard(e.msg)
        if g is None:
            continue
        slot = (e.actor, e.peer, g)
        if slot in first:
            ws.append(Witness(ref(first[slot]), ref(e)))
        else:
            first[slot] = e
    return Report("send-once", Verdict.VIOLATED if ws else Verdict.HOLDS, tuple(ws), {"guarded": len(first)})


# -- common coin -------------------------------------------------------------------


def _coin_table(trace: Trace):
    from .sim.runner import dealer_table

    return dealer_table(trace.scenario())


def _releases(trace: Trace) -> list[Event]:
    return [e for e in trace.events if e.kind in (INPUT, OUTPUT) and e.output_name == "release-coin"]


def check_coin(traces: Sequence[Trace] | Trace, d_prime=6, d=7, *, sigmas: float = 3.0) -> list[Report]:
    """Termination, Matching, identity with the dealer, No-bias and Unpredictability."""
    if isinstance(traces, Trace):
        traces = [traces]
    params = {"d'": d_prime, "d": d}
    term, match, ident, unpred = [], [], [], []
    samples: dict = {}
    for t in traces:
        _require(t, ProtocolKind.CC, ProtocolKind.CONSENSUS)
        table = _coin_table(t)
        start, fin = _cls(t, d_prime), _cls(t, d)
        correct = t.context.correct
        outs = _outputs(t, "output-coin")
        rels = _releases(t)
        rounds = sorted({_round(e) for e in outs} | {_round(e) for e in rels})
        released: dict[int, int] = defaultdict(int)
        for e in rels:
            released[_round(e)] |= 1 << e.actor
        by_round: dict[int, list[Event]] = defaultdict(list)
        for e in outs:
            by_round[_round(e)].append(e)

        # termination: every depth-d process outputs each round all depth-d' processes released
        ws, pending = [], False
        for r in rounds:
            if not start or released[r] & start != start:
                continue
            have = 0
            for e in by_round[r]:
                have |= 1 << e.actor
            for p in bs.members(fin & ~have):
                if t.complete:
                    ws.append(Witness(f"round {r} released by {bs.fmt(start)}", absent(t, p, f"output-coin k={r}")))
                else:
                    pending = True
        if not fin:
            term.append(Report("cc.termination", Verdict.VACUOUS, params=params))
        elif ws:
            term.append(Report("cc.termination", Verdict.VIOLATED, tuple(ws), params))
        else:
            term.append(Report("cc.termination", Verdict.INCONCLUSIVE if pending else Verdict.HOLDS, params=params))

        # matching over depth-d outputs, identity over all correct outputs
        ws, wi = [], []
        for r, evs in sorted(by_round.items()):
            deep = [e for e in evs if fin >> e.actor & 1]
            for e in deep[1:]:
                if _value(e) != _value(deep[0]):
                    ws.append(Witness(ref(deep[0]), ref(e)))
            for e in evs:
                if correct >> e.actor & 1 and _value(e) != table.coin(r):
                    wi.append(Witness(ref(e), f"dealer coin k={r} is {table.coin(r)}"))
            if evs:
                samples[(t.meta.get("dealer"), r)] = table.coin(r) if deep == [] else _value(deep[0])
        match.append(Report("cc.matching", Verdict.VIOLATED if ws else Verdict.HOLDS, tuple(ws), params))
        ident.append(Report("cc.identity", Verdict.VIOLATED if wi else Verdict.HOLDS, tuple(wi), params))
        unpred.append(_unpredictability(t, start, rounds, by_round, params))

    n = len(samples)
    if n:
        freq = sum(samples.values()) / n
        tol = sigmas * math.sqrt(0.25 / n)
        dev = abs(freq - 0.5)
        p = dict(params, samples=n, freq=freq, tol=tol)
        if dev <= tol:
            bias = Report("cc.no-bias", Verdict.HOLDS, params=p)
        else:
            bias = Report("cc.no-bias", Verdict.VIOLATED,
                          (Witness(f"freq(1)={freq:.4f} over {n} rounds", f"tolerance {tol:.4f}"),), p)
    else:
        bias = Report("cc.no-bias", Verdict.VACUOUS, params=params, note="no coin output")
    return [combine("cc.termination", term, params), combine("cc.matching", match, params),
            combine("cc.identity", ident, params), bias, combine("cc.unpredictability", unpred, params)]


def _unpredictability(t: Trace, start: int, rounds, by_round, params) -> Report:
    """First output of each round comes after a depth-d' release, and no quorum's
    shares were all out before that release."""
    ws = []
    first_rel: dict[int, Event] = {}
    for e in _releases(t):
        if start >> e.actor & 1:
            first_rel.setdefault(_round(e), e)
    shares: dict = defaultdict(list)  # (round, quorum) -> [(t, member)]
    for e in t.events:
        if e.kind in (SEND, ADVERSARY) and e.msg is not None and e.msg.kind.value == "SHARE":
            shares[(e.msg.round, e.msg.quorum)].append((e.t, e.actor))
    checked = 0
    for r in rounds:
        evs = by_round.get(r)
        if not evs:
            continue
        checked += 1
        rel = first_rel.get(r)
        if rel is None or rel.t >= evs[0].t:
            ws.append(Witness(ref(evs[0]), f"no earlier release-coin k={r} at depth {_fmt_param(params['d'])}"
                              if rel is None else ref(rel)))
            continue
        for (rr, q), sent in shares.items():
            if rr != r:
                continue
            early = 0
            for when, who in sent:
                if when < rel.t:
                    early |= 1 << who
            if q and early & q == q:
                ws.append(Witness(ref(rel), f"all shares of k={r} q={bs.fmt(q)} sent before"))
    verdict = Verdict.VIOLATED if ws else (Verdict.HOLDS if checked else Verdict.VACUOUS)
    return Report("cc.unpredictability", verdict, tuple(ws), params)


# -- binding crusader agreement -----------------------------------------------------


def check_bca(traces, d_prime=2, d=6, *, binding: bool = False) -> list[Report]:
    """Termination, Validity and Agreement per trace; Binding from an exploration.

    ``traces`` is a trace, a list of traces, or an ExplorationResult. Binding
    quantifies over every extension of an execution, so it is only judged on
    an exploration result; asking for it on traces raises
    BindingNeedsEnumeration.
    """
    if isinstance(traces, ExplorationResult):
        return _bca_from_exploration(traces, d_prime, d)
    if binding:
        raise BindingNeedsEnumeration("binding needs an exhaustive exploration, not traces")
    if isinstance(traces, Trace):
        traces = [traces]
    params = {"d'": d_prime, "d": d}
    per = [_bca_one(t, d_prime, d, params) for t in traces]
    return [combine(per[0][i].prop, [r[i] for r in per], params) for i in range(3)] if per else []


def _bca_one(t: Trace, d_prime, d, params) -> list[Report]:
    _require(t, ProtocolKind.BCA)
    start, fin = _cls(t, d_prime), _cls(t, d)
    props = {e.actor: int(e.output_fields["v"]) for e in _inputs(t, "bca-propose")}
    decisions = _first_per_process(_outputs(t, "bca-decide", fin))
    if not fin:
        return [Report(n, Verdict.VACUOUS, params=params, note="depth class empty")
                for n in ("bca.termination", "bca.validity", "bca.agreement")]
    all_started = all(p in props for p in bs.members(start))
    missing = [p for p in bs.members(fin) if p not in decisions]
    if not all_started or not missing:
        term = Report("bca.termination", Verdict.HOLDS, params=params,
                      note="" if all_started else "not every depth-d' process proposed")
    elif t.complete:
        term = Report("bca.termination", Verdict.VIOLATED,
                      tuple(Witness("all depth-d' proposed", absent(t, p, "bca-decide")) for p in missing), params)
    else:
        term = Report("bca.termination", Verdict.INCONCLUSIVE, params=params, note="horizon reached")

    vals = {props[p] for p in bs.members(start) if p in props}
    ws = []
    if all_started and len(vals) == 1:
        (v,) = vals
        ws = [Witness(f"all depth-d' proposed {v}", ref(e)) for e in decisions.values() if _value(e) != v]
    validity = Report("bca.validity", Verdict.VIOLATED if ws else Verdict.HOLDS, tuple(ws), params)

    ws = []
    firm = [e for e in decisions.values() if _value(e) is not None]
    for e in firm[1:]:
        if _value(e) != _value(firm[0]):
            ws.append(Witness(ref(firm[0]), ref(e)))
    agreement = Report("bca.agreement", Verdict.VIOLATED if ws else Verdict.HOLDS, tuple(ws), params)
    return [term, validity, agreement]


def _path_text(path) -> str:
    steps = []
    for item in path[-6:]:
        if isinstance(item, str):
            steps.append(item)
        elif len(item) == 2:
            p, text = item
            steps.append(f"p{p + 1}<-{text}")
        else:
            src, dst, msg = item
            steps.append(f"p{dst + 1}<-{msg.encode()}")
    more = f"...{len(path) - 6} earlier, " if len(path) > 6 else ""
    return f"path[{len(path)}]: {more}{' , '.join(steps)}"


def _bca_from_exploration(res: ExplorationResult, d_prime, d) -> list[Report]:
    params = {"d'": d_prime, "d": d, "bound": res.bound, "states": res.states}
    ws = [Witness(_path_text(path), f"decisions {_fmt_decisions(dec)}") for path, dec in res.agreement_violations]
    agreement = Report("bca.agreement", Verdict.VIOLATED if ws else Verdict.HOLDS, tuple(ws[:20]), params)
    ws = [Witness(_path_text(b.path), f"first {_fmt_decisions(b.first)} but extensions decide {sorted(b.reachable)}")
          for b in res.binding_violations]
    if ws:
        binding = Report("bca.binding", Verdict.VIOLATED, tuple(ws[:20]), dict(params, checks=res.binding_checks))
    elif res.binding_checks:
        binding = Report("bca.binding", Verdict.HOLDS, params=dict(params, checks=res.binding_checks))
    else:
        binding = Report("bca.binding", Verdict.VACUOUS, params=params, note="no depth-d decision reached")
    if res.undecided_leaves and res.complete_leaves:
        term = Report("bca.termination", Verdict.VIOLATED,
                      (Witness(f"{res.undecided_leaves} quiescent leaves", "some depth-d process undecided"),), params)
    elif res.complete_leaves:
        term = Report("bca.termination", Verdict.HOLDS, params=params)
    else:
        term = Report("bca.termination", Verdict.INCONCLUSIVE, params=params, note="leaves not completed")
    inputs = res.inputs
    ws = []
    if inputs and len(set(inputs.values())) == 1:
        (v,) = set(inputs.values())
        bad = sorted((x for x in res.decided_values if x != v), key=str)
        ws = [Witness(f"all proposed {v}", f"some depth-d process decides {'bot' if x is None else x}") for x in bad]
    validity = Report("bca.validity", Verdict.VIOLATED if ws else Verdict.HOLDS, tuple(ws), params)
    return [term, validity, agreement, binding]


def _fmt_decisions(dec: dict) -> str:
    return "{" + ",".join(f"p{p + 1}:{'bot' if v is None else v}" for p, v in sorted(dec.items())) + "}"


def check_one_echo3(trace: Trace, d=5) -> Report:
    """Among depth-d processes the non-bottom ECHO3 payloads of a round agree."""
    cls = _cls(trace, d)
    if not cls:
        return Report("bca.one-echo3", Verdict.VACUOUS, params={"d": d})
    first: dict[int, Event] = {}
    ws = []
    for e in trace.events:
        if e.kind != SEND or not cls >> e.actor & 1 or e.msg.kind.value != "BCA_ECHO3" or e.msg.value is None:
            continue
        r = e.msg.round
        if r not in first:
            first[r] = e
        elif first[r].msg.value != e.msg.value:
            ws.append(Witness(ref(first[r]), ref(e)))
    return Report("bca.one-echo3", Verdict.VIOLATED if ws else Verdict.HOLDS, tuple(ws[:20]), {"d": d})


# -- consensus ------------------------------------------------------------------------


def check_consensus(traces, d=9, *, threshold: float = 0.99, round_band: tuple[float, float] | None = None) -> list[Report]:
    """Agreement and Validity per trace; Termination and decision rounds over the ensemble."""
    if isinstance(traces, Trace):
        traces = [traces]
    params = {"d": d}
    agree, valid = [], []
    decided_runs, complete_undecided, rounds = 0, [], []
    for idx, t in enumerate(traces):
        _require(t, ProtocolKind.CONSENSUS)
        cls = _cls(t, d)
        decisions = _first_per_process(_outputs(t, "c-decide", cls))
        if not cls:
            agree.append(Report("c.agreement", Verdict.VACUOUS, params=params))
            valid.append(Report("c.validity", Verdict.VACUOUS, params=params))
            continue
        evs = list(decisions.values())
        ws = [Witness(ref(evs[0]), ref(e)) for e in evs[1:] if _value(e) != _value(evs[0])]
        agree.append(Report("c.agreement", Verdict.VIOLATED if ws else Verdict.HOLDS, tuple(ws), params))
        props = {e.actor: int(e.output_fields["v"]) for e in _inputs(t, "c-propose")}
        correct = list(bs.members(t.context.correct))
        vals = {props.get(p) for p in correct}
        ws = []
        if len(vals) == 1 and None not in vals:
            (v,) = vals
            ws = [Witness(f"all correct proposed {v}", ref(e)) for e in evs if _value(e) != v]
        valid.append(Report("c.validity", Verdict.VIOLATED if ws else Verdict.HOLDS, tuple(ws), params))
        missing = [p for p in bs.members(cls) if p not in decisions]
        if not missing:
            decided_runs += 1
            rounds.extend(_round(e) for e in evs)
        elif t.complete:
            complete_undecided.append((idx, t, missing))

    runs = sum(1 for t in traces if _cls(t, d))
    reports = [combine("c.agreement", agree, params), combine("c.validity", valid, params)]
    if not runs:
        reports.append(Report("c.termination", Verdict.VACUOUS, params=params))
        reports.append(Report("c.rounds", Verdict.VACUOUS, params=params))
        return reports
    frac = decided_runs / runs
    p = dict(params, runs=runs, decided=decided_runs, fraction=frac, threshold=threshold)
    if frac >= threshold:
        reports.append(Report("c.termination", Verdict.HOLDS, params=p))
    elif complete_undecided:
        ws = tuple(Witness(f"[{i}] quiescent run", absent(t, m[0], "c-decide")) for i, t, m in complete_undecided[:20])
        reports.append(Report("c.termination", Verdict.VIOLATED, ws, p))
    else:
        reports.append(Report("c.termination", Verdict.INCONCLUSIVE, params=p, note="horizon reached"))
    mean = sum(rounds) / len(rounds) if rounds else float("nan")
    p = dict(params, mean_round=mean, decisions=len(rounds))
    if round_band is None or not rounds:
        reports.append(Report("c.rounds", Verdict.HOLDS if rounds else Verdict.VACUOUS, params=p))
    else:
        lo, hi = round_band
        p["band"] = (lo, hi)
        if lo <= mean <= hi:
            reports.append(Report("c.rounds", Verdict.HOLDS, params=p))
        else:
            reports.append(Report("c.rounds", Verdict.VIOLATED,
                                  (Witness(f"mean decision round {mean:.3f}", f"outside [{lo}, {hi}]"),), p))
    return reports


def check_round_progress(trace: Trace, d=2, *, d_finish=7, d_anchor=9) -> Report:
    """Once every depth-7 process finished round r-1, every depth-d process enters round r.

    Needs a depth-9 process to hold; only complete traces can violate it.
    """
    _require(trace, ProtocolKind.CONSENSUS)
    cls, fin, anchor = _cls(trace, d), _cls(trace, d_finish), _cls(trace, d_anchor)
    params = {"d": d}
    if not cls or not fin or not anchor:
        return Report("c.round-progress", Verdict.VACUOUS, params=params)
    finished: dict[int, dict[int, Event]] = {}
    entered: dict[int, set[int]] = {}
    for e in trace.events:
        if e.kind != OUTPUT:
            continue
        if e.output_name == "round-finish" and fin >> e.actor & 1:
            finished.setdefault(_round(e), {}).setdefault(e.actor, e)
        elif e.output_name == "round-enter" and cls >> e.actor & 1:
            entered.setdefault(e.actor, set()).add(_round(e))
    max_rounds = int(trace.meta.get("max_rounds", 0)) or None
    ws = []
    for r_prev in sorted(finished):
        r = r_prev + 1
        done = finished[r_prev]
        if len(done) < bs.size(fin) or (max_rounds is not None and r > max_rounds):
            continue
        last = max(done.values(), key=lambda e: (e.t, e.k))
        for p in bs.members(cls):
            if r not in entered.get(p, ()):
                ws.append(Witness(ref(last), f"p{p + 1} never enters round {r}"))
    if ws:
        if not trace.complete:
            return Report("c.round-progress", Verdict.INCONCLUSIVE, params=params, note="horizon reached")
        return Report("c.round-progress", Verdict.VIOLATED, tuple(ws), params)
    return Report("c.round-progress", Verdict.HOLDS, params=params)


def check_round_causality(trace: Trace) -> Report:
    """A revival into round r is preceded by some correct process finishing round r-1."""
    _require(trace, ProtocolKind.CONSENSUS)
    correct = trace.context.correct
    finished: dict[int, Event] = {}
    ws = []
    checked = 0
    for e in trace.events:
        if e.kind != OUTPUT or not correct >> e.actor & 1:
            continue
        if e.output_name == "round-finish":
            finished.setdefault(_round(e), e)
        elif e.output_name == "revived":
            checked += 1
            r = _round(e)
            if r - 1 not in finished:
                ws.append(Witness(ref(e), f"no earlier round-finish k={r - 1}"))
    verdict = Verdict.VIOLATED if ws else (Verdict.HOLDS if checked else Verdict.VACUOUS)
    return Report("c.round-causality", verdict, tuple(ws), {"revivals": checked})


# -- dispatch ---------------------------------------------------------------------------

DEFAULT_DEPTHS = {
    ProtocolKind.RB3: {"d": 3},
    ProtocolKind.RB_PREMATURE: {"d": 3},
    ProtocolKind.CC: {"d_prime": 6, "d": 7},
    ProtocolKind.BCA: {"d_prime": 2, "d": 6},
    ProtocolKind.CONSENSUS: {"d": 9},
}


def check_all(traces: Sequence[Trace], depths: dict | None = None, **kw) -> list[Report]:
    """The standard checkers for the traces' protocol, folded over the ensemble."""
    if not traces:
        return []
    kind = _protocol(traces[0])
    dd = dict(DEFAULT_DEPTHS[kind])
    dd.update(depths or {})
    out: list[Report] = []
    if kind in (ProtocolKind.RB3, ProtocolKind.RB_PREMATURE):
        out.extend(check_rb_ensemble(traces, dd["d"]))
        out.append(combine("rb.d1echo", [check_d1echo(t) for t in traces]))
    elif kind is ProtocolKind.CC:
        out.extend(check_coin(traces, dd["d_prime"], dd["d"]))
    elif kind is ProtocolKind.BCA:
        out.extend(check_bca(traces, dd["d_prime"], dd["d"]))
        out.append(combine("bca.one-echo3", [check_one_echo3(t) for t in traces]))
    else:
        out.extend(check_consensus(traces, dd["d"], **kw))
        out.append(combine("c.round-progress", [check_round_progress(t) for t in traces]))
        out.append(combine("c.round-causality", [check_round_causality(t) for t in traces]))
    if kind is not ProtocolKind.CC:
        out.append(combine("send-once", [check_send_once(t) for t in traces]))
    return out


__all__ = [
    "BindingNeedsEnumeration", "DEFAULT_DEPTHS", "MAX_WITNESSES", "Report", "Verdict", "Witness", "WrongProtocol",
    "check_all", "check_bca", "check_coin", "check_consensus", "check_d1echo", "check_monotonicity",
    "check_one_echo3", "check_rb", "check_rb_ensemble", "check_round_causality", "check_round_progress",
    "check_send_once",
    "combine", "exit_code", "parse_record",
]
