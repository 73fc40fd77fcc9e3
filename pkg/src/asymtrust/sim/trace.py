"""Totally ordered execution record and its line-delimited text form.

Each event line holds five tab-separated fields in fixed order: timestamp,
kind, actor, message encoding and annotation. Timestamps are ``t.k`` with
``t`` the number of delivered messages so far and ``k`` a counter within that
step, so (t, k) increases strictly along the trace. Header and footer lines
start with ``#``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .. import bitsets as bs
from ..protocols.messages import Message, decode
from ..trust import INF, Kind as ProcKind, fmt_depth

FORMAT = "asymtrust-trace v1"

# event kinds
INPUT = "input"
SEND = "send"
ADVERSARY = "adversary"  # a message sent by a faulty process
DELIVER = "deliver"
DROP = "drop"
OUTPUT = "output"

COMPLETE = "complete"  # no message left in flight
STOPPED = "stopped"  # stop condition met
HORIZON = "horizon"  # delivered-event budget used up


@dataclass(slots=True)
class Event:
    t: int
    k: int
    kind: str
    actor: int
    text: str = ""
    msg: Message | None = None
    peer: int | None = None  # recipient for sends, sender for deliveries
    mid: int | None = None  # message id shared by a send and its delivery
    note: str = ""

    @property
    def stamp(self) -> tuple[int, int]:
        return (self.t, self.k)

    def annotation(self) -> str:
        parts = []
        if self.peer is not None:
            parts.append(f"{'to' if self.kind in (SEND, ADVERSARY) else 'from'}=p{self.peer + 1}")
        if self.mid is not None:
            parts.append(f"id={self.mid}")
        if self.note:
            parts.append(self.note)
        return " ".join(parts)

    def line(self) -> str:
        return f"{self.t}.{self.k}\t{self.kind}\tp{self.actor + 1}\t{self.text}\t{self.annotation()}"

    # convenience for outputs: "name v=.. k=.."
    @property
    def output_name(self) -> str:
        return self.text.split(" ", 1)[0]

    @property
    def output_fields(self) -> dict:
        out = {}
        for tok in self.text.split()[1:]:
            key, _, val = tok.partition("=")
            out[key] = val
        return out


@dataclass
class ContextInfo:
    """The derived execution context as stored in a trace header."""

    faults: int
    depths: tuple
    kinds: tuple
    guild: int | None

    def depth_class(self, d) -> int:
        m = 0
        for i, x in enumerate(self.depths):
            if x is not None and x >= d:
                m |= 1 << i
        return m

    @property
    def n(self) -> int:
        return len(self.depths)

    @property
    def correct(self) -> int:
        return bs.full(self.n) & ~self.faults

    def encode(self) -> str:
        return (
            f"faults={bs.fmt(self.faults)} depths={','.join(fmt_depth(x) for x in self.depths)} "
            f"kinds={','.join(k for k in self.kinds)} "
            f"guild={'none' if self.guild is None else bs.fmt(self.guild)}"
        )

    @classmethod
    def from_execution(cls, ec) -> "ContextInfo":
        short = {ProcKind.FAULTY: "F", ProcKind.NAIVE: "N", ProcKind.WISE: "W"}
        return cls(ec.faults, tuple(ec.depths), tuple(short[k] for k in ec.classification), ec.maximal_guild)

    @classmethod
    def decode(cls, text: str) -> "ContextInfo":
        fields = dict(tok.split("=", 1) for tok in text.split())

        def depth(x):
            return None if x == "bot" else INF if x == "inf" else int(x)

        def mset(x):
            inner = x.strip("{}")
            return bs.from_labels(int(v) for v in inner.split(",")) if inner else 0

        return cls(
            faults=mset(fields["faults"]),
            depths=tuple(depth(x) for x in fields["depths"].split(",")),
            kinds=tuple(fields["kinds"].split(",")),
            guild=None if fields["guild"] == "none" else mset(fields["guild"]),
        )


@dataclass
class Trace:
    scenario_json: str
    digest: str
    context: ContextInfo
    meta: dict
    events: list[Event] = field(default_factory=list)
    status: str = COMPLETE
    delivered: int = 0
    pending: int = 0

    @property
    def complete(self) -> bool:
        """True when liveness can be judged: the run quiesced or hit its stop condition."""
        return self.status in (COMPLETE, STOPPED)

    @property
    def n(self) -> int:
        return self.context.n

    def scenario(self):
        from .scenario import Scenario

        return Scenario.from_json(self.scenario_json)

    def header_lines(self) -> list[str]:
        return [
            f"# {FORMAT}",
            f"# scenario {self.scenario_json}",
            f"# digest {self.digest}",
            f"# context {self.context.encode()}",
            f"# meta {json.dumps(self.meta, sort_keys=True, separators=(',', ':'))}",
        ]

    def footer_line(self) -> str:
        return f"# end status={self.status} delivered={self.delivered} pending={self.pending}"

    def to_text(self) -> str:
        lines = self.header_lines()
        lines.extend(e.line() for e in self.events)
        lines.append(self.footer_line())
        return "\n".join(lines) + "\n"

    def outputs(self, name: str | None = None) -> list[Event]:
        return [e for e in self.events if e.kind == OUTPUT and (name is None or e.output_name == name)]


class TraceFormatError(ValueError):
    pass


def parse_trace(text: str) -> Trace:
    lines = text.splitlines()
    if not lines or lines[0] != f"# {FORMAT}":
        raise TraceFormatError("line 1: not an asymtrust trace")
    header: dict[str, str] = {}
    events: list[Event] = []
    footer = None
    for lineno, line in enumerate(lines[1:], start=2):
        if line.startswith("# "):
            key, _, rest = line[2:].partition(" ")
            if key == "end":
                footer = rest
            else:
                header[key] = rest
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise TraceFormatError(f"line {lineno}: expected 5 tab-separated fields")
        try:
            events.append(_parse_event(parts))
        except (ValueError, KeyError) as exc:
            raise TraceFormatError(f"line {lineno}: {exc}") from None
    for key in ("scenario", "digest", "context", "meta"):
        if key not in header:
            raise TraceFormatError(f"missing header line {key!r}")
    if footer is None:
        raise TraceFormatError("missing footer line")
    tail = dict(tok.split("=", 1) for tok in footer.split())
    return Trace(
        scenario_json=header["scenario"],
        digest=header["digest"],
        context=ContextInfo.decode(header["context"]),
        meta=json.loads(header["meta"]),
        events=events,
        status=tail["status"],
        delivered=int(tail["delivered"]),
        pending=int(tail["pending"]),
    )


def _pid(label: str) -> int:
    if not label.startswith("p"):
        raise ValueError(f"bad process label {label!r}")
    return int(label[1:]) - 1


def _parse_event(parts: list[str]) -> Event:
    stamp, kind, actor, text, ann = parts
    t, _, k = stamp.partition(".")
    ev = Event(int(t), int(k), kind, _pid(actor), text)
    notes = []
    for tok in ann.split():
        key, sep, val = tok.partition("=")
        if sep and key in ("to", "from") and ev.peer is None:
            ev.peer = _pid(val)
        elif sep and key == "id" and ev.mid is None:
            ev.mid = int(val)
        else:
            notes.append(tok)
    ev.note = " ".join(notes)
    if kind in (SEND, ADVERSARY):
        ev.msg = decode(text, ev.actor)
    elif kind in (DELIVER, DROP) and ev.peer is not None:
        ev.msg = decode(text, ev.peer)
    return ev
