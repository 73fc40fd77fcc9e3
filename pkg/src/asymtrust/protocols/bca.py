"""Asymmetric binding crusader agreement.

Binary values are 0/1; the bottom value is ``None``. Echo counters start at
1 and are capped at ``max_counter``: every (kind, c, v) is emitted at most once.
"""

from __future__ import annotations

from dataclasses import dataclass

from .base import Context, Output, Step, clone_flat
from .messages import Kind, Message

BOT = None
_UNSET = "unset"
_BOT_CODE = 2  # dictionary slot for bottom-valued ECHO3 messages


@dataclass(frozen=True)
class Propose:
    value: int


class BcaEngine:
    """One BCA instance at one process, tagged with a consensus round.

    ``echo3_once=False`` removes the single-send guard of the ECHO3 clause
    (each distinct ECHO3 value may then be sent once); it exists only to
    seed a bug for checker mutation tests.
    """

    def __init__(self, ctx: Context, round_: int = 1, *, max_counter: int = 8, echo3_once: bool = True):
        self.ctx = ctx
        self.round = round_
        self.max_counter = max_counter
        self.echo3_once = echo3_once
        self.proposed = False
        self.sentecho: set[tuple[int, int]] = set()
        self.sentechoprime: set[tuple[int, int]] = set()
        self.sentecho2 = False
        self.sentecho3: set[int] = set()
        self.approved: set[int] = set()
        self.echo_from: dict[tuple[int, int], int] = {}
        self.echoprime_from: dict[tuple[int, int], int] = {}
        self.echo2_from: dict[int, int] = {}
        self.echo3_from: dict[int, int] = {}
        self.echo3_any = 0
        self.decided = _UNSET

    @property
    def has_decided(self) -> bool:
        return self.decided != _UNSET

    def step(self, event) -> Step:
        if isinstance(event, Propose):
            return self.propose(event.value)
        return self.receive(event)

    def _msg(self, kind: Kind, value, counter: int | None = None) -> Message:
        return Message(kind, self.ctx.me, value, counter=counter, round=self.round)

    def propose(self, value: int) -> Step:
        out = Step()
        if value not in (0, 1):
            raise ValueError(f"bca-propose takes 0 or 1, got {value!r}")
        if self.proposed:
            out.notes.append("duplicate bca-propose ignored")
            return out
        self.proposed = True
        if (1, value) not in self.sentecho:
            self.sentecho.add((1, value))
            out.send_all(self._msg(Kind.BCA_ECHO, value, 1))
        return out

    def receive(self, msg: Message) -> Step:
        out = Step()
        v, bit = msg.value, 1 << msg.sender
        kind = msg.kind
        if kind in (Kind.BCA_ECHO, Kind.BCA_ECHO_PRIME):
            c = msg.counter
            if v not in (0, 1) or c is None or not 1 <= c <= self.max_counter:
                out.notes.append("ill-tagged echo dropped")
                return out
            if kind is Kind.BCA_ECHO:
                senders = self.echo_from.get((c, v), 0) | bit
                self.echo_from[(c, v)] = senders
                if (
                    c < self.max_counter
                    and (c, v) not in self.sentechoprime
                    and self.ctx.kernel(senders)
                ):
                    self.sentechoprime.add((c, v))
                    out.send_all(self._msg(Kind.BCA_ECHO_PRIME, v, c))
                if v not in self.approved and self.ctx.quorum(senders):
                    self.approved.add(v)
                    if not self.sentecho2:
                        self.sentecho2 = True
                        out.send_all(self._msg(Kind.BCA_ECHO2, v))
                    self._echo3_clause(out)
                    self._decide_clause(out)
            else:
                senders = self.echoprime_from.get((c, v), 0) | bit
                self.echoprime_from[(c, v)] = senders
                nxt = (c + 1, v)
                if c + 1 <= self.max_counter and nxt not in self.sentecho and self.ctx.quorum(senders):
                    self.sentecho.add(nxt)
                    out.send_all(self._msg(Kind.BCA_ECHO, v, c + 1))
            return out

        if kind is Kind.BCA_ECHO2:
            if v not in (0, 1):
                out.notes.append("ill-tagged echo2 dropped")
                return out
            self.echo2_from[v] = self.echo2_from.get(v, 0) | bit
            self._echo3_clause(out)
            return out

        if kind is Kind.BCA_ECHO3:
            if v not in (0, 1, BOT):
                out.notes.append("ill-tagged echo3 dropped")
                return out
            code = _BOT_CODE if v is BOT else v
            self.echo3_from[code] = self.echo3_from.get(code, 0) | bit
            self.echo3_any |= bit
            self._decide_clause(out)
            return out

        out.notes.append(f"{kind.value} is not a crusader-agreement message")
        return out

    def _echo3_clause(self, out: Step) -> None:
        if self.echo3_once and self.sentecho3:
            return
        if len(self.approved) > 1:
            value = BOT
        else:
            value = next(
                (v for v in (0, 1) if self.ctx.quorum(self.echo2_from.get(v, 0))),
                _UNSET,
            )
            if value == _UNSET:
                return
        code = _BOT_CODE if value is BOT else value
        if code in self.sentecho3:
            return
        self.sentecho3.add(code)
        out.send_all(self._msg(Kind.BCA_ECHO3, value))

    def _decide_clause(self, out: Step) -> None:
        if self.decided != _UNSET:
            return
        for v in (0, 1):
            if self.ctx.quorum(self.echo3_from.get(v, 0)):
                self.decided = v
                out.outputs.append(Output("bca-decide", v, round=self.round))
                return
        if len(self.approved) > 1 and self.ctx.quorum(self.echo3_any):
            self.decided = BOT
            out.outputs.append(Output("bca-decide", BOT, round=self.round))

    def heard(self, msg: Message) -> int:
        """Senders already counted for the (kind, c, v) of ``msg``."""
        kind, v = msg.kind, msg.value
        if kind is Kind.BCA_ECHO:
            return self.echo_from.get((msg.counter, v), 0)
        if kind is Kind.BCA_ECHO_PRIME:
            return self.echoprime_from.get((msg.counter, v), 0)
        if kind is Kind.BCA_ECHO2:
            return self.echo2_from.get(v, 0)
        if kind is Kind.BCA_ECHO3:
            return self.echo3_from.get(_BOT_CODE if v is BOT else v, 0)
        return 0

    def key(self) -> tuple:
        return (
            self.proposed,
            tuple(sorted(self.sentecho)),
            tuple(sorted(self.sentechoprime)),
            self.sentecho2,
            tuple(sorted(self.sentecho3)),
            tuple(sorted(self.approved)),
            tuple(sorted(self.echo_from.items())),
            tuple(sorted(self.echoprime_from.items())),
            tuple(sorted(self.echo2_from.items())),
            tuple(sorted(self.echo3_from.items())),
            -1 if self.decided is BOT else self.decided,
        )

    def count_key(self, limit: int = 64) -> tuple:
        """State with sender masks replaced by their sizes, capped at ``limit``.

        Equivalent to :meth:`key` for behaviour whenever quorums and kernels
        are all sets of one fixed size no larger than ``limit`` and each
        sender emits each (kind, c, v) once, as correct processes do.
        """

        def counts(d):
            return tuple(sorted((k, min(m.bit_count(), limit)) for k, m in d.items()))

        return (
            self.proposed,
            tuple(sorted(self.sentecho)),
            tuple(sorted(self.sentechoprime)),
            self.sentecho2,
            tuple(sorted(self.sentecho3)),
            tuple(sorted(self.approved)),
            counts(self.echo_from),
            counts(self.echoprime_from),
            counts(self.echo2_from),
            counts(self.echo3_from),
            min(self.echo3_any.bit_count(), limit),
            -1 if self.decided is BOT else self.decided,
        )

    def clone(self) -> "BcaEngine":
        return clone_flat(self)


def bca_step(state: BcaEngine, event, ctx: Context | None = None):
    nxt = state.clone()
    if ctx is not None:
        nxt.ctx = ctx
    step = nxt.step(event)
    return nxt, step.sends, step.outputs
