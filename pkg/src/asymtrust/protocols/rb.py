"""Depth-3 asymmetric reliable broadcast with kernel amplification."""

from __future__ import annotations

from dataclasses import dataclass

from .base import Context, Output, Step, clone_flat
from .messages import Kind, Message


@dataclass(frozen=True)
class Broadcast:
    payload: str


class RbEngine:
    """Reliable-broadcast state machine for one process.

    With ``amplify=False`` the READYAFTERREADY clauses are switched off: a
    process then only delivers on a quorum of READYAFTERECHO(1) messages.
    """

    def __init__(self, ctx: Context, sender: int, *, amplify: bool = True, max_round: int = 8):
        self.ctx = ctx
        self.sender = sender
        self.amplify = amplify
        self.max_round = max_round
        self.sentecho = False
        self.echos: dict[int, str] = {}
        self.sentrae: set[int] = set()
        self.sentrar: set[int] = set()
        self.readysafterecho: dict[tuple[int, int], str] = {}
        self.readysafterready: dict[tuple[int, int], str] = {}
        self.delivered = False
        # sender masks per (round, payload), derived from the maps above
        self._echo_from: dict[str, int] = {}
        self._rae_from: dict[tuple[int, str], int] = {}
        self._rar_from: dict[tuple[int, str], int] = {}

    def step(self, event) -> Step:
        if isinstance(event, Broadcast):
            return self.broadcast(event.payload)
        return self.receive(event)

    def broadcast(self, payload: str) -> Step:
        out = Step()
        if self.ctx.me != self.sender:
            out.notes.append("dar-broadcast ignored: not the designated sender")
            return out
        out.send_all(Message(Kind.SEND, self.ctx.me, payload))
        return out

    def receive(self, msg: Message) -> Step:
        out = Step()
        j, m = msg.sender, msg.value
        bit = 1 << j
        if msg.kind is Kind.SEND:
            if j != self.sender:
                out.notes.append("SEND from a process other than the sender")
            elif not self.sentecho:
                self.sentecho = True
                out.send_all(Message(Kind.ECHO, self.ctx.me, m))
            else:
                out.notes.append("SEND after echoing ignored")
            return out

        if msg.kind is Kind.ECHO:
            if j in self.echos:
                out.notes.append("duplicate ECHO ignored")
                return out
            self.echos[j] = m
            senders = self._echo_from.get(m, 0) | bit
            self._echo_from[m] = senders
            if 1 not in self.sentrae and self.ctx.quorum(senders):
                self.sentrae.add(1)
                out.send_all(Message(Kind.READYAFTERECHO, self.ctx.me, m, counter=1))
            return out

        r = msg.counter
        if r is None or not 1 <= r <= self.max_round:
            out.notes.append(f"ready round {r} out of range")
            return out

        if msg.kind is Kind.READYAFTERECHO:
            if (r, j) in self.readysafterecho:
                out.notes.append("duplicate READYAFTERECHO ignored")
                return out
            self.readysafterecho[(r, j)] = m
            senders = self._rae_from.get((r, m), 0) | bit
            self._rae_from[(r, m)] = senders
            if self.amplify and r not in self.sentrar and self.ctx.kernel(senders):
                self.sentrar.add(r)
                out.send_all(Message(Kind.READYAFTERREADY, self.ctx.me, m, counter=r))
            if not self.delivered and self.ctx.quorum(senders):
                self.delivered = True
                out.outputs.append(Output("dar-deliver", m))
            return out

        if msg.kind is Kind.READYAFTERREADY:
            if (r, j) in self.readysafterready:
                out.notes.append("duplicate READYAFTERREADY ignored")
                return out
            self.readysafterready[(r, j)] = m
            senders = self._rar_from.get((r, m), 0) | bit
            self._rar_from[(r, m)] = senders
            nxt = r + 1
            if (
                self.amplify
                and nxt <= self.max_round
                and nxt not in self.sentrae
                and self.ctx.quorum(senders)
            ):
                self.sentrae.add(nxt)
                out.send_all(Message(Kind.READYAFTERECHO, self.ctx.me, m, counter=nxt))
            return out

        out.notes.append(f"{msg.kind.value} is not a broadcast message")
        return out

    def key(self) -> tuple:
        return (
            self.sentecho,
            tuple(sorted(self.echos.items())),
            tuple(sorted(self.sentrae)),
            tuple(sorted(self.sentrar)),
            tuple(sorted(self.readysafterecho.items())),
            tuple(sorted(self.readysafterready.items())),
            self.delivered,
        )

    def clone(self) -> "RbEngine":
        return clone_flat(self)


def rb_step(state: RbEngine, event, ctx: Context | None = None):
    """Functional form: returns (new_state, sends, outputs); ``state`` is untouched."""
    nxt = state.clone()
    if ctx is not None:
        nxt.ctx = ctx
    step = nxt.step(event)
    return nxt, step.sends, step.outputs
