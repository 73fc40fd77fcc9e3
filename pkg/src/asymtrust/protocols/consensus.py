"""Round-based asymmetric binary consensus with the revival mechanism.

Each round runs one crusader-agreement instance followed by one common coin.
Rounds are independent slots, so a process may be active in several at once;
deciding does not stop a process from taking part in later rounds.
"""

from __future__ import annotations

from dataclasses import dataclass

from .base import Context, Output, Step, clone_flat
from .bca import BOT, BcaEngine
from .coin import CoinEngine, CoinTable
from .messages import BCA_KINDS, Kind, Message


@dataclass(frozen=True)
class CPropose:
    value: int


class ConsensusEngine:
    """Consensus state machine for one process.

    ``revive=False`` ignores REVIVE2 quorums, which disables re-entry into a
    round; it exists only to seed a bug for checker mutation tests.
    """

    def __init__(
        self,
        ctx: Context,
        table: CoinTable,
        *,
        max_counter: int = 8,
        max_rounds: int | None = None,
        revive: bool = True,
        echo3_once: bool = True,
    ):
        self.ctx = ctx
        self.table = table
        self.max_counter = max_counter
        self.max_rounds = table.max_rounds if max_rounds is None else min(max_rounds, table.max_rounds)
        self.revive = revive
        self.echo3_once = echo3_once
        self.v: dict[int, int | None] = {}
        self.cont: set[int] = set()
        self.bca: dict[int, BcaEngine] = {}
        self.coin = CoinEngine(ctx, table)
        self.decided: tuple[int, int] | None = None  # (value, round)
        self.revive1_from: dict[tuple[int, int], int] = {}
        self.revive2_from: dict[tuple[int, int], int] = {}
        self.sentrevive2: set[tuple[int, int]] = set()
        self.revived: set[tuple[int, int]] = set()
        self.early_coin: dict[int, int] = {}  # coin outputs seen before our own release

    def _instance(self, r: int) -> BcaEngine:
        inst = self.bca.get(r)
        if inst is None:
            inst = BcaEngine(self.ctx, r, max_counter=self.max_counter, echo3_once=self.echo3_once)
            self.bca[r] = inst
        return inst

    def step(self, event) -> Step:
        if isinstance(event, CPropose):
            return self.propose(event.value)
        return self.receive(event)

    def propose(self, value: int) -> Step:
        out = Step()
        if value not in (0, 1):
            raise ValueError(f"c-propose takes 0 or 1, got {value!r}")
        if 1 in self.v:
            out.notes.append("duplicate c-propose ignored")
            return out
        self.v[1] = value
        self.cont.add(1)
        self._run(out, [])
        return out

    def receive(self, msg: Message) -> Step:
        out = Step()
        r = msg.round
        if r is None or not 1 <= r <= self.max_rounds + 1:
            out.notes.append(f"round tag {r} out of range")
            return out
        pending: list[Output] = []
        if msg.kind in BCA_KINDS:
            if r > self.max_rounds:
                return out
            sub = self._instance(r).receive(msg)
            out.sends.extend(sub.sends)
            out.notes.extend(sub.notes)
            pending.extend(sub.outputs)
        elif msg.kind is Kind.SHARE:
            sub = self.coin.receive(msg)
            out.sends.extend(sub.sends)
            out.notes.extend(sub.notes)
            pending.extend(sub.outputs)
        elif msg.kind is Kind.REVIVE1:
            self._on_revive1(msg, out)
        elif msg.kind is Kind.REVIVE2:
            self._on_revive2(msg, out)
        else:
            out.notes.append(f"{msg.kind.value} is not a consensus message")
        self._run(out, pending)
        return out

    def _on_revive1(self, msg: Message, out: Step) -> None:
        if msg.value not in (0, 1):
            out.notes.append("revive1 without a binary value")
            return
        slot = (msg.round, msg.value)
        senders = self.revive1_from.get(slot, 0) | 1 << msg.sender
        self.revive1_from[slot] = senders
        if slot not in self.sentrevive2 and self.ctx.kernel(senders):
            self.sentrevive2.add(slot)
            out.send_all(Message(Kind.REVIVE2, self.ctx.me, msg.value, round=msg.round))

    def _on_revive2(self, msg: Message, out: Step) -> None:
        if msg.value not in (0, 1):
            out.notes.append("revive2 without a binary value")
            return
        slot = (msg.round, msg.value)
        senders = self.revive2_from.get(slot, 0) | 1 << msg.sender
        self.revive2_from[slot] = senders
        if not self.revive or slot in self.revived or not self.ctx.quorum(senders):
            return
        self.revived.add(slot)
        r, val = slot
        self.v[r] = val
        self.cont.add(r)
        out.outputs.append(Output("revived", val, round=r))

    def _run(self, out: Step, pending: list[Output]) -> None:
        """Drain sub-protocol outputs and continue flags until nothing fires."""
        while True:
            while pending:
                ev = pending.pop(0)
                if ev.name == "output-coin" and ev.round not in self.coin.released:
                    # the coin handler runs only after this process released its share
                    self.early_coin[ev.round] = ev.value
                    continue
                out.outputs.append(ev)
                if ev.name == "bca-decide":
                    r = ev.round
                    self.v[r + 1] = ev.value
                    sub = self.coin.release(r)
                    out.sends.extend(sub.sends)
                    out.notes.extend(sub.notes)
                    if r in self.coin.released:
                        out.outputs.append(Output("release-coin", None, round=r))
                    pending.extend(sub.outputs)
                    if r in self.early_coin:
                        pending.append(Output("output-coin", self.early_coin.pop(r), round=r))
                elif ev.name == "output-coin":
                    self._finish_round(ev.value, ev.round, out)
            if not self.cont:
                return
            r = min(self.cont)
            self.cont.discard(r)
            if r > self.max_rounds:
                continue
            out.outputs.append(Output("round-enter", self.v[r], round=r))
            inst = self._instance(r)
            if not inst.proposed:
                sub = inst.propose(self.v[r])
                out.sends.extend(sub.sends)
                pending.extend(sub.outputs)

    def _finish_round(self, c: int, r: int, out: Step) -> None:
        nxt = r + 1
        val = self.v.get(nxt, BOT)
        if val is not BOT:
            if c == val and self.decided is None:
                self.decided = (val, r)
                out.outputs.append(Output("c-decide", val, round=r))
        else:
            self.v[nxt] = val = c
        out.send_all(Message(Kind.REVIVE1, self.ctx.me, val, round=nxt))
        out.outputs.append(Output("round-finish", val, round=r))
        self.cont.add(nxt)

    def key(self) -> tuple:
        return (
            tuple(sorted((r, -1 if x is None else x) for r, x in self.v.items())),
            tuple(sorted(self.cont)),
            tuple((r, self.bca[r].key()) for r in sorted(self.bca)),
            self.coin.key(),
            self.decided,
            tuple(sorted(self.revive1_from.items())),
            tuple(sorted(self.revive2_from.items())),
            tuple(sorted(self.sentrevive2)),
            tuple(sorted(self.revived)),
            tuple(sorted(self.early_coin.items())),
        )

    def clone(self) -> "ConsensusEngine":
        new = clone_flat(self)
        new.bca = {r: inst.clone() for r, inst in self.bca.items()}
        new.coin = self.coin.clone()
        return new


def consensus_step(state: ConsensusEngine, event, ctx: Context | None = None):
    nxt = state.clone()
    if ctx is not None:
        nxt.ctx = ctx
    step = nxt.step(event)
    return nxt, step.sends, step.outputs
