"""Dealer-based common coin, additively shared inside every quorum."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .. import bitsets as bs
from ..trust import QuorumSystem
from .base import Context, Output, Step, clone_flat
from .messages import Kind, Message


@dataclass(frozen=True)
class ReleaseCoin:
    round: int


@dataclass(frozen=True)
class CoinTable:
    """Per-round coin values and per-(round, quorum, member) share bits.

    ``provenance`` stands in for the dealer's signature: a share is genuine
    iff it matches the table entry, which honest receivers look up.
    """

    max_rounds: int
    coins: dict[int, int]
    shares: dict[tuple[int, int, int], int]
    provenance: str = "dealer"
    quorums: tuple[int, ...] = field(default=())

    def share(self, round_: int, quorum: int, member: int) -> int:
        return self.shares[(round_, quorum, member)]

    def verify(self, round_: int, quorum: int, member: int, bit) -> bool:
        return self.shares.get((round_, quorum, member)) == bit

    def coin(self, round_: int) -> int:
        return self.coins[round_]


def dealer_setup(qs: QuorumSystem, max_rounds: int, seed: int) -> CoinTable:
    """Draw one coin per round and split it into XOR shares for each quorum."""
    if max_rounds < 1:
        raise ValueError("max_rounds must be at least 1")
    rng = random.Random(f"dealer:{seed}")
    quorums = qs.distinct_quorums()
    coins: dict[int, int] = {}
    shares: dict[tuple[int, int, int], int] = {}
    for r in range(1, max_rounds + 1):
        c = rng.getrandbits(1)
        coins[r] = c
        for q in quorums:
            members = list(bs.members(q))
            acc = 0
            for p in members[:-1]:
                b = rng.getrandbits(1)
                shares[(r, q, p)] = b
                acc ^= b
            shares[(r, q, members[-1])] = acc ^ c
    return CoinTable(max_rounds, coins, shares, provenance=f"dealer:seed={seed}", quorums=quorums)


class CoinEngine:
    def __init__(self, ctx: Context, table: CoinTable):
        self.ctx = ctx
        self.table = table
        self.mine = tuple(q for q in table.quorums if q >> ctx.me & 1)
        self.watched = frozenset(ctx.qs.quorums[ctx.me])
        self.released: set[int] = set()
        self.share: dict[tuple[int, int, int], int] = {}
        self.got: dict[tuple[int, int], int] = {}
        self.output: dict[int, int] = {}

    def step(self, event) -> Step:
        if isinstance(event, ReleaseCoin):
            return self.release(event.round)
        return self.receive(event)

    def release(self, round_: int) -> Step:
        out = Step()
        if round_ in self.released:
            return out
        if not 1 <= round_ <= self.table.max_rounds:
            out.notes.append(f"no dealer coin for round {round_}")
            return out
        self.released.add(round_)
        me = self.ctx.me
        for q in self.mine:
            s = self.table.share(round_, q, me)
            out.send_all(Message(Kind.SHARE, me, s, round=round_, quorum=q))
        return out

    def receive(self, msg: Message) -> Step:
        out = Step()
        if msg.kind is not Kind.SHARE:
            out.notes.append(f"{msg.kind.value} is not a coin message")
            return out
        r, q, j = msg.round, msg.quorum, msg.sender
        if q is None or r is None or not q >> j & 1:
            out.notes.append("share from a process outside its quorum")
            return out
        if not self.table.verify(r, q, j, msg.value):
            out.notes.append("forged share rejected")
            return out
        if q not in self.watched or (r, q, j) in self.share:
            return out
        self.share[(r, q, j)] = msg.value
        got = self.got.get((r, q), 0) | 1 << j
        self.got[(r, q)] = got
        if got == q and r not in self.output:
            s = 0
            for p in bs.members(q):
                s ^= self.share[(r, q, p)]
            self.output[r] = s
            out.outputs.append(Output("output-coin", s, round=r))
        return out

    def key(self) -> tuple:
        return (
            tuple(sorted(self.released)),
            tuple(sorted(self.got.items())),
            tuple(sorted(self.output.items())),
        )

    def clone(self) -> "CoinEngine":
        return clone_flat(self)


def coin_step(state: CoinEngine, event, ctx: Context | None = None):
    nxt = state.clone()
    if ctx is not None:
        nxt.ctx = ctx
    step = nxt.step(event)
    return nxt, step.sends, step.outputs
