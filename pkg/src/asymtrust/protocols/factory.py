"""Build one engine per process for a protocol kind."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from ..trust import QuorumSystem
from .base import Context, Output, Step, clone_flat
from .bca import BcaEngine, Propose
from .coin import CoinEngine, CoinTable, ReleaseCoin, dealer_setup
from .consensus import ConsensusEngine, CPropose
from .rb import Broadcast, RbEngine


class ProtocolKind(str, enum.Enum):
    RB3 = "RB3"
    RB_PREMATURE = "RB_PREMATURE"
    CC = "CC"
    BCA = "BCA"
    CONSENSUS = "CONSENSUS"


class UnknownKind(ValueError):
    pass


class MissingDealer(ValueError):
    pass


class ChainedCoin:
    """Coin engine that releases round r+1 once it has output round r.

    Lets one simulation drive many coin rounds without flooding the network
    with every round's shares up front.
    """

    def __init__(self, ctx: Context, table: CoinTable, rounds: int):
        self.ctx = ctx
        self.rounds = rounds
        self.inner = CoinEngine(ctx, table)

    def step(self, event) -> Step:
        out = self.inner.step(event)
        extra = [o for o in out.outputs if o.name == "output-coin" and o.round < self.rounds]
        for o in extra:
            out.extend(self.inner.release(o.round + 1))
            out.outputs.append(Output("release-coin", None, round=o.round + 1))
        return out

    def key(self) -> tuple:
        return self.inner.key()

    def clone(self) -> "ChainedCoin":
        new = clone_flat(self)
        new.inner = self.inner.clone()
        return new


def parse_kind(kind) -> ProtocolKind:
    if isinstance(kind, ProtocolKind):
        return kind
    try:
        return ProtocolKind(str(kind).upper())
    except ValueError:
        raise UnknownKind(f"unknown protocol kind {kind!r}") from None


@dataclass
class EngineSet:
    kind: ProtocolKind
    engines: list
    table: CoinTable | None = None
    meta: dict = field(default_factory=dict)
    builder: object = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.engines)

    def make(self, i: int):
        """A fresh engine for process ``i`` (used for adversary shadow copies)."""
        return self.builder(i)

    def start_event(self, i: int, inputs: dict):
        """The local invocation that starts process ``i``, or None if it stays idle."""
        k = self.kind
        if k in (ProtocolKind.RB3, ProtocolKind.RB_PREMATURE):
            if i != self.meta["sender"] or i not in inputs:
                return None
            return Broadcast(inputs[i])
        if k is ProtocolKind.CC:
            return ReleaseCoin(1)
        if i not in inputs:
            return None
        return Propose(inputs[i]) if k is ProtocolKind.BCA else CPropose(inputs[i])


def protocol_factory(kind, qs: QuorumSystem, params: dict | None = None, table: CoinTable | None = None) -> EngineSet:
    """Return ``qs.n`` engines of the given kind wired to the shared trust structure.

    Recognised params: ``sender`` (RB, 0-based), ``max_round`` (RB),
    ``max_counter`` (BCA/CONSENSUS), ``rounds`` and ``dealer_seed`` (CC),
    ``max_rounds`` (CONSENSUS), and the mutation switches ``amplify``,
    ``echo3_once`` and ``revive``.
    """
    k = parse_kind(kind)
    p = dict(params or {})
    meta: dict = {"kind": k.value}

    if k in (ProtocolKind.RB3, ProtocolKind.RB_PREMATURE):
        if "sender" not in p:
            raise ValueError("reliable broadcast needs a designated sender")
        sender = int(p["sender"])
        if not 0 <= sender < qs.n:
            raise ValueError(f"sender {sender} outside the system")
        amplify = k is ProtocolKind.RB3 and p.get("amplify", True)
        meta.update(sender=sender, premature=k is ProtocolKind.RB_PREMATURE, amplify=bool(amplify))
        max_round = int(p.get("max_round", 8))

        def build(i):
            return RbEngine(Context(i, qs), sender, amplify=bool(amplify), max_round=max_round)

    elif k is ProtocolKind.CC:
        rounds = int(p.get("rounds", 1))
        if table is None:
            table = dealer_setup(qs, rounds, int(p.get("dealer_seed", 0)))
        if table.max_rounds < rounds:
            raise ValueError("dealer table has fewer rounds than requested")
        meta.update(rounds=rounds, dealer=table.provenance)

        def build(i):
            return ChainedCoin(Context(i, qs), table, rounds)

    elif k is ProtocolKind.BCA:
        max_counter = int(p.get("max_counter", 8))
        echo3_once = bool(p.get("echo3_once", True))
        meta.update(max_counter=max_counter, echo3_once=echo3_once)

        def build(i):
            return BcaEngine(Context(i, qs), 1, max_counter=max_counter, echo3_once=echo3_once)

    else:
        if table is None:
            raise MissingDealer("CONSENSUS needs a dealer coin table")
        max_counter = int(p.get("max_counter", 8))
        max_rounds = int(p.get("max_rounds", table.max_rounds))
        revive = bool(p.get("revive", True))
        echo3_once = bool(p.get("echo3_once", True))
        meta.update(max_counter=max_counter, max_rounds=min(max_rounds, table.max_rounds),
                    revive=revive, dealer=table.provenance)

        def build(i):
            return ConsensusEngine(
                Context(i, qs), table, max_counter=max_counter, max_rounds=max_rounds,
                revive=revive, echo3_once=echo3_once,
            )

    return EngineSet(k, [build(i) for i in range(qs.n)], table, meta, build)


__all__ = ["ChainedCoin", "EngineSet", "MissingDealer", "Output", "ProtocolKind", "UnknownKind",
           "parse_kind", "protocol_factory"]
