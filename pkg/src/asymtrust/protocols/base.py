"""Shared engine plumbing: the step result and the per-process context."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..trust import QuorumSystem
from .messages import Message

ALL = -1  # destination meaning "every process in the system"


@dataclass(frozen=True, slots=True)
class Output:
    """A protocol-level event surfaced to the caller (and the trace)."""

    name: str  # dar-deliver, bca-decide, output-coin, c-decide, ...
    value: object = None
    round: int | None = None

    def encode(self) -> str:
        v = "bot" if self.value is None else self.value
        tail = "" if self.round is None else f" k={self.round}"
        return f"{self.name} v={v}{tail}"


@dataclass
class Step:
    sends: list[tuple[int, Message]] = field(default_factory=list)
    outputs: list[Output] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def send_all(self, msg: Message) -> None:
        self.sends.append((ALL, msg))

    def extend(self, other: "Step") -> None:
        self.sends.extend(other.sends)
        self.outputs.extend(other.outputs)
        self.notes.extend(other.notes)


@dataclass(frozen=True)
class Context:
    """What a single process knows: its id and the (public) trust structure."""

    me: int
    qs: QuorumSystem
    my_quorums: tuple[int, ...] = field(init=False, repr=False, compare=False)
    my_kernels: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "my_quorums", self.qs.quorums[self.me])
        object.__setattr__(self, "my_kernels", self.qs.kernels.kernels[self.me])

    @property
    def n(self) -> int:
        return self.qs.n

    def quorum(self, senders: int) -> bool:
        for q in self.my_quorums:
            if q & senders == q:
                return True
        return False

    def kernel(self, senders: int) -> bool:
        for k in self.my_kernels:
            if k & senders == k:
                return True
        return False


def clone_flat(obj):
    """Copy an engine whose state lives in flat containers of immutable values.

    The context and other immutable attributes are shared with the original.
    """
    new = object.__new__(type(obj))
    for name, value in obj.__dict__.items():
        if isinstance(value, (dict, set, list)):
            value = value.copy()
        new.__dict__[name] = value
    return new
