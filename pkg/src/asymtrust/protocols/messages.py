"""Protocol messages and their canonical one-line text encoding.

The encoding is ``KIND key=value ...`` with keys in a fixed order. It appears
verbatim in traces and in adversary scripts, so it must stay stable.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from .. import bitsets as bs


class Kind(str, enum.Enum):
    SEND = "SEND"
    ECHO = "ECHO"
    READYAFTERECHO = "READYAFTERECHO"
    READYAFTERREADY = "READYAFTERREADY"
    BCA_ECHO = "BCA_ECHO"
    BCA_ECHO_PRIME = "BCA_ECHO_PRIME"
    BCA_ECHO2 = "BCA_ECHO2"
    BCA_ECHO3 = "BCA_ECHO3"
    SHARE = "SHARE"
    REVIVE1 = "REVIVE1"
    REVIVE2 = "REVIVE2"


RB_KINDS = frozenset({Kind.SEND, Kind.ECHO, Kind.READYAFTERECHO, Kind.READYAFTERREADY})
BCA_KINDS = frozenset({Kind.BCA_ECHO, Kind.BCA_ECHO_PRIME, Kind.BCA_ECHO2, Kind.BCA_ECHO3})
REVIVE_KINDS = frozenset({Kind.REVIVE1, Kind.REVIVE2})

# which optional fields each kind carries: k = protocol round tag,
# c = RB ready round / BCA counter, q = quorum of a coin share
_FIELDS: dict[Kind, tuple[str, ...]] = {
    Kind.SEND: ("m",),
    Kind.ECHO: ("m",),
    Kind.READYAFTERECHO: ("r", "m"),
    Kind.READYAFTERREADY: ("r", "m"),
    Kind.BCA_ECHO: ("k", "c", "v"),
    Kind.BCA_ECHO_PRIME: ("k", "c", "v"),
    Kind.BCA_ECHO2: ("k", "v"),
    Kind.BCA_ECHO3: ("k", "v"),
    Kind.SHARE: ("k", "q", "s"),
    Kind.REVIVE1: ("k", "v"),
    Kind.REVIVE2: ("k", "v"),
}

_TOKEN = re.compile(r"[A-Za-z0-9_.:+-]+")


class EncodingError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class Message:
    """One point-to-point protocol message.

    ``value`` is an RB payload (str), a binary value (0/1, or None for the
    bottom value), or a share bit. ``counter`` is the RB ready round or the
    BCA echo counter; ``round`` is the consensus round tag.
    """

    kind: Kind
    sender: int
    value: object = None
    counter: int | None = None
    round: int | None = None
    quorum: int | None = None

    def encode(self) -> str:
        return encode(self)


def _fmt_value(kind: Kind, v) -> str:
    if kind in RB_KINDS:
        return str(v)
    return "bot" if v is None else str(v)


def encode(msg: Message) -> str:
    parts = [msg.kind.value]
    for key in _FIELDS[msg.kind]:
        if key in ("r", "c"):
            parts.append(f"{key}={msg.counter}")
        elif key == "k":
            parts.append(f"k={msg.round}")
        elif key == "q":
            parts.append("q=" + ",".join(str(i) for i in bs.labels(msg.quorum)))
        else:
            parts.append(f"{key}={_fmt_value(msg.kind, msg.value)}")
    return " ".join(parts)


def decode(text: str, sender: int) -> Message:
    """Inverse of :func:`encode`; ``sender`` is 0-based."""
    tokens = text.split()
    if not tokens:
        raise EncodingError("empty message encoding")
    try:
        kind = Kind(tokens[0])
    except ValueError:
        raise EncodingError(f"unknown message kind {tokens[0]!r}") from None
    fields = {}
    for tok in tokens[1:]:
        key, sep, val = tok.partition("=")
        if not sep or not val:
            raise EncodingError(f"malformed field {tok!r} in {text!r}")
        fields[key] = val
    expected = _FIELDS[kind]
    if set(fields) != set(expected):
        raise EncodingError(f"{kind.value} takes fields {expected}, got {tuple(fields)}")
    kw: dict = {}
    try:
        for key, val in fields.items():
            if key in ("r", "c"):
                kw["counter"] = int(val)
            elif key == "k":
                kw["round"] = int(val)
            elif key == "q":
                kw["quorum"] = bs.from_labels(int(x) for x in val.split(","))
            elif kind in RB_KINDS:
                if not _TOKEN.fullmatch(val):
                    raise EncodingError(f"payload {val!r} is not a plain token")
                kw["value"] = val
            else:
                kw["value"] = None if val == "bot" else int(val)
    except ValueError as exc:
        raise EncodingError(f"bad field value in {text!r}: {exc}") from None
    return Message(kind=kind, sender=sender, **kw)


def with_sender(msg: Message, sender: int) -> Message:
    return Message(msg.kind, sender, msg.value, msg.counter, msg.round, msg.quorum)
