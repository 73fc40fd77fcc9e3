"""Scenario description: trust structure, faults, protocol, adversary and schedule.

Processes are 0-based in memory and 1-based (p1..pn) in every serialized form.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field

from .. import bitsets as bs
from ..protocols.factory import ProtocolKind, parse_kind
from ..protocols.messages import EncodingError, decode
from ..trust import (
    FailProneSystem,
    Origin,
    QuorumSystem,
    canonical_quorums,
    verify_availability,
    verify_consistency,
)


class ValidationError(ValueError):
    pass


class Schedule(str, enum.Enum):
    FIFO_ROUND_ROBIN = "FIFO_ROUND_ROBIN"
    RANDOM_SEEDED = "RANDOM_SEEDED"
    ADVERSARIAL_DELAY = "ADVERSARIAL_DELAY"


_SCHEDULE_ALIASES = {"fifo": Schedule.FIFO_ROUND_ROBIN, "random": Schedule.RANDOM_SEEDED,
                     "adversarial": Schedule.ADVERSARIAL_DELAY}


def schedule_policies() -> tuple[Schedule, ...]:
    return tuple(Schedule)


def parse_schedule(name: str) -> Schedule:
    key = str(name)
    if key.lower() in _SCHEDULE_ALIASES:
        return _SCHEDULE_ALIASES[key.lower()]
    try:
        return Schedule(key.upper())
    except ValueError:
        raise ValidationError(f"unknown schedule policy {name!r}") from None


class Strategy(str, enum.Enum):
    SILENT = "SILENT"
    EQUIVOCATE = "EQUIVOCATE"
    DELAY_MAX = "DELAY_MAX"
    SCRIPTED = "SCRIPTED"


@dataclass(frozen=True)
class Rule:
    """One scripted adversary action.

    Trigger is ``start``, ``time`` (fires when the delivered-event count
    reaches ``time``), or a delivery to faulty process ``at`` whose message
    encoding equals ``on`` (optionally only from ``on_from``). The action
    sends ``send`` from faulty process ``sender`` to every process in ``to``.
    """

    sender: int
    send: str
    to: tuple[int, ...]
    trigger: str = "start"
    time: int | None = None
    at: int | None = None
    on: str | None = None
    on_from: int | None = None

    def to_dict(self) -> dict:
        d = {"from": self.sender + 1, "send": self.send, "to": [i + 1 for i in self.to]}
        if self.trigger == "time":
            d["time"] = self.time
        elif self.trigger == "deliver":
            d["at"] = self.at + 1
            d["on"] = self.on
            if self.on_from is not None:
                d["on_from"] = self.on_from + 1
        return d

    @classmethod
    def from_dict(cls, d: dict, n: int) -> "Rule":
        def pid(x, what):
            x = int(x)
            if not 1 <= x <= n:
                raise ValidationError(f"{what} p{x} outside 1..{n}")
            return x - 1

        sender = pid(d["from"], "rule sender")
        to = d.get("to", "all")
        to = tuple(range(n)) if to == "all" else tuple(pid(x, "rule recipient") for x in to)
        try:
            decode(str(d["send"]), sender)
        except EncodingError as exc:
            raise ValidationError(f"bad scripted message: {exc}") from None
        if "time" in d:
            return cls(sender, str(d["send"]), to, "time", time=int(d["time"]))
        if "on" in d:
            on_from = pid(d["on_from"], "trigger sender") if d.get("on_from") is not None else None
            return cls(sender, str(d["send"]), to, "deliver", at=pid(d["at"], "trigger process"),
                       on=str(d["on"]), on_from=on_from)
        return cls(sender, str(d["send"]), to)


@dataclass(frozen=True)
class AdversarySpec:
    strategy: Strategy = Strategy.SILENT
    script: tuple[Rule, ...] = ()
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d: dict = {"strategy": self.strategy.value}
        if self.script:
            d["script"] = [r.to_dict() for r in self.script]
        if self.params:
            d["params"] = dict(self.params)
        return d


@dataclass
class Scenario:
    """Everything needed to reproduce one simulated execution.

    ``quorums`` None means canonical quorums. ``stop_depth`` ends a run early
    once every correct process of at least that depth has produced its
    protocol's final output; None runs to quiescence or the horizon.
    """

    fps: FailProneSystem
    faults: int
    protocol: ProtocolKind
    params: dict = field(default_factory=dict)
    adversary: AdversarySpec = field(default_factory=AdversarySpec)
    schedule: Schedule = Schedule.RANDOM_SEEDED
    seed: int = 0
    horizon: int = 10_000
    inputs: dict = field(default_factory=dict)
    quorums: tuple | None = None
    max_delay: int | None = None
    stop_depth: float | None = None
    name: str = ""
    raw: bool = False

    @property
    def n(self) -> int:
        return self.fps.n

    @property
    def fairness_bound(self) -> int:
        return self.max_delay if self.max_delay is not None else 10 * self.n * self.n

    def quorum_system(self) -> QuorumSystem:
        if self.quorums is None:
            return canonical_quorums(self.fps)
        return QuorumSystem(self.n, self.quorums, Origin.EXPLICIT)

    def validate(self) -> QuorumSystem:
        if self.horizon < 1:
            raise ValidationError("horizon must be at least 1")
        if self.faults & ~self.fps.universe:
            raise ValidationError("fault set not within the process universe")
        try:
            qs = self.quorum_system()
        except ValueError as exc:
            raise ValidationError(str(exc)) from None
        if not self.raw:
            ok, w = verify_consistency(qs, self.fps)
            if not ok:
                raise ValidationError(f"quorum system inconsistent: {w}")
            ok, w = verify_availability(qs, self.fps)
            if not ok:
                raise ValidationError(f"quorum system unavailable: {w}")
        for i in self.inputs:
            if not 0 <= i < self.n:
                raise ValidationError(f"input for unknown process {i}")
        return qs

    def replace(self, **kw) -> "Scenario":
        d = dict(self.__dict__)
        d.update(kw)
        return Scenario(**d)

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        d: dict = {
            "name": self.name,
            "system": {
                "n": self.n,
                "fail_prone": [[bs.labels(s) for s in row] for row in self.fps.sets],
            },
            "faults": bs.labels(self.faults),
            "protocol": {"kind": self.protocol.value, "params": _labels_out(self.params)},
            "adversary": self.adversary.to_dict(),
            "schedule": self.schedule.value,
            "seed": self.seed,
            "horizon": self.horizon,
            "inputs": {str(i + 1): v for i, v in sorted(self.inputs.items())},
        }
        if self.quorums is not None:
            d["system"]["quorums"] = [[bs.labels(q) for q in row] for row in self.quorums]
        if self.max_delay is not None:
            d["max_delay"] = self.max_delay
        if self.stop_depth is not None:
            d["stop_depth"] = "inf" if self.stop_depth == float("inf") else self.stop_depth
        if self.raw:
            d["raw"] = True
        return d

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        try:
            sysd = d["system"]
            n = int(sysd["n"])
            fps = FailProneSystem(n, [[bs.from_labels(s) for s in row] for row in sysd["fail_prone"]])
            quorums = None
            if sysd.get("quorums") is not None:
                quorums = tuple(tuple(bs.from_labels(q) for q in row) for row in sysd["quorums"])
            prot = d["protocol"]
            adv = d.get("adversary") or {}
            script = tuple(Rule.from_dict(r, n) for r in adv.get("script", ()))
            try:
                strategy = Strategy(str(adv.get("strategy", "SILENT")).upper())
            except ValueError:
                raise ValidationError(f"unknown adversary strategy {adv.get('strategy')!r}") from None
            stop = d.get("stop_depth")
            if stop is not None:
                stop = float("inf") if str(stop) == "inf" else int(stop)
            return cls(
                fps=fps,
                faults=bs.from_labels(int(x) for x in d.get("faults", ())),
                protocol=parse_kind(prot["kind"]),
                params=_labels_in(dict(prot.get("params") or {})),
                adversary=AdversarySpec(strategy, script, dict(adv.get("params") or {})),
                schedule=parse_schedule(d.get("schedule", "RANDOM_SEEDED")),
                seed=int(d.get("seed", 0)),
                horizon=int(d.get("horizon", 10_000)),
                inputs={int(k) - 1: _input_value(v) for k, v in (d.get("inputs") or {}).items()},
                quorums=quorums,
                max_delay=None if d.get("max_delay") is None else int(d["max_delay"]),
                stop_depth=stop,
                name=str(d.get("name", "")),
                raw=bool(d.get("raw", False)),
            )
        except ValidationError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed scenario: {exc!r}") from None

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        return cls.from_dict(json.loads(text))


# params that name a process are 1-based on disk
_PID_PARAMS = ("sender",)


def _labels_out(params: dict) -> dict:
    return {k: (v + 1 if k in _PID_PARAMS else v) for k, v in sorted(params.items())}


def _labels_in(params: dict) -> dict:
    return {k: (int(v) - 1 if k in _PID_PARAMS else v) for k, v in params.items()}


def _input_value(v):
    # binary protocol inputs stay ints, broadcast payloads stay strings
    if isinstance(v, bool):
        return int(v)
    return v
