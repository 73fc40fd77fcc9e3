"""Bundled trust structures and scenarios.

Processes are 0-based here; the human-facing files written by
``write_fixtures`` use p1..pn.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

from . import bitsets as bs
from .protocols.factory import ProtocolKind
from .sim.scenario import AdversarySpec, Rule, Scenario, Schedule, Strategy
from .trust import INF, FailProneSystem, check_b3


def _m(*labels: int) -> int:
    return bs.from_labels(labels)


def fd_system() -> FailProneSystem:
    """The six-process system used to show that RB[1] is unsolvable."""
    a, b, c = _m(1, 2, 5, 6), _m(1, 2, 3), _m(1, 2, 4)
    return FailProneSystem(6, [[a, b], [a, b], [c], [b], [c], [c]])


def threshold(n: int, f: int) -> FailProneSystem:
    """Every process fears every set of f processes, written out per process."""
    sets = list(bs.subsets_of_size(bs.full(n), f))
    return FailProneSystem(n, [list(sets) for _ in range(n)])


@dataclass(frozen=True)
class Layered:
    """A guild followed by a chain whose i-th link has depth exactly i.

    Processes are ordered guild, chain c_0..c_k, then one process ``x``
    meant to be faulty. Every quorum of c_i is c_{i-1} (x for c_0) plus a
    guild quorum, so with F = {x} the depths are known without running the
    fixpoint: infinity on the guild, i on c_i.
    """

    fps: FailProneSystem
    guild: int
    chain: tuple[int, ...]
    x: int

    @property
    def faults(self) -> int:
        return 1 << self.x

    def oracle_depths(self) -> tuple:
        out: list = [None] * self.fps.n
        for p in bs.members(self.guild):
            out[p] = INF
        for i, p in enumerate(self.chain):
            out[p] = i
        return tuple(out)


def layered(k: int, guild_size: int = 4) -> Layered:
    g = guild_size
    if g < 4:
        raise ValueError("the guild needs at least four processes")
    n = g + k + 2
    full = bs.full(n)
    guild = bs.full(g)
    chain = tuple(range(g, g + k + 1))
    x = n - 1
    gq = list(bs.subsets_of_size(guild, g - (g - 1) // 3))
    sets = []
    for p in range(n):
        if p < g:
            sets.append([full & ~s for s in gq])
        elif p == x:
            sets.append([full & ~s for s in gq])
        else:
            pred = x if p == chain[0] else p - 1
            sets.append([full & ~(s | 1 << pred) for s in gq])
    return Layered(FailProneSystem(n, sets), guild, chain, x)


def random_b3(n: int, rng: random.Random, *, max_sets: int = 3, max_size: int | None = None,
              tries: int = 10_000) -> FailProneSystem:
    """Rejection-sample a fail-prone system on n processes that satisfies B3."""
    max_size = max_size if max_size is not None else max(1, (n - 1) // 3 + 1)
    full = bs.full(n)
    for _ in range(tries):
        rows = []
        for _p in range(n):
            k = rng.randint(1, max_sets)
            row = []
            for _ in range(k):
                size = rng.randint(0, max_size)
                row.append(bs.mask(rng.sample(range(n), size)))
            rows.append(row)
        fps = FailProneSystem(n, rows)
        if fps.universe == full and check_b3(fps)[0]:
            return fps
    raise RuntimeError(f"no B3 system found on {n} processes in {tries} tries")


# -- scenarios ---------------------------------------------------------------


def _script(rows) -> tuple[Rule, ...]:
    """Rules from (sender label, message text, recipient labels)."""
    return tuple(Rule(s - 1, text, tuple(t - 1 for t in to)) for s, text, to in rows)


def norb1_script(variant: str = "E'") -> tuple[Rule, ...]:
    """Messages of the faulty p5 (sender) and p6 in the two executions.

    In E' they talk only to p2 and p4, exactly as in E; in E p1 hears the
    same as p2.
    """
    targets = (2, 4) if variant == "E'" else (1, 2, 4)
    return _script([
        (5, "SEND m=0", targets),
        (5, "ECHO m=0", targets),
        (6, "ECHO m=0", targets),
        (5, "READYAFTERECHO r=1 m=0", targets),
        (6, "READYAFTERECHO r=1 m=0", targets),
    ])


def norb1_scenario(kind=ProtocolKind.RB_PREMATURE, variant: str = "E'") -> Scenario:
    tag = "Eprime" if variant == "E'" else "E"
    return Scenario(
        fps=fd_system(), faults=_m(5, 6), protocol=ProtocolKind(kind), params={"sender": 4},
        adversary=AdversarySpec(Strategy.SCRIPTED, norb1_script(variant)),
        schedule=Schedule.FIFO_ROUND_ROBIN, seed=0, horizon=2000,
        name=f"norb1-{tag}-{ProtocolKind(kind).value.lower()}",
    )


def rb3_threshold7(seed: int = 0) -> Scenario:
    """Byzantine sender p7 equivocates, p6 stays silent."""
    return Scenario(
        fps=threshold(7, 2), faults=_m(6, 7), protocol=ProtocolKind.RB3, params={"sender": 6},
        adversary=AdversarySpec(Strategy.EQUIVOCATE, params={"silent": [6]}),
        schedule=Schedule.RANDOM_SEEDED, seed=seed, horizon=20_000, inputs={6: "m"},
        name="rb3-threshold7",
    )


def rb_selective(kind=ProtocolKind.RB3, seed: int = 0) -> Scenario:
    """Faulty sender p7 and helper p6 push only p1 over its delivery quorum.

    Without the amplification clauses p2..p5 never deliver.
    """
    return Scenario(
        fps=threshold(7, 2), faults=_m(6, 7), protocol=ProtocolKind(kind), params={"sender": 6},
        adversary=AdversarySpec(Strategy.SCRIPTED, _script([
            (7, "SEND m=0", (1, 2, 3)),
            (6, "ECHO m=0", (1, 2, 3)),
            (7, "ECHO m=0", (1, 2, 3)),
            (6, "READYAFTERECHO r=1 m=0", (1,)),
            (7, "READYAFTERECHO r=1 m=0", (1,)),
        ])),
        schedule=Schedule.RANDOM_SEEDED, seed=seed, horizon=20_000,
        name=f"rb-selective-{ProtocolKind(kind).value.lower()}",
    )


def coin_n4(seed: int = 0, rounds: int = 100) -> Scenario:
    return Scenario(
        fps=threshold(4, 1), faults=_m(4), protocol=ProtocolKind.CC, params={"rounds": rounds},
        schedule=Schedule.RANDOM_SEEDED, seed=seed, horizon=1_000_000, name="coin-n4",
    )


def bca_n4(inputs=(0, 0, 1, 1), seed: int = 0, max_counter: int = 2, schedule=Schedule.RANDOM_SEEDED,
           faults: int = 0) -> Scenario:
    return Scenario(
        fps=threshold(4, 1), faults=faults, protocol=ProtocolKind.BCA, params={"max_counter": max_counter},
        schedule=schedule, seed=seed, horizon=100_000, inputs=dict(enumerate(inputs)),
        name="bca-n4",
    )


def bca_explore(inputs=(0, 0, 1), faulty: int = 4) -> Scenario:
    """Split proposals on threshold n=4 with one silent process, sized for exhaustive enumeration."""
    correct = [p for p in range(4) if p != faulty - 1]
    sc = bca_n4(faults=_m(faulty), schedule=Schedule.FIFO_ROUND_ROBIN, max_counter=2)
    return sc.replace(inputs=dict(zip(correct, inputs)), horizon=40, name="bca-explore")


def consensus_n4(seed: int = 0, inputs=None, schedule=Schedule.ADVERSARIAL_DELAY, **params) -> Scenario:
    """Threshold n=4 with p4 silent. Unanimous inputs ``seed % 2`` unless given."""
    if inputs is None:
        inputs = (seed % 2,) * 4
    return Scenario(
        fps=threshold(4, 1), faults=_m(4), protocol=ProtocolKind.CONSENSUS, params=dict(params),
        schedule=schedule, seed=seed, horizon=200_000, inputs=dict(enumerate(inputs)),
        stop_depth=INF, name="consensus-n4",
    )


def consensus_layered(seed: int = 0, k: int = 10, value: int = 0, **params) -> Scenario:
    """Consensus on a layered system; the chain's deep end needs the revival path."""
    lay = layered(k)
    p = {"max_rounds": 12, "max_counter": 2}
    p.update(params)
    return Scenario(
        fps=lay.fps, faults=lay.faults, protocol=ProtocolKind.CONSENSUS, params=p,
        schedule=Schedule.RANDOM_SEEDED, seed=seed, horizon=2_000_000,
        inputs={i: value for i in range(lay.fps.n)}, name=f"consensus-layered{k}",
    )


# -- materialization -------------------------------------------------------------


def write_fixtures(out: Path) -> list[Path]:
    """Write the bundled systems and scenarios under ``out``; returns the paths."""
    from .systemfile import dump_scenario, dump_system

    out = Path(out)
    (out / "systems").mkdir(parents=True, exist_ok=True)
    (out / "scenarios").mkdir(parents=True, exist_ok=True)
    written = []

    def put(rel: str, text: str) -> None:
        path = out / rel
        path.write_text(text)
        written.append(path)

    put("systems/fd.system", dump_system(fd_system(), comment="six processes; no broadcast protocol serves every depth-1 process"))
    put("systems/threshold4.system", dump_system(threshold(4, 1), comment="threshold n=4 f=1, one list per process"))
    put("systems/threshold7.system", dump_system(threshold(7, 2), comment="threshold n=7 f=2, one list per process"))
    for k in (3, 10):
        lay = layered(k)
        depths = ",".join("bot" if d is None else "inf" if d == INF else str(d) for d in lay.oracle_depths())
        put(f"systems/layered{k}.system", dump_system(
            lay.fps, comment=f"layered: guild p1..p4, chain p5..p{5 + k}, faulty p{lay.x + 1}\n"
                             f"faults: {lay.x + 1}\noracle depths: {depths}"))

    scenarios = {
        "norb1_demo.scn": (norb1_scenario(), "systems/fd.system", {"d": 1}),
        "norb1_e.scn": (norb1_scenario(variant="E"), "systems/fd.system", {"d": 1}),
        "norb1_rb3.scn": (norb1_scenario(ProtocolKind.RB3), "systems/fd.system", {"d": 3}),
        "rb3_threshold7.scn": (rb3_threshold7(), "systems/threshold7.system", None),
        "rb_selective.scn": (rb_selective(), "systems/threshold7.system", None),
        "coin_n4.scn": (coin_n4(), "systems/threshold4.system", None),
        "bca_n4.scn": (bca_n4(), "systems/threshold4.system", None),
        "bca_explore.scn": (bca_explore(), "systems/threshold4.system", None),
        "consensus_n4.scn": (consensus_n4(), "systems/threshold4.system", None),
        "consensus_layered.scn": (consensus_layered(), "systems/layered10.system", None),
    }
    for name, (sc, system, checks) in scenarios.items():
        put(f"scenarios/{name}", dump_scenario(sc, system_ref=f"../{system}", checks=checks))
    return written



def golden_scenarios() -> dict[str, Scenario]:
    """Scenarios whose trace hashes are pinned, so another machine can compare."""
    out = {
        "norb1-eprime": norb1_scenario(),
        "norb1-e": norb1_scenario(variant="E"),
        "norb1-rb3": norb1_scenario(ProtocolKind.RB3),
        "coin-n4-1000": coin_n4(0, rounds=1000),
        "bca-explore": bca_explore(),
    }
    for s in range(5):
        out[f"rb3-threshold7-s{s}"] = rb3_threshold7(s)
        out[f"consensus-n4-s{s}"] = consensus_n4(s)
    return out
