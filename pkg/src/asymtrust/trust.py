"""Asymmetric trust structures and their per-execution derived quantities.

All collections of process sets are bitmask tuples kept in a normal form:
fail-prone systems as inclusion-maximal antichains (membership in the closure
``F*`` is "subset of some stored set"), quorum and kernel systems as
inclusion-minimal antichains.

Operations that enumerate all ``2**n`` fault sets are meant for n <= 16.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product

from . import bitsets as bs

INF = math.inf


class B3Violation(ValueError):
    def __init__(self, witness: "B3Witness"):
        super().__init__(f"B3 condition violated: {witness}")
        self.witness = witness


@dataclass(frozen=True)
class B3Witness:
    i: int
    j: int
    f_i: int
    f_j: int
    f_ij: int

    def __str__(self) -> str:
        return (
            f"p{self.i + 1}, p{self.j + 1}: {bs.fmt(self.f_i)} u {bs.fmt(self.f_j)}"
            f" u {bs.fmt(self.f_ij)} covers all processes"
        )


@dataclass(frozen=True)
class ConsistencyWitness:
    i: int
    j: int
    q_i: int
    q_j: int
    f_ij: int

    def __str__(self) -> str:
        return (
            f"p{self.i + 1}, p{self.j + 1}: {bs.fmt(self.q_i)} n {bs.fmt(self.q_j)}"
            f" inside shared fail-prone set {bs.fmt(self.f_ij)}"
        )


@dataclass(frozen=True)
class AvailabilityWitness:
    i: int
    f_i: int

    def __str__(self) -> str:
        return f"p{self.i + 1}: every quorum meets fail-prone set {bs.fmt(self.f_i)}"


def _check_n(n: int) -> None:
    if not 1 <= n <= bs.MAX_PROCESSES:
        raise ValueError(f"n must be in [1, {bs.MAX_PROCESSES}], got {n}")


def _normalize(n: int, per_process, reduce, what: str) -> tuple[tuple[int, ...], ...]:
    _check_n(n)
    rows = tuple(per_process)
    if len(rows) != n:
        raise ValueError(f"{what}: expected {n} per-process collections, got {len(rows)}")
    universe = bs.full(n)
    out = []
    for i, row in enumerate(rows):
        row = tuple(row)
        if not row:
            raise ValueError(f"{what}: collection of p{i + 1} is empty")
        for s in row:
            if s < 0 or s & ~universe:
                raise ValueError(f"{what}: set {s:#x} of p{i + 1} not within {n} processes")
        out.append(reduce(row))
    return tuple(out)


@dataclass(frozen=True)
class FailProneSystem:
    n: int
    sets: tuple[tuple[int, ...], ...]

    def __init__(self, n: int, sets):
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "sets", _normalize(n, sets, bs.maximal, "fail-prone system"))

    @property
    def universe(self) -> int:
        return bs.full(self.n)

    def foresees(self, i: int, faults: int) -> bool:
        """True iff ``faults`` lies in the closure of p_i's fail-prone sets."""
        return any(faults & ~s == 0 for s in self.sets[i])

    def common(self, i: int, j: int) -> tuple[int, ...]:
        """Maximal elements of the intersection of the two closures."""
        return bs.maximal(a & b for a in self.sets[i] for b in self.sets[j])


class Origin(enum.Enum):
    CANONICAL = "canonical"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class QuorumSystem:
    n: int
    quorums: tuple[tuple[int, ...], ...]
    origin: Origin = Origin.EXPLICIT

    def __init__(self, n: int, quorums, origin: Origin = Origin.EXPLICIT):
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "quorums", _normalize(n, quorums, bs.minimal, "quorum system"))
        object.__setattr__(self, "origin", origin)

    @cached_property
    def kernels(self) -> "KernelSystem":
        return KernelSystem(self.n, tuple(kernels(q) for q in self.quorums))

    def distinct_quorums(self) -> tuple[int, ...]:
        return tuple(sorted({q for row in self.quorums for q in row}))

    def has_quorum(self, i: int, senders: int) -> bool:
        return bs.contains_any(senders, self.quorums[i])

    def has_kernel(self, i: int, senders: int) -> bool:
        return bs.contains_any(senders, self.kernels.kernels[i])


@dataclass(frozen=True)
class KernelSystem:
    n: int
    kernels: tuple[tuple[int, ...], ...]


# -- structural predicates ---------------------------------------------------


def check_b3(fps: FailProneSystem) -> tuple[bool, B3Witness | None]:
    everyone = fps.universe
    for i in range(fps.n):
        for j in range(i, fps.n):
            shared = fps.common(i, j)
            for f_i, f_j in product(fps.sets[i], fps.sets[j]):
                base = f_i | f_j
                for f_ij in shared:
                    if base | f_ij == everyone:
                        return False, B3Witness(i, j, f_i, f_j, f_ij)
    return True, None


def check_q3(family, n: int) -> bool:
    """No three members of ``family`` (repetition allowed) cover all n processes.

    Checking the stored sets suffices: subsets from the closure cover less.
    An empty family is vacuously Q3.
    """
    everyone = bs.full(n)
    fam = bs.maximal(family) if family else ()
    for a_idx, a in enumerate(fam):
        for b_idx in range(a_idx, len(fam)):
            ab = a | fam[b_idx]
            for c in fam[b_idx:]:
                if ab | c == everyone:
                    return False
    return True


def canonical_quorums(fps: FailProneSystem) -> QuorumSystem:
    ok, witness = check_b3(fps)
    if not ok:
        raise B3Violation(witness)
    everyone = fps.universe
    return QuorumSystem(
        fps.n,
        tuple(tuple(everyone & ~f for f in row) for row in fps.sets),
        origin=Origin.CANONICAL,
    )


def verify_consistency(qs: QuorumSystem, fps: FailProneSystem) -> tuple[bool, ConsistencyWitness | None]:
    _aligned(qs, fps)
    for i in range(qs.n):
        for j in range(i, qs.n):
            shared = fps.common(i, j)
            for q_i, q_j in product(qs.quorums[i], qs.quorums[j]):
                meet = q_i & q_j
                for f_ij in shared:
                    if meet & ~f_ij == 0:
                        return False, ConsistencyWitness(i, j, q_i, q_j, f_ij)
    return True, None


def verify_availability(qs: QuorumSystem, fps: FailProneSystem) -> tuple[bool, AvailabilityWitness | None]:
    _aligned(qs, fps)
    for i in range(qs.n):
        for f_i in fps.sets[i]:
            if not any(q & f_i == 0 for q in qs.quorums[i]):
                return False, AvailabilityWitness(i, f_i)
    return True, None


def _aligned(qs: QuorumSystem, fps: FailProneSystem) -> None:
    if qs.n != fps.n:
        raise ValueError(f"quorum system has n={qs.n}, fail-prone system has n={fps.n}")


def kernels(quorums) -> tuple[int, ...]:
    """All inclusion-minimal hitting sets of ``quorums``.

    Berge's incremental transversal construction: extend every partial
    transversal that misses the next quorum by one of that quorum's members,
    pruning to the minimal antichain after each step.
    """
    quorums = bs.minimal(quorums)
    if not quorums:
        raise ValueError("kernels of an empty quorum collection are undefined")
    partial: tuple[int, ...] = (0,)
    for q in quorums:
        grown = []
        for t in partial:
            if t & q:
                grown.append(t)
            else:
                grown.extend(t | (1 << x) for x in bs.members(q))
        partial = bs.minimal(grown)
    return partial


# -- per-execution structure --------------------------------------------------


class Kind(enum.Enum):
    FAULTY = "faulty"
    NAIVE = "naive"
    WISE = "wise"


def classify(fps: FailProneSystem, faults: int) -> tuple[Kind, ...]:
    if faults & ~fps.universe:
        raise ValueError("fault set not within the process universe")
    out = []
    for i in range(fps.n):
        if faults >> i & 1:
            out.append(Kind.FAULTY)
        elif fps.foresees(i, faults):
            out.append(Kind.WISE)
        else:
            out.append(Kind.NAIVE)
    return tuple(out)


def depth_map(qs: QuorumSystem, faults: int) -> tuple[int | float | None, ...]:
    """Maximal depth of every process; ``INF`` for the greatest fixpoint, None if faulty.

    Level ``d+1`` keeps the correct processes owning a quorum inside level
    ``d``. The levels shrink monotonically, so the chain stabilizes within n
    steps; whoever survives the stable level has infinite depth.
    """
    correct = bs.full(qs.n) & ~faults
    depth: list[int | float | None] = [None] * qs.n
    level, d = correct, 0
    while True:
        nxt = 0
        for i in bs.members(level):
            if bs.contains_any(level, qs.quorums[i]):
                nxt |= 1 << i
        for i in bs.members(level & ~nxt):
            depth[i] = d
        if nxt == level:
            for i in bs.members(level):
                depth[i] = INF
            return tuple(depth)
        level, d = nxt, d + 1


def with_depth(depths, d) -> int:
    """Mask of processes whose (maximal) depth is at least ``d``."""
    m = 0
    for i, x in enumerate(depths):
        if x is not None and x >= d:
            m |= 1 << i
    return m


def wise_set(fps: FailProneSystem, faults: int) -> int:
    return bs.mask(i for i, k in enumerate(classify(fps, faults)) if k is Kind.WISE)


def maximal_guild(qs: QuorumSystem, fps: FailProneSystem, faults: int) -> int | None:
    """Largest set of wise processes holding a quorum of each member, or None."""
    _aligned(qs, fps)
    g = wise_set(fps, faults)
    while True:
        nxt = bs.mask(i for i in bs.members(g) if bs.contains_any(g, qs.quorums[i]))
        if nxt == g:
            return g or None
        g = nxt


def tolerated_system(qs: QuorumSystem, fps: FailProneSystem) -> tuple[int, ...]:
    """Maximal complements of nonempty maximal guilds over all 2**n fault sets."""
    _aligned(qs, fps)
    everyone = fps.universe
    tolerated = set()
    for faults in range(1 << fps.n):
        g = maximal_guild(qs, fps, faults)
        if g:
            tolerated.add(everyone & ~g)
    return bs.maximal(tolerated) if tolerated else ()


def symmetric_reduction(fps: FailProneSystem) -> tuple[int, ...]:
    return tolerated_system(canonical_quorums(fps), fps)


@dataclass(frozen=True)
class ExecutionContext:
    """Everything an outside observer derives from the actual fault set."""

    faults: int
    classification: tuple[Kind, ...]
    depths: tuple[int | float | None, ...]
    maximal_guild: int | None
    n: int = field(default=0)

    @classmethod
    def derive(cls, qs: QuorumSystem, fps: FailProneSystem, faults: int) -> "ExecutionContext":
        return cls(
            faults=faults,
            classification=classify(fps, faults),
            depths=depth_map(qs, faults),
            maximal_guild=maximal_guild(qs, fps, faults),
            n=qs.n,
        )

    def depth_class(self, d) -> int:
        return with_depth(self.depths, d)

    @property
    def correct(self) -> int:
        return bs.full(self.n) & ~self.faults


def fmt_depth(x) -> str:
    if x is None:
        return "bot"
    if x == INF:
        return "inf"
    return str(x)
