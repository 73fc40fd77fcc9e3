"""Process sets as integer bitmasks.

Bit ``i`` stands for process ``p_{i+1}``. Everything user-facing (files, CLI,
reports) uses the 1-based labels; everything internal uses 0-based indices.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator

MAX_PROCESSES = 64


def full(n: int) -> int:
    return (1 << n) - 1


def mask(indices: Iterable[int]) -> int:
    m = 0
    for i in indices:
        if i < 0:
            raise ValueError(f"negative process index {i}")
        m |= 1 << i
    return m


def from_labels(labels: Iterable[int]) -> int:
    """Mask from 1-based process labels."""
    return mask(i - 1 for i in labels)


def members(m: int) -> Iterator[int]:
    while m:
        low = m & -m
        yield low.bit_length() - 1
        m ^= low


def labels(m: int) -> list[int]:
    return [i + 1 for i in members(m)]


def size(m: int) -> int:
    return m.bit_count()


def is_subset(a: int, b: int) -> bool:
    return a & ~b == 0


def fmt(m: int) -> str:
    return "{" + ",".join(str(i) for i in labels(m)) + "}"


def subsets_of_size(universe: int, k: int) -> list[int]:
    """All k-element subsets of ``universe``, in increasing numeric order."""
    from itertools import combinations

    elems = list(members(universe))
    out = [mask(c) for c in combinations(elems, k)]
    out.sort()
    return out


def maximal(sets: Iterable[int]) -> tuple[int, ...]:
    """Inclusion-maximal antichain, sorted."""
    uniq = sorted(set(sets), key=lambda s: (-s.bit_count(), s))
    keep: list[int] = []
    for s in uniq:
        if not any(is_subset(s, k) for k in keep):
            keep.append(s)
    return tuple(sorted(keep))


def minimal(sets: Iterable[int]) -> tuple[int, ...]:
    """Inclusion-minimal antichain, sorted."""
    uniq = sorted(set(sets), key=lambda s: (s.bit_count(), s))
    keep: list[int] = []
    for s in uniq:
        if not any(is_subset(k, s) for k in keep):
            keep.append(s)
    return tuple(sorted(keep))


def contains_any(m: int, family: Iterable[int]) -> bool:
    """True iff some member of ``family`` is a subset of ``m``."""
    for s in family:
        if s & ~m == 0:
            return True
    return False
