"""Pending-message pool and delivery policies.

Fairness is an overtaking bound: a message between two correct processes is
never overtaken by more than ``max_delay`` deliveries of messages sent after
it. When the oldest such message reaches the bound it is delivered next,
whatever the policy would have chosen. The oldest pending correct message
always has the largest overtake count, so it is the only one to watch.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from ..protocols.messages import Message
from .scenario import Schedule


@dataclass(slots=True)
class Envelope:
    seq: int
    src: int
    dst: int
    msg: Message
    fair: bool  # correct sender and correct receiver
    lazy: bool = False  # only delivered when nothing else is pending


class _Bag:
    """Unordered set with O(1) add, remove and uniform pick."""

    def __init__(self):
        self.items: list[Envelope] = []
        self.pos: dict[int, int] = {}

    def __len__(self) -> int:
        return len(self.items)

    def add(self, env: Envelope) -> None:
        self.pos[env.seq] = len(self.items)
        self.items.append(env)

    def remove(self, env: Envelope) -> None:
        i = self.pos.pop(env.seq)
        last = self.items.pop()
        if last.seq != env.seq:
            self.items[i] = last
            self.pos[last.seq] = i

    def pick(self, rng: random.Random) -> Envelope:
        return self.items[rng.randrange(len(self.items))]


class _Fifo:
    """Per-destination queues served round-robin, oldest message first."""

    def __init__(self, n: int):
        self.queues: list[dict[int, Envelope]] = [{} for _ in range(n)]
        self.turn = 0
        self.count = 0

    def __len__(self) -> int:
        return self.count

    def add(self, env: Envelope) -> None:
        self.queues[env.dst][env.seq] = env
        self.count += 1

    def remove(self, env: Envelope) -> None:
        del self.queues[env.dst][env.seq]
        self.count -= 1

    def pick(self, rng) -> Envelope:
        n = len(self.queues)
        for step in range(n):
            q = self.queues[(self.turn + step) % n]
            if q:
                self.turn = (self.turn + step + 1) % n
                return next(iter(q.values()))
        raise IndexError("pick from an empty pool")


class _SlowSet:
    """Postpones messages to a seeded, periodically rotated set of recipients."""

    def __init__(self, n: int, candidates: list[int], rng: random.Random, rotate_every: int):
        self.n = n
        self.candidates = candidates
        self.rng = rng
        self.rotate_every = max(1, rotate_every)
        self.fast = _Bag()
        self.slow = _Bag()
        self.slow_set = self._draw()
        self.since = 0

    def _draw(self) -> frozenset[int]:
        if not self.candidates:
            return frozenset()
        k = max(1, len(self.candidates) // 3)
        return frozenset(self.rng.sample(self.candidates, k))

    def __len__(self) -> int:
        return len(self.fast) + len(self.slow)

    def _bag(self, env: Envelope) -> _Bag:
        return self.slow if env.dst in self.slow_set else self.fast

    def add(self, env: Envelope) -> None:
        self._bag(env).add(env)

    def remove(self, env: Envelope) -> None:
        self._bag(env).remove(env)

    def pick(self, rng: random.Random) -> Envelope:
        self.since += 1
        if self.since >= self.rotate_every:
            self.since = 0
            everything = self.fast.items + self.slow.items
            everything.sort(key=lambda e: e.seq)
            self.fast, self.slow = _Bag(), _Bag()
            self.slow_set = self._draw()
            for env in everything:
                self.add(env)
        bag = self.fast if self.fast else self.slow
        return bag.pick(rng)


class Scheduler:
    def __init__(self, policy: Schedule, n: int, correct: int, seed: int, max_delay: int):
        self.policy = policy
        self.n = n
        self.correct = correct
        self.max_delay = max_delay
        self.rng = random.Random(f"schedule:{policy.value}:{seed}")
        if policy is Schedule.FIFO_ROUND_ROBIN:
            self.pool = _Fifo(n)
        elif policy is Schedule.RANDOM_SEEDED:
            self.pool = _Bag()
        else:
            cands = [i for i in range(n) if correct >> i & 1]
            self.pool = _SlowSet(n, cands, self.rng, rotate_every=max(1, max_delay // 2))
        self.lazy: dict[int, Envelope] = {}
        self.by_seq: dict[int, Envelope] = {}
        self.next_seq = 0
        self.delivered_flags = bytearray()
        self.fair_pending: dict[int, Envelope] = {}  # insertion order = seq order
        self.oldest = -1  # seq of the oldest pending fair message, -1 if none
        self.overtaken = 0  # deliveries with seq > oldest since that message was sent
        self.forced = 0

    def __len__(self) -> int:
        return len(self.pool) + len(self.lazy)

    def post(self, src: int, dst: int, msg: Message, lazy: bool = False) -> Envelope:
        fair = bool(self.correct >> src & 1 and self.correct >> dst & 1)
        env = Envelope(self.next_seq, src, dst, msg, fair, lazy and not fair)
        self.next_seq += 1
        self.delivered_flags.append(0)
        self.by_seq[env.seq] = env
        if env.lazy:
            self.lazy[env.seq] = env
        else:
            self.pool.add(env)
        if fair:
            self.fair_pending[env.seq] = env
            if self.oldest < 0:
                self._advance_oldest()
        return env

    def _advance_oldest(self) -> None:
        """Move ``oldest`` to the next pending fair message and rebase its overtake count."""
        prev = self.oldest
        nxt = next(iter(self.fair_pending), -1)
        if nxt < 0:
            self.oldest, self.overtaken = -1, 0
            return
        if prev < 0:
            # nothing sent after ``nxt`` can have been delivered yet
            self.overtaken = sum(self.delivered_flags[nxt + 1:])
        else:
            self.overtaken -= sum(self.delivered_flags[prev + 1 : nxt + 1])
        self.oldest = nxt

    def pop(self) -> Envelope:
        if not len(self):
            raise IndexError("no pending messages")
        if self.oldest >= 0 and self.overtaken >= self.max_delay:
            env = self.fair_pending[self.oldest]
            self.forced += 1
        elif len(self.pool):
            env = self.pool.pick(self.rng)
        else:
            env = next(iter(self.lazy.values()))
        self._take(env)
        return env

    def take(self, seq: int) -> Envelope:
        """Deliver a specific message (used by exhaustive exploration)."""
        env = self.by_seq[seq]
        self._take(env)
        return env

    def _take(self, env: Envelope) -> None:
        del self.by_seq[env.seq]
        if env.lazy:
            del self.lazy[env.seq]
        else:
            self.pool.remove(env)
        self.delivered_flags[env.seq] = 1
        if env.fair:
            del self.fair_pending[env.seq]
        if self.oldest >= 0 and env.seq > self.oldest:
            self.overtaken += 1
        if env.seq == self.oldest:
            self._advance_oldest()

    def pending(self) -> list[Envelope]:
        return sorted(self.by_seq.values(), key=lambda e: e.seq)
