"""Deterministic discrete-event engine: virtual clock, ordered event queue,
named random streams.

One engine instance drives one simulation run on one thread.  All
reproducibility guarantees hinge on two rules enforced here:

* events with equal timestamps dequeue FIFO by insertion order, so the
  execution order is a pure function of the schedule calls;
* every random stream is seeded from (master_seed, stream_name) through a
  fixed hash, so adding a new stream never perturbs draws in existing ones.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from typing import Callable, Sequence


class SchedulingError(Exception):
    """An event was scheduled before the current virtual clock."""


class UnknownStreamError(KeyError):
    """A random stream name was requested that was never configured."""


DEFAULT_STREAMS = ("mobility", "traffic", "social", "channel")


def derive_stream_seed(master_seed: int, name: str) -> int:
    """Stable 64-bit seed for a named substream of ``master_seed``."""
    digest = hashlib.sha256(f"{master_seed}/{name}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class RngStreams:
    """Independent deterministic generators, one per named stream."""

    def __init__(self, master_seed: int, names: Sequence[str] = DEFAULT_STREAMS):
        self.master_seed = master_seed
        self._streams = {
            name: random.Random(derive_stream_seed(master_seed, name))
            for name in names
        }

    def stream(self, name: str) -> random.Random:
        try:
            return self._streams[name]
        except KeyError:
            raise UnknownStreamError(name) from None

    def draw(self, name: str, spec: tuple):
        """Draw one variate described by ``spec`` from stream ``name``.

        ``spec`` is ("uniform", a, b), ("normal", mu, sigma) or
        ("choice", sequence).
        """
        rng = self.stream(name)
        kind = spec[0]
        if kind == "uniform":
            return rng.uniform(spec[1], spec[2])
        if kind == "normal":
            return rng.gauss(spec[1], spec[2])
        if kind == "choice":
            return rng.choice(spec[1])
        raise ValueError(f"unknown distribution {kind!r}")


class EventHandle:
    """Returned by :meth:`Simulator.schedule`; permits cancellation."""

    __slots__ = ("time", "seq", "cancelled", "done")

    def __init__(self, time: float, seq: int):
        self.time = time
        self.seq = seq
        self.cancelled = False
        self.done = False


class EventQueue:
    """Time-ordered event queue with FIFO tie-break among equal timestamps."""

    def __init__(self) -> None:
        self._heap: list[tuple[float, int, EventHandle, Callable[[], None]]] = []
        self._next_seq = 0
        self.scheduled = 0
        self.cancelled = 0
        self.processed = 0

    def __len__(self) -> int:
        return self.scheduled - self.cancelled - self.processed

    def push(self, at: float, action: Callable[[], None]) -> EventHandle:
        handle = EventHandle(at, self._next_seq)
        self._next_seq += 1
        heapq.heappush(self._heap, (at, handle.seq, handle, action))
        self.scheduled += 1
        return handle

    def cancel(self, handle: EventHandle) -> bool:
        if handle.cancelled or handle.done:
            return False
        handle.cancelled = True
        self.cancelled += 1
        return True

    def peek_time(self) -> float | None:
        while self._heap and self._heap[0][2].cancelled:
            heapq.heappop(self._heap)
        return self._heap[0][0] if self._heap else None

    def pop(self) -> tuple[float, Callable[[], None]] | None:
        while self._heap:
            at, _seq, handle, action = heapq.heappop(self._heap)
            if handle.cancelled:
                continue
            handle.done = True
            self.processed += 1
            return at, action
        return None


class Simulator:
    """Virtual clock plus event queue plus named random streams."""

    def __init__(self, master_seed: int = 0,
                 stream_names: Sequence[str] = DEFAULT_STREAMS):
        self.clock = 0.0
        self.queue = EventQueue()
        self.rng = RngStreams(master_seed, stream_names)

    def schedule(self, at: float, action: Callable[[], None]) -> EventHandle:
        if at < self.clock:
            raise SchedulingError(
                f"cannot schedule at t={at}: clock already at t={self.clock}")
        return self.queue.push(at, action)

    def schedule_in(self, delay: float, action: Callable[[], None]) -> EventHandle:
        return self.schedule(self.clock + delay, action)

    def cancel(self, handle: EventHandle) -> bool:
        return self.queue.cancel(handle)

    def run_until(self, end: float) -> None:
        """Process every event with timestamp <= end, then set clock = end."""
        if end < self.clock:
            raise SchedulingError(
                f"run_until({end}) would move the clock backward from {self.clock}")
        while True:
            t = self.queue.peek_time()
            if t is None or t > end:
                break
            at, action = self.queue.pop()
            self.clock = at
            action()
        self.clock = end

    @property
    def pending(self) -> int:
        return len(self.queue)
