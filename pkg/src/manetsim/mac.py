"""Simplified 802.11e-style access differentiation.

Four priority queues per node served in strict priority order (AC0 first).
This keeps the ordering semantics that matter for video (I over P over B,
signaling above all) without modelling contention windows; contention shows
up instead as the neighborhood load factor that scales the effective rate
and channel-access latency.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum

from .packets import Packet, PacketClass


class AccessCategory(IntEnum):
    AC0 = 0  # signaling
    AC1 = 1  # high priority (I frames)
    AC2 = 2  # medium priority (P frames)
    AC3 = 3  # low priority (B frames + best effort)


# Fixed mapping, not configurable.
PRIORITY_MAP: dict[PacketClass, AccessCategory] = {
    PacketClass.BEACON: AccessCategory.AC0,
    PacketClass.PROBE: AccessCategory.AC0,
    PacketClass.PROBE_REPLY: AccessCategory.AC0,
    PacketClass.VIDEO_I: AccessCategory.AC1,
    PacketClass.VIDEO_P: AccessCategory.AC2,
    PacketClass.VIDEO_B: AccessCategory.AC3,
    PacketClass.CBR: AccessCategory.AC3,
}

DEFAULT_QUEUE_CAPACITY = 50  # packets per access category


def category_of(packet: Packet) -> AccessCategory:
    return PRIORITY_MAP[packet.klass]


@dataclass
class NodeQueues:
    """Per-node MAC state: four FIFO queues plus the half-duplex flag."""

    capacity: int = DEFAULT_QUEUE_CAPACITY
    queues: tuple[deque, deque, deque, deque] = field(
        default_factory=lambda: (deque(), deque(), deque(), deque()))
    transmitting: bool = False

    def enqueue(self, packet: Packet) -> bool:
        """Append to the mapped queue; False means queue-overflow drop."""
        q = self.queues[category_of(packet)]
        if len(q) >= self.capacity:
            return False
        q.append(packet)
        return True

    def dequeue_next(self) -> Packet | None:
        """Head of the lowest-numbered nonempty queue (strict priority)."""
        for q in self.queues:
            if q:
                return q.popleft()
        return None

    def backlog(self) -> int:
        return sum(len(q) for q in self.queues)

    def drain(self) -> list[Packet]:
        left = []
        for q in self.queues:
            left.extend(q)
            q.clear()
        return left


class MacLayer:
    """All nodes' queues plus the neighborhood load metric."""

    def __init__(self, node_ids: list[int],
                 capacity: int = DEFAULT_QUEUE_CAPACITY,
                 neighbor_provider=None):
        self.nodes = {n: NodeQueues(capacity=capacity) for n in node_ids}
        self._neighbor_provider = neighbor_provider  # (node, t) -> iterable

    def enqueue(self, node: int, packet: Packet) -> bool:
        return self.nodes[node].enqueue(packet)

    def dequeue_next(self, node: int) -> Packet | None:
        return self.nodes[node].dequeue_next()

    def backlog(self, node: int) -> int:
        return self.nodes[node].backlog()

    def neighborhood_load(self, node: int, t: float) -> int:
        """1 + number of neighbors with a nonempty MAC queue at t."""
        if self._neighbor_provider is None:
            return 1
        load = 1
        for nbr in self._neighbor_provider(node, t):
            if self.nodes[nbr].backlog() > 0:
                load += 1
        return load
