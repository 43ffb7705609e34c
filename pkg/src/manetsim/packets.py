"""Packet model shared by the traffic, MAC and routing layers."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum


class PacketClass(Enum):
    BEACON = "beacon"
    PROBE = "probe"            # per-path monitoring probe
    PROBE_REPLY = "probe-reply"
    VIDEO_I = "video-i"
    VIDEO_P = "video-p"
    VIDEO_B = "video-b"
    CBR = "cbr"


SIGNALING_CLASSES = frozenset(
    {PacketClass.BEACON, PacketClass.PROBE, PacketClass.PROBE_REPLY})

# Drop causes used by the accounting; "end-of-run" covers packets still
# queued or in flight when the clock stops.
DROP_CAUSES = ("queue-overflow", "link-break", "corruption", "no-route",
               "end-of-run")

_packet_ids = itertools.count()


@dataclass
class Packet:
    klass: PacketClass
    size_bytes: int
    src: int
    dst: int
    route: tuple[int, ...]          # full source route, src first
    created_at: float
    flow_id: int | None = None
    gop_index: int | None = None
    frame_index: int | None = None
    seq: int | None = None
    payload: dict = field(default_factory=dict)
    hop_index: int = 0              # index into route of the current holder
    pid: int = field(default_factory=lambda: next(_packet_ids))

    @property
    def current_node(self) -> int:
        return self.route[self.hop_index]

    @property
    def next_node(self) -> int | None:
        if self.hop_index + 1 < len(self.route):
            return self.route[self.hop_index + 1]
        return None

    @property
    def hops(self) -> int:
        return len(self.route) - 1
