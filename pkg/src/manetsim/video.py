"""VBR video source with a repeating I/P/B frame pattern, packetization with
per-type priorities, decode-ability accounting, and constant-bitrate
interferers.

Frame sizes follow lognormal distributions whose means keep the I:P:B ratio
at 5:2:1 and the long-run bitrate at the configured target.  A frame-size
trace can be imported instead for anyone holding real encoder output.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .packets import Packet, PacketClass

FRAME_CLASS = {
    "I": PacketClass.VIDEO_I,
    "P": PacketClass.VIDEO_P,
    "B": PacketClass.VIDEO_B,
}

DEFAULT_PATTERN = "IBBPBBPBBPBB"


@dataclass(frozen=True)
class GopModel:
    pattern: str = DEFAULT_PATTERN
    fps: float = 25.0
    target_rate_bps: float = 150_000.0
    size_ratio: tuple[float, float, float] = (5.0, 2.0, 1.0)  # I : P : B
    sigma_log: float = 0.3
    max_packet_bytes: int = 1500

    def __post_init__(self):
        if not self.pattern or self.pattern[0] != "I":
            raise ValueError("GoP pattern must start with an I frame")
        if any(c not in "IPB" for c in self.pattern):
            raise ValueError("GoP pattern may only contain I, P and B")
        if self.fps <= 0 or self.target_rate_bps <= 0:
            raise ValueError("fps and target rate must be positive")

    @property
    def frame_interval(self) -> float:
        return 1.0 / self.fps

    def mean_sizes(self) -> dict[str, float]:
        """Mean frame size in bytes per type, calibrated to the target rate."""
        counts = {t: self.pattern.count(t) for t in "IPB"}
        ratio = dict(zip("IPB", self.size_ratio))
        gop_bytes = self.target_rate_bps * len(self.pattern) / self.fps / 8.0
        unit = gop_bytes / sum(counts[t] * ratio[t] for t in "IPB")
        return {t: ratio[t] * unit for t in "IPB"}


@dataclass(frozen=True)
class VideoFrame:
    gop_index: int
    frame_index: int  # position within the GoP pattern
    frame_type: str
    size_bytes: int
    generated_at: float


class VideoSource:
    """Generates frames in pattern order with lognormal sizes, or replays an
    imported frame trace."""

    def __init__(self, model: GopModel,
                 trace: list[tuple[str, int]] | None = None):
        self.model = model
        self._trace = trace
        self._counter = 0
        means = model.mean_sizes()
        # lognormal location parameter chosen so E[size] matches the mean
        self._mu_log = {t: math.log(m) - model.sigma_log ** 2 / 2.0
                        for t, m in means.items()}

    def next_frame(self, rng: random.Random, now: float) -> VideoFrame:
        pattern = self.model.pattern
        position = self._counter % len(pattern)
        gop = self._counter // len(pattern)
        self._counter += 1
        if self._trace is not None:
            ftype, size = self._trace[(self._counter - 1) % len(self._trace)]
        else:
            ftype = pattern[position]
            size = max(1, round(rng.lognormvariate(
                self._mu_log[ftype], self.model.sigma_log)))
        return VideoFrame(gop, position, ftype, size, now)


def packetize(frame: VideoFrame, max_packet_bytes: int = 1500,
              src: int = 0, dst: int = 0, route: tuple[int, ...] = (),
              flow_id: int | None = None) -> list[Packet]:
    """Fragment a frame into packets of at most max_packet_bytes, each
    tagged with the frame's priority class and GoP/frame identity."""
    if frame.size_bytes <= 0:
        raise ValueError("frame size must be positive")
    klass = FRAME_CLASS[frame.frame_type]
    n = math.ceil(frame.size_bytes / max_packet_bytes)
    packets = []
    remaining = frame.size_bytes
    for i in range(n):
        size = min(max_packet_bytes, remaining)
        remaining -= size
        packets.append(Packet(
            klass=klass, size_bytes=size, src=src, dst=dst, route=route,
            created_at=frame.generated_at, flow_id=flow_id,
            gop_index=frame.gop_index, frame_index=frame.frame_index, seq=i))
    return packets


def decodeable_gops(delivery_log) -> float:
    """Fraction of GoPs whose I-frame packets all arrived.

    ``delivery_log`` holds one entry per generated video packet:
    (gop_index, is_i_frame, delivered).  A GoP missing any I packet counts
    as undecodable; GoPs without I entries do not occur by construction
    (every pattern starts with I).
    """
    gop_ok: dict[int, bool] = {}
    for gop_index, is_i, delivered in delivery_log:
        if gop_index not in gop_ok:
            gop_ok[gop_index] = True
        if is_i and not delivered:
            gop_ok[gop_index] = False
    if not gop_ok:
        return 1.0
    return sum(gop_ok.values()) / len(gop_ok)


@dataclass(frozen=True)
class CbrSpec:
    rate_bps: float = 300_000.0
    packet_bytes: int = 1500

    def __post_init__(self):
        if self.rate_bps <= 0:
            raise ValueError("CBR rate must be positive")
        if self.packet_bytes <= 0:
            raise ValueError("CBR packet size must be positive")

    @property
    def interval(self) -> float:
        """Fixed inter-departure time of the best-effort packet stream."""
        return self.packet_bytes * 8.0 / self.rate_bps


def load_frame_trace(text: str) -> list[tuple[str, int]]:
    """Rows of (frame_index, type, size_bytes), comma or whitespace split."""
    frames: list[tuple[int, str, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.replace(",", " ").split()
        if len(fields) != 3:
            raise ValueError(
                f"frame trace line {lineno}: expected 'index type size'")
        index, ftype, size = fields
        if ftype not in FRAME_CLASS:
            raise ValueError(
                f"frame trace line {lineno}: frame type must be I, P or B")
        size_i = int(size)
        if size_i <= 0:
            raise ValueError(
                f"frame trace line {lineno}: size must be positive")
        frames.append((int(index), ftype, size_i))
    if not frames:
        raise ValueError("empty frame trace")
    frames.sort(key=lambda f: f[0])
    return [(ftype, size) for _, ftype, size in frames]
