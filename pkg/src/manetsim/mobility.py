"""Node motion: random-waypoint generation, waypoint-trace import and
position interpolation.

A trace is, per node, an ordered list of (time, x, y) waypoints with
straight-line motion between them.  The text format is one node per line,
whitespace-separated repeating "time x y" triples.
"""

from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass, field


class TraceFormatError(ValueError):
    """A waypoint trace file violated the format or its invariants."""


@dataclass(frozen=True)
class AreaSpec:
    """Rectangular deployment area and node population."""

    width_m: float
    height_m: float
    node_count: int

    def __post_init__(self):
        if self.width_m <= 0 or self.height_m <= 0:
            raise ValueError("area dimensions must be positive")
        if self.node_count <= 0:
            raise ValueError("node_count must be positive")

    @property
    def area_km2(self) -> float:
        return self.width_m * self.height_m / 1e6

    @property
    def density(self) -> float:
        """Nodes per square kilometre."""
        return self.node_count / self.area_km2

    @classmethod
    def from_density(cls, width_m: float, height_m: float,
                     density: float) -> "AreaSpec":
        count = round(density * width_m * height_m / 1e6)
        return cls(width_m, height_m, max(1, count))


@dataclass
class MobilityTrace:
    """Waypoints per node; immutable once built (safe for concurrent reads)."""

    area: AreaSpec
    duration: float
    # per node: parallel lists (times, xs, ys), times strictly increasing
    waypoints: dict[int, tuple[list[float], list[float], list[float]]] = field(
        default_factory=dict)

    @property
    def node_ids(self) -> list[int]:
        return sorted(self.waypoints)

    def validate(self, max_speed: float | None = None) -> None:
        if not self.waypoints:
            raise TraceFormatError("no nodes in trace")
        for node, (times, xs, ys) in self.waypoints.items():
            for i in range(1, len(times)):
                if times[i] <= times[i - 1]:
                    raise TraceFormatError(
                        f"node {node}: waypoint times not strictly increasing "
                        f"at index {i}")
            for x, y in zip(xs, ys):
                if not (0.0 <= x <= self.area.width_m
                        and 0.0 <= y <= self.area.height_m):
                    raise TraceFormatError(
                        f"node {node}: waypoint ({x}, {y}) outside area")
            if max_speed is not None:
                for i in range(1, len(times)):
                    dist = math.hypot(xs[i] - xs[i - 1], ys[i] - ys[i - 1])
                    speed = dist / (times[i] - times[i - 1])
                    if speed > max_speed * (1.0 + 1e-9):
                        raise TraceFormatError(
                            f"node {node}: implied speed {speed:.3f} m/s "
                            f"exceeds {max_speed} m/s")


def generate_waypoint_trace(area: AreaSpec, max_speed: float, duration: float,
                            rng: random.Random, pause_s: float = 0.0,
                            min_speed_fraction: float = 0.1,
                            warmup_s: float = 0.0) -> MobilityTrace:
    """Random-waypoint trace: uniform destinations, uniform speed per leg.

    Speeds are drawn uniform in (min_speed_fraction * max_speed, max_speed]
    to avoid the zero-speed stagnation pathology; pause at waypoints defaults
    to zero.  A nonzero warm-up runs the walk for that long before t = 0 so
    sampled positions come from near the model's stationary (center-biased)
    distribution rather than the uniform initial draw.  All three knobs are
    configuration, not protocol.
    """
    if max_speed <= 0:
        raise ValueError("max_speed must be positive")
    if duration < 0 or warmup_s < 0:
        raise ValueError("duration and warmup must be nonnegative")
    trace = MobilityTrace(area=area, duration=duration)
    lo = min_speed_fraction * max_speed
    horizon = warmup_s + duration
    for node in range(area.node_count):
        x = rng.uniform(0.0, area.width_m)
        y = rng.uniform(0.0, area.height_m)
        times, xs, ys = [0.0], [x], [y]
        t = 0.0
        while t < horizon:
            dest_x = rng.uniform(0.0, area.width_m)
            dest_y = rng.uniform(0.0, area.height_m)
            speed = rng.uniform(lo, max_speed)
            dist = math.hypot(dest_x - x, dest_y - y)
            if dist == 0.0 or speed <= 0.0:
                continue
            t += dist / speed
            times.append(t)
            xs.append(dest_x)
            ys.append(dest_y)
            x, y = dest_x, dest_y
            if pause_s > 0.0 and t < horizon:
                t += pause_s
                times.append(t)
                xs.append(x)
                ys.append(y)
        trace.waypoints[node] = _shift_waypoints(times, xs, ys, warmup_s)
    return trace


def _shift_waypoints(times, xs, ys, warmup_s):
    """Drop the pre-warm-up prefix and rebase the time axis at the warm-up."""
    if warmup_s <= 0.0:
        return times, xs, ys
    i = bisect.bisect_right(times, warmup_s) - 1
    if i >= len(times) - 1:
        return [0.0], [xs[-1]], [ys[-1]]
    frac = (warmup_s - times[i]) / (times[i + 1] - times[i])
    x0 = xs[i] + frac * (xs[i + 1] - xs[i])
    y0 = ys[i] + frac * (ys[i + 1] - ys[i])
    new_times = [0.0]
    new_xs = [x0]
    new_ys = [y0]
    for j in range(i + 1, len(times)):
        new_times.append(times[j] - warmup_s)
        new_xs.append(xs[j])
        new_ys.append(ys[j])
    return new_times, new_xs, new_ys


def position_at(trace: MobilityTrace, node: int, t: float) -> tuple[float, float]:
    """Position by linear interpolation between bracketing waypoints.

    Before the first waypoint the node sits at it; after the last waypoint
    the node holds position (relevant for imported traces shorter than the
    run).
    """
    if node not in trace.waypoints:
        raise KeyError(f"unknown node {node}")
    if not (0.0 <= t <= trace.duration):
        raise ValueError(f"t={t} outside [0, {trace.duration}]")
    times, xs, ys = trace.waypoints[node]
    i = bisect.bisect_right(times, t) - 1
    if i < 0:
        return xs[0], ys[0]
    if i >= len(times) - 1:
        return xs[-1], ys[-1]
    if times[i] == t:
        return xs[i], ys[i]
    frac = (t - times[i]) / (times[i + 1] - times[i])
    return (xs[i] + frac * (xs[i + 1] - xs[i]),
            ys[i] + frac * (ys[i + 1] - ys[i]))


def velocity_at(trace: MobilityTrace, node: int, t: float) -> tuple[float, float]:
    """Velocity vector on the segment containing t (zero outside segments)."""
    if node not in trace.waypoints:
        raise KeyError(f"unknown node {node}")
    times, xs, ys = trace.waypoints[node]
    i = bisect.bisect_right(times, t) - 1
    if i < 0 or i >= len(times) - 1:
        return 0.0, 0.0
    dt = times[i + 1] - times[i]
    return (xs[i + 1] - xs[i]) / dt, (ys[i + 1] - ys[i]) / dt


def import_trace(text: str, area: AreaSpec,
                 duration: float | None = None) -> MobilityTrace:
    """Parse the one-node-per-line "time x y ..." waypoint format.

    Every violation is reported with its 1-based line number.
    """
    waypoints: dict[int, tuple[list[float], list[float], list[float]]] = {}
    node = 0
    last_time = 0.0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) % 3 != 0:
            raise TraceFormatError(
                f"line {lineno}: expected repeating 'time x y' triples, "
                f"got {len(fields)} fields")
        times: list[float] = []
        xs: list[float] = []
        ys: list[float] = []
        try:
            values = [float(f) for f in fields]
        except ValueError as exc:
            raise TraceFormatError(f"line {lineno}: non-numeric field: {exc}")
        for j in range(0, len(values), 3):
            t, x, y = values[j], values[j + 1], values[j + 2]
            if times and t <= times[-1]:
                raise TraceFormatError(
                    f"line {lineno}: waypoint times not strictly increasing")
            if not (0.0 <= x <= area.width_m and 0.0 <= y <= area.height_m):
                raise TraceFormatError(
                    f"line {lineno}: coordinate ({x}, {y}) outside "
                    f"{area.width_m} x {area.height_m} area")
            times.append(t)
            xs.append(x)
            ys.append(y)
        waypoints[node] = (times, xs, ys)
        last_time = max(last_time, times[-1])
        node += 1
    if not waypoints:
        raise TraceFormatError("no nodes in trace")
    trace = MobilityTrace(
        area=AreaSpec(area.width_m, area.height_m, node),
        duration=duration if duration is not None else last_time,
        waypoints=waypoints)
    trace.validate()
    return trace
