"""Physical layer: log-distance path loss, SNR, unit-disk connectivity and
per-link delivery behaviour.

The paper-grade inputs are transmission range (120 m), nominal bitrate
(11 Mbps) and channel noise floor (-92 dBm).  Everything else here is our
documented calibration: transmit power is derived so that the SNR at exactly
the transmission range equals the reception threshold, which makes the
usable-link predicate (distance <= range) and the SNR model agree.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

SPEED_OF_LIGHT = 299_792_458.0  # m/s


@dataclass(frozen=True)
class RadioSpec:
    tx_range_m: float = 120.0
    noise_floor_dbm: float = -92.0
    path_loss_exponent: float = 3.0
    nominal_bitrate_bps: float = 11e6
    snr_threshold_db: float = 10.0
    ref_loss_db: float = 40.0  # path loss at the 1 m reference distance
    max_corruption_prob: float = 0.05
    corruption_span_db: float = 20.0
    tx_power_dbm: float = field(default=0.0)

    def __post_init__(self):
        if self.tx_range_m <= 0:
            raise ValueError("tx_range_m must be positive")
        if self.nominal_bitrate_bps <= 0:
            raise ValueError("nominal_bitrate_bps must be positive")
        if not 0.0 <= self.max_corruption_prob <= 1.0:
            raise ValueError("max_corruption_prob must be in [0, 1]")
        # Calibration identity: snr(tx_range) == snr_threshold exactly.
        object.__setattr__(
            self, "tx_power_dbm",
            self.snr_threshold_db + self.path_loss(self.tx_range_m)
            + self.noise_floor_dbm)

    def path_loss(self, distance_m: float) -> float:
        """Log-distance path loss in dB, 1 m reference distance."""
        d = max(distance_m, 1.0)
        return self.ref_loss_db + 10.0 * self.path_loss_exponent * math.log10(d)

    def snr(self, distance_m: float) -> float:
        return self.tx_power_dbm - self.path_loss(distance_m) - self.noise_floor_dbm

    def corruption_probability(self, snr_db: float) -> float:
        """Monotone nonincreasing in SNR; max_corruption_prob at threshold,
        zero once the margin reaches corruption_span_db."""
        margin = snr_db - self.snr_threshold_db
        frac = 1.0 - margin / self.corruption_span_db
        return self.max_corruption_prob * min(1.0, max(0.0, frac))


@dataclass(frozen=True)
class LinkState:
    node_a: int
    node_b: int
    distance_m: float
    snr_db: float
    usable: bool


@dataclass(frozen=True)
class TransmitOutcome:
    status: str  # "delivered" | "corrupted" | "dropped"
    delay_s: float = 0.0
    cause: str | None = None

    @property
    def delivered(self) -> bool:
        return self.status == "delivered"


def transmission_delay(spec: RadioSpec, size_bytes: int,
                       load_factor: float) -> float:
    """size / effective rate, with the nominal rate shared among contenders."""
    effective_rate = spec.nominal_bitrate_bps / max(1.0, load_factor)
    return size_bytes * 8.0 / effective_rate


class Medium:
    """Instantaneous connectivity and delivery over a mobility trace.

    Pure function of (positions, RadioSpec, rng stream); the only state is a
    one-entry cache of the last connectivity snapshot, keyed by query time.
    """

    def __init__(self, spec: RadioSpec, position_of, node_ids: list[int]):
        self.spec = spec
        self._position_of = position_of  # callable (node, t) -> (x, y)
        self.node_ids = sorted(node_ids)
        self._graph_cache: dict[float, dict[int, list[int]]] = {}

    def link_state(self, a: int, b: int, t: float) -> LinkState:
        if a == b:
            raise ValueError("no self links")
        xa, ya = self._position_of(a, t)
        xb, yb = self._position_of(b, t)
        dist = math.hypot(xb - xa, yb - ya)
        return LinkState(a, b, dist, self.spec.snr(dist),
                         usable=dist <= self.spec.tx_range_m)

    def neighbor_set(self, node: int, t: float) -> set[int]:
        return set(self.connectivity(t)[node])

    def connectivity(self, t: float) -> dict[int, list[int]]:
        """Adjacency lists (sorted) of the unit-disk graph at time t."""
        cached = self._graph_cache.get(t)
        if cached is not None:
            return cached
        pos = {n: self._position_of(n, t) for n in self.node_ids}
        adj: dict[int, list[int]] = {n: [] for n in self.node_ids}
        r2 = self.spec.tx_range_m ** 2
        ids = self.node_ids
        for i, a in enumerate(ids):
            xa, ya = pos[a]
            for b in ids[i + 1:]:
                xb, yb = pos[b]
                if (xb - xa) ** 2 + (yb - ya) ** 2 <= r2:
                    adj[a].append(b)
                    adj[b].append(a)
        self._graph_cache[t] = adj
        return adj

    def transmit(self, link: LinkState, size_bytes: int, load_factor: float,
                 rng: random.Random) -> TransmitOutcome:
        """One unicast attempt over ``link``.

        Delivered after transmission plus propagation delay, or corrupted
        with a probability that decreases with SNR margin; sends on an
        unusable link drop with cause "link-break".
        """
        if not link.usable:
            return TransmitOutcome("dropped", cause="link-break")
        delay = (transmission_delay(self.spec, size_bytes, load_factor)
                 + link.distance_m / SPEED_OF_LIGHT)
        p = self.spec.corruption_probability(link.snr_db)
        if p > 0.0 and rng.random() < p:
            return TransmitOutcome("corrupted", delay_s=delay,
                                   cause="corruption")
        return TransmitOutcome("delivered", delay_s=delay)
