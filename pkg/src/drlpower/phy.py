"""Per-frame link outcomes: carrier sense, SINR, rate tiers and energy."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .channel import ChannelMatrix
from .core import QUALITY_MAX, QUALITY_MIN, ContractViolation, LinkQuality, NodeId, PowerLevel


@dataclass(frozen=True)
class RateTable:
    """SNR thresholds (dB) and the PHY rate (Mbps) unlocked at each."""

    thresholds: tuple[float, ...]
    rates: tuple[float, ...]

    def __post_init__(self):
        if len(self.thresholds) != len(self.rates) or not self.thresholds:
            raise ValueError("rate table needs matching, non-empty thresholds and rates")
        for seq, what in ((self.thresholds, "thresholds"), (self.rates, "rates")):
            if any(b <= a for a, b in zip(seq, seq[1:])):
                raise ValueError(f"{what} must be strictly increasing")

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[float]]) -> RateTable:
        return cls(tuple(float(p[0]) for p in pairs), tuple(float(p[1]) for p in pairs))

    @property
    def min_snr(self) -> float:
        return self.thresholds[0]


# 802.11n single stream, 20 MHz, MCS0-7
DEFAULT_RATE_TABLE = RateTable(
    thresholds=(5.0, 8.0, 11.0, 14.0, 17.0, 20.0, 23.0, 25.0),
    rates=(6.5, 13.0, 19.5, 26.0, 39.0, 52.0, 58.5, 65.0),
)


@dataclass(frozen=True)
class PhyParams:
    noise_dbm: float = -94.0
    cs_threshold_dbm: float = -82.0
    frame_duration: float = 5e-3
    amp_efficiency: float = 0.1
    processing_power_w: float = 0.1
    rate_table: RateTable = field(default=DEFAULT_RATE_TABLE)


class Intent(NamedTuple):
    tx: NodeId
    rx: NodeId
    bits: int


@dataclass(frozen=True)
class LinkReport:
    tx: NodeId
    rx: NodeId
    rssi: float
    snr: float
    success: bool
    bits_delivered: int
    frame_duration: float


@dataclass(frozen=True)
class EnergyRecord:
    tx_power_watts: float
    processing_watts: float
    energy_joules: float


def dbm_to_mw(dbm):
    return 10.0 ** (np.asarray(dbm, dtype=float) / 10.0)


def snr_db(p_rx: float, interference_mw: float = 0.0, noise_dbm: float = -94.0) -> float:
    """SINR in dB, computed in the linear domain."""
    return float(10.0 * np.log10(dbm_to_mw(p_rx) / (dbm_to_mw(noise_dbm) + interference_mw)))


def quantize_quality(snr: float) -> LinkQuality:
    return int(min(QUALITY_MAX, max(QUALITY_MIN, np.floor(snr + 0.5))))


def rate_for_snr(snr: float, table: RateTable = DEFAULT_RATE_TABLE) -> float:
    i = bisect.bisect_right(table.thresholds, snr)
    return table.rates[i - 1] if i else 0.0


def energy_for_frame(p: PowerLevel, transmitting: bool, phy: PhyParams = PhyParams()) -> EnergyRecord:
    """Energy drawn over one frame: amplifier input plus processing, or processing alone when idle."""
    tx_w = 10.0 ** ((p - 30) / 10.0) if transmitting else 0.0
    drawn = tx_w / phy.amp_efficiency + phy.processing_power_w
    return EnergyRecord(tx_w, phy.processing_power_w, drawn * phy.frame_duration)


def contend_and_transmit(intents: Sequence[Intent], channel: ChannelMatrix, powers: Sequence[float],
                         rng: np.random.Generator, phy: PhyParams = PhyParams(),
                         ) -> tuple[list[LinkReport], list[Intent]]:
    """Resolve one frame slot of contention.

    Transmitters are considered in a random order (one permutation of all node ids
    per slot, so the number of draws does not depend on the intents). An intent
    defers if an already admitted transmitter is heard above the carrier-sense
    threshold, or if half-duplex forbids it: its sender is already receiving, or
    its receiver is already transmitting. Hidden transmitters toward a common
    receiver are both admitted and interfere. Admitted links succeed when their
    SINR reaches the lowest rate tier.

    Returns the reports of admitted transmissions (in admission order) and the
    deferred intents.
    """
    seen = set()
    for it in intents:
        if it.tx in seen:
            raise ContractViolation(f"node {it.tx} has more than one intent in a slot")
        if it.tx == it.rx:
            raise ContractViolation(f"node {it.tx} cannot transmit to itself")
        if it.bits <= 0:
            raise ContractViolation(f"intent from node {it.tx} carries no data")
        seen.add(it.tx)

    rank = np.empty(channel.n_nodes, dtype=int)
    rank[rng.permutation(channel.n_nodes)] = np.arange(channel.n_nodes)
    ordered = sorted(intents, key=lambda it: rank[it.tx])

    rx_dbm = channel.rx_matrix(powers)
    admitted: list[Intent] = []
    deferred: list[Intent] = []
    sending: set[int] = set()
    receiving: set[int] = set()
    for it in ordered:
        if it.tx in receiving or it.rx in sending or any(
                rx_dbm[k.tx, it.tx] >= phy.cs_threshold_dbm for k in admitted):
            deferred.append(it)
            continue
        admitted.append(it)
        sending.add(it.tx)
        receiving.add(it.rx)

    reports = []
    noise_mw = float(dbm_to_mw(phy.noise_dbm))
    for it in admitted:
        rssi = float(rx_dbm[it.tx, it.rx])
        interference = sum(float(dbm_to_mw(rx_dbm[k.tx, it.rx])) for k in admitted if k.tx != it.tx)
        sinr = float(10.0 * np.log10(dbm_to_mw(rssi) / (noise_mw + interference)))
        rate = rate_for_snr(sinr, phy.rate_table)
        bits = min(it.bits, int(round(rate * 1e6 * phy.frame_duration))) if rate > 0 else 0
        reports.append(LinkReport(it.tx, it.rx, rssi, sinr, bits > 0, bits, phy.frame_duration))
    return reports, deferred
