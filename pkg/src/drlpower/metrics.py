"""Throughput/efficiency metrics, the arm comparison table, and CSV/JSON export."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import ContractViolation

SCHEMA_VERSION = 1
TRACE_COLUMNS = ("frame", "node", "power_dbm", "action", "reward", "tx_bits", "energy_j")
COMPARISON_COLUMNS = ("arm", "energy_eff_mbps_per_j", "throughput_mbps", "gain_eff_pct", "gain_tput_pct")
ARM_ORDER = ("fixed", "myopic", "dqn")


@dataclass
class EpisodeMetrics:
    arm: str
    seed: int | None
    frames: int
    duration_s: float
    delivered_bits: int
    energy_j: float
    power_trace: np.ndarray = field(repr=False)   # (frames, nodes) dBm
    reward_trace: np.ndarray = field(repr=False)  # (frames, nodes)

    @property
    def throughput_mbps(self) -> float:
        return self.delivered_bits / self.duration_s / 1e6

    @property
    def energy_efficiency(self) -> float:
        """Delivered megabits per Joule consumed by all nodes."""
        return self.delivered_bits / 1e6 / self.energy_j if self.energy_j > 0 else 0.0


def aggregate(records: Sequence, frame_duration: float, arm: str = "", seed: int | None = None) -> EpisodeMetrics:
    if not records:
        raise ContractViolation("cannot aggregate an empty log")
    frames = len(records)
    duration = frames * frame_duration
    if duration <= 0:
        raise ContractViolation("log covers zero time")
    return EpisodeMetrics(
        arm, seed, frames, duration,
        delivered_bits=int(sum(r.delivered_bits for r in records)),
        energy_j=float(sum(sum(r.energy_j) for r in records)),
        power_trace=np.array([r.powers for r in records], dtype=float),
        reward_trace=np.array([r.rewards for r in records], dtype=float),
    )


def combine(a: EpisodeMetrics, b: EpisodeMetrics) -> EpisodeMetrics:
    """Metrics of two consecutive log chunks, equal to aggregating them together."""
    return EpisodeMetrics(a.arm, a.seed, a.frames + b.frames, a.duration_s + b.duration_s,
                          a.delivered_bits + b.delivered_bits, a.energy_j + b.energy_j,
                          np.vstack([a.power_trace, b.power_trace]),
                          np.vstack([a.reward_trace, b.reward_trace]))


@dataclass(frozen=True)
class ArmSummary:
    arm: str
    energy_efficiency: float
    throughput_mbps: float
    n_runs: int = 1


def mean_metrics(per_seed: Sequence[EpisodeMetrics]) -> ArmSummary:
    """Average of the per-run values (each seed weighs the same)."""
    return ArmSummary(per_seed[0].arm,
                      float(np.mean([m.energy_efficiency for m in per_seed])),
                      float(np.mean([m.throughput_mbps for m in per_seed])),
                      len(per_seed))


@dataclass(frozen=True)
class ComparisonRow:
    arm: str
    energy_efficiency: float | None
    throughput_mbps: float | None
    gain_eff_pct: float | None
    gain_tput_pct: float | None


def _gain(value: float | None, base: float | None) -> float | None:
    if value is None or base is None or base == 0:
        return None
    return (value - base) / base * 100.0


def build_comparison(results: Mapping[str, ArmSummary | tuple[float, float]]) -> list[ComparisonRow]:
    """Rows in fixed/myopic/dqn order with percentage gains relative to the fixed arm.

    Values may be ArmSummary objects or (energy_efficiency, throughput) pairs.
    Missing arms are kept as rows with empty values.
    """
    def unpack(v):
        if v is None:
            return None, None
        if isinstance(v, ArmSummary):
            return v.energy_efficiency, v.throughput_mbps
        return float(v[0]), float(v[1])

    base_eff, base_tput = unpack(results.get("fixed"))
    arms = list(ARM_ORDER) + [a for a in results if a not in ARM_ORDER]
    rows = []
    for arm in arms:
        eff, tput = unpack(results.get(arm))
        rows.append(ComparisonRow(arm, eff, tput, _gain(eff, base_eff), _gain(tput, base_tput)))
    return rows


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_comparison_csv(rows: Sequence[ComparisonRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPARISON_COLUMNS)
        for r in rows:
            w.writerow([r.arm, _fmt(r.energy_efficiency), _fmt(r.throughput_mbps),
                        _fmt(r.gain_eff_pct), _fmt(r.gain_tput_pct)])


def trace_rows(log, node: int | None = None):
    """Rows of the trace schema; all nodes when ``node`` is None."""
    records = list(log)
    if not records:
        return
    n_nodes = len(records[0].powers)
    if node is not None and not 0 <= node < n_nodes:
        raise LookupError(f"node {node} not in log (nodes 0..{n_nodes - 1})")
    nodes = range(n_nodes) if node is None else (node,)
    for r in records:
        for n in nodes:
            yield (r.frame, n, r.powers[n], r.actions[n], r.rewards[n], r.tx_bits[n], r.energy_j[n])


def export_traces(log, node: int | None, path: str | Path) -> int:
    """Write per-frame power/reward traces; returns the number of data rows."""
    rows = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in trace_rows(log, node):
            w.writerow([_fmt(v) for v in row])
            rows += 1
    return rows


def write_per_seed_csv(results: Mapping[str, dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("arm", "seed", "frames", "delivered_bits", "energy_j",
                    "energy_eff_mbps_per_j", "throughput_mbps"))
        for arm, res in results.items():
            for m in res["per_seed"]:
                w.writerow([arm, m.seed, m.frames, m.delivered_bits, _fmt(m.energy_j),
                            _fmt(m.energy_efficiency), _fmt(m.throughput_mbps)])


def write_summary(path: str | Path, config: dict, rows: Sequence[ComparisonRow], seeds: Sequence[int]) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "seeds": list(seeds),
        "config": config,
        "arms": [{"arm": r.arm, "energy_eff_mbps_per_j": r.energy_efficiency,
                  "throughput_mbps": r.throughput_mbps, "gain_eff_pct": r.gain_eff_pct,
                  "gain_tput_pct": r.gain_tput_pct} for r in rows],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
