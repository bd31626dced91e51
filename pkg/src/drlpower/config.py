"""Scenario configuration and its YAML/JSON file form (keys mirror the field names)."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .channel import ChannelParams
from .dqn import Hyperparameters
from .phy import DEFAULT_RATE_TABLE, PhyParams, RateTable


def _default_rate_table() -> list[list[float]]:
    return [[t, r] for t, r in zip(DEFAULT_RATE_TABLE.thresholds, DEFAULT_RATE_TABLE.rates)]


def _default_dqn() -> dict[str, Any]:
    d = dataclasses.asdict(Hyperparameters())
    d["hidden"] = list(d["hidden"])
    d["eps_decay_steps"] = 0
    return d


@dataclass
class ScenarioConfig:
    n_nodes: int = 5
    area_width: float = 500.0
    area_height: float = 500.0
    speed: float = 5.0
    frame_duration: float = 5e-3
    episode_length: int = 200
    episodes: int = 25
    n_flows: int = 2
    policy: str = "dqn"
    seed: int = 0
    # first episode counted in the reported metrics (0 = whole run); None -> second half
    eval_start_episode: int | None = 0

    reward_penalty: float = 0.1
    initial_power: int = 20
    fixed_levels: tuple[int, ...] = (0, 10, 20)
    fixed_redraw: str = "frame"

    pl0_db: float = 40.0
    d0: float = 1.0
    pathloss_exponent: float = 3.0
    d_min: float = 1.0
    shadowing_sigma_db: float = 0.0

    noise_dbm: float = -94.0
    cs_threshold_dbm: float = -82.0
    amp_efficiency: float = 0.1
    processing_power_w: float = 0.1
    rate_table: list[list[float]] = field(default_factory=_default_rate_table)

    etx_window: int = 100
    route_interval: int = 20
    relay_queue_bits: int = 1_300_000

    # DQN hyperparameters; eps_decay_steps <= 0 means "first half of the run"
    dqn: dict[str, Any] = field(default_factory=_default_dqn)

    def __post_init__(self):
        self.fixed_levels = tuple(int(v) for v in self.fixed_levels)
        self.rate_table = [[float(t), float(r)] for t, r in self.rate_table]
        if self.n_nodes < 2:
            raise ValueError("need at least two nodes")
        if self.n_flows < 0 or self.episodes < 1 or self.episode_length < 1:
            raise ValueError("episodes, episode_length must be >= 1 and n_flows >= 0")
        if self.frame_duration <= 0 or self.speed < 0:
            raise ValueError("frame_duration must be positive and speed non-negative")
        if not 0 <= self.initial_power <= 20:
            raise ValueError("initial_power must be within 0..20 dBm")
        unknown = set(self.dqn) - {f.name for f in dataclasses.fields(Hyperparameters)}
        if unknown:
            raise ValueError(f"unknown dqn keys: {sorted(unknown)}")
        RateTable.from_pairs(self.rate_table)
        self.dqn_hyperparameters()

    @property
    def total_frames(self) -> int:
        return self.episodes * self.episode_length

    @property
    def eval_start_frame(self) -> int:
        start = self.episodes // 2 if self.eval_start_episode is None else self.eval_start_episode
        return min(max(start, 0), self.episodes - 1) * self.episode_length

    def channel_params(self) -> ChannelParams:
        return ChannelParams(self.pl0_db, self.d0, self.pathloss_exponent, self.d_min,
                             self.shadowing_sigma_db)

    def phy_params(self) -> PhyParams:
        return PhyParams(self.noise_dbm, self.cs_threshold_dbm, self.frame_duration,
                         self.amp_efficiency, self.processing_power_w,
                         RateTable.from_pairs(self.rate_table))

    def dqn_hyperparameters(self) -> Hyperparameters:
        merged = {**_default_dqn(), **self.dqn}
        if merged["eps_decay_steps"] <= 0:
            merged["eps_decay_steps"] = self.total_frames // 2
        return Hyperparameters(**merged)

    def replace(self, **changes) -> ScenarioConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["fixed_levels"] = list(self.fixed_levels)
        d["dqn"] = {k: list(v) if isinstance(v, tuple) else v for k, v in self.dqn.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ScenarioConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**d)


def load_config(path: str | Path | None = None, **overrides) -> ScenarioConfig:
    """Read a YAML (or JSON) file and apply keyword overrides on top."""
    data: dict[str, Any] = {}
    if path is not None:
        data = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(data, dict):
            raise ValueError(f"{path}: expected a mapping at top level")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ScenarioConfig.from_dict(data)
