"""Random waypoint mobility and log-distance pathloss between node pairs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import STRENGTH_MAX, STRENGTH_MIN, SignalStrength


@dataclass(frozen=True)
class ChannelParams:
    pl0_db: float = 40.0
    d0: float = 1.0
    exponent: float = 3.0
    d_min: float = 1.0
    shadowing_sigma_db: float = 0.0


@dataclass(frozen=True)
class MobilityState:
    positions: np.ndarray  # (N, 2) metres
    waypoints: np.ndarray  # (N, 2) metres
    speed: float
    width: float
    height: float

    @property
    def n_nodes(self) -> int:
        return len(self.positions)


def init_mobility(n_nodes: int, width: float, height: float, speed: float,
                  rng: np.random.Generator) -> MobilityState:
    scale = np.array([width, height])
    positions = rng.random((n_nodes, 2)) * scale
    waypoints = rng.random((n_nodes, 2)) * scale
    return MobilityState(positions, waypoints, float(speed), float(width), float(height))


def step_mobility(m: MobilityState, dt: float, rng: np.random.Generator) -> MobilityState:
    """Advance every node toward its waypoint by at most ``speed * dt`` (zero pause time).

    A node sitting on its waypoint draws a new one and stays put for this step;
    a node that would overshoot lands exactly on the waypoint.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    pos = m.positions.copy()
    wp = m.waypoints.copy()
    delta = wp - pos
    dist = np.hypot(delta[:, 0], delta[:, 1])
    reach = m.speed * dt

    arrived = dist == 0.0
    landing = ~arrived & (dist <= reach)
    moving = ~arrived & ~landing

    pos[landing] = wp[landing]
    if moving.any():
        pos[moving] += delta[moving] * (reach / dist[moving])[:, None]
    n_new = int(arrived.sum())
    if n_new:
        wp[arrived] = rng.random((n_new, 2)) * np.array([m.width, m.height])
    np.clip(pos[:, 0], 0.0, m.width, out=pos[:, 0])
    np.clip(pos[:, 1], 0.0, m.height, out=pos[:, 1])
    return MobilityState(pos, wp, m.speed, m.width, m.height)


def pathloss_db(d, params: ChannelParams = ChannelParams()):
    d = np.maximum(np.asarray(d, dtype=float), params.d_min)
    pl = params.pl0_db + 10.0 * params.exponent * np.log10(d / params.d0)
    return float(pl) if pl.ndim == 0 else pl


def received_power_dbm(p_tx: float, d, params: ChannelParams = ChannelParams()):
    return p_tx - pathloss_db(d, params)


def quantize_strength(p_rx: float) -> SignalStrength:
    # round half up; Python's round() would bank toward even
    return int(min(STRENGTH_MAX, max(STRENGTH_MIN, np.floor(p_rx + 0.5))))


class ChannelMatrix:
    """Pairwise pathloss snapshot; received power depends on the transmitter's power."""

    def __init__(self, pathloss: np.ndarray):
        pl = np.array(pathloss, dtype=float)
        if pl.ndim != 2 or pl.shape[0] != pl.shape[1]:
            raise ValueError("pathloss matrix must be square")
        np.fill_diagonal(pl, np.nan)
        self.pathloss = pl

    @property
    def n_nodes(self) -> int:
        return self.pathloss.shape[0]

    def rx_dbm(self, tx: int, rx: int, p_tx: float) -> float:
        return p_tx - self.pathloss[tx, rx]

    def rx_matrix(self, powers) -> np.ndarray:
        """Received power in dBm, row = transmitter, column = receiver."""
        return np.asarray(powers, dtype=float)[:, None] - self.pathloss

    @classmethod
    def from_positions(cls, positions: np.ndarray, params: ChannelParams = ChannelParams(),
                       rng: np.random.Generator | None = None) -> ChannelMatrix:
        diff = positions[:, None, :] - positions[None, :, :]
        d = np.hypot(diff[..., 0], diff[..., 1])
        pl = pathloss_db(d, params)
        if params.shadowing_sigma_db > 0:
            if rng is None:
                raise ValueError("shadowing requires an rng")
            n = len(positions)
            iu = np.triu_indices(n, 1)
            shadow = np.zeros((n, n))
            shadow[iu] = rng.normal(0.0, params.shadowing_sigma_db, len(iu[0]))
            pl = pl + shadow + shadow.T
        return cls(pl)
