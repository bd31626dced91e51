"""Quantized node state, power actions and the flat state index."""

from __future__ import annotations

from enum import IntEnum
from typing import NamedTuple

PowerLevel = int
LinkQuality = int
SignalStrength = int
NodeId = int

POWER_MIN, POWER_MAX = 0, 20
QUALITY_MIN, QUALITY_MAX = 0, 70
STRENGTH_MIN, STRENGTH_MAX = -110, -40

N_POWER = POWER_MAX - POWER_MIN + 1
N_QUALITY = QUALITY_MAX - QUALITY_MIN + 1
N_STRENGTH = STRENGTH_MAX - STRENGTH_MIN + 1
N_STATES = N_POWER * N_QUALITY * N_STRENGTH
N_ACTIONS = 3
POWER_STEP = 1


class ContractViolation(ValueError):
    """An operation was called outside its documented preconditions."""


class PowerAction(IntEnum):
    """Transmit power adjustment. The Q-network output order is DOWN, HOLD, UP."""

    DOWN = -1
    HOLD = 0
    UP = 1

    @property
    def index(self) -> int:
        return self.value + 1

    @property
    def delta(self) -> int:
        return self.value * POWER_STEP

    @classmethod
    def from_index(cls, i: int) -> PowerAction:
        if not 0 <= i < N_ACTIONS:
            raise ValueError(f"action index {i} out of range")
        return cls(i - 1)


def _check(name: str, value: int, lo: int, hi: int) -> None:
    if not lo <= value <= hi:
        raise ValueError(f"{name}={value} outside [{lo}, {hi}]")


class _StateFields(NamedTuple):
    power: PowerLevel
    quality: LinkQuality
    strength: SignalStrength


class NodeState(_StateFields):
    """One node's observation (P, L, S); validated on construction, immutable."""

    __slots__ = ()

    def __new__(cls, power: PowerLevel, quality: LinkQuality, strength: SignalStrength):
        _check("power", power, POWER_MIN, POWER_MAX)
        _check("quality", quality, QUALITY_MIN, QUALITY_MAX)
        _check("strength", strength, STRENGTH_MIN, STRENGTH_MAX)
        return tuple.__new__(cls, (power, quality, strength))


def encode_state(s: NodeState) -> int:
    # NodeState validates on construction; duck-typed tuples are checked here
    if type(s) is not NodeState:
        _check("power", s.power, POWER_MIN, POWER_MAX)
        _check("quality", s.quality, QUALITY_MIN, QUALITY_MAX)
        _check("strength", s.strength, STRENGTH_MIN, STRENGTH_MAX)
    return (s.power * N_QUALITY + s.quality) * N_STRENGTH + (s.strength - STRENGTH_MIN)


def decode_state(index: int) -> NodeState:
    _check("index", index, 0, N_STATES - 1)
    rest, strength = divmod(index, N_STRENGTH)
    power, quality = divmod(rest, N_QUALITY)
    return NodeState(power, quality, strength + STRENGTH_MIN)


def clamp_power(p: int) -> PowerLevel:
    return max(POWER_MIN, min(POWER_MAX, p))


def apply_action(p: PowerLevel, a: PowerAction) -> PowerLevel:
    """New power after ``a``; saturated actions leave the power (and realized delta) unchanged."""
    return clamp_power(p + PowerAction(a).delta)
