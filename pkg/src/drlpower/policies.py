"""Reward shaping and the three power-control policies: DQN, fixed-random and myopic."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import ContractViolation, NodeId, NodeState, PowerAction, PowerLevel, apply_action
from .dqn import DQNAgent, Hyperparameters, greedy_index
from .rng import Streams

FIXED_LEVELS = (0, 10, 20)


@dataclass(frozen=True)
class RewardInputs:
    throughput_mbps: float
    energy: float  # per-frame energy normalized by the frame duration
    delta_p: int   # realized power change in dB
    transmitting: bool


def compute_reward(inp: RewardInputs, c: float = 0.1) -> float:
    """Energy efficiency minus a penalty on the realized power change; 0 when idle."""
    if c <= 0:
        raise ContractViolation("penalty constant c must be positive")
    if not inp.transmitting:
        return 0.0
    if inp.energy <= 0:
        raise ContractViolation("a transmitting node must consume energy")
    return inp.throughput_mbps / inp.energy - c * inp.delta_p


@dataclass
class AgentContext:
    node: NodeId
    state: NodeState
    last_delta: int = 0
    mailbox: Mapping[NodeId, PowerAction] = field(default_factory=dict)


class Mailbox:
    """Frame-delayed local broadcast: messages posted in frame t are readable in t+1."""

    def __init__(self, n_nodes: int):
        self._current: list[dict[NodeId, PowerAction]] = [{} for _ in range(n_nodes)]
        self._pending: list[dict[NodeId, PowerAction]] = [{} for _ in range(n_nodes)]

    def post(self, sender: NodeId, neighbors, action: PowerAction) -> None:
        for j in neighbors:
            if j != sender:
                self._pending[j][sender] = action

    def deliver(self) -> None:
        self._current = self._pending
        self._pending = [{} for _ in self._current]

    def inbox(self, node: NodeId) -> dict[NodeId, PowerAction]:
        return dict(self._current[node])


def dqn_agent_step(ctx: AgentContext, agent: DQNAgent,
                   perform: Callable[[PowerAction], tuple[float, NodeState]],
                   broadcast: Callable[[NodeId, PowerAction], None]) -> PowerAction:
    """One pass of the per-node loop for a single agent.

    ``perform`` applies the action in the environment and returns the reward and
    the next observed state. The network input is the node's own state only;
    neighbour actions stay available in ``ctx.mailbox``.
    """
    a = agent.act(ctx.state)
    reward, s_next = perform(a)
    broadcast(ctx.node, a)
    agent.learn(ctx.state, a, reward, s_next)
    return a


def fixed_policy_step(rng: np.random.Generator, levels: Sequence[int] = FIXED_LEVELS) -> PowerLevel:
    return int(levels[int(rng.integers(len(levels)))])


def myopic_policy_step(ctx: AgentContext, reward_oracle: Callable[[PowerAction], float]) -> PowerAction:
    """Best action for the immediate reward alone; ties prefer HOLD, then DOWN."""
    rewards = [reward_oracle(PowerAction.from_index(i)) for i in range(3)]
    return PowerAction.from_index(greedy_index(rewards))


# ---------------------------------------------------------------------------
# Policy arms as driven by the simulator. Each arm sees a NetworkView and only
# reads the per-node pieces a real node would have.


class Arm:
    name = "base"

    def __init__(self, n_nodes: int, streams: Streams):
        self.n_nodes = n_nodes
        self.streams = streams

    def decide(self, view) -> list[PowerAction | None]:
        """Per-node action for this frame; None means the arm sets power directly."""
        raise NotImplementedError

    def powers(self, view, actions) -> list[PowerLevel]:
        return [apply_action(p, a) for p, a in zip(view.powers, actions)]

    def feedback(self, view, actions, rewards, next_states) -> None:
        pass


class FixedArm(Arm):
    name = "fixed"

    def __init__(self, n_nodes: int, streams: Streams, levels=FIXED_LEVELS, redraw: str = "frame"):
        super().__init__(n_nodes, streams)
        if redraw not in ("frame", "run"):
            raise ValueError("redraw must be 'frame' or 'run'")
        self.levels = tuple(levels)
        self.redraw = redraw
        self._rngs = [streams[f"fixed/{n}"] for n in range(n_nodes)]
        self._held = [fixed_policy_step(r, self.levels) for r in self._rngs] if redraw == "run" else None

    def decide(self, view):
        return [None] * self.n_nodes

    def powers(self, view, actions):
        if self._held is not None:
            return list(self._held)
        return [fixed_policy_step(r, self.levels) for r in self._rngs]


class MyopicArm(Arm):
    name = "myopic"

    def decide(self, view):
        return [myopic_policy_step(view.context(n), view.reward_oracle(n)) for n in range(self.n_nodes)]


class DQNArm(Arm):
    name = "dqn"

    def __init__(self, n_nodes: int, streams: Streams, h: Hyperparameters):
        super().__init__(n_nodes, streams)
        self.agents = [DQNAgent(h, streams[f"dqn/{n}/init"], streams[f"dqn/{n}/explore"],
                                streams[f"dqn/{n}/replay"]) for n in range(n_nodes)]
        self.mailbox = Mailbox(n_nodes)
        self._obs: list[NodeState] = []

    def decide(self, view):
        # steps 1-2: observe own state (neighbour info via mailbox) and select
        ctxs = [AgentContext(n, view.states[n], view.last_deltas[n], self.mailbox.inbox(n))
                for n in range(self.n_nodes)]
        self._obs = [c.state for c in ctxs]
        return [agent.act(c.state) for agent, c in zip(self.agents, ctxs)]

    def feedback(self, view, actions, rewards, next_states):
        # steps 5-7: broadcast, store, update weights
        for n, a in enumerate(actions):
            self.mailbox.post(n, view.neighbors(n), a)
        self.mailbox.deliver()
        for n, agent in enumerate(self.agents):
            agent.learn(self._obs[n], actions[n], rewards[n], next_states[n])


ARMS = ("fixed", "myopic", "dqn")


def make_arm(name: str, n_nodes: int, streams: Streams, cfg) -> Arm:
    if name == "fixed":
        return FixedArm(n_nodes, streams, cfg.fixed_levels, cfg.fixed_redraw)
    if name == "myopic":
        return MyopicArm(n_nodes, streams)
    if name == "dqn":
        return DQNArm(n_nodes, streams, cfg.dqn_hyperparameters())
    raise ValueError(f"unknown policy {name!r}; expected one of {ARMS}")
