"""Deep Q-network in plain numpy: forward pass, manual backprop, replay and target net.

Parameter layout (used by the flat checkpoint format): for each dense layer in
order, the weight matrix of shape (fan_in, fan_out) in row-major order followed
by the bias vector of length fan_out. The default architecture is 3 -> 140 -> 70 -> 3
with ReLU after the hidden layers and a linear output ordered (DOWN, HOLD, UP).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .core import (N_ACTIONS, POWER_MAX, QUALITY_MAX, STRENGTH_MAX, STRENGTH_MIN,
                   ContractViolation, NodeState, PowerAction)

DEFAULT_SIZES = (3, 140, 70, 3)

# greedy tie-break preference over output indices: HOLD, then DOWN, then UP
_TIE_ORDER = (PowerAction.HOLD.index, PowerAction.DOWN.index, PowerAction.UP.index)


class TrainingDivergence(RuntimeError):
    pass


@dataclass
class Hyperparameters:
    gamma: float = 0.9
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 10_000
    learning_rate: float = 1e-3
    batch_size: int = 32
    target_sync: int = 100
    capacity: int = 10_000
    optimizer: str = "sgd"
    hidden: tuple[int, ...] = (140, 70)
    reward_scale: float = 1.0
    grad_clip: float | None = None

    def __post_init__(self):
        self.hidden = tuple(self.hidden)
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        for eps in (self.eps_start, self.eps_end):
            if not 0.0 <= eps <= 1.0:
                raise ValueError("epsilon must lie in [0, 1]")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.batch_size < 1 or self.capacity < self.batch_size or self.target_sync < 1:
            raise ValueError("need 1 <= batch_size <= capacity and target_sync >= 1")

    @property
    def sizes(self) -> tuple[int, ...]:
        return (3, *self.hidden, N_ACTIONS)


def normalize_state(s: NodeState) -> np.ndarray:
    return np.array([s.power / POWER_MAX,
                     s.quality / QUALITY_MAX,
                     (s.strength - STRENGTH_MIN) / (STRENGTH_MAX - STRENGTH_MIN)])


class QNetwork:
    def __init__(self, sizes: Sequence[int] = DEFAULT_SIZES, rng: np.random.Generator | None = None):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2:
            raise ValueError("need at least an input and an output layer")
        # all parameters live in one buffer (W0, b0, W1, b1, ...); weights/biases are views
        self.flat = np.zeros(sum(a * b + b for a, b in zip(self.sizes[:-1], self.sizes[1:])))
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        pos = 0
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            w = self.flat[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out)
            pos += fan_in * fan_out
            b = self.flat[pos:pos + fan_out]
            pos += fan_out
            if rng is not None:
                bound = 1.0 / math.sqrt(fan_in)
                w[...] = rng.uniform(-bound, bound, (fan_in, fan_out))
                b[...] = rng.uniform(-bound, bound, fan_out)
            self.weights.append(w)
            self.biases.append(b)

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> QNetwork:
        net = QNetwork(self.sizes)
        net.flat[:] = self.flat
        return net

    def flops(self) -> int:
        """FLOPs of one forward pass, counting each multiply-accumulate as two."""
        return sum(2 * a * b for a, b in zip(self.sizes[:-1], self.sizes[1:]))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
        return h

    def forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Batched forward pass keeping the layer inputs and pre-activations."""
        acts, pre = [x], []
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            pre.append(z)
            h = np.maximum(z, 0.0) if i < last else z
            if i < last:
                acts.append(h)
        return h, [acts, pre]

    def backward(self, cache, dout: np.ndarray) -> list[np.ndarray]:
        """Gradients in ``params()`` order given dLoss/dOutput for a batch."""
        acts, pre = cache
        grads: list[np.ndarray] = [None] * (2 * len(self.weights))
        delta = dout
        for i in range(len(self.weights) - 1, -1, -1):
            grads[2 * i] = acts[i].T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            if i:
                delta = (delta @ self.weights[i].T) * (pre[i - 1] > 0.0)
        return grads

    def to_flat(self) -> np.ndarray:
        return self.flat.copy()

    @classmethod
    def from_flat(cls, sizes: Sequence[int], flat: np.ndarray) -> QNetwork:
        net = cls(sizes)
        flat = np.asarray(flat, dtype=float)
        if flat.shape != net.flat.shape:
            raise ContractViolation(f"expected {net.flat.size} parameters, got {flat.size}")
        net.flat[:] = flat
        return net

    def save(self, path: str | Path) -> None:
        """Write the sizes header and the flat parameter vector as little-endian float64."""
        header = np.array([len(self.sizes), *self.sizes], dtype="<f8")
        np.concatenate([header, self.to_flat()]).astype("<f8").tofile(path)

    @classmethod
    def load(cls, path: str | Path) -> QNetwork:
        data = np.fromfile(path, dtype="<f8")
        k = int(data[0])
        sizes = tuple(int(s) for s in data[1:1 + k])
        return cls.from_flat(sizes, data[1 + k:])


def forward(net: QNetwork, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ContractViolation("non-finite network input")
    return net(x)


def bellman_target(r: float, next_q, gamma: float, terminal: bool = False) -> float:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    return float(r) if terminal else float(r) + gamma * float(np.max(next_q))


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray


@dataclass(frozen=True)
class Experience:
    state: tuple[float, float, float]
    action: int
    reward: float
    next_state: tuple[float, float, float]
    terminal: bool = False

    def __post_init__(self):
        if not 0 <= self.action < N_ACTIONS:
            raise ValueError(f"invalid action index {self.action}")
        for v in (*self.state, *self.next_state):
            if not 0.0 <= v <= 1.0:
                raise ValueError("state vectors must be normalized to [0, 1]")


class ReplayMemory:
    """Fixed-capacity ring buffer of transitions with uniform sampling."""

    def __init__(self, capacity: int, rng: np.random.Generator, state_dim: int = 3):
        self.capacity = capacity
        self.rng = rng
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.terminals = np.zeros(capacity, dtype=bool)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, state, action: int, reward: float, next_state, terminal: bool = False) -> None:
        i = self._next
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.terminals[i] = terminal
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def add(self, e: Experience) -> None:
        self.push(e.state, e.action, e.reward, e.next_state, e.terminal)

    def sample(self, batch_size: int) -> Batch:
        if self._size == 0:
            raise ContractViolation("cannot sample from an empty replay memory")
        idx = self.rng.integers(0, self._size, batch_size)
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx],
                     self.next_states[idx], self.terminals[idx])

    def contents(self) -> list[Experience]:
        """Stored transitions, oldest first."""
        start = self._next if self._size == self.capacity else 0
        order = [(start + k) % self.capacity for k in range(self._size)]
        return [Experience(tuple(self.states[i]), int(self.actions[i]), float(self.rewards[i]),
                           tuple(self.next_states[i]), bool(self.terminals[i])) for i in order]


def as_batch(experiences: Sequence[Experience]) -> Batch:
    return Batch(np.array([e.state for e in experiences], dtype=float),
                 np.array([e.action for e in experiences], dtype=np.int64),
                 np.array([e.reward for e in experiences], dtype=float),
                 np.array([e.next_state for e in experiences], dtype=float),
                 np.array([e.terminal for e in experiences], dtype=bool))


class SGD:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        for p, g in zip(params, grads):
            p -= self.lr * g


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            denom = np.sqrt(v * (1.0 / c2))
            denom += self.eps
            p -= (self.lr / c1) * m / denom


def make_optimizer(h: Hyperparameters):
    return Adam(h.learning_rate) if h.optimizer == "adam" else SGD(h.learning_rate)


def loss_and_gradients(net: QNetwork, target: QNetwork, batch: Batch,
                       gamma: float) -> tuple[float, list[np.ndarray]]:
    """Mean squared Bellman error over the batch and its gradient w.r.t. ``net``.

    Only the taken action's output receives gradient; the target network is
    treated as a constant.
    """
    n = len(batch.actions)
    next_q = target(batch.next_states)
    y = batch.rewards + gamma * next_q.max(axis=1) * ~batch.terminals
    q, cache = net.forward_cached(batch.states)
    rows = np.arange(n)
    err = q[rows, batch.actions] - y
    loss = float(np.mean(err * err))
    dout = np.zeros_like(q)
    dout[rows, batch.actions] = (2.0 / n) * err
    return loss, net.backward(cache, dout)


def train_step(net: QNetwork, target: QNetwork, batch: Batch, h: Hyperparameters,
               optimizer=None) -> tuple[QNetwork, float]:
    """One optimizer step on the MSE Bellman loss. Updates ``net`` in place."""
    if len(batch.actions) == 0:
        raise ContractViolation("empty training batch")
    loss, grads = loss_and_gradients(net, target, batch, h.gamma)
    if not math.isfinite(loss):
        raise TrainingDivergence(
            f"non-finite loss {loss}; max |param| = "
            f"{max(float(np.max(np.abs(p))) for p in net.params()):.3g}")
    if h.grad_clip is not None:
        norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
        if norm > h.grad_clip:
            grads = [g * (h.grad_clip / norm) for g in grads]
    (optimizer or SGD(h.learning_rate)).step([net.flat], [np.concatenate([g.ravel() for g in grads])])
    return net, loss


def sync_target(net: QNetwork, target: QNetwork) -> QNetwork:
    if net.sizes != target.sizes:
        raise ContractViolation(f"architecture mismatch: {net.sizes} vs {target.sizes}")
    target.flat[:] = net.flat
    return target


def greedy_index(q) -> int:
    best = _TIE_ORDER[0]
    for i in _TIE_ORDER[1:]:
        if q[i] > q[best]:
            best = i
    return best


def select_action(net: QNetwork, s: NodeState, epsilon: float, rng: np.random.Generator) -> PowerAction:
    """Epsilon-greedy over the network's Q-values (ties prefer HOLD, then DOWN)."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if rng.random() < epsilon:
        return PowerAction.from_index(int(rng.integers(N_ACTIONS)))
    return PowerAction.from_index(greedy_index(net(normalize_state(s))))


@dataclass
class EpsilonSchedule:
    start: float = 1.0
    end: float = 0.05
    steps: int = 10_000

    def __call__(self, step: int) -> float:
        if self.steps <= 0 or step >= self.steps:
            return self.end
        return self.start + (self.end - self.start) * step / self.steps


@dataclass
class DQNAgent:
    """One node's learner: online and target networks, replay memory and counters."""

    h: Hyperparameters
    rng_init: np.random.Generator
    rng_explore: np.random.Generator
    rng_replay: np.random.Generator
    net: QNetwork = field(init=False)
    target: QNetwork = field(init=False)
    memory: ReplayMemory = field(init=False)
    steps: int = 0
    train_steps: int = 0
    last_loss: float = float("nan")

    def __post_init__(self):
        self.net = QNetwork(self.h.sizes, self.rng_init)
        self.target = self.net.copy()
        self.memory = ReplayMemory(self.h.capacity, self.rng_replay)
        self.optimizer = make_optimizer(self.h)
        self.schedule = EpsilonSchedule(self.h.eps_start, self.h.eps_end, self.h.eps_decay_steps)

    @property
    def epsilon(self) -> float:
        return self.schedule(self.steps)

    def act(self, s: NodeState) -> PowerAction:
        return select_action(self.net, s, self.epsilon, self.rng_explore)

    def learn(self, s: NodeState, a: PowerAction, reward: float, s_next: NodeState,
              terminal: bool = False) -> float | None:
        """Store the transition and take one training step once the memory holds a batch."""
        self.memory.push(normalize_state(s), PowerAction(a).index, reward * self.h.reward_scale,
                         normalize_state(s_next), terminal)
        self.steps += 1
        if len(self.memory) < self.h.batch_size:
            return None
        batch = self.memory.sample(self.h.batch_size)
        _, self.last_loss = train_step(self.net, self.target, batch, self.h, self.optimizer)
        self.train_steps += 1
        if self.train_steps % self.h.target_sync == 0:
            sync_target(self.net, self.target)
        return self.last_loss
