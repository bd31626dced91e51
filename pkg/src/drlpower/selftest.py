"""Quick internal consistency checks behind ``drlpower selftest``."""

from __future__ import annotations

import numpy as np

from .core import N_ACTIONS, N_STATES, decode_state, encode_state
from .dqn import Batch, QNetwork, loss_and_gradients


def gradient_error(seed: int, sizes=(3, 4, 3, 3), n: int = 8, h: float = 1e-6) -> float:
    """Worst relative gap between backprop and central differences on a small net."""
    rng = np.random.default_rng(seed)
    net, target = QNetwork(sizes, rng), QNetwork(sizes, rng)
    batch = Batch(rng.random((n, sizes[0])), rng.integers(0, sizes[-1], n), rng.normal(size=n),
                  rng.random((n, sizes[0])), np.zeros(n, dtype=bool))
    _, grads = loss_and_gradients(net, target, batch, 0.9)
    worst = 0.0
    for p, g in zip(net.params(), grads):
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = loss_and_gradients(net, target, batch, 0.9)[0]
            flat[i] = old - h
            down = loss_and_gradients(net, target, batch, 0.9)[0]
            flat[i] = old
            num = (up - down) / (2 * h)
            worst = max(worst, abs(num - gflat[i]) / max(abs(num) + abs(gflat[i]), 1e-7))
    return worst


def state_sweep() -> int:
    """Encode/decode every state; returns the count after checking the round trip."""
    for i in range(N_STATES):
        if encode_state(decode_state(i)) != i:
            raise AssertionError(f"round trip failed at index {i}")
    return N_STATES


def run_all(seeds: int = 20) -> list[tuple[str, bool, str]]:
    grad = max(gradient_error(s) for s in range(seeds))
    n = state_sweep()
    flops = QNetwork().flops()
    return [
        ("gradient check", grad < 1e-4, f"max relative error {grad:.2e} over {seeds} seeds"),
        ("state sweep", n == 105_861, f"{n} states, {n * N_ACTIONS} state-action pairs"),
        ("flop count", flops == 20_860, f"{flops} FLOPs per decision"),
    ]
