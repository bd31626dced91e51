"""ETX link costs and converged shortest-path routes."""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

UNREACHABLE = -1


class LinkStats:
    """Delivery outcomes of one directed link over the last ``window`` frames."""

    def __init__(self, window: int = 100):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = window
        self._samples: deque[tuple[int, bool]] = deque(maxlen=window)

    def record(self, frame: int, success: bool) -> None:
        self._samples.append((frame, bool(success)))

    def expire(self, frame: int) -> None:
        while self._samples and self._samples[0][0] <= frame - self.window:
            self._samples.popleft()

    @property
    def attempt_count(self) -> int:
        return len(self._samples)

    @property
    def success_count(self) -> int:
        return sum(ok for _, ok in self._samples)

    def ratio(self) -> float | None:
        n = self.attempt_count
        return self.success_count / n if n else None


def etx(forward: LinkStats, reverse: LinkStats) -> float:
    pf, pr = forward.ratio(), reverse.ratio()
    if not pf or not pr:
        return math.inf
    return 1.0 / (pf * pr)


def etx_from_ratios(pf: float, pr: float) -> float:
    return 1.0 / (pf * pr) if pf > 0 and pr > 0 else math.inf


@dataclass(frozen=True)
class RoutingTable:
    next_hop: np.ndarray  # [node, destination] -> next hop or UNREACHABLE
    cost: np.ndarray      # [node, destination] -> total ETX (inf if unreachable)

    def route(self, src: int, dst: int) -> list[int]:
        """Hop sequence from src to dst, empty if unreachable."""
        path = [src]
        while path[-1] != dst:
            nh = int(self.next_hop[path[-1], dst])
            if nh == UNREACHABLE or len(path) > len(self.next_hop):
                return []
            path.append(nh)
        return path


_TIE = 1e-9


def recompute_routes(costs: np.ndarray) -> RoutingTable:
    """Per-destination Dijkstra on directed link costs.

    Among next hops achieving the minimum total cost (within a tiny tolerance),
    the smallest node id wins.
    """
    c = np.asarray(costs, dtype=float)
    n = c.shape[0]
    dist = np.full((n, n), math.inf)
    next_hop = np.full((n, n), UNREACHABLE, dtype=int)
    for dst in range(n):
        d = dist[:, dst]
        d[dst] = 0.0
        heap = [(0.0, dst)]
        done = np.zeros(n, dtype=bool)
        while heap:
            du, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            for v in range(n):
                # relax v -> u
                if v != u and not done[v] and math.isfinite(c[v, u]):
                    alt = c[v, u] + du
                    if alt < d[v]:
                        d[v] = alt
                        heapq.heappush(heap, (alt, v))
        for v in range(n):
            if v == dst or not math.isfinite(d[v]):
                continue
            for u in range(n):
                if u != v and math.isfinite(c[v, u]) and c[v, u] + d[u] <= d[v] + _TIE:
                    next_hop[v, dst] = u
                    break
    return RoutingTable(next_hop, dist)


class LinkStatsTable:
    """LinkStats for every directed pair, plus ETX costs with optimistic seeding.

    A direction with no samples in the window counts as perfect if the pair is
    marked ``reachable`` (its SNR clears the lowest rate tier) and dead otherwise.
    """

    def __init__(self, n_nodes: int, window: int = 100):
        self.n_nodes = n_nodes
        self.links = {(i, j): LinkStats(window)
                      for i in range(n_nodes) for j in range(n_nodes) if i != j}

    def record(self, frame: int, tx: int, rx: int, success: bool) -> None:
        self.links[tx, rx].record(frame, success)

    def costs(self, frame: int, reachable: np.ndarray) -> np.ndarray:
        n = self.n_nodes
        p = np.zeros((n, n))
        for (i, j), st in self.links.items():
            st.expire(frame)
            r = st.ratio()
            p[i, j] = (1.0 if reachable[i, j] else 0.0) if r is None else r
        out = np.full((n, n), math.inf)
        for i in range(n):
            for j in range(n):
                if i != j:
                    out[i, j] = etx_from_ratios(p[i, j], p[j, i])
        return out
