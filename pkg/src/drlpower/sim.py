"""Frame-by-frame network simulation and multi-seed experiments."""

from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .channel import ChannelMatrix, init_mobility, step_mobility
from .config import ScenarioConfig
from .core import (POWER_MAX, STRENGTH_MIN, NodeState, PowerAction, apply_action)
from .metrics import EpisodeMetrics, aggregate, mean_metrics
from .phy import (Intent, LinkReport, contend_and_transmit, energy_for_frame, quantize_quality,
                  rate_for_snr)
from .channel import quantize_strength
from .policies import AgentContext, Arm, RewardInputs, compute_reward, make_arm
from .rng import Streams
from .routing import UNREACHABLE, LinkStatsTable, RoutingTable, recompute_routes

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Flow:
    src: int
    dst: int


@dataclass(frozen=True)
class FrameRecord:
    frame: int
    episode: int
    powers: tuple[int, ...]
    actions: tuple[int, ...]  # chosen delta, or the realized change for arms that set power directly
    rewards: tuple[float, ...]
    transmitting: tuple[bool, ...]
    tx_bits: tuple[int, ...]
    energy_j: tuple[float, ...]
    reports: tuple[LinkReport, ...]
    delivered_bits: int
    deferred: int
    paused_flows: int
    route_hash: str


class FrameLog:
    """Append-only sequence of FrameRecords, one per frame."""

    def __init__(self, records: Iterable[FrameRecord] = ()):
        self._records: list[FrameRecord] = []
        for r in records:
            self.append(r)

    def append(self, rec: FrameRecord) -> None:
        if self._records and rec.frame != self._records[-1].frame + 1:
            raise ValueError(f"frame {rec.frame} does not follow {self._records[-1].frame}")
        self._records.append(rec)

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[FrameRecord]:
        return iter(self._records)

    def __getitem__(self, i):
        return self._records[i]

    def since(self, frame: int) -> list[FrameRecord]:
        return [r for r in self._records if r.frame >= frame]


class NetworkView:
    """What the policies may consult at decision time in one frame."""

    def __init__(self, sim: Simulator, intents: dict[int, Intent]):
        self._sim = sim
        self.channel = sim.channel
        self.phy = sim.phy
        self.powers = list(sim.powers)
        self.states = [sim.node_state(n) for n in range(sim.n_nodes)]
        self.last_deltas = list(sim.last_deltas)
        self.intents = intents

    def context(self, n: int) -> AgentContext:
        return AgentContext(n, self.states[n], self.last_deltas[n])

    def neighbors(self, n: int) -> list[int]:
        """Nodes that hear ``n`` above the carrier-sense threshold at its current power."""
        p = self._sim.powers[n]
        return [j for j in range(self._sim.n_nodes)
                if j != n and self.channel.rx_dbm(n, j, p) >= self.phy.cs_threshold_dbm]

    def reward_oracle(self, n: int):
        """Immediate reward of each action under the frozen channel, ignoring interference."""
        it = self.intents.get(n)
        p0 = self.powers[n]
        c = self._sim.cfg.reward_penalty
        phy = self.phy

        def oracle(a: PowerAction) -> float:
            p = apply_action(p0, a)
            if it is None:
                return compute_reward(RewardInputs(0.0, 0.0, p - p0, False), c)
            snr = p - self.channel.pathloss[n, it.rx] - phy.noise_dbm
            rate = rate_for_snr(snr, phy.rate_table)
            bits = min(it.bits, int(round(rate * 1e6 * phy.frame_duration)))
            e = energy_for_frame(p, True, phy).energy_joules / phy.frame_duration
            return compute_reward(RewardInputs(bits / phy.frame_duration / 1e6, e, p - p0, True), c)

        return oracle


class Simulator:
    """One (scenario, policy arm, seed) run.

    World randomness (mobility, traffic, MAC ordering, shadowing) comes from named
    streams of the master seed, so every arm sees the same world for a given seed.
    """

    def __init__(self, cfg: ScenarioConfig, arm: str | Arm | None = None, seed: int | None = None):
        self.cfg = cfg
        self.seed = cfg.seed if seed is None else int(seed)
        self.streams = Streams(self.seed)
        self.n_nodes = cfg.n_nodes
        self.chp = cfg.channel_params()
        self.phy = cfg.phy_params()
        self.max_bits = int(round(max(self.phy.rate_table.rates) * 1e6 * self.phy.frame_duration))

        self.mobility = init_mobility(cfg.n_nodes, cfg.area_width, cfg.area_height, cfg.speed,
                                      self.streams["mobility"])
        self.channel = ChannelMatrix.from_positions(self.mobility.positions, self.chp,
                                                    self.streams["shadowing"])
        self.powers = [cfg.initial_power] * cfg.n_nodes
        self.quality = [0] * cfg.n_nodes
        self.strength = [STRENGTH_MIN] * cfg.n_nodes
        self.last_deltas = [0] * cfg.n_nodes
        self.stats = LinkStatsTable(cfg.n_nodes, cfg.etx_window)
        self.routes: RoutingTable | None = None
        self.flows: list[Flow] = []
        self.queues = np.zeros((cfg.n_nodes, max(cfg.n_flows, 1)), dtype=np.int64)
        self.frame = 0
        self.log = FrameLog()

        if arm is None:
            arm = cfg.policy
        self.arm = make_arm(arm, cfg.n_nodes, self.streams, cfg) if isinstance(arm, str) else arm

    def node_state(self, n: int) -> NodeState:
        return NodeState(self.powers[n], self.quality[n], self.strength[n])

    # -- world pieces -----------------------------------------------------

    def _draw_flows(self) -> None:
        rng = self.streams["traffic"]
        flows: list[Flow] = []
        n_pairs = self.n_nodes * (self.n_nodes - 1)
        while len(flows) < min(self.cfg.n_flows, n_pairs):
            src, dst = (int(v) for v in rng.choice(self.n_nodes, 2, replace=False))
            f = Flow(src, dst)
            if f not in flows:
                flows.append(f)
        self.flows = flows
        self.queues[:] = 0

    def _recompute_routes(self) -> None:
        # a neighbour is known when its hellos, sent at its current power, clear the lowest tier
        snr = self.channel.rx_matrix(self.powers) - self.phy.noise_dbm
        reachable = np.nan_to_num(snr, nan=-np.inf) >= self.phy.rate_table.min_snr
        self.routes = recompute_routes(self.stats.costs(self.frame, reachable))

    def _intents(self) -> tuple[dict[int, Intent], dict[int, int], int]:
        intents: dict[int, Intent] = {}
        flow_of: dict[int, int] = {}
        paused = 0
        for f, flow in enumerate(self.flows):
            if self.routes.next_hop[flow.src, flow.dst] == UNREACHABLE:
                paused += 1
        for n in range(self.n_nodes):
            cands = []
            for f, flow in enumerate(self.flows):
                if n == flow.dst:
                    continue
                if n == flow.src or self.queues[n, f] > 0:
                    nh = int(self.routes.next_hop[n, flow.dst])
                    if nh != UNREACHABLE:
                        cands.append((f, nh))
            if not cands:
                continue
            f, nh = cands[(self.frame + n) % len(cands)]
            bits = self.max_bits if n == self.flows[f].src else int(min(self.queues[n, f], self.max_bits))
            intents[n] = Intent(n, nh, bits)
            flow_of[n] = f
        return intents, flow_of, paused

    def _route_hash(self) -> str:
        return f"{zlib.crc32(self.routes.next_hop.astype(np.int64).tobytes()):08x}"

    # -- main loop --------------------------------------------------------

    def step(self) -> FrameRecord:
        cfg, phy, n_nodes = self.cfg, self.phy, self.n_nodes
        frame = self.frame
        if frame % cfg.episode_length == 0:
            self._draw_flows()

        self.mobility = step_mobility(self.mobility, cfg.frame_duration, self.streams["mobility"])
        self.channel = ChannelMatrix.from_positions(self.mobility.positions, self.chp,
                                                    self.streams["shadowing"])
        if self.routes is None or frame % cfg.route_interval == 0:
            self._recompute_routes()
        intents, flow_of, paused = self._intents()

        view = NetworkView(self, intents)
        actions = self.arm.decide(view)
        new_powers = self.arm.powers(view, actions)
        old_powers = self.powers
        deltas = [p1 - p0 for p0, p1 in zip(old_powers, new_powers)]
        self.powers = list(new_powers)
        self.last_deltas = deltas

        reports, deferred = contend_and_transmit(list(intents.values()), self.channel, self.powers,
                                                 self.streams["mac"], phy)

        delivered = 0
        tx_bits = [0] * n_nodes
        transmitting = [False] * n_nodes
        for rep in reports:
            transmitting[rep.tx] = True
            self.stats.record(frame, rep.tx, rep.rx, rep.success)
            self.quality[rep.tx] = quantize_quality(rep.snr)
            if not rep.success:
                continue
            tx_bits[rep.tx] = rep.bits_delivered
            # acknowledgement from the receiver gives the sender its signal strength reading
            self.strength[rep.tx] = quantize_strength(self.channel.rx_dbm(rep.rx, rep.tx, self.powers[rep.rx]))
            f = flow_of[rep.tx]
            flow = self.flows[f]
            if rep.tx != flow.src:
                self.queues[rep.tx, f] -= rep.bits_delivered
            if rep.rx == flow.dst:
                delivered += rep.bits_delivered
            else:
                self.queues[rep.rx, f] = min(self.queues[rep.rx, f] + rep.bits_delivered,
                                             cfg.relay_queue_bits)

        energies, rewards = [], []
        for n in range(n_nodes):
            e = energy_for_frame(self.powers[n], transmitting[n], phy).energy_joules
            energies.append(e)
            rewards.append(compute_reward(RewardInputs(
                tx_bits[n] / phy.frame_duration / 1e6, e / phy.frame_duration,
                deltas[n], transmitting[n]), cfg.reward_penalty))

        next_states = [self.node_state(n) for n in range(n_nodes)]
        self.arm.feedback(view, actions, rewards, next_states)

        logged_actions = tuple(int(a.value) if a is not None else d for a, d in zip(actions, deltas))
        rec = FrameRecord(frame, frame // cfg.episode_length, tuple(self.powers), logged_actions,
                          tuple(rewards), tuple(transmitting), tuple(tx_bits), tuple(energies),
                          tuple(reports), delivered, len(deferred), paused, self._route_hash())
        self.log.append(rec)
        self.frame += 1
        return rec

    def run_episode(self) -> list[FrameRecord]:
        return [self.step() for _ in range(self.cfg.episode_length)]

    def run(self, episodes: int | None = None) -> FrameLog:
        for ep in range((self.cfg.episodes if episodes is None else episodes)):
            self.run_episode()
            log.debug("seed %d arm %s episode %d done", self.seed, self.arm.name, ep)
        return self.log


def run_arm(cfg: ScenarioConfig, arm: str, seed: int) -> tuple[EpisodeMetrics, FrameLog]:
    sim = Simulator(cfg, arm, seed)
    flog = sim.run()
    metrics = aggregate(flog.since(cfg.eval_start_frame), cfg.frame_duration, arm=arm, seed=seed)
    return metrics, flog


def _run_metrics(args) -> EpisodeMetrics:
    cfg, arm, seed = args
    return run_arm(cfg, arm, seed)[0]


def run_experiment(cfg: ScenarioConfig, arms: Sequence[str], seeds: Sequence[int],
                   jobs: int = 1) -> dict[str, dict]:
    """Run every (arm, seed) pair; returns per-arm per-seed metrics and their mean."""
    if not seeds:
        raise ValueError("need at least one seed")
    tasks = [(cfg, arm, int(s)) for arm in arms for s in seeds]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_run_metrics, tasks))
    else:
        results = [_run_metrics(t) for t in tasks]
    out: dict[str, dict] = {}
    for arm in arms:
        per_seed = [m for (_, a, _), m in zip(tasks, results) if a == arm]
        out[arm] = {"per_seed": per_seed, "mean": mean_metrics(per_seed)}
    return out
