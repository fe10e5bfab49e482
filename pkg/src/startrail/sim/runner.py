"""Scenario execution and the Startrail adoption sweep."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..rng import derive_seed, stream
from ..types import ConfigError, PeerId
from ..workloads import AccessPolicy, build_dataset, next_request
from .engine import HOP_TICK, REQUEST_TRIGGER, Simulator
from .metrics import NodeSample, RunMetrics
from .node import BOOTSTRAP, CLIENT, PROVIDER, Node
from .scenario import Scenario

JOIN_SPACING = 0.05


def assign_roles(s: Scenario) -> list[str]:
    return (
        [BOOTSTRAP] * s.bootstrap_count
        + [PROVIDER] * s.provider_count
        + [CLIENT] * s.client_count
    )


def startrail_nodes(s: Scenario) -> set[int]:
    """Indices of Startrail-enabled nodes (exactly floor(fraction * n), seeded shuffle)."""
    order = list(range(s.node_count))
    stream("startrail-assignment", s.run_seed).shuffle(order)
    return set(order[: s.startrail_count])


class ScenarioRun:
    """One scenario instance; ``execute`` runs warm-up and the measured phase."""

    def __init__(self, scenario: Scenario, *, trace: list | None = None, install_startrail: bool = True):
        self.scenario = scenario.validate()
        s = self.scenario
        self.dataset = build_dataset(
            s.dataset.block_count, s.dataset.block_size, s.dataset.group_bytes, s.run_seed
        )
        self.sim = Simulator(s.latency, rng=stream("latency", s.run_seed), trace=trace)
        self.metrics = RunMetrics(scenario=s)
        self.metrics.budget_bytes_total = s.node_config.storage_budget * s.node_count
        enabled = startrail_nodes(s)
        self.nodes: list[Node] = []
        for i, role in enumerate(assign_roles(s)):
            cfg = s.node_config.with_changes(startrail_enabled=i in enabled)
            node = Node(
                i,
                PeerId.for_node(i, s.run_seed),
                self.sim,
                cfg,
                role=role,
                run_seed=s.run_seed,
                fetch_timeout=s.fetch_timeout,
                emit=self.metrics.events.append,
                install_startrail=install_startrail,
            )
            self.sim.add_node(node)
            self.nodes.append(node)
        self.steady_start = 0.0
        self._sent_at_start: dict[int, int] = {}
        self._received_at_start = 0

    # -- phases ------------------------------------------------------------

    def warm_up(self) -> None:
        s, sim = self.scenario, self.sim
        boot = [n.peer_id for n in self.nodes if n.role == BOOTSTRAP]
        for i, node in enumerate(self.nodes):
            seeds = boot[:i] if node.role == BOOTSTRAP else boot
            if not seeds and i > 0:
                seeds = [self.nodes[0].peer_id]
            sim.call_later(i * JOIN_SPACING, node.dht.bootstrap, seeds)
        sim.run()
        for node in self.nodes:
            if node.role != PROVIDER:
                continue
            for cid in self.dataset.blocks:
                node.store.put(self.dataset.payloads[cid], sim.now)
                node.store.pin(cid)
            for cid in self.dataset.blocks:
                node.dht.provide(cid)
        sim.run()
        hop = s.node_config.window_hop
        self.steady_start = math.floor(sim.now / hop + 1) * hop
        sim.run(until=self.steady_start)

    def measure(self) -> None:
        s, sim = self.scenario, self.sim
        t0 = self.steady_start
        end = t0 + s.duration
        self.metrics.warmup_bytes_sent = sum(c.bytes_sent for c in sim.traffic.values())
        self._sent_at_start = {n.index: sim.traffic[n.peer_id].bytes_sent for n in self.nodes}
        self._received_at_start = sum(c.bytes_received for c in sim.traffic.values())
        if s.duration <= 0:
            self._collect()
            return
        hop = s.node_config.window_hop
        ticks = int(round(s.duration / hop, 9))
        for node in self.nodes:
            node.on_tick = self._sample
            for j in range(ticks + 1):
                sim.schedule(t0 + j * hop, HOP_TICK, node.peer_id)
        phase_rng = stream("request-phase", s.run_seed)
        for node in self.nodes:
            if node.role != CLIENT:
                continue
            rng = stream("workload", s.run_seed, s.policy.rng_seed, node.index)
            node.next_request = _request_source(s.policy, self.dataset, rng)
            if s.policy.kind == "FR":
                groups = self.dataset.group_index()
                node.request_label = lambda cids, g=groups: f"group-{g[cids[0]]}"
            node.on_request_done = self._record
            t = t0 + phase_rng.uniform(0.0, s.request_period)
            while t < end:
                sim.schedule(t, REQUEST_TRIGGER, node.peer_id)
                t += s.request_period
        sim.run(until=end)
        # Let in-flight transfers and lookups settle; nothing new is scheduled past ``end``.
        sim.run()
        self._collect()

    def execute(self) -> RunMetrics:
        self.warm_up()
        self.measure()
        return self.metrics

    # -- bookkeeping -------------------------------------------------------

    def _record(self, rec) -> None:
        t0 = self.steady_start
        self.metrics.requests.append(
            type(rec)(rec.node, rec.label, rec.start - t0, rec.end - t0, rec.success, rec.local)
        )

    def _sample(self, node: Node, now: float) -> None:
        sent = self.sim.traffic[node.peer_id].bytes_sent - self._sent_at_start.get(node.index, 0)
        self.metrics.node_samples.append(
            NodeSample(node.index, now - self.steady_start, node.store.used_bytes, sent, node.store.pinned_count)
        )

    def _collect(self) -> None:
        m, sim = self.metrics, self.sim
        m.bytes_sent_by_node = {
            n.index: sim.traffic[n.peer_id].bytes_sent - self._sent_at_start.get(n.index, 0)
            for n in self.nodes
        }
        m.bytes_received_total = (
            sum(c.bytes_received for c in sim.traffic.values()) - self._received_at_start
        )
        t0 = self.steady_start
        for e in m.events:
            e["time"] -= t0
        m.requests.sort(key=lambda r: (r.start, r.node))


def _request_source(policy: AccessPolicy, dataset, rng):
    return lambda: next_request(policy, dataset, rng)


def run(scenario: Scenario, **kwargs) -> RunMetrics:
    return ScenarioRun(scenario, **kwargs).execute()


@dataclass(frozen=True)
class SweepPoint:
    fraction: float
    mean_request_duration: float | None
    p95_request_duration: float | None
    seed: int


@dataclass(frozen=True)
class SweepResult:
    points: list[SweepPoint]
    slope: float | None
    intercept: float | None

    @property
    def degenerate(self) -> bool:
        return self.slope is None


def _sweep_one(args) -> SweepPoint:
    base, fraction = args
    seed = derive_seed("sweep", base.run_seed, repr(float(fraction)))
    agg = run(base.replace(startrail_fraction=fraction, run_seed=seed)).aggregates()
    return SweepPoint(fraction, agg["mean_request_duration"], agg["p95_request_duration"], seed)


def linear_fit(xs: list[float], ys: list[float]) -> tuple[float | None, float | None]:
    """Least-squares line; (None, None) when fewer than two distinct x values."""
    if len(set(xs)) < 2:
        return None, None
    slope, intercept = np.polyfit(np.asarray(xs, float), np.asarray(ys, float), 1)
    return float(slope), float(intercept)


def adoption_sweep(base: Scenario, fractions: list[float], jobs: int = 1) -> SweepResult:
    for f in fractions:
        if not 0 <= f <= 1:
            raise ConfigError([("fractions", f"{f} is outside [0, 1]")])
    work = [(base, f) for f in fractions]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            points = list(pool.map(_sweep_one, work))
    else:
        points = [_sweep_one(w) for w in work]
    usable = [p for p in points if p.mean_request_duration is not None]
    slope, intercept = linear_fit(
        [p.fraction for p in usable], [p.mean_request_duration for p in usable]
    )
    return SweepResult(points, slope, intercept)
