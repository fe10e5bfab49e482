"""Deterministic discrete-event core: virtual clock, event queue, latency model."""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from typing import Any

from ..messages import MessageSizes
from ..types import PeerId

MESSAGE_DELIVERY = "message_delivery"
HOP_TICK = "hop_tick"
REQUEST_TRIGGER = "request_trigger"
SCENARIO_END = "scenario_end"
TIMER = "timer"


@dataclass(frozen=True)
class LatencyModel:
    """One-way delay ``base_one_way + U(0, jitter)`` seconds.

    ``upload_bandwidth`` (bytes/s, 0 = unlimited) caps how fast each peer can
    push blocks out; it only affects block transfers.
    """

    base_one_way: float = 0.100
    jitter: float = 0.0
    upload_bandwidth: float = 0.0

    def sample(self, rng: random.Random) -> float:
        if self.jitter <= 0:
            return self.base_one_way
        return self.base_one_way + rng.uniform(0.0, self.jitter)


@dataclass(eq=False)
class Event:
    at: float
    seq: int
    kind: str
    target: PeerId | None
    payload: Any
    scheduled_at: float = 0.0
    cancelled: bool = field(default=False)


@dataclass
class TrafficCounters:
    bytes_sent: int = 0
    bytes_received: int = 0
    messages_sent: int = 0


class Simulator:
    def __init__(
        self,
        latency: LatencyModel | None = None,
        sizes: MessageSizes | None = None,
        rng: random.Random | None = None,
        trace: list | None = None,
    ):
        self.latency = latency or LatencyModel()
        self.sizes = sizes or MessageSizes()
        self.rng = rng or random.Random(0)
        self.now = 0.0
        self.nodes: dict[PeerId, Any] = {}
        self.traffic: dict[PeerId, TrafficCounters] = {}
        self.in_flight_bytes = 0
        self.bytes_by_type: dict[str, int] = {}
        self.trace = trace
        self._queue: list[tuple[float, int, Event]] = []
        self._seq = 0
        self.events_processed = 0

    def add_node(self, node) -> None:
        self.nodes[node.peer_id] = node
        self.traffic.setdefault(node.peer_id, TrafficCounters())

    def schedule(self, at: float, kind: str, target: PeerId | None, payload: Any = None) -> Event:
        if at < self.now:
            raise ValueError(f"cannot schedule in the past ({at} < {self.now})")
        self._seq += 1
        ev = Event(at, self._seq, kind, target, payload, self.now)
        heapq.heappush(self._queue, (at, self._seq, ev))
        return ev

    def call_later(self, delay: float, fn, *args) -> Event:
        return self.schedule(self.now + delay, TIMER, None, (fn, args))

    def cancel(self, event: Event) -> None:
        event.cancelled = True

    def send(self, src: PeerId, dst: PeerId, msg, extra_delay: float = 0.0) -> float:
        """Queue ``msg`` for delivery and charge its size to ``src``; returns arrival time."""
        if dst not in self.nodes:
            raise KeyError(f"unknown destination {dst}")
        size = msg.size(self.sizes)
        counters = self.traffic[src]
        counters.bytes_sent += size
        counters.messages_sent += 1
        self.in_flight_bytes += size
        kind = type(msg).__name__
        self.bytes_by_type[kind] = self.bytes_by_type.get(kind, 0) + size
        at = self.now + extra_delay + self.latency.sample(self.rng)
        self.schedule(at, MESSAGE_DELIVERY, dst, (src, msg, size))
        return at

    def pending(self) -> int:
        return sum(1 for _, _, ev in self._queue if not ev.cancelled)

    def step(self) -> bool:
        while self._queue:
            at, _, ev = heapq.heappop(self._queue)
            if ev.cancelled:
                continue
            self.now = at
            self.events_processed += 1
            if self.trace is not None:
                self.trace.append((ev.at, ev.seq, ev.kind, ev.target, ev.scheduled_at))
            self._dispatch(ev)
            return True
        return False

    def run(self, until: float | None = None) -> None:
        while self._queue:
            at = self._queue[0][0]
            if until is not None and at > until:
                self.now = max(self.now, until)
                return
            self.step()
        if until is not None:
            self.now = max(self.now, until)

    def _dispatch(self, ev: Event) -> None:
        kind = ev.kind
        if kind == MESSAGE_DELIVERY:
            src, msg, size = ev.payload
            self.in_flight_bytes -= size
            self.traffic[ev.target].bytes_received += size
            self.nodes[ev.target].receive(src, msg)
        elif kind == TIMER:
            fn, args = ev.payload
            fn(*args)
        elif kind == HOP_TICK:
            self.nodes[ev.target].on_hop_tick(self.now)
        elif kind == REQUEST_TRIGGER:
            self.nodes[ev.target].on_request_trigger(self.now, ev.payload)
        elif kind == SCENARIO_END:
            fn = ev.payload
            if fn is not None:
                fn()
        else:
            raise ValueError(f"unknown event kind {kind!r}")
