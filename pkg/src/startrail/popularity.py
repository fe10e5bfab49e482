"""Hopping-window popularity detection.

The window is split into hop-sized samples. Rolls are aligned to whole hops
from the first sample's start, so the "window" seen by a test at time ``now``
is the current sample plus the ``window_samples - 1`` samples before it.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field

from .types import ContentId, NodeConfig


@dataclass
class Sample:
    start: float
    counts: Counter = field(default_factory=Counter)


class PopularityState:
    def __init__(self, config: NodeConfig | None = None, start: float = 0.0):
        config = (config or NodeConfig()).validate()
        self.hop = config.window_hop
        self.window_samples = config.window_samples
        self.threshold = config.popularity_threshold
        self.current = Sample(start)
        self.history: deque[Sample] = deque()

    def roll(self, now: float) -> None:
        if now < self.current.start + self.hop:
            raise ValueError(f"roll at {now} before sample end {self.current.start + self.hop}")
        hops = int((now - self.current.start) // self.hop)
        # Correct float floor-division drift at exact boundaries.
        while self.current.start + (hops + 1) * self.hop <= now:
            hops += 1
        while hops > 0 and self.current.start + hops * self.hop > now:
            hops -= 1
        keep = self.window_samples - 1
        self.history.append(self.current)
        # Idle hops become empty samples; only the newest ``keep`` can survive.
        for offset in range(max(1, hops - keep), hops):
            self.history.append(Sample(self.current.start + offset * self.hop))
        self._prune()
        self.current = Sample(self.current.start + hops * self.hop)

    def _prune(self) -> None:
        keep = self.window_samples - 1
        while len(self.history) > keep:
            self.history.popleft()

    def maybe_roll(self, now: float) -> None:
        if now >= self.current.start + self.hop:
            self.roll(now)

    def window_sum(self, cid: ContentId) -> int:
        return self.current.counts.get(cid, 0) + sum(s.counts.get(cid, 0) for s in self.history)

    def observe_and_test(self, cid: ContentId, now: float) -> bool:
        self.maybe_roll(now)
        self.current.counts[cid] += 1
        return self.window_sum(cid) >= self.threshold

    def update_configs(self, config: NodeConfig) -> None:
        config.validate()
        self.hop = config.window_hop
        self.window_samples = config.window_samples
        self.threshold = config.popularity_threshold
        self._prune()

    def tracked(self) -> list[ContentId]:
        seen = dict.fromkeys(self.current.counts)
        for s in self.history:
            seen.update(dict.fromkeys(s.counts))
        return list(seen)
