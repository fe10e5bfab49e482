"""Startrail core: turns GET_PROVIDER sightings into cache fills.

A sighting that pushes a cid over the popularity threshold makes the node
hold the block (fetching it if needed), pin it, and announce itself as a
provider. Pins are dropped at hop boundaries once the cid cools down.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

from .blockstore import BlockStore
from .exchange import Exchange, FetchResult
from .popularity import PopularityState
from .routing import DHT
from .types import ContentId, NodeConfig, PeerId, verify_block

log = logging.getLogger(__name__)


@dataclass
class StartrailStatus:
    enabled: bool
    pinned_cids: dict[ContentId, None] = field(default_factory=dict)
    fetches_in_flight: dict[ContentId, None] = field(default_factory=dict)


class Startrail:
    def __init__(
        self,
        peer_id: PeerId,
        config: NodeConfig,
        store: BlockStore,
        exchange: Exchange,
        dht: DHT,
        *,
        start: float = 0.0,
        emit: Callable[[dict], None] | None = None,
    ):
        self.peer_id = peer_id
        self.config = config.validate()
        self.store = store
        self.exchange = exchange
        self.dht = dht
        self.popularity = PopularityState(config, start)
        self.status = StartrailStatus(config.startrail_enabled)
        self._emit_fn = emit
        # cid -> time of our last Startrail PROVIDE
        self.announced: dict[ContentId, float] = {}

    @property
    def enabled(self) -> bool:
        return self.status.enabled

    def _emit(self, event: str, cid: ContentId, now: float) -> None:
        record = {"time": now, "node": str(self.peer_id), "event": event, "cid": str(cid)}
        log.debug("%s", record)
        if self._emit_fn is not None:
            self._emit_fn(record)

    def process(self, cid: ContentId, now: float) -> bool:
        if not self.popularity.observe_and_test(cid, now):
            return False
        status = self.status
        if cid in status.pinned_cids or cid in status.fetches_in_flight:
            return True
        self._emit("popular", cid, now)
        if self.store.has(cid):
            self._hold(cid, now)
        else:
            status.fetches_in_flight[cid] = None
            self.exchange.fetch_block(cid, self._on_fetched)
        return True

    def _on_fetched(self, result: FetchResult) -> None:
        self.status.fetches_in_flight.pop(result.cid, None)
        if not result.ok:
            self._emit("fetch_failed", result.cid, result.finished)
            return
        self._hold(result.cid, result.finished)

    def _hold(self, cid: ContentId, now: float) -> None:
        entry = self.store.entry(cid)
        if entry is None or not verify_block(entry.block):
            return
        if self.store.pin(cid):
            self.status.pinned_cids[cid] = None
        last = self.announced.get(cid)
        # Provider records live for a full TTL; re-announce only when half expired.
        if last is None or now - last >= self.config.provider_record_ttl / 2:
            self.announced[cid] = now
            self.dht.provide(cid)
            self._emit("cached", cid, now)

    def on_hop_tick(self, now: float) -> list[ContentId]:
        self.popularity.maybe_roll(now)
        threshold = self.popularity.threshold
        cooled = [
            cid for cid in self.status.pinned_cids if self.popularity.window_sum(cid) < threshold
        ]
        for cid in cooled:
            self.store.unpin(cid)
            del self.status.pinned_cids[cid]
            self._emit("unpinned", cid, now)
        return cooled

    def update_configs(self, config: NodeConfig) -> None:
        config.validate()
        self.popularity.update_configs(config)
        self.config = config
        self.status.enabled = config.startrail_enabled
