"""A simulated peer: block store, DHT, exchange and (optionally) Startrail."""

from __future__ import annotations

from typing import Callable

from ..blockstore import BlockStore
from ..core import Startrail
from ..exchange import Exchange, FetchResult
from ..messages import BlockMsg, Cancel, Want
from ..rng import stream
from ..types import ContentId, NodeConfig, PeerId
from .metrics import RequestRecord

BOOTSTRAP = "bootstrap"
PROVIDER = "provider"
CLIENT = "client"


class Node:
    def __init__(
        self,
        index: int,
        peer_id: PeerId,
        sim,
        config: NodeConfig,
        *,
        role: str = CLIENT,
        run_seed: int = 0,
        fetch_timeout: float = 60.0,
        emit: Callable[[dict], None] | None = None,
        install_startrail: bool = True,
    ):
        from ..routing import DHT

        self.index = index
        self.peer_id = peer_id
        self.sim = sim
        self.role = role
        self.config = config
        self.store = BlockStore(config)
        self.dht = DHT(
            peer_id, sim, record_ttl=config.provider_record_ttl, rng=stream("dht", run_seed, index)
        )
        self.exchange = Exchange(
            peer_id,
            sim,
            self.store,
            self.dht,
            fetch_timeout=fetch_timeout,
            upload_bandwidth=sim.latency.upload_bandwidth,
            sizes=sim.sizes,
        )
        self.startrail: Startrail | None = None
        if install_startrail:
            self.startrail = Startrail(peer_id, config, self.store, self.exchange, self.dht, emit=emit)
            self.dht.get_provider_hook = self._on_get_provider
        # Set by the scenario runner for client nodes.
        self.next_request: Callable[[], list[ContentId]] | None = None
        self.request_label: Callable[[list[ContentId]], str] = lambda cids: str(cids[0])
        self.on_request_done: Callable[[RequestRecord], None] | None = None
        self.on_tick: Callable[[Node, float], None] | None = None

    @property
    def startrail_enabled(self) -> bool:
        return self.startrail is not None and self.startrail.enabled

    def _on_get_provider(self, cid: ContentId, now: float) -> None:
        if self.startrail is not None and self.startrail.enabled:
            self.startrail.process(cid, now)

    def receive(self, src: PeerId, msg) -> None:
        if isinstance(msg, (Want, Cancel, BlockMsg)):
            self.exchange.receive(src, msg)
        else:
            self.dht.receive(src, msg)

    def on_hop_tick(self, now: float) -> None:
        if self.startrail is not None:
            self.startrail.on_hop_tick(now)
        if self.on_tick is not None:
            self.on_tick(self, now)

    def on_request_trigger(self, now: float, _payload=None) -> None:
        if self.next_request is None:
            return
        self.request(self.next_request(), now)

    def request(self, cids: list[ContentId], now: float) -> None:
        """Application-level fetch of every cid in ``cids``, reported as one request."""
        label = self.request_label(cids)
        remaining = dict.fromkeys(cids)
        state = {"ok": True, "local": True}

        def done(result: FetchResult) -> None:
            remaining.pop(result.cid, None)
            state["ok"] &= result.ok
            state["local"] &= result.local
            if not remaining and self.on_request_done is not None:
                end = self.sim.now
                self.on_request_done(
                    RequestRecord(self.index, label, now, end, state["ok"], state["ok"] and state["local"])
                )

        for cid in list(remaining):
            self.exchange.fetch_block(cid, done)
