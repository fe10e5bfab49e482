"""Bitswap-like block exchange: local store first, then DHT providers.

Outgoing blocks go through a per-node send queue. With a finite upload
bandwidth a peer transmits one block at a time and a CANCEL from the
requester drops a still-queued block; with unlimited bandwidth blocks leave
immediately.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

from .blockstore import BlockStore
from .messages import BlockMsg, Cancel, MessageSizes, Want
from .routing import DEFAULT_WANT, DHT, LookupResult
from .types import Block, ContentId, IntegrityError, PeerId, verify_block

log = logging.getLogger(__name__)

DEFAULT_FETCH_TIMEOUT = 60.0


@dataclass
class FetchResult:
    cid: ContentId
    block: Block | None
    started: float
    finished: float
    error: str | None = None
    local: bool = False

    @property
    def ok(self) -> bool:
        return self.block is not None

    @property
    def duration(self) -> float:
        return self.finished - self.started


@dataclass
class FetchTicket:
    cid: ContentId
    issued_at: float
    deadline: float
    providers_tried: list[PeerId] = field(default_factory=list)
    waiters: list[Callable[[FetchResult], None]] = field(default_factory=list)
    timer: object = None


class Exchange:
    def __init__(
        self,
        peer_id: PeerId,
        transport,
        store: BlockStore,
        dht: DHT,
        *,
        fetch_timeout: float = DEFAULT_FETCH_TIMEOUT,
        fanout: int = DEFAULT_WANT,
        upload_bandwidth: float = 0.0,
        sizes: MessageSizes | None = None,
    ):
        self.peer_id = peer_id
        self.transport = transport
        self.store = store
        self.dht = dht
        self.fetch_timeout = fetch_timeout
        self.fanout = fanout
        self.upload_bandwidth = upload_bandwidth
        self.sizes = sizes or MessageSizes()
        self.want_list: dict[ContentId, FetchTicket] = {}
        self._outbox: deque[tuple[PeerId, ContentId]] = deque()
        self._sending = False

    # -- requesting ----------------------------------------------------------

    def fetch_block(self, cid: ContentId, on_done: Callable[[FetchResult], None]) -> None:
        now = self.transport.now
        block = self.store.get(cid, now)
        if block is not None:
            on_done(FetchResult(cid, block, now, now, local=True))
            return
        ticket = self.want_list.get(cid)
        if ticket is not None:
            ticket.waiters.append(on_done)
            return
        ticket = FetchTicket(cid, now, now + self.fetch_timeout, waiters=[on_done])
        self.want_list[cid] = ticket
        ticket.timer = self.transport.call_later(self.fetch_timeout, self._on_deadline, ticket)
        self.dht.find_providers(cid, lambda res: self._on_providers(ticket, res), want=self.fanout)

    def _on_providers(self, ticket: FetchTicket, result: LookupResult) -> None:
        if self.want_list.get(ticket.cid) is not ticket:
            return
        if not result.providers:
            self._complete(ticket, None, "not found")
            return
        for p in result.providers[: self.fanout]:
            ticket.providers_tried.append(p)
            self.transport.send(self.peer_id, p, Want((ticket.cid,)))

    def _on_deadline(self, ticket: FetchTicket) -> None:
        if self.want_list.get(ticket.cid) is ticket:
            for p in ticket.providers_tried:
                self.transport.send(self.peer_id, p, Cancel((ticket.cid,)))
            self._complete(ticket, None, "timeout")

    def _on_block(self, src: PeerId, block: Block) -> None:
        ticket = self.want_list.get(block.cid)
        if ticket is None:
            return  # late duplicate
        if not verify_block(block):
            log.debug("dropping tampered block %s from %s", block.cid, src)
            return
        try:
            self.store.put(block, self.transport.now)
        except IntegrityError:
            return
        others = tuple(p for p in ticket.providers_tried if p != src)
        for p in others:
            self.transport.send(self.peer_id, p, Cancel((block.cid,)))
        self._complete(ticket, block, None)

    def _complete(self, ticket: FetchTicket, block: Block | None, error: str | None) -> None:
        del self.want_list[ticket.cid]
        if ticket.timer is not None:
            self.transport.cancel(ticket.timer)
        now = self.transport.now
        result = FetchResult(ticket.cid, block, ticket.issued_at, now, error)
        for waiter in ticket.waiters:
            waiter(result)

    # -- serving -------------------------------------------------------------

    def handle_want(self, src: PeerId, cids) -> list[ContentId]:
        now = self.transport.now
        sent = []
        for cid in cids:
            if self.store.get(cid, now) is None:
                continue
            self._outbox.append((src, cid))
            sent.append(cid)
        self._pump()
        return sent

    def handle_cancel(self, src: PeerId, cids) -> None:
        drop = set(cids)
        if drop:
            self._outbox = deque(t for t in self._outbox if not (t[0] == src and t[1] in drop))

    def _pump(self) -> None:
        while self._outbox and not self._sending:
            dst, cid = self._outbox.popleft()
            block = self.store.get(cid, self.transport.now)
            if block is None:
                continue  # evicted while queued
            msg = BlockMsg(block)
            if self.upload_bandwidth <= 0:
                self.transport.send(self.peer_id, dst, msg)
                continue
            tx_time = msg.size(self.sizes) / self.upload_bandwidth
            self.transport.send(self.peer_id, dst, msg, extra_delay=tx_time)
            self._sending = True
            self.transport.call_later(tx_time, self._sent)

    def _sent(self) -> None:
        self._sending = False
        self._pump()

    @property
    def queued(self) -> int:
        return len(self._outbox)

    def receive(self, src: PeerId, msg) -> None:
        if isinstance(msg, Want):
            self.handle_want(src, msg.cids)
        elif isinstance(msg, Cancel):
            self.handle_cancel(src, msg.cids)
        elif isinstance(msg, BlockMsg):
            self._on_block(src, msg.block)
        else:
            raise TypeError(f"exchange cannot handle {type(msg).__name__}")
