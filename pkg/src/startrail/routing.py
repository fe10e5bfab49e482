"""Kademlia-style provider routing over the XOR metric.

Lookups are asynchronous: they send queries through a transport and advance
as replies are delivered. Provider lookups descend greedily (stop once enough
providers are known or no unqueried peer is closer than the best one already
asked); node lookups used for bootstrap and PROVIDE placement keep going until
the ``k`` closest peers seen have all answered.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Protocol

from .messages import FindNode, GetProviders, NodesReply, Provide, ProvidersReply
from .types import ContentId, PeerId

K = 20
ALPHA = 3
DEFAULT_WANT = 3
ID_BITS = 256


class Transport(Protocol):
    now: float

    def send(self, src: PeerId, dst: PeerId, msg, extra_delay: float = 0.0) -> None: ...


class RoutingTable:
    def __init__(self, owner: PeerId, k: int = K):
        self.owner = owner
        self.k = k
        self.buckets: list[list[PeerId]] = [[] for _ in range(ID_BITS)]
        self._members: dict[PeerId, int] = {}

    def bucket_index(self, peer: PeerId) -> int:
        """Length of the prefix shared with the owner."""
        return ID_BITS - (self.owner.key ^ peer.key).bit_length()

    def add(self, peer: PeerId) -> bool:
        if peer == self.owner:
            return False
        idx = self._members.get(peer)
        if idx is not None:
            bucket = self.buckets[idx]
            bucket.remove(peer)
            bucket.append(peer)
            return True
        idx = self.bucket_index(peer)
        bucket = self.buckets[idx]
        if len(bucket) >= self.k:
            # Every simulated peer answers pings, so the oldest entry always stays.
            return False
        bucket.append(peer)
        self._members[peer] = idx
        return True

    def remove(self, peer: PeerId) -> None:
        idx = self._members.pop(peer, None)
        if idx is not None:
            self.buckets[idx].remove(peer)

    def __contains__(self, peer: PeerId) -> bool:
        return peer in self._members

    def __len__(self) -> int:
        return len(self._members)

    def peers(self) -> list[PeerId]:
        return [p for bucket in self.buckets for p in bucket]

    def closest(self, target: int, count: int = K, exclude: PeerId | None = None) -> list[PeerId]:
        peers = [p for p in self._members if p != exclude]
        peers.sort(key=lambda p: p.key ^ target)
        return peers[:count]


class ProviderStore:
    def __init__(self):
        self._records: dict[ContentId, dict[PeerId, float]] = {}

    def add(self, cid: ContentId, provider: PeerId, expires_at: float) -> None:
        recs = self._records.setdefault(cid, {})
        recs[provider] = max(expires_at, recs.get(provider, expires_at))

    def get(self, cid: ContentId, now: float) -> list[PeerId]:
        recs = self._records.get(cid)
        if not recs:
            return []
        expired = [p for p, exp in recs.items() if exp <= now]
        for p in expired:
            del recs[p]
        return list(recs)

    def cids(self) -> list[ContentId]:
        return list(self._records)


@dataclass(frozen=True)
class LookupResult:
    providers: tuple[PeerId, ...]
    hops: int
    messages_sent: int


@dataclass
class _Lookup:
    rid: int
    target: int
    cid: ContentId | None
    want: int
    on_done: Callable
    candidates: dict[PeerId, int] = field(default_factory=dict)
    queried: dict[PeerId, int] = field(default_factory=dict)
    pending: dict[PeerId, None] = field(default_factory=dict)
    responded: dict[PeerId, None] = field(default_factory=dict)
    providers: dict[PeerId, None] = field(default_factory=dict)
    best: int | None = None
    hops: int = 0
    messages_sent: int = 0

    @property
    def finding_providers(self) -> bool:
        return self.cid is not None


class DHT:
    """Routing state and lookup machinery of one peer."""

    def __init__(
        self,
        peer_id: PeerId,
        transport: Transport,
        *,
        k: int = K,
        alpha: int = ALPHA,
        record_ttl: float = 24 * 3600.0,
        rng: random.Random | None = None,
    ):
        self.peer_id = peer_id
        self.transport = transport
        self.k = k
        self.alpha = alpha
        self.record_ttl = record_ttl
        self.rng = rng or random.Random(peer_id.key)
        self.table = RoutingTable(peer_id, k)
        self.providers = ProviderStore()
        # Called with (cid, now) for every remotely received GET_PROVIDER.
        self.get_provider_hook: Callable[[ContentId, float], object] | None = None
        self._lookups: dict[int, _Lookup] = {}
        self._next_rid = 0

    # -- inbound -------------------------------------------------------------

    def handle_get_provider(self, src: PeerId, cid: ContentId, now: float):
        self.table.add(src)
        if self.get_provider_hook is not None:
            self.get_provider_hook(cid, now)
        providers = self.providers.get(cid, now)[: self.k]
        closer = self.table.closest(cid.key, self.k, exclude=src)
        return providers, closer

    def handle_find_node(self, src: PeerId, target: int) -> list[PeerId]:
        self.table.add(src)
        return self.table.closest(target, self.k, exclude=src)

    def handle_provide(self, src: PeerId, cid: ContentId, provider: PeerId, now: float) -> None:
        self.table.add(src)
        self.providers.add(cid, provider, now + self.record_ttl)

    def receive(self, src: PeerId, msg) -> None:
        now = self.transport.now
        if isinstance(msg, GetProviders):
            providers, closer = self.handle_get_provider(src, msg.cid, now)
            self.transport.send(
                self.peer_id, src, ProvidersReply(msg.rid, msg.cid, tuple(providers), tuple(closer))
            )
        elif isinstance(msg, FindNode):
            closer = self.handle_find_node(src, msg.target)
            self.transport.send(self.peer_id, src, NodesReply(msg.rid, tuple(closer)))
        elif isinstance(msg, Provide):
            self.handle_provide(src, msg.cid, msg.provider, now)
        elif isinstance(msg, (ProvidersReply, NodesReply)):
            self.table.add(src)
            lookup = self._lookups.get(msg.rid)
            if lookup is not None:
                self._on_reply(lookup, src, msg)
        else:
            raise TypeError(f"DHT cannot handle {type(msg).__name__}")

    # -- outbound ------------------------------------------------------------

    def find_providers(
        self, cid: ContentId, on_done: Callable[[LookupResult], None], want: int = DEFAULT_WANT
    ) -> None:
        now = self.transport.now
        local = [p for p in self.providers.get(cid, now) if p != self.peer_id]
        if len(local) >= want:
            on_done(LookupResult(self._pick(local, want), 0, 0))
            return
        lookup = self._new_lookup(cid.key, cid, want, on_done)
        lookup.providers.update(dict.fromkeys(local))
        self._start(lookup)

    def find_node(self, target: int, on_done: Callable[[list[PeerId]], None]) -> None:
        self._start(self._new_lookup(target, None, 0, on_done))

    def provide(self, cid: ContentId, on_done: Callable[[int], None] | None = None) -> None:
        now = self.transport.now
        self.providers.add(cid, self.peer_id, now + self.record_ttl)

        def announce(closest: list[PeerId]) -> None:
            for peer in closest:
                self.transport.send(self.peer_id, peer, Provide(cid, self.peer_id))
            if on_done is not None:
                on_done(len(closest))

        self.find_node(cid.key, announce)

    def bootstrap(self, seeds: list[PeerId], on_done: Callable[[list[PeerId]], None] | None = None) -> None:
        for s in seeds:
            self.table.add(s)
        self.find_node(self.peer_id.key, on_done or (lambda _peers: None))

    # -- lookup state machine ------------------------------------------------

    def _new_lookup(self, target: int, cid: ContentId | None, want: int, on_done) -> _Lookup:
        self._next_rid += 1
        lookup = _Lookup(self._next_rid, target, cid, want, on_done)
        for p in self.table.closest(target, self.k):
            lookup.candidates[p] = 1
        return lookup

    def _start(self, lookup: _Lookup) -> None:
        self._lookups[lookup.rid] = lookup
        self._advance(lookup)

    def _on_reply(self, lookup: _Lookup, src: PeerId, msg) -> None:
        if src not in lookup.pending:
            return
        del lookup.pending[src]
        lookup.responded[src] = None
        depth = lookup.queried[src]
        lookup.hops = max(lookup.hops, depth)
        for p in msg.closer:
            if p != self.peer_id and p not in lookup.candidates:
                lookup.candidates[p] = depth + 1
        if isinstance(msg, ProvidersReply):
            for p in msg.providers:
                if p != self.peer_id:
                    lookup.providers[p] = None
        self._advance(lookup)

    def _advance(self, lookup: _Lookup) -> None:
        target = lookup.target
        if lookup.finding_providers and len(lookup.providers) >= lookup.want:
            self._finish(lookup)
            return
        shortlist = sorted(lookup.candidates, key=lambda p: p.key ^ target)[: self.k]
        unqueried = [p for p in shortlist if p not in lookup.queried]
        if lookup.finding_providers and lookup.best is not None:
            unqueried = [p for p in unqueried if p.key ^ target < lookup.best]
        for p in unqueried:
            if len(lookup.pending) >= self.alpha:
                break
            self._query(lookup, p)
        if not lookup.pending:
            self._finish(lookup)

    def _query(self, lookup: _Lookup, peer: PeerId) -> None:
        lookup.queried[peer] = lookup.candidates[peer]
        lookup.pending[peer] = None
        lookup.messages_sent += 1
        dist = peer.key ^ lookup.target
        if lookup.best is None or dist < lookup.best:
            lookup.best = dist
        if lookup.finding_providers:
            msg = GetProviders(lookup.rid, lookup.cid)
        else:
            msg = FindNode(lookup.rid, lookup.target)
        self.transport.send(self.peer_id, peer, msg)

    def _finish(self, lookup: _Lookup) -> None:
        del self._lookups[lookup.rid]
        if lookup.finding_providers:
            providers = self._pick(list(lookup.providers), lookup.want)
            lookup.on_done(LookupResult(providers, lookup.hops, lookup.messages_sent))
        else:
            closest = sorted(lookup.responded, key=lambda p: p.key ^ lookup.target)[: self.k]
            lookup.on_done(closest)

    def _pick(self, providers: list[PeerId], want: int) -> tuple[PeerId, ...]:
        if len(providers) <= want:
            return tuple(providers)
        return tuple(self.rng.sample(providers, want))
