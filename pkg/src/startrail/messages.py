"""Wire messages exchanged between simulated peers and their byte-size model."""

from __future__ import annotations

from dataclasses import dataclass

from .types import Block, ContentId, PeerId


@dataclass(frozen=True)
class MessageSizes:
    overhead: int = 80
    get_provider: int = 64
    find_node: int = 64
    reply_entry: int = 32
    provide: int = 96
    want_entry: int = 64
    block_overhead: int = 128


@dataclass(frozen=True, slots=True)
class GetProviders:
    rid: int
    cid: ContentId

    def size(self, s: MessageSizes) -> int:
        return s.get_provider + s.overhead


@dataclass(frozen=True, slots=True)
class ProvidersReply:
    rid: int
    cid: ContentId
    providers: tuple[PeerId, ...]
    closer: tuple[PeerId, ...]

    def size(self, s: MessageSizes) -> int:
        return s.reply_entry * (len(self.providers) + len(self.closer)) + s.overhead


@dataclass(frozen=True, slots=True)
class FindNode:
    rid: int
    target: int

    def size(self, s: MessageSizes) -> int:
        return s.find_node + s.overhead


@dataclass(frozen=True, slots=True)
class NodesReply:
    rid: int
    closer: tuple[PeerId, ...]

    def size(self, s: MessageSizes) -> int:
        return s.reply_entry * len(self.closer) + s.overhead


@dataclass(frozen=True, slots=True)
class Provide:
    cid: ContentId
    provider: PeerId

    def size(self, s: MessageSizes) -> int:
        return s.provide + s.overhead


@dataclass(frozen=True, slots=True)
class Want:
    cids: tuple[ContentId, ...]

    def size(self, s: MessageSizes) -> int:
        return s.want_entry * len(self.cids) + s.overhead


@dataclass(frozen=True, slots=True)
class Cancel:
    cids: tuple[ContentId, ...]

    def size(self, s: MessageSizes) -> int:
        return s.want_entry * len(self.cids) + s.overhead


@dataclass(frozen=True, slots=True)
class BlockMsg:
    block: Block

    def size(self, s: MessageSizes) -> int:
        return len(self.block.payload) + s.block_overhead


Message = GetProviders | ProvidersReply | FindNode | NodesReply | Provide | Want | Cancel | BlockMsg
