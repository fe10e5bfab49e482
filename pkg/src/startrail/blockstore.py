"""Per-node content-addressed block storage with pinning and budgeted GC."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO

from .types import Block, ContentId, IntegrityError, NodeConfig, verify_block


@dataclass
class StoredEntry:
    block: Block
    pinned: bool
    stored_at: float
    last_access: float


@dataclass(frozen=True)
class StoreStats:
    used_bytes: int
    budget_bytes: int
    pinned_bytes: int
    block_count: int


class BlockStore:
    """Blocks keyed by cid. GC evicts unpinned entries, least recently used first,
    down to the low-water mark (or all unpinned entries with ``gc_full_sweep``)."""

    def __init__(self, config: NodeConfig | None = None):
        self.config = config or NodeConfig()
        self._entries: dict[ContentId, StoredEntry] = {}
        self.used_bytes = 0
        self.pinned_bytes = 0
        self.pinned_count = 0

    def __contains__(self, cid: ContentId) -> bool:
        return cid in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def budget_bytes(self) -> int:
        return self.config.storage_budget

    def has(self, cid: ContentId) -> bool:
        return cid in self._entries

    def entry(self, cid: ContentId) -> StoredEntry | None:
        return self._entries.get(cid)

    def cids(self) -> list[ContentId]:
        return list(self._entries)

    def is_pinned(self, cid: ContentId) -> bool:
        e = self._entries.get(cid)
        return e is not None and e.pinned

    def put(self, block: Block, now: float) -> list[ContentId]:
        """Store ``block``; returns whatever GC evicted as a consequence."""
        if not verify_block(block):
            raise IntegrityError(f"block does not hash to {block.cid}")
        e = self._entries.get(block.cid)
        if e is not None:
            e.last_access = max(e.last_access, now)
            return []
        self._entries[block.cid] = StoredEntry(block, False, now, now)
        self.used_bytes += block.size
        if self.used_bytes > self.budget_bytes:
            return self.gc(now)
        return []

    def get(self, cid: ContentId, now: float) -> Block | None:
        e = self._entries.get(cid)
        if e is None:
            return None
        e.last_access = max(e.last_access, now)
        return e.block

    def pin(self, cid: ContentId) -> bool:
        e = self._entries.get(cid)
        if e is None:
            return False
        if e.pinned:
            return True
        if self.used_bytes >= self.config.pin_highwater_fraction * self.budget_bytes:
            return False
        e.pinned = True
        self.pinned_bytes += e.block.size
        self.pinned_count += 1
        return True

    def unpin(self, cid: ContentId) -> None:
        e = self._entries.get(cid)
        if e is not None and e.pinned:
            e.pinned = False
            self.pinned_bytes -= e.block.size
            self.pinned_count -= 1

    def gc(self, now: float) -> list[ContentId]:
        target = self.config.gc_lowwater_fraction * self.budget_bytes
        if not self.config.gc_full_sweep and self.used_bytes <= target:
            return []
        candidates = sorted(
            (e for e in self._entries.values() if not e.pinned),
            key=lambda e: e.last_access,
        )
        evicted = []
        for e in candidates:
            if not self.config.gc_full_sweep and self.used_bytes <= target:
                break
            del self._entries[e.block.cid]
            self.used_bytes -= e.block.size
            evicted.append(e.block.cid)
        return evicted

    def stats(self) -> StoreStats:
        return StoreStats(self.used_bytes, self.budget_bytes, self.pinned_bytes, len(self._entries))

    def dump_csv(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cid", "size", "pinned", "last_access"])
        for cid, e in self._entries.items():
            w.writerow([str(cid), e.block.size, int(e.pinned), f"{e.last_access:.6f}"])
