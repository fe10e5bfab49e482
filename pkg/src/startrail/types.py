"""Identifiers, blocks and per-node configuration shared by every module."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace

MAX_BLOCK_SIZE = 262_144
GIB = 1 << 30
CID_DISPLAY_PREFIX = "Qm-sim:"


class BlockSizeError(ValueError):
    pass


class IntegrityError(ValueError):
    """A block whose payload does not hash to its ContentId."""


class ConfigError(ValueError):
    """Raised with a list of ``(field_path, message)`` problems."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        super().__init__("; ".join(f"{path}: {msg}" for path, msg in problems))


@dataclass(frozen=True, slots=True)
class _Digest:
    digest: bytes
    key: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.digest) != 32:
            raise ValueError("digest must be 32 bytes")
        object.__setattr__(self, "key", int.from_bytes(self.digest, "big"))

    def hex(self) -> str:
        return self.digest.hex()

    def __lt__(self, other: _Digest) -> bool:
        return self.key < other.key


@dataclass(frozen=True, slots=True)
class ContentId(_Digest):
    def __str__(self) -> str:
        return CID_DISPLAY_PREFIX + self.digest.hex()


@dataclass(frozen=True, slots=True)
class PeerId(_Digest):
    @classmethod
    def for_node(cls, index: int, run_seed: int) -> PeerId:
        return cls(hashlib.sha256(f"node-{index}-{run_seed}".encode()).digest())

    def __str__(self) -> str:
        return "peer:" + self.digest.hex()[:12]


@dataclass(frozen=True, slots=True)
class Block:
    cid: ContentId
    payload: bytes
    links: tuple[ContentId, ...] = ()

    @property
    def size(self) -> int:
        return len(self.payload)


def compute_cid(payload: bytes) -> ContentId:
    if len(payload) > MAX_BLOCK_SIZE:
        raise BlockSizeError(f"payload of {len(payload)} bytes exceeds {MAX_BLOCK_SIZE}")
    return ContentId(hashlib.sha256(payload).digest())


def make_block(payload: bytes, links: tuple[ContentId, ...] = ()) -> Block:
    return Block(compute_cid(payload), bytes(payload), tuple(links))


def verify_block(block: Block) -> bool:
    if len(block.payload) > MAX_BLOCK_SIZE:
        return False
    return hashlib.sha256(block.payload).digest() == block.cid.digest


@dataclass(frozen=True)
class NodeConfig:
    """Startrail and storage knobs for one node. Durations are seconds."""

    startrail_enabled: bool = False
    window_hop: float = 10.0
    window_samples: int = 3
    popularity_threshold: int = 2
    storage_budget: int = 10 * GIB
    pin_highwater_fraction: float = 0.90
    gc_lowwater_fraction: float = 0.80
    gc_full_sweep: bool = False
    provider_record_ttl: float = 24 * 3600.0

    def problems(self, prefix: str = "") -> list[tuple[str, str]]:
        out = []
        if not self.window_hop > 0:
            out.append((prefix + "window_hop", "must be > 0"))
        if self.window_samples < 1:
            out.append((prefix + "window_samples", "must be >= 1"))
        if self.popularity_threshold < 1:
            out.append((prefix + "popularity_threshold", "must be >= 1"))
        if self.storage_budget <= 0:
            out.append((prefix + "storage_budget", "must be > 0"))
        if not 0 < self.gc_lowwater_fraction < self.pin_highwater_fraction <= 1:
            out.append(
                (prefix + "gc_lowwater_fraction",
                 "need 0 < gc_lowwater_fraction < pin_highwater_fraction <= 1")
            )
        if not self.provider_record_ttl > 0:
            out.append((prefix + "provider_record_ttl", "must be > 0"))
        return out

    def validate(self) -> NodeConfig:
        problems = self.problems()
        if problems:
            raise ConfigError(problems)
        return self

    def with_changes(self, **changes) -> NodeConfig:
        return replace(self, **changes)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]
