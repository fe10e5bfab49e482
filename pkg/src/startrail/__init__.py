"""Adaptive popularity-driven caching for a content-addressed P2P network,
plus a deterministic simulator to measure it."""

from .blockstore import BlockStore
from .core import Startrail
from .popularity import PopularityState
from .types import Block, ContentId, NodeConfig, PeerId, compute_cid, make_block, verify_block

__all__ = [
    "Block",
    "BlockStore",
    "ContentId",
    "NodeConfig",
    "PeerId",
    "PopularityState",
    "Startrail",
    "compute_cid",
    "make_block",
    "verify_block",
]
__version__ = "0.1.0"
