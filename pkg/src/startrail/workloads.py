"""Request generation: Random Access, Pareto Random and File Random."""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass
from typing import IO

from .rng import stream
from .types import Block, ContentId, make_block

KINDS = ("RA", "PR", "FR")
DEFAULT_GROUP_BYTES = 3 * (1 << 20)


@dataclass(frozen=True)
class AccessPolicy:
    kind: str = "RA"
    pareto_alpha: float = 0.3
    rng_seed: int = 0

    def problems(self, prefix: str = "") -> list[tuple[str, str]]:
        out = []
        if self.kind not in KINDS:
            out.append((prefix + "kind", f"must be one of {', '.join(KINDS)}"))
        if not self.pareto_alpha > 0:
            out.append((prefix + "pareto_alpha", "must be > 0"))
        return out


@dataclass
class Dataset:
    blocks: list[ContentId]
    file_groups: list[list[ContentId]]
    rank_permutation: list[int]
    payloads: dict[ContentId, Block]
    block_size: int

    def __len__(self) -> int:
        return len(self.blocks)

    def group_index(self) -> dict[ContentId, int]:
        return {cid: g for g, group in enumerate(self.file_groups) for cid in group}

    def write_manifest(self, fh: IO[str]) -> None:
        groups = self.group_index()
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "cid", "size", "group"])
        for i, cid in enumerate(self.blocks):
            w.writerow([i, str(cid), self.payloads[cid].size, groups[cid]])


def blocks_per_group(block_size: int, group_bytes: int) -> int:
    return max(1, math.ceil(group_bytes / block_size))


def build_dataset(
    block_count: int, block_size: int, group_bytes: int = DEFAULT_GROUP_BYTES, seed: int = 0
) -> Dataset:
    if block_count < 1:
        raise ValueError("block_count must be >= 1")
    rng = stream("dataset", seed)
    payloads: dict[ContentId, Block] = {}
    blocks = []
    for i in range(block_count):
        # The index prefix keeps payloads distinct even for tiny block sizes.
        payload = i.to_bytes(4, "big") + rng.randbytes(max(0, block_size - 4))
        block = make_block(payload[:max(block_size, 4)])
        payloads[block.cid] = block
        blocks.append(block.cid)
    per = blocks_per_group(block_size, group_bytes)
    groups = [blocks[i : i + per] for i in range(0, block_count, per)]
    perm = list(range(block_count))
    stream("rank-permutation", seed).shuffle(perm)
    return Dataset(blocks, groups, perm, payloads, block_size)


def pareto_rank(rng: random.Random, alpha: float, n: int) -> int:
    """1-based rank from an unbounded Pareto(alpha) draw clamped to ``n``."""
    u = 1.0 - rng.random()  # (0, 1]
    x = u ** (-1.0 / alpha)
    return min(int(x), n)


def next_request(policy: AccessPolicy, dataset: Dataset, rng: random.Random) -> list[ContentId]:
    if policy.kind == "RA":
        return [dataset.blocks[rng.randrange(len(dataset.blocks))]]
    if policy.kind == "PR":
        rank = pareto_rank(rng, policy.pareto_alpha, len(dataset.blocks))
        return [dataset.blocks[dataset.rank_permutation[rank - 1]]]
    if policy.kind == "FR":
        groups = dataset.file_groups
        rank = pareto_rank(rng, policy.pareto_alpha, len(groups))
        # Groups are ranked in creation order; the block permutation does not apply here.
        return list(groups[rank - 1])
    raise ValueError(f"unknown access policy {policy.kind!r}")
