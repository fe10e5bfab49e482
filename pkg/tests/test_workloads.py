import hashlib
import io
import math
import random
from collections import Counter

import pytest

from startrail.rng import derive_seed, stream
from startrail.types import verify_block
from startrail.workloads import (
    DEFAULT_GROUP_BYTES,
    AccessPolicy,
    blocks_per_group,
    build_dataset,
    next_request,
    pareto_rank,
)


@pytest.fixture(scope="module")
def ds():
    return build_dataset(2000, 64, group_bytes=12 * 64, seed=3)


def test_group_arithmetic_full_scale():
    assert blocks_per_group(262_144, DEFAULT_GROUP_BYTES) == math.ceil(3 * 2**20 / 262_144) == 12
    assert math.ceil(2000 / 12) == 167


def test_dataset_partition(ds):
    assert len(ds.file_groups) == 167
    assert all(len(g) == 12 for g in ds.file_groups[:-1])
    assert len(ds.file_groups[-1]) == 2000 - 166 * 12
    flat = [c for g in ds.file_groups for c in g]
    assert flat == ds.blocks and len(set(flat)) == 2000
    assert sorted(ds.rank_permutation) == list(range(2000))
    assert all(verify_block(ds.payloads[c]) and ds.payloads[c].size == 64 for c in ds.blocks)


def test_dataset_determinism_and_single_block():
    assert build_dataset(50, 32, seed=9).blocks == build_dataset(50, 32, seed=9).blocks
    assert build_dataset(50, 32, seed=9).blocks != build_dataset(50, 32, seed=10).blocks
    one = build_dataset(1, 32)
    assert len(one.file_groups) == 1 and one.file_groups[0] == one.blocks
    with pytest.raises(ValueError):
        build_dataset(0, 32)


def test_manifest(ds):
    buf = io.StringIO()
    ds.write_manifest(buf)
    rows = buf.getvalue().splitlines()
    assert rows[0] == "index,cid,size,group"
    assert rows[1] == f"0,{ds.blocks[0]},64,0"
    assert len(rows) == 2001


def test_random_access_uniform():
    small = build_dataset(50, 16, seed=1)
    rng = random.Random(42)
    counts = Counter(next_request(AccessPolicy("RA"), small, rng)[0] for _ in range(500))
    n, p = 500, 1 / 50
    sigma = math.sqrt(n * p * (1 - p))
    assert all(abs(counts[c] - n * p) <= 3 * sigma for c in small.blocks)


def test_random_access_chi_square():
    small = build_dataset(200, 16, seed=1)
    rng = random.Random(7)
    draws = 200 * 50
    counts = Counter(next_request(AccessPolicy("RA"), small, rng)[0] for _ in range(draws))
    expected = draws / 200
    chi2 = sum((counts[c] - expected) ** 2 / expected for c in small.blocks)
    df = 199
    # Wilson-Hilferty upper 0.999 quantile of chi-square(df).
    z = 3.09
    crit = df * (1 - 2 / (9 * df) + z * math.sqrt(2 / (9 * df))) ** 3
    assert chi2 < crit


def test_pareto_top_share(ds):
    rng = random.Random(5)
    policy = AccessPolicy("PR", pareto_alpha=0.3)
    rank_of = {ds.blocks[ds.rank_permutation[r]]: r + 1 for r in range(2000)}
    draws = [rank_of[next_request(policy, ds, rng)[0]] for _ in range(100_000)]
    share = sum(1 for r in draws if r <= 400) / len(draws)
    # Analytic share of ranks 1..400 under the clamp: 1 - 401 ** -0.3.
    assert share == pytest.approx(1 - 401 ** -0.3, abs=0.01)
    assert share > 0.6


def test_pareto_rank_bounds():
    rng = random.Random(0)
    ranks = [pareto_rank(rng, 0.3, 10) for _ in range(5000)]
    assert min(ranks) == 1 and max(ranks) == 10
    # P(rank = 1) = 1 - 2 ** -0.3
    assert ranks.count(1) / 5000 == pytest.approx(1 - 2 ** -0.3, abs=0.02)


def test_file_random_returns_one_group(ds):
    rng = random.Random(1)
    groups = {tuple(g) for g in ds.file_groups}
    for _ in range(300):
        req = next_request(AccessPolicy("FR"), ds, rng)
        assert tuple(req) in groups
        assert len(set(req)) == len(req)


def test_request_sequence_determinism(ds):
    for kind in ("RA", "PR", "FR"):
        r1, r2 = stream("w", 1), stream("w", 1)
        assert [next_request(AccessPolicy(kind), ds, r1) for _ in range(50)] == [
            next_request(AccessPolicy(kind), ds, r2) for _ in range(50)
        ]


def test_policy_validation():
    assert AccessPolicy("XX").problems()[0][0] == "kind"
    assert AccessPolicy("PR", pareto_alpha=0).problems()[0][0] == "pareto_alpha"
    with pytest.raises(ValueError):
        next_request(AccessPolicy("XX"), build_dataset(2, 8), random.Random(0))


def test_derive_seed_stable():
    assert derive_seed("a", 1) == derive_seed("a", 1) != derive_seed("a", 2)
    assert derive_seed("x") == int.from_bytes(hashlib.sha256(b"x").digest()[:8], "big")
