import hashlib

import numpy as np
import pytest

from hdoms.encoder import Hypervector, gen_item_memory, pack_bits
from hdoms.index import (
    BlockCache,
    CacheBudgetError,
    IndexBuildError,
    IndexFormatError,
    IndexManifest,
    LibraryIndex,
    RefRecord,
    build_index,
    select_blocks,
)
from hdoms.preprocess import PreprocessConfig

DIM = 256


def make_refs(rng, n, charges=(2,), dim=DIM):
    refs = []
    for i in range(n):
        bits = rng.integers(0, 2, size=dim).astype(np.uint8)
        refs.append(
            RefRecord(
                ref_id=i,
                title=f"R{i}",
                precursor_mz=float(rng.uniform(400, 1600)),
                charge=int(charges[i % len(charges)]),
                is_decoy=bool(rng.random() < 0.1),
                hv=Hypervector(pack_bits(bits), dim),
            )
        )
    return refs


@pytest.fixture
def im():
    return gen_item_memory(32, 8, dim=DIM, seed=1)


@pytest.fixture
def pre_cfg():
    return PreprocessConfig()


def test_chunk_sizes_single_charge(tmp_path, im, pre_cfg):
    rng = np.random.default_rng(0)
    refs = make_refs(rng, 10_000)
    blocks = build_index(refs, 4096, im, pre_cfg, tmp_path / "i.idx")
    assert blocks == {2: 3}
    idx = LibraryIndex.open(tmp_path / "i.idx")
    counts = [meta.count for meta in idx.manifest.partitions[2]]
    assert counts == [4096, 4096, 1808]
    idx.close()


def test_charge_partitions_sorted(tmp_path, im, pre_cfg):
    rng = np.random.default_rng(1)
    refs = make_refs(rng, 600, charges=(2, 3))
    build_index(refs, 128, im, pre_cfg, tmp_path / "i.idx")
    idx = LibraryIndex.open(tmp_path / "i.idx")
    assert idx.manifest.charges() == [2, 3]
    for charge in (2, 3):
        pmz = np.concatenate([m.pmz for m in idx.manifest.partitions[charge]])
        assert np.all(np.diff(pmz) >= 0)
        assert len(pmz) == 300
    idx.close()


def test_blocks_reproduce_sort_oracle(tmp_path, im, pre_cfg):
    rng = np.random.default_rng(2)
    refs = make_refs(rng, 5000, charges=(1, 2, 3))
    build_index(refs, 256, im, pre_cfg, tmp_path / "i.idx")
    idx = LibraryIndex.open(tmp_path / "i.idx")
    for charge in (1, 2, 3):
        expected = sorted(
            ((r.precursor_mz, r.ref_id) for r in refs if r.charge == charge)
        )
        got = []
        for meta in idx.manifest.partitions[charge]:
            got.extend(zip(meta.pmz.tolist(), meta.ref_ids.tolist()))
        assert got == expected
    idx.close()


def test_empty_index(tmp_path, im, pre_cfg):
    build_index([], 128, im, pre_cfg, tmp_path / "i.idx")
    idx = LibraryIndex.open(tmp_path / "i.idx")
    assert idx.manifest.partitions == {}
    assert idx.select_blocks(2, 0.0, 1e9) == []
    idx.close()


def test_mixed_dim_is_build_error(tmp_path, im, pre_cfg):
    rng = np.random.default_rng(3)
    refs = make_refs(rng, 4)
    refs[2] = RefRecord(
        ref_id=2,
        title="bad",
        precursor_mz=500.0,
        charge=2,
        is_decoy=False,
        hv=Hypervector(np.zeros(8, dtype=np.uint64), 512),
    )
    with pytest.raises(IndexBuildError):
        build_index(refs, 128, im, pre_cfg, tmp_path / "i.idx")
    assert not (tmp_path / "i.idx").exists()
    assert list(tmp_path.iterdir()) == []  # no temp leftovers


def manifest_from_ranges(ranges):
    # Synthetic manifests for window logic, no payload behind them.
    from hdoms.index import BlockMeta

    manifest = IndexManifest(dim=DIM, max_r=4)
    metas = []
    for i, (lo, hi) in enumerate(ranges):
        metas.append(
            BlockMeta(
                charge=2,
                index=i,
                count=2,
                min_pmz=lo,
                max_pmz=hi,
                pmz=np.array([lo, hi]),
                ref_ids=np.array([2 * i, 2 * i + 1], dtype=np.uint32),
                decoys=np.zeros(2, dtype=bool),
                titles=["a", "b"],
            )
        )
    manifest.partitions[2] = metas
    return manifest


def test_select_blocks_between_ranges_is_empty():
    manifest = manifest_from_ranges([(100.0, 200.0), (300.0, 400.0)])
    assert select_blocks(manifest, 2, 210.0, 290.0) == []


def test_select_blocks_exact_range_boundary_inclusive():
    manifest = manifest_from_ranges([(100.0, 200.0), (300.0, 400.0)])
    assert select_blocks(manifest, 2, 300.0, 400.0) == [(2, 1)]
    assert select_blocks(manifest, 2, 200.0, 300.0) == [(2, 0), (2, 1)]


def test_select_blocks_unknown_charge_empty():
    manifest = manifest_from_ranges([(100.0, 200.0)])
    assert select_blocks(manifest, 5, 0.0, 1000.0) == []


def test_select_blocks_rejects_inverted_window():
    manifest = manifest_from_ranges([(100.0, 200.0)])
    with pytest.raises(ValueError):
        select_blocks(manifest, 2, 10.0, 5.0)


def test_select_blocks_matches_linear_scan(tmp_path, im, pre_cfg):
    rng = np.random.default_rng(4)
    refs = make_refs(rng, 3000, charges=(2, 3))
    build_index(refs, 64, im, pre_cfg, tmp_path / "i.idx")
    idx = LibraryIndex.open(tmp_path / "i.idx")
    for _ in range(1000):
        charge = int(rng.choice([2, 3, 4]))
        lo = float(rng.uniform(300, 1700))
        hi = lo + float(rng.uniform(0, 400))
        got = idx.select_blocks(charge, lo, hi)
        expected = [
            (charge, i)
            for i, meta in enumerate(idx.manifest.partitions.get(charge, []))
            if meta.min_pmz <= hi and meta.max_pmz >= lo
        ]
        assert got == expected
    idx.close()


def test_select_blocks_complete_for_references(tmp_path, im, pre_cfg):
    rng = np.random.default_rng(5)
    refs = make_refs(rng, 2000)
    build_index(refs, 128, im, pre_cfg, tmp_path / "i.idx")
    idx = LibraryIndex.open(tmp_path / "i.idx")
    for _ in range(200):
        lo = float(rng.uniform(300, 1700))
        hi = lo + float(rng.uniform(0, 300))
        keys = idx.select_blocks(2, lo, hi)
        covered = set()
        for key in keys:
            meta = idx.manifest.block_meta(key)
            covered.update(meta.ref_ids.tolist())
        for r in refs:
            if lo <= r.precursor_mz <= hi:
                assert r.ref_id in covered
    idx.close()


from helpers import LruOracle


def test_cache_second_get_is_hit():
    cache = BlockCache(budget_bytes=0)
    load = lambda: np.zeros((2, 4), dtype=np.uint64)
    cache.get((2, 0), load)
    assert (cache.hits, cache.misses) == (0, 1)
    cache.get((2, 0), load)
    assert (cache.hits, cache.misses) == (1, 1)


def test_cache_lru_aba_trace():
    size = 2 * 4 * 8
    cache = BlockCache(budget_bytes=size)  # exactly one block fits
    load = lambda: np.zeros((2, 4), dtype=np.uint64)
    for key in [(2, 0), (2, 1), (2, 0)]:
        cache.get(key, load)
    assert (cache.hits, cache.misses) == (0, 3)


def test_cache_block_larger_than_budget():
    cache = BlockCache(budget_bytes=8)
    with pytest.raises(CacheBudgetError):
        cache.get((2, 0), lambda: np.zeros((2, 4), dtype=np.uint64))


def test_cache_random_trace_matches_oracle():
    rng = np.random.default_rng(6)
    sizes = {(2, i): int(rng.integers(1, 5)) * 64 for i in range(12)}
    budget = 4 * 4 * 64  # roughly four mid-sized blocks
    cache = BlockCache(budget_bytes=budget)
    oracle = LruOracle(budget)
    for _ in range(500):
        key = (2, int(rng.integers(12)))
        nbytes = sizes[key]
        cache.get(key, lambda n=nbytes: np.zeros(n // 8, dtype=np.uint64))
        oracle.access(key, nbytes)
    assert (cache.hits, cache.misses) == (oracle.hits, oracle.misses)
    assert cache.resident_bytes <= budget


def file_hash(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_persistence_round_trip_bit_exact(tmp_path, pre_cfg):
    im = gen_item_memory(40, 8, dim=DIM, seed=12)
    rng = np.random.default_rng(7)
    refs = make_refs(rng, 360, charges=(1, 2, 3))
    path = tmp_path / "i.idx"
    build_index(refs, 30, im, pre_cfg, path)

    idx = LibraryIndex.open(path)
    # item memory embedded losslessly
    assert np.array_equal(idx.item_memory.id_vectors, im.id_vectors)
    assert np.array_equal(idx.item_memory.level_vectors, im.level_vectors)
    assert np.array_equal(idx.item_memory.tiebreak, im.tiebreak)
    assert idx.item_memory.seed == im.seed
    assert idx.item_memory.generator == im.generator
    assert idx.preprocess_config == pre_cfg

    # every payload word identical to the input records
    by_id = {r.ref_id: r for r in refs}
    seen = 0
    for key in idx.manifest.all_keys():
        block = idx.get_block(key)
        for j in range(block.count):
            r = by_id[int(block.ref_ids[j])]
            assert np.array_equal(block.words[j], r.hv.words)
            assert block.titles[j] == r.title
            assert bool(block.decoys[j]) == r.is_decoy
            assert block.pmz[j] == r.precursor_mz
            seen += 1
    assert seen == len(refs)
    idx.close()


def test_rebuild_is_byte_identical(tmp_path, im, pre_cfg):
    rng = np.random.default_rng(8)
    refs = make_refs(rng, 500, charges=(2, 3))
    build_index(refs, 64, im, pre_cfg, tmp_path / "a.idx")
    build_index(refs, 64, im, pre_cfg, tmp_path / "b.idx")
    assert file_hash(tmp_path / "a.idx") == file_hash(tmp_path / "b.idx")


def test_bad_magic_and_version(tmp_path, im, pre_cfg):
    path = tmp_path / "i.idx"
    build_index([], 16, im, pre_cfg, path)
    data = bytearray(path.read_bytes())
    bad = tmp_path / "bad.idx"
    bad.write_bytes(b"NOTANIDX" + bytes(data[8:]))
    with pytest.raises(IndexFormatError, match="magic"):
        LibraryIndex.open(bad)
    data[8] = 99  # version field
    worse = tmp_path / "worse.idx"
    worse.write_bytes(bytes(data))
    with pytest.raises(IndexFormatError, match="version 99"):
        LibraryIndex.open(worse)
