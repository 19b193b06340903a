"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with pytest -s to see them)."""

import hashlib
import time
from types import SimpleNamespace

import numpy as np
import pytest

from helpers import LruOracle

from hdoms.cli import main
from hdoms.encoder import (
    Hypervector,
    gen_item_memory,
    hamming,
    pack_bits,
    unpack_bits,
)
from hdoms.fdr import FdrConfig, filter_fdr
from hdoms.index import LibraryIndex, RefRecord, build_index
from hdoms.pipeline import encode_queries, encode_references
from hdoms.preprocess import PreprocessConfig
from hdoms.search import Psm, SearchConfig, search_all
from hdoms.synth import SynthConfig, generate_dataset

DIM = 4096


def check(criterion: int, ok: bool, detail: str) -> None:
    print(f"\n[criterion {criterion}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {criterion} failed: {detail}"


@pytest.fixture(scope="module")
def pre_cfg():
    return PreprocessConfig()


@pytest.fixture(scope="module")
def item_memory(pre_cfg):
    return gen_item_memory(pre_cfg.num_bins(), pre_cfg.num_levels, DIM, seed=7)


def build_setup(tmp_dir, pre_cfg, im, synth_cfg, max_r, name="lib.idx"):
    refs, queries, truth = generate_dataset(synth_cfg)
    records = encode_references(refs, pre_cfg, im)
    encoded = encode_queries(queries, pre_cfg, im)
    path = tmp_dir / name
    build_index(records, max_r, im, pre_cfg, path)
    return SimpleNamespace(
        refs=refs,
        records=records,
        queries=encoded,
        truth={t.query_id: t.ref_id for t in truth},
        path=path,
    )


@pytest.fixture(scope="module")
def setup_c2(tmp_path_factory, pre_cfg, item_memory):
    cfg = SynthConfig(
        n_refs=5000,
        n_queries=500,
        perturb_rate=0.10,
        dropout_rate=0.05,
        decoy_fraction=0.2,
        query_pmz_shift_da=30.0,
        seed=42,
    )
    return build_setup(
        tmp_path_factory.mktemp("c2"), pre_cfg, item_memory, cfg, max_r=512
    )


@pytest.fixture(scope="module")
def setup_self(tmp_path_factory, pre_cfg, item_memory):
    # identical query and reference spectra (no perturbation at all)
    cfg = SynthConfig(n_refs=1000, n_queries=1000, seed=2024)
    return build_setup(
        tmp_path_factory.mktemp("self"), pre_cfg, item_memory, cfg, max_r=256
    )


def brute_force_maps(queries, records, cfg, dim):
    """Exhaustive all-pairs oracle: same windows, same tie rule, no blocks."""
    by_charge = {}
    for r in records:
        by_charge.setdefault(r.charge, []).append(r)
    arrays = {}
    for charge, recs in by_charge.items():
        arrays[charge] = (
            np.stack([r.hv.words for r in recs]),
            np.array([r.precursor_mz for r in recs]),
            np.array([r.ref_id for r in recs]),
        )
    std, opn = {}, {}
    ppm_scale = cfg.tol_ppm * 1e-6
    for q in queries:
        if q.charge not in arrays:
            continue
        words, pmz, ref_ids = arrays[q.charge]
        scores = dim - np.bitwise_count(words ^ q.words).sum(axis=1, dtype=np.int64)
        diff = np.abs(q.precursor_mz - pmz)
        for mask, out in (
            (diff <= pmz * ppm_scale, std),
            (diff <= cfg.open_tol_da, opn),
        ):
            if mask.any():
                s = scores[mask]
                top = s.max()
                out[q.query_id] = (int(top), int(ref_ids[mask][s == top].min()))
    return std, opn


def test_criterion_1_kernel_exactness():
    rng = np.random.default_rng(100)
    pairs = []
    for _ in range(1000):
        a = pack_bits(rng.integers(0, 2, size=DIM).astype(np.uint8))
        b = pack_bits(rng.integers(0, 2, size=DIM).astype(np.uint8))
        pairs.append((Hypervector(a, DIM), Hypervector(b, DIM)))
    t0 = time.perf_counter()
    packed = [hamming(a, b) for a, b in pairs]
    elapsed = time.perf_counter() - t0
    mismatches = 0
    for (a, b), got in zip(pairs, packed):
        expected = int(
            (unpack_bits(a.words, DIM) != unpack_bits(b.words, DIM)).sum()
        )
        mismatches += got != expected
    check(
        1,
        mismatches == 0 and elapsed < 1.0,
        f"1000 pairs, {mismatches} mismatches, packed kernel {elapsed:.3f}s",
    )


def test_criterion_2_pruning_exactness(setup_c2):
    cfg = SearchConfig()
    with LibraryIndex.open(setup_c2.path) as index:
        std, opn, _ = search_all(setup_c2.queries, index, cfg)
    got_std = {p.query_id: (p.score, p.ref_id) for p in std}
    got_open = {p.query_id: (p.score, p.ref_id) for p in opn}
    exp_std, exp_open = brute_force_maps(
        setup_c2.queries, setup_c2.records, cfg, DIM
    )
    ok = got_std == exp_std and got_open == exp_open
    check(
        2,
        ok,
        f"{len(setup_c2.queries)} queries vs {len(setup_c2.records)} refs: "
        f"standard {len(got_std)} and open {len(got_open)} PSMs match the "
        "exhaustive oracle",
    )


def test_criterion_3_self_identification(setup_self):
    with LibraryIndex.open(setup_self.path) as index:
        std, _, _ = search_all(setup_self.queries, index, SearchConfig())
    by_query = {p.query_id: p for p in std}
    exact = sum(
        1
        for qid, src in setup_self.truth.items()
        if qid in by_query
        and by_query[qid].ref_id == src
        and by_query[qid].score == DIM
    )
    check(
        3,
        exact == len(setup_self.truth),
        f"{exact}/{len(setup_self.truth)} queries match their own reference "
        f"at score {DIM}",
    )


def test_criterion_4_robust_identification(tmp_path_factory, pre_cfg, item_memory):
    cfg = SynthConfig(
        n_refs=1000,
        n_queries=1000,
        perturb_rate=0.10,
        dropout_rate=0.05,
        query_pmz_shift_da=40.0,
        seed=77,
    )
    setup = build_setup(
        tmp_path_factory.mktemp("robust"), pre_cfg, item_memory, cfg, max_r=256
    )
    with LibraryIndex.open(setup.path) as index:
        _, opn, _ = search_all(setup.queries, index, SearchConfig())
    top1 = sum(1 for p in opn if setup.truth[p.query_id] == p.ref_id)
    rate = top1 / len(setup.truth)
    check(4, rate >= 0.90, f"open-mode top-1 self-identification {rate:.1%}")


def test_criterion_5_fdr_correctness():
    rng = np.random.default_rng(55)
    psms = []
    for i in range(10_000):
        decoy = bool(rng.random() < 0.15)
        mean = 2000 if decoy else 2700
        psms.append(
            Psm(
                query_id=i,
                ref_id=i,
                score=int(rng.normal(mean, 350)),
                mode="open",
                mass_diff=0.0,
                is_decoy=decoy,
            )
        )
    cfg = FdrConfig(threshold=0.01)
    result = filter_fdr(psms, cfg)

    # independent reference implementation
    ranked = sorted(psms, key=lambda p: (-p.score, not p.is_decoy))
    decoys = targets = best = 0
    for i, p in enumerate(ranked):
        decoys += p.is_decoy
        targets += not p.is_decoy
        if decoys / max(targets, 1) <= cfg.threshold:
            best = i + 1
    expected = [(p.query_id, p.score) for p in ranked[:best] if not p.is_decoy]
    got = [(p.query_id, p.score) for p in result.accepted]

    # maximality: every longer prefix violates the threshold
    decoys = sum(p.is_decoy for p in ranked[:best])
    targets = best - decoys
    maximal = True
    for p in ranked[best:]:
        decoys += p.is_decoy
        targets += not p.is_decoy
        if decoys / max(targets, 1) <= cfg.threshold:
            maximal = False
            break
    ok = got == expected and result.fdr <= 0.01 and maximal
    check(
        5,
        ok,
        f"accepted {len(got)} of 10000 (oracle {len(expected)}), "
        f"achieved fdr {result.fdr:.4f}, maximality {maximal}",
    )


def test_criterion_6_efficiency_monotonicity(tmp_path_factory, pre_cfg, item_memory):
    cfg = SynthConfig(
        n_refs=5000,
        n_queries=1000,
        charges=(2,),
        pmz_min=400.0,
        pmz_max=1600.0,
        seed=66,
    )
    setup = build_setup(
        tmp_path_factory.mktemp("mono"), pre_cfg, item_memory, cfg, max_r=32
    )
    counts = {}
    with LibraryIndex.open(setup.path) as index:
        for tol in (20.0, 50.0, 75.0, 150.0):
            _, _, stats = search_all(
                setup.queries, index, SearchConfig(open_tol_da=tol)
            )
            counts[tol] = stats.comparisons
    ordered = [counts[t] for t in (20.0, 50.0, 75.0, 150.0)]
    monotone = all(a <= b for a, b in zip(ordered, ordered[1:]))
    ratio = counts[75.0] / counts[150.0]
    check(
        6,
        monotone and ratio <= 0.60,
        f"comparisons {ordered} at 20/50/75/150 Da, 75/150 ratio {ratio:.3f}",
    )


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_criterion_7_determinism(tmp_path_factory):
    base = tmp_path_factory.mktemp("det")
    data = base / "data"
    argv = [
        "synth", str(data), "--n-refs", "500", "--n-queries", "100",
        "--perturb-rate", "0.1", "--decoy-fraction", "0.2",
        "--query-pmz-shift-da", "30", "--seed", "13",
    ]
    assert main(argv) == 0

    hashes = []
    for run in ("one", "two"):
        index = base / f"{run}.idx"
        assert main(["index", str(data / "library.mgf"), str(index),
                     "--seed", "3", "--max-r", "128"]) == 0
        psms = {}
        for workers in (1, 8):
            out = base / f"{run}.w{workers}.tsv"
            assert main(["search", str(data / "queries.mgf"), str(index),
                         str(out), "--workers", str(workers)]) == 0
            psms[workers] = sha(out)
        assert psms[1] == psms[8], "worker count changed PSM bytes"
        hashes.append((sha(index), psms[1]))
    check(
        7,
        hashes[0] == hashes[1],
        f"workers 1 vs 8 identical; rerun index {hashes[0][0][:12]} and "
        f"psm {hashes[0][1][:12]} hashes reproduced",
    )


def test_criterion_8_persistence_round_trip(tmp_path_factory, pre_cfg):
    im = gen_item_memory(64, 8, dim=DIM, seed=8)
    rng = np.random.default_rng(88)
    refs = []
    for i in range(120):
        bits = rng.integers(0, 2, size=DIM).astype(np.uint8)
        refs.append(
            RefRecord(
                ref_id=i,
                title=f"R{i}",
                precursor_mz=float(rng.uniform(400, 1600)),
                charge=1 + i % 3,
                is_decoy=False,
                hv=Hypervector(pack_bits(bits), DIM),
            )
        )
    base = tmp_path_factory.mktemp("persist")
    path = base / "lib.idx"
    blocks = build_index(refs, 10, im, pre_cfg, path)
    assert blocks == {1: 4, 2: 4, 3: 4}

    by_id = {r.ref_id: r for r in refs}
    with LibraryIndex.open(path) as index:
        keys = index.manifest.all_keys()
        payload_ok = True
        for key in keys:
            block = index.get_block(key)
            for j in range(block.count):
                original = by_id[int(block.ref_ids[j])].hv.words
                if (
                    hashlib.sha256(block.words[j].tobytes()).digest()
                    != hashlib.sha256(original.tobytes()).digest()
                ):
                    payload_ok = False
    rebuilt = base / "again.idx"
    build_index(refs, 10, im, pre_cfg, rebuilt)
    ok = payload_ok and len(keys) == 12 and sha(path) == sha(rebuilt)
    check(
        8,
        ok,
        f"3 charges x 4 blocks, every payload hash equal, file hash "
        f"{sha(path)[:12]} stable",
    )


def test_criterion_9_throughput_smoke(tmp_path_factory):
    base = tmp_path_factory.mktemp("throughput")
    data = base / "data"
    t0 = time.perf_counter()
    assert main([
        "synth", str(data), "--n-refs", "50000", "--n-queries", "2000",
        "--charges", "2", "--pmz-min", "400", "--pmz-max", "1600",
        "--perturb-rate", "0.1", "--query-pmz-shift-da", "30", "--seed", "99",
    ]) == 0
    index = base / "lib.idx"
    assert main(["index", str(data / "library.mgf"), str(index),
                 "--max-r", "1024"]) == 0
    stats_path = base / "stats.json"
    assert main(["search", str(data / "queries.mgf"), str(index),
                 str(base / "out.tsv"), "--workers", "4",
                 "--stats-json", str(stats_path)]) == 0
    elapsed = time.perf_counter() - t0
    import json

    comparisons = json.loads(stats_path.read_text())["comparisons"]
    budget = 0.20 * 50_000 * 2_000
    check(
        9,
        elapsed < 60.0 and comparisons < budget,
        f"end-to-end {elapsed:.1f}s, comparisons {comparisons} "
        f"({comparisons / (50_000 * 2_000):.1%} of all pairs)",
    )


def test_criterion_10_cache_transparency(setup_c2):
    block_bytes = 512 * DIM // 8
    outputs = []
    counter_checks = []
    for budget in (block_bytes, 4 * block_bytes, 0):
        index = LibraryIndex.open(
            setup_c2.path, cache_budget_bytes=budget, record_trace=True
        )
        std, opn, _ = search_all(setup_c2.queries, index, SearchConfig(), workers=1)
        outputs.append(
            (
                [(p.query_id, p.ref_id, p.score) for p in std],
                [(p.query_id, p.ref_id, p.score) for p in opn],
            )
        )
        oracle = LruOracle(budget)
        for key in index.cache.trace:
            meta = index.manifest.block_meta(key)
            oracle.access(key, meta.payload_bytes(DIM))
        counter_checks.append(
            (index.cache.hits, index.cache.misses)
            == (oracle.hits, oracle.misses)
        )
        index.close()
    ok = outputs[0] == outputs[1] == outputs[2] and all(counter_checks)
    check(
        10,
        ok,
        f"identical PSMs at budgets {{1 block, 4 blocks, unlimited}}; "
        f"LRU counters match oracle in all runs: {counter_checks}",
    )
