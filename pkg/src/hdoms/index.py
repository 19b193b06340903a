"""Charge-partitioned, precursor-sorted block index for encoded reference
libraries.

References are grouped by charge state, sorted by precursor m/z and packed
into fixed-count blocks. Block metadata (precursor ranges, ids, titles) is
small and stays in memory; the hypervector payloads are loaded on demand
through a byte-budgeted LRU cache, so libraries larger than memory can be
searched by streaming blocks from disk.

Index file layout (little-endian throughout)::

    magic "RAPIDOMS" (8 bytes) | version u32 | dim u32 | max_r u32
    preprocess snapshot: u32 length + UTF-8 key=value text
    item memory: u32 num_bins | u32 num_levels | u32 dim | u64 seed
                 | u32 length + UTF-8 generator name
                 | id vector words | level vector words | tiebreak words
    u32 partition count
    per partition: u8 charge | u32 block count | blocks...
    per block: u32 count | f64 min_pmz | f64 max_pmz
               | f64 pmz[count] | u32 ref_id[count] | u8 decoy[count]
               | count x (u32 length + UTF-8 title)
               | packed hypervectors (count * dim/8 bytes)
"""

from __future__ import annotations

import logging
import os
import struct
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .encoder import Hypervector, ItemMemory, WORD_BITS
from .preprocess import PreprocessConfig

__all__ = [
    "Block",
    "BlockCache",
    "BlockMeta",
    "CacheBudgetError",
    "IndexBuildError",
    "IndexFormatError",
    "IndexManifest",
    "LibraryIndex",
    "RefRecord",
    "build_index",
    "select_blocks",
]

logger = logging.getLogger(__name__)

MAGIC = b"RAPIDOMS"
FORMAT_VERSION = 1

BlockKey = tuple[int, int]  # (charge, block position within the partition)


class IndexFormatError(ValueError):
    """The file is not a readable index of the supported version."""


class IndexBuildError(ValueError):
    """The reference set cannot form a consistent index."""


class CacheBudgetError(ValueError):
    """A single block exceeds the configured cache budget."""


@dataclass
class RefRecord:
    """One encoded reference spectrum to be placed in the index."""

    ref_id: int
    title: str
    precursor_mz: float
    charge: int
    is_decoy: bool
    hv: Hypervector


@dataclass
class BlockMeta:
    """In-memory metadata of one block; the payload stays on disk."""

    charge: int
    index: int
    count: int
    min_pmz: float
    max_pmz: float
    pmz: np.ndarray
    ref_ids: np.ndarray
    decoys: np.ndarray
    titles: list[str]
    payload_offset: int = 0

    def payload_bytes(self, dim: int) -> int:
        return self.count * (dim // 8)


@dataclass
class Block:
    """One resident block: metadata plus its packed hypervector payload."""

    charge: int
    index: int
    count: int
    min_pmz: float
    max_pmz: float
    pmz: np.ndarray
    ref_ids: np.ndarray
    decoys: np.ndarray
    titles: list[str]
    words: np.ndarray  # (count, dim/64) uint64


@dataclass
class IndexManifest:
    """All block metadata for one index, keyed by charge."""

    dim: int
    max_r: int
    partitions: dict[int, list[BlockMeta]] = field(default_factory=dict)

    def charges(self) -> list[int]:
        return sorted(self.partitions)

    def block_meta(self, key: BlockKey) -> BlockMeta:
        charge, idx = key
        return self.partitions[charge][idx]

    def all_keys(self) -> list[BlockKey]:
        return [
            (charge, i)
            for charge in self.charges()
            for i in range(len(self.partitions[charge]))
        ]


def select_blocks(
    manifest: IndexManifest, charge: int, pmz_lo: float, pmz_hi: float
) -> list[BlockKey]:
    """Keys of the blocks of a charge whose precursor range intersects
    [pmz_lo, pmz_hi], in ascending min_pmz order.

    Blocks within a partition are sorted and non-overlapping except at
    shared boundary values, so the first candidate is found by binary
    search on max_pmz and the scan stops at the first block starting
    beyond the window. An unknown charge yields the empty list.
    """
    if pmz_lo > pmz_hi:
        raise ValueError("pmz_lo must not exceed pmz_hi")
    blocks = manifest.partitions.get(charge)
    if not blocks:
        return []
    lo, hi = 0, len(blocks)
    while lo < hi:
        mid = (lo + hi) // 2
        if blocks[mid].max_pmz < pmz_lo:
            lo = mid + 1
        else:
            hi = mid
    keys: list[BlockKey] = []
    for i in range(lo, len(blocks)):
        if blocks[i].min_pmz > pmz_hi:
            break
        keys.append((charge, i))
    return keys


class BlockCache:
    """Byte-budgeted LRU cache of block payloads.

    budget_bytes counts payload bytes only; 0 means unlimited. Loads and
    evictions run under a lock so concurrent searchers see consistent
    hit/miss counters. When record_trace is set, every access key is
    appended to .trace (for replaying against an external LRU model).
    """

    def __init__(self, budget_bytes: int = 0, record_trace: bool = False) -> None:
        self.budget_bytes = budget_bytes
        self.hits = 0
        self.misses = 0
        self.trace: list[BlockKey] = []
        self._record_trace = record_trace
        self._resident: OrderedDict[BlockKey, np.ndarray] = OrderedDict()
        self._resident_bytes = 0
        self._lock = threading.Lock()

    def get(
        self, key: BlockKey, loader: Callable[[], np.ndarray]
    ) -> np.ndarray:
        with self._lock:
            if self._record_trace:
                self.trace.append(key)
            cached = self._resident.get(key)
            if cached is not None:
                self.hits += 1
                self._resident.move_to_end(key)
                return cached
            self.misses += 1
            words = loader()
            size = words.nbytes
            if self.budget_bytes:
                if size > self.budget_bytes:
                    raise CacheBudgetError(
                        f"block {key} needs {size} bytes but the cache "
                        f"budget is {self.budget_bytes}"
                    )
                # Evict before inserting so residency never exceeds the
                # budget, even transiently.
                while self._resident_bytes + size > self.budget_bytes:
                    _, evicted = self._resident.popitem(last=False)
                    self._resident_bytes -= evicted.nbytes
            self._resident[key] = words
            self._resident_bytes += size
            return words

    @property
    def resident_bytes(self) -> int:
        return self._resident_bytes

    def __len__(self) -> int:
        return len(self._resident)


def _chunked(seq: list, size: int) -> Iterable[list]:
    for i in range(0, len(seq), size):
        yield seq[i : i + size]


def _write_item_memory(fh, im: ItemMemory) -> None:
    name = im.generator.encode("utf-8")
    fh.write(
        struct.pack(
            "<IIIQI", im.num_bins, im.num_levels, im.dim, im.seed, len(name)
        )
    )
    fh.write(name)
    fh.write(im.id_vectors.astype("<u8", copy=False).tobytes())
    fh.write(im.level_vectors.astype("<u8", copy=False).tobytes())
    fh.write(im.tiebreak.astype("<u8", copy=False).tobytes())


def _read_item_memory(fh) -> ItemMemory:
    num_bins, num_levels, dim, seed, name_len = struct.unpack(
        "<IIIQI", fh.read(24)
    )
    generator = fh.read(name_len).decode("utf-8")
    num_words = dim // WORD_BITS
    id_vectors = np.frombuffer(
        fh.read(num_bins * num_words * 8), dtype="<u8"
    ).reshape(num_bins, num_words).astype(np.uint64)
    level_vectors = np.frombuffer(
        fh.read(num_levels * num_words * 8), dtype="<u8"
    ).reshape(num_levels, num_words).astype(np.uint64)
    tiebreak = np.frombuffer(fh.read(num_words * 8), dtype="<u8").astype(
        np.uint64
    )
    return ItemMemory(
        seed=seed,
        dim=dim,
        id_vectors=id_vectors,
        level_vectors=level_vectors,
        tiebreak=tiebreak,
        generator=generator,
    )


def build_index(
    refs: list[RefRecord],
    max_r: int,
    item_memory: ItemMemory,
    preprocess_config: PreprocessConfig,
    path: str | Path,
) -> dict[int, int]:
    """Build and persist the block index for a set of encoded references.

    Records are grouped by charge, sorted by (precursor_mz, ref_id) within
    each charge and chunked into consecutive blocks of max_r records (the
    last block of a partition may be smaller). The item memory and the
    preprocessing configuration are embedded so searches always encode
    queries exactly like the references. The write is atomic (temp file
    plus rename) and byte-identical for identical inputs.

    Returns the number of blocks written per charge.

    Raises
    ------
    IndexBuildError
        If records disagree on the hypervector dimension.
    """
    if max_r < 1:
        raise IndexBuildError("max_r must be at least 1")
    dim = item_memory.dim
    for r in refs:
        if r.hv.dim != dim:
            raise IndexBuildError(
                f"reference {r.ref_id} has dim {r.hv.dim}, expected {dim}"
            )

    by_charge: dict[int, list[RefRecord]] = {}
    for r in refs:
        by_charge.setdefault(r.charge, []).append(r)
    for records in by_charge.values():
        records.sort(key=lambda r: (r.precursor_mz, r.ref_id))

    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    snapshot = preprocess_config.to_snapshot().encode("utf-8")
    blocks_per_charge: dict[int, int] = {}
    try:
        with open(tmp, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<III", FORMAT_VERSION, dim, max_r))
            fh.write(struct.pack("<I", len(snapshot)))
            fh.write(snapshot)
            _write_item_memory(fh, item_memory)
            fh.write(struct.pack("<I", len(by_charge)))
            for charge in sorted(by_charge):
                records = by_charge[charge]
                chunks = list(_chunked(records, max_r))
                blocks_per_charge[charge] = len(chunks)
                fh.write(struct.pack("<BI", charge, len(chunks)))
                for chunk in chunks:
                    pmz = np.array(
                        [r.precursor_mz for r in chunk], dtype="<f8"
                    )
                    ref_ids = np.array([r.ref_id for r in chunk], dtype="<u4")
                    decoys = np.array(
                        [1 if r.is_decoy else 0 for r in chunk], dtype="<u1"
                    )
                    fh.write(
                        struct.pack(
                            "<Idd", len(chunk), float(pmz[0]), float(pmz[-1])
                        )
                    )
                    fh.write(pmz.tobytes())
                    fh.write(ref_ids.tobytes())
                    fh.write(decoys.tobytes())
                    for r in chunk:
                        encoded = r.title.encode("utf-8")
                        fh.write(struct.pack("<I", len(encoded)))
                        fh.write(encoded)
                    payload = np.vstack([r.hv.words for r in chunk])
                    fh.write(payload.astype("<u8", copy=False).tobytes())
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise
    logger.info(
        "wrote index %s: %d references, %d charges",
        path,
        len(refs),
        len(by_charge),
    )
    return blocks_per_charge


class LibraryIndex:
    """Read side of a persisted index: manifest in memory, payloads cached.

    Thread safe: block loads go through the internal :class:`BlockCache`
    and use positioned reads, so concurrent searchers may share one
    instance.
    """

    def __init__(
        self,
        path: str | Path,
        manifest: IndexManifest,
        item_memory: ItemMemory,
        preprocess_config: PreprocessConfig,
        cache: BlockCache,
    ) -> None:
        self.path = Path(path)
        self.manifest = manifest
        self.item_memory = item_memory
        self.preprocess_config = preprocess_config
        self.cache = cache
        self._fh = open(self.path, "rb")

    @classmethod
    def open(
        cls,
        path: str | Path,
        cache_budget_bytes: int = 0,
        record_trace: bool = False,
    ) -> "LibraryIndex":
        """Open an index file, loading all metadata but no payloads."""
        path = Path(path)
        with open(path, "rb") as fh:
            magic = fh.read(8)
            if magic != MAGIC:
                raise IndexFormatError(
                    f"{path}: bad magic {magic!r}, expected {MAGIC!r}"
                )
            version, dim, max_r = struct.unpack("<III", fh.read(12))
            if version != FORMAT_VERSION:
                raise IndexFormatError(
                    f"{path}: format version {version}, "
                    f"this build reads version {FORMAT_VERSION}"
                )
            (snapshot_len,) = struct.unpack("<I", fh.read(4))
            snapshot = fh.read(snapshot_len).decode("utf-8")
            preprocess_config = PreprocessConfig.from_snapshot(snapshot)
            item_memory = _read_item_memory(fh)
            if item_memory.dim != dim:
                raise IndexFormatError(
                    f"{path}: header dim {dim} != item memory dim "
                    f"{item_memory.dim}"
                )
            manifest = IndexManifest(dim=dim, max_r=max_r)
            (n_partitions,) = struct.unpack("<I", fh.read(4))
            payload_row = dim // 8
            for _ in range(n_partitions):
                charge, n_blocks = struct.unpack("<BI", fh.read(5))
                metas: list[BlockMeta] = []
                for block_idx in range(n_blocks):
                    count, min_pmz, max_pmz = struct.unpack(
                        "<Idd", fh.read(20)
                    )
                    pmz = np.frombuffer(fh.read(count * 8), dtype="<f8").astype(
                        np.float64
                    )
                    ref_ids = np.frombuffer(
                        fh.read(count * 4), dtype="<u4"
                    ).astype(np.uint32)
                    decoys = (
                        np.frombuffer(fh.read(count), dtype="<u1") != 0
                    )
                    titles = []
                    for _ in range(count):
                        (title_len,) = struct.unpack("<I", fh.read(4))
                        titles.append(fh.read(title_len).decode("utf-8"))
                    payload_offset = fh.tell()
                    fh.seek(count * payload_row, os.SEEK_CUR)
                    metas.append(
                        BlockMeta(
                            charge=charge,
                            index=block_idx,
                            count=count,
                            min_pmz=min_pmz,
                            max_pmz=max_pmz,
                            pmz=pmz,
                            ref_ids=ref_ids,
                            decoys=decoys,
                            titles=titles,
                            payload_offset=payload_offset,
                        )
                    )
                manifest.partitions[charge] = metas
        cache = BlockCache(cache_budget_bytes, record_trace=record_trace)
        return cls(path, manifest, item_memory, preprocess_config, cache)

    @property
    def dim(self) -> int:
        return self.manifest.dim

    @property
    def max_r(self) -> int:
        return self.manifest.max_r

    def num_references(self) -> int:
        return sum(
            meta.count
            for metas in self.manifest.partitions.values()
            for meta in metas
        )

    def select_blocks(
        self, charge: int, pmz_lo: float, pmz_hi: float
    ) -> list[BlockKey]:
        return select_blocks(self.manifest, charge, pmz_lo, pmz_hi)

    def _load_payload(self, meta: BlockMeta) -> np.ndarray:
        nbytes = meta.payload_bytes(self.dim)
        data = os.pread(self._fh.fileno(), nbytes, meta.payload_offset)
        if len(data) != nbytes:
            raise IOError(
                f"short read of block ({meta.charge}, {meta.index}) "
                f"at offset {meta.payload_offset}"
            )
        return (
            np.frombuffer(data, dtype="<u8")
            .reshape(meta.count, self.dim // WORD_BITS)
            .astype(np.uint64)
        )

    def get_block(self, key: BlockKey) -> Block:
        """Return the block for a manifest key, loading its payload through
        the LRU cache on a miss."""
        meta = self.manifest.block_meta(key)
        words = self.cache.get(key, lambda: self._load_payload(meta))
        return Block(
            charge=meta.charge,
            index=meta.index,
            count=meta.count,
            min_pmz=meta.min_pmz,
            max_pmz=meta.max_pmz,
            pmz=meta.pmz,
            ref_ids=meta.ref_ids,
            decoys=meta.decoys,
            titles=meta.titles,
            words=words,
        )

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "LibraryIndex":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
