"""Binary hypervector encoding of quantized spectra.

Spectra are encoded by binding a random bin codebook (one ID vector per
m/z bin) with a gradient level codebook (one vector per intensity level)
via XOR, then bundling the bound vectors with a per-bit majority vote.
Vectors are packed into 64-bit words (bit i of the vector is bit i mod 64
of word i div 64) so Hamming distance reduces to XOR plus popcount.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .preprocess import QuantizedSpectrum

__all__ = [
    "EncodingError",
    "GENERATOR_NAME",
    "Hypervector",
    "ItemMemory",
    "encode_batch",
    "encode_spectrum",
    "gen_item_memory",
    "hamming",
    "level_flip_count",
    "similarity_matrix",
    "similarity_score",
]

WORD_BITS = 64

# Recorded in index headers so an index can be checked for provenance; the
# serialized item memory itself stays authoritative for search.
GENERATOR_NAME = "numpy-philox4x64/seedseq-v1"

# Seed-derivation namespaces for the per-vector random streams.
_ROLE_ID = 0
_ROLE_LEVEL_BASE = 1
_ROLE_LEVEL_PERM = 2
_ROLE_TIEBREAK = 3

_FULL_WORD = np.uint64(0xFFFFFFFFFFFFFFFF)


class EncodingError(ValueError):
    """An entry refers to a bin or level outside the item memory."""


@dataclass(frozen=True)
class Hypervector:
    """A dim-bit binary vector packed into uint64 words, little-endian
    bit order."""

    words: np.ndarray
    dim: int

    def __post_init__(self) -> None:
        if self.dim % WORD_BITS != 0:
            raise ValueError("dim must be a multiple of 64")
        if self.words.dtype != np.uint64 or self.words.shape != (
            self.dim // WORD_BITS,
        ):
            raise ValueError("words must be uint64 of length dim/64")

    @classmethod
    def zeros(cls, dim: int) -> "Hypervector":
        return cls(np.zeros(dim // WORD_BITS, dtype=np.uint64), dim)

    def to_bits(self) -> np.ndarray:
        """Unpacked 0/1 array of length dim."""
        return unpack_bits(self.words, self.dim)


def unpack_bits(words: np.ndarray, dim: int) -> np.ndarray:
    """Expand packed words to a uint8 0/1 array (vector bit order)."""
    return np.unpackbits(
        np.ascontiguousarray(words).view(np.uint8), bitorder="little"
    )[:dim]


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a 0/1 array whose length is a multiple of 64 into uint64 words."""
    return np.packbits(bits.astype(np.uint8), bitorder="little").view(np.uint64)


@dataclass(frozen=True)
class ItemMemory:
    """The random codebooks binding m/z bins and intensity levels.

    id_vectors holds one quasi-orthogonal random vector per m/z bin.
    level_vectors form a gradient: consecutive levels differ in exactly
    ``level_flip_count(dim, q)`` disjoint bit positions, so the Hamming
    distance between levels a and b is proportional to abs(a - b) and the
    extreme levels are roughly dim/2 apart. The tiebreak vector resolves
    exact majority ties for even bundle sizes.
    """

    seed: int
    dim: int
    id_vectors: np.ndarray
    level_vectors: np.ndarray
    tiebreak: np.ndarray
    generator: str = GENERATOR_NAME

    @property
    def num_bins(self) -> int:
        return self.id_vectors.shape[0]

    @property
    def num_levels(self) -> int:
        return self.level_vectors.shape[0]

    @property
    def num_words(self) -> int:
        return self.dim // WORD_BITS


def _raw_words(seed: int, role: int, index: int, num_words: int) -> np.ndarray:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(role, index))
    return np.random.Philox(ss).random_raw(num_words).astype(np.uint64)


def level_flip_count(dim: int, num_levels: int) -> int:
    """Bits flipped between consecutive level vectors:
    2 * floor(dim / (4 * (num_levels - 1)))."""
    if num_levels < 2:
        raise ValueError("num_levels must be at least 2")
    return 2 * (dim // (4 * (num_levels - 1)))


def gen_item_memory(
    num_bins: int, num_levels: int, dim: int = 4096, seed: int = 1
) -> ItemMemory:
    """Deterministically generate the ID and level codebooks.

    Every ID vector gets its own counter-based random stream derived from
    (seed, role, index), so regeneration from the same seed is bit exact.
    Level vectors start from a random base; each next level flips a fresh
    slice of a random position permutation, making the flipped positions
    disjoint across steps.

    Raises
    ------
    ValueError
        If dim is not a multiple of 64, or dim < 4 * (num_levels - 1) so
        the per-step flip count would be zero.
    """
    if dim % WORD_BITS != 0:
        raise ValueError("dim must be a multiple of 64")
    if num_bins < 1 or num_levels < 1:
        raise ValueError("num_bins and num_levels must be at least 1")
    num_words = dim // WORD_BITS
    id_vectors = np.empty((num_bins, num_words), dtype=np.uint64)
    for i in range(num_bins):
        id_vectors[i] = _raw_words(seed, _ROLE_ID, i, num_words)

    level_vectors = np.empty((num_levels, num_words), dtype=np.uint64)
    level_vectors[0] = _raw_words(seed, _ROLE_LEVEL_BASE, 0, num_words)
    if num_levels > 1:
        step = level_flip_count(dim, num_levels)
        if step == 0:
            raise ValueError(
                f"dim={dim} too small for {num_levels} levels: "
                "needs dim >= 4 * (num_levels - 1)"
            )
        perm_rng = np.random.Generator(
            np.random.Philox(
                np.random.SeedSequence(entropy=seed, spawn_key=(_ROLE_LEVEL_PERM, 0))
            )
        )
        positions = perm_rng.permutation(dim)
        for j in range(1, num_levels):
            flips = positions[(j - 1) * step : j * step]
            mask_bits = np.zeros(dim, dtype=np.uint8)
            mask_bits[flips] = 1
            level_vectors[j] = level_vectors[j - 1] ^ pack_bits(mask_bits)

    tiebreak = _raw_words(seed, _ROLE_TIEBREAK, 0, num_words)
    return ItemMemory(
        seed=seed,
        dim=dim,
        id_vectors=id_vectors,
        level_vectors=level_vectors,
        tiebreak=tiebreak,
    )


def _check_entries(qs: QuantizedSpectrum, im: ItemMemory) -> None:
    for k in range(len(qs)):
        b, lvl = int(qs.bins[k]), int(qs.levels[k])
        if not 0 <= b < im.num_bins:
            raise EncodingError(
                f"entry {k}: bin {b} outside [0, {im.num_bins})"
            )
        if not 0 <= lvl < im.num_levels:
            raise EncodingError(
                f"entry {k}: level {lvl} outside [0, {im.num_levels})"
            )


def encode_spectrum(qs: QuantizedSpectrum, im: ItemMemory) -> Hypervector:
    """Encode one quantized spectrum into a binary hypervector.

    Each entry binds its bin and level vectors with XOR; the output bit is
    the per-bit majority over all bound vectors. Exact ties (possible only
    for an even number of entries) take the item memory's tiebreak bit.
    An empty spectrum encodes to the all-zero vector.
    """
    _check_entries(qs, im)
    m = len(qs)
    if m == 0:
        return Hypervector.zeros(im.dim)
    bound = im.id_vectors[qs.bins] ^ im.level_vectors[qs.levels]
    counts = (
        np.unpackbits(bound.view(np.uint8).reshape(m, -1), axis=1, bitorder="little")
        .sum(axis=0, dtype=np.int64)
    )
    bits = (2 * counts > m).astype(np.uint8)
    if m % 2 == 0:
        ties = 2 * counts == m
        bits[ties] = unpack_bits(im.tiebreak, im.dim)[ties]
    return Hypervector(pack_bits(bits), im.dim)


def encode_batch(
    spectra: Sequence[QuantizedSpectrum], im: ItemMemory, chunk_size: int = 256
) -> np.ndarray:
    """Encode many spectra at once; returns an (n, dim/64) uint64 matrix.

    Equivalent to stacking :func:`encode_spectrum` over the input but
    computed with bit-parallel vertical counters: per-bit majority counts
    are carried in log2(m) word planes instead of unpacked bit arrays,
    which keeps the whole bundle in packed form.
    """
    for qs in spectra:
        _check_entries(qs, im)
    n = len(spectra)
    num_words = im.num_words
    out = np.zeros((n, num_words), dtype=np.uint64)
    for start in range(0, n, chunk_size):
        batch = spectra[start : start + chunk_size]
        sizes = np.array([len(qs) for qs in batch], dtype=np.int64)
        m_max = int(sizes.max()) if len(sizes) else 0
        if m_max == 0:
            continue
        c = len(batch)
        bound = np.zeros((c, m_max, num_words), dtype=np.uint64)
        for j, qs in enumerate(batch):
            if len(qs):
                bound[j, : len(qs)] = (
                    im.id_vectors[qs.bins] ^ im.level_vectors[qs.levels]
                )

        # Vertical counters: planes[k] holds bit k of the per-position
        # count of ones. Adding a vector is a ripple-carry add of one bit.
        num_planes = m_max.bit_length()
        planes = [np.zeros((c, num_words), dtype=np.uint64) for _ in range(num_planes)]
        for k in range(m_max):
            carry = bound[:, k, :]
            for plane in planes:
                lower = plane & carry
                plane ^= carry
                carry = lower

        # Majority: count > m // 2, bit-serial comparison from the top
        # plane down. eq tracks positions still equal to the threshold.
        threshold = sizes >> 1
        gt = np.zeros((c, num_words), dtype=np.uint64)
        eq = np.full((c, num_words), _FULL_WORD, dtype=np.uint64)
        for k in range(num_planes - 1, -1, -1):
            tk = np.where(((threshold >> k) & 1) == 1, _FULL_WORD, np.uint64(0))
            tk = tk[:, None]
            ck = planes[k]
            gt |= eq & ck & ~tk
            eq &= ~(ck ^ tk)
        even = np.where((sizes % 2 == 0) & (sizes > 0), _FULL_WORD, np.uint64(0))
        out[start : start + c] = gt | (eq & even[:, None] & im.tiebreak)
    return out


def hamming(a: Hypervector, b: Hypervector) -> int:
    """Number of differing bits, via word-wise XOR and popcount."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} != {b.dim}")
    return int(np.bitwise_count(a.words ^ b.words).sum())


def similarity_score(a: Hypervector, b: Hypervector) -> int:
    """dim - hamming(a, b): in [0, dim], identical vectors score dim."""
    return a.dim - hamming(a, b)


def similarity_matrix(
    query_words: np.ndarray, ref_words: np.ndarray, dim: int
) -> np.ndarray:
    """Pairwise similarity scores between packed row vectors.

    Returns an (n_queries, n_refs) int32 matrix where entry (i, j) is
    dim - popcount(query_i XOR ref_j).
    """
    n = query_words.shape[0]
    out = np.empty((n, ref_words.shape[0]), dtype=np.int32)
    for i in range(n):
        out[i] = dim - np.bitwise_count(ref_words ^ query_words[i]).sum(
            axis=1, dtype=np.int64
        )
    return out
