"""The open modification search kernel.

Queries are sorted by (charge, precursor m/z), batched into fixed-size
groups and scored against every reference block whose precursor range
intersects the group's open-search window. Scores are packed Hamming
similarities; per query a running maximum is kept separately for the
standard (narrow ppm) and open (wide Dalton) precursor windows.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .encoder import similarity_matrix
from .index import Block, LibraryIndex

__all__ = [
    "EncodedQuery",
    "MODE_OPEN",
    "MODE_STANDARD",
    "Psm",
    "SearchConfig",
    "SearchStats",
    "in_open_window",
    "in_standard_window",
    "score_group",
    "search_all",
]

MODE_STANDARD = "standard"
MODE_OPEN = "open"


@dataclass(frozen=True)
class SearchConfig:
    """Search parameters.

    tol_ppm bounds the standard-search precursor window (relative to the
    reference precursor); open_tol_da is the open-search half-window in
    Dalton. q_block queries are scored together against each candidate
    block and max_q bounds the queries staged per run segment.
    """

    tol_ppm: float = 20.0
    open_tol_da: float = 75.0
    q_block: int = 16
    max_q: int = 2048
    count_comparisons: bool = True

    def __post_init__(self) -> None:
        if self.tol_ppm <= 0:
            raise ValueError("tol_ppm must be positive")
        if self.open_tol_da <= 0:
            raise ValueError("open_tol_da must be positive")
        if self.q_block < 1:
            raise ValueError("q_block must be at least 1")
        if self.max_q < self.q_block:
            raise ValueError("max_q must be at least q_block")


@dataclass
class Psm:
    """Best match of one query in one search mode."""

    query_id: int
    ref_id: int
    score: int
    mode: str
    mass_diff: float
    is_decoy: bool
    query_title: str = ""
    ref_title: str = ""


@dataclass
class SearchStats:
    """Counters for one search run; comparisons is exact, not sampled."""

    comparisons: int = 0
    blocks_scored: int = 0
    cache_hits: int = 0
    cache_misses: int = 0
    times: dict[str, float] = field(default_factory=dict)

    def as_key_values(self) -> str:
        lines = [
            f"comparisons={self.comparisons}",
            f"blocks_scored={self.blocks_scored}",
            f"cache_hits={self.cache_hits}",
            f"cache_misses={self.cache_misses}",
        ]
        lines.extend(
            f"time_{phase}={seconds:.6f}"
            for phase, seconds in sorted(self.times.items())
        )
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "comparisons": self.comparisons,
            "blocks_scored": self.blocks_scored,
            "cache_hits": self.cache_hits,
            "cache_misses": self.cache_misses,
            "times": dict(self.times),
        }


@dataclass(frozen=True)
class EncodedQuery:
    """A query spectrum after preprocessing and hypervector encoding."""

    query_id: int
    title: str
    precursor_mz: float
    charge: int
    words: np.ndarray


def in_standard_window(q_pmz: float, r_pmz: float, tol_ppm: float) -> bool:
    """True iff the precursor difference normalized by the reference
    precursor is within tol_ppm (inclusive)."""
    return abs(q_pmz - r_pmz) / r_pmz * 1e6 <= tol_ppm


def in_open_window(q_pmz: float, r_pmz: float, open_tol_da: float) -> bool:
    """True iff the absolute precursor difference is within open_tol_da
    Dalton (inclusive)."""
    return abs(q_pmz - r_pmz) <= open_tol_da


def score_group(
    query_words: np.ndarray,
    block: Block,
    dim: int,
    stats: SearchStats | None = None,
    count_comparisons: bool = True,
) -> np.ndarray:
    """Similarity scores of a query group against one block.

    Returns a (group, block count) matrix; when counting is enabled the
    comparisons counter grows by group * count regardless of how many
    pairs later pass a precursor window, matching the work the kernel
    actually performs.
    """
    matrix = similarity_matrix(query_words, block.words, dim)
    if stats is not None:
        stats.blocks_scored += 1
        if count_comparisons:
            stats.comparisons += matrix.shape[0] * matrix.shape[1]
    return matrix


class _Best:
    """Running maximum for one query and mode; ties prefer the smaller
    reference id, so results are independent of block visit order."""

    __slots__ = ("score", "ref_id", "ref_pmz", "is_decoy", "ref_title")

    def __init__(self) -> None:
        self.score = -1
        self.ref_id = -1

    def consider(
        self, score: int, ref_id: int, ref_pmz: float, is_decoy: bool,
        ref_title: str,
    ) -> None:
        if score > self.score or (score == self.score and ref_id < self.ref_id):
            self.score = score
            self.ref_id = ref_id
            self.ref_pmz = ref_pmz
            self.is_decoy = is_decoy
            self.ref_title = ref_title


def _best_in_row(
    row: np.ndarray, mask: np.ndarray, block: Block
) -> tuple[int, int, int] | None:
    """(score, ref_id, position) of the best masked entry, smaller ref_id
    winning ties; None if the mask is empty."""
    candidates = np.flatnonzero(mask)
    if candidates.size == 0:
        return None
    scores = row[candidates]
    top = scores.max()
    tied = candidates[scores == top]
    pos = tied[np.argmin(block.ref_ids[tied])]
    return int(top), int(block.ref_ids[pos]), int(pos)


def _make_groups(
    queries: list[EncodedQuery], cfg: SearchConfig
) -> list[list[int]]:
    """Group query indices: sort by (charge, pmz, id), split runs by
    charge, stage max_q per segment, then chunk into q_block batches."""
    order = sorted(
        range(len(queries)),
        key=lambda i: (
            queries[i].charge,
            queries[i].precursor_mz,
            queries[i].query_id,
        ),
    )
    groups: list[list[int]] = []
    run_start = 0
    for i in range(1, len(order) + 1):
        if i == len(order) or queries[order[i]].charge != queries[order[run_start]].charge:
            run = order[run_start:i]
            for seg_start in range(0, len(run), cfg.max_q):
                segment = run[seg_start : seg_start + cfg.max_q]
                for j in range(0, len(segment), cfg.q_block):
                    groups.append(segment[j : j + cfg.q_block])
            run_start = i
    return groups


def _process_group(
    group: list[int],
    queries: list[EncodedQuery],
    index: LibraryIndex,
    cfg: SearchConfig,
) -> tuple[list[Psm], list[Psm], int, int]:
    members = [queries[i] for i in group]
    charge = members[0].charge
    pmzs = np.array([q.precursor_mz for q in members])
    query_words = np.stack([q.words for q in members])
    best_std = [_Best() for _ in members]
    best_open = [_Best() for _ in members]
    local = SearchStats()
    ppm_scale = cfg.tol_ppm * 1e-6
    keys = index.select_blocks(
        charge, float(pmzs.min()) - cfg.open_tol_da,
        float(pmzs.max()) + cfg.open_tol_da,
    )
    for key in keys:
        block = index.get_block(key)
        matrix = score_group(
            query_words, block, index.dim, stats=local,
            count_comparisons=cfg.count_comparisons,
        )
        for i in range(len(members)):
            abs_diff = np.abs(pmzs[i] - block.pmz)
            open_mask = abs_diff <= cfg.open_tol_da
            if not open_mask.any():
                continue
            row = matrix[i]
            found = _best_in_row(row, open_mask, block)
            if found is not None:
                score, ref_id, pos = found
                best_open[i].consider(
                    score, ref_id, float(block.pmz[pos]),
                    bool(block.decoys[pos]), block.titles[pos],
                )
            std_mask = abs_diff <= block.pmz * ppm_scale
            found = _best_in_row(row, std_mask, block)
            if found is not None:
                score, ref_id, pos = found
                best_std[i].consider(
                    score, ref_id, float(block.pmz[pos]),
                    bool(block.decoys[pos]), block.titles[pos],
                )
    std_psms = _collect_psms(members, best_std, MODE_STANDARD)
    open_psms = _collect_psms(members, best_open, MODE_OPEN)
    return std_psms, open_psms, local.comparisons, local.blocks_scored


def _collect_psms(
    members: list[EncodedQuery], bests: list[_Best], mode: str
) -> list[Psm]:
    psms = []
    for q, best in zip(members, bests):
        if best.ref_id >= 0:
            psms.append(
                Psm(
                    query_id=q.query_id,
                    ref_id=best.ref_id,
                    score=best.score,
                    mode=mode,
                    mass_diff=q.precursor_mz - best.ref_pmz,
                    is_decoy=best.is_decoy,
                    query_title=q.title,
                    ref_title=best.ref_title,
                )
            )
    return psms


def search_all(
    queries: list[EncodedQuery],
    index: LibraryIndex,
    cfg: SearchConfig,
    workers: int = 1,
) -> tuple[list[Psm], list[Psm], SearchStats]:
    """Search every query against the index in both modes.

    Queries are compared only against references of their own charge.
    For each group the candidate blocks cover the union of the members'
    open windows; every (query, reference) pair of a scored block is
    evaluated and the per-query maxima are re-checked against the
    individual precursor windows, so block pruning never changes results.
    Returns one standard-mode and one open-mode PSM list (best match per
    query, none if no reference passes the window) ordered by query id,
    plus run statistics.

    Groups are independent work units; with workers > 1 they are scored
    on a thread pool and merged deterministically, so the PSM output is
    identical for any worker count.
    """
    stats = SearchStats()
    t_start = time.perf_counter()
    for q in queries:
        if q.words.shape[0] * 64 != index.dim:
            raise ValueError(
                f"query {q.query_id} dim {q.words.shape[0] * 64} does not "
                f"match index dim {index.dim}"
            )
    hits_before = index.cache.hits
    misses_before = index.cache.misses
    groups = _make_groups(queries, cfg)
    stats.times["sort"] = time.perf_counter() - t_start

    t_score = time.perf_counter()
    if workers > 1 and len(groups) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(
                    lambda g: _process_group(g, queries, index, cfg), groups
                )
            )
    else:
        results = [_process_group(g, queries, index, cfg) for g in groups]
    stats.times["score"] = time.perf_counter() - t_score

    std_psms: list[Psm] = []
    open_psms: list[Psm] = []
    for group_std, group_open, comparisons, blocks_scored in results:
        std_psms.extend(group_std)
        open_psms.extend(group_open)
        stats.comparisons += comparisons
        stats.blocks_scored += blocks_scored
    std_psms.sort(key=lambda p: p.query_id)
    open_psms.sort(key=lambda p: p.query_id)
    stats.cache_hits = index.cache.hits - hits_before
    stats.cache_misses = index.cache.misses - misses_before
    stats.times["total"] = time.perf_counter() - t_start
    return std_psms, open_psms, stats
