"""Deterministic synthetic dataset generation.

Produces a reference library and a query set where every query is a
perturbed copy of a known reference, plus decoy references with shuffled
intensity levels. Peak m/z values sit on bin centers and intensities on
the quantization level grid, so a "one level" perturbation is exact after
preprocessing. Ground truth (which reference each query came from) is
written to a sidecar table.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .spectra_io import Peak, Spectrum

__all__ = [
    "GroundTruth",
    "SynthConfig",
    "generate_dataset",
    "read_ground_truth",
    "write_ground_truth",
]


@dataclass(frozen=True)
class SynthConfig:
    n_refs: int = 1000
    n_queries: int = 1000
    peaks_per_spectrum: int = 30
    perturb_rate: float = 0.0
    dropout_rate: float = 0.0
    decoy_fraction: float = 0.0
    seed: int = 0
    charges: tuple[int, ...] = (2, 3)
    pmz_min: float = 400.0
    pmz_max: float = 1600.0
    query_pmz_shift_da: float = 0.0
    num_levels: int = 64
    bin_size: float = 0.05
    mz_min: float = 50.0
    mz_max: float = 2500.0

    def __post_init__(self) -> None:
        if self.n_refs < 0 or self.n_queries < 0:
            raise ValueError("n_refs and n_queries must be non-negative")
        if self.n_queries > 0 and self.n_refs == 0:
            raise ValueError("queries need at least one reference")
        if self.peaks_per_spectrum < 1:
            raise ValueError("peaks_per_spectrum must be at least 1")
        if not 0 <= self.perturb_rate <= 1 or not 0 <= self.dropout_rate <= 1:
            raise ValueError("rates must be in [0, 1]")
        if not 0 <= self.decoy_fraction <= 1:
            raise ValueError("decoy_fraction must be in [0, 1]")
        if not self.charges:
            raise ValueError("charges must be non-empty")
        if self.num_levels < 4:
            raise ValueError("num_levels must be at least 4")


@dataclass(frozen=True)
class GroundTruth:
    query_id: int
    query_title: str
    ref_id: int
    ref_title: str


def _grid_intensity(level: int, num_levels: int) -> float:
    # Inverse of the sqrt transform: quantizing this intensity recovers
    # exactly `level` when the base peak sits at num_levels - 1.
    return (level / (num_levels - 1)) ** 2 * 10000.0


def _spectrum_from_grid(
    spec_id: int,
    title: str,
    pmz: float,
    charge: int,
    bins: np.ndarray,
    levels: np.ndarray,
    cfg: SynthConfig,
    is_decoy: bool = False,
) -> Spectrum:
    peaks = [
        Peak(
            cfg.mz_min + (int(b) + 0.5) * cfg.bin_size,
            _grid_intensity(int(lvl), cfg.num_levels),
        )
        for b, lvl in zip(bins, levels)
    ]
    return Spectrum(
        id=spec_id,
        title=title,
        precursor_mz=pmz,
        charge=charge,
        peaks=peaks,
        is_decoy=is_decoy,
    )


def generate_dataset(
    cfg: SynthConfig,
) -> tuple[list[Spectrum], list[Spectrum], list[GroundTruth]]:
    """Generate (references, queries, ground truth) for one seed.

    References get distinct bin positions and levels drawn from a band
    above the noise floor, with one anchor peak pinned at the top level so
    normalization is stable under perturbation. Queries copy their source
    reference (round robin over targets) and then shift perturb_rate of
    the non-anchor levels by one step, drop dropout_rate of the non-anchor
    peaks, and optionally move the precursor by a random mass within
    query_pmz_shift_da. Decoys are extra references with the level values
    shuffled across peak positions.
    """
    rng = np.random.default_rng(cfg.seed)
    q = cfg.num_levels
    # Keep generated levels one step above the 1% floor and one below the
    # anchor so a single-level perturbation cannot cross either boundary
    # in the common direction.
    level_lo = max(1, min(8, q - 2))
    level_hi = max(level_lo, q - 2)
    usable_bins = int((cfg.mz_max - cfg.mz_min) / cfg.bin_size) - 1

    ref_bins: list[np.ndarray] = []
    ref_levels: list[np.ndarray] = []
    refs: list[Spectrum] = []
    for i in range(cfg.n_refs):
        bins = np.sort(
            rng.choice(usable_bins, size=cfg.peaks_per_spectrum, replace=False)
        )
        levels = rng.integers(
            level_lo, level_hi, size=cfg.peaks_per_spectrum, endpoint=True
        )
        anchor = int(rng.integers(cfg.peaks_per_spectrum))
        levels[anchor] = q - 1
        pmz = float(rng.uniform(cfg.pmz_min, cfg.pmz_max))
        charge = cfg.charges[i % len(cfg.charges)]
        ref_bins.append(bins)
        ref_levels.append(levels)
        refs.append(
            _spectrum_from_grid(
                i, f"REF_{i:06d}", pmz, charge, bins, levels, cfg
            )
        )

    n_decoys = round(cfg.n_refs * cfg.decoy_fraction)
    for d in range(n_decoys):
        src = d % cfg.n_refs
        levels = rng.permutation(ref_levels[src])
        spec_id = cfg.n_refs + d
        refs.append(
            _spectrum_from_grid(
                spec_id,
                f"DECOY_{d:06d}",
                refs[src].precursor_mz,
                refs[src].charge,
                ref_bins[src],
                levels,
                cfg,
                is_decoy=True,
            )
        )

    queries: list[Spectrum] = []
    truth: list[GroundTruth] = []
    for j in range(cfg.n_queries):
        src = j % cfg.n_refs
        bins = ref_bins[src].copy()
        levels = ref_levels[src].copy()
        anchor = int(np.flatnonzero(levels == q - 1)[0])
        others = np.array(
            [k for k in range(len(levels)) if k != anchor], dtype=np.int64
        )
        n_pert = round(cfg.perturb_rate * len(levels))
        if n_pert and len(others):
            chosen = rng.choice(others, size=min(n_pert, len(others)), replace=False)
            steps = rng.choice(np.array([-1, 1]), size=len(chosen))
            levels[chosen] = np.clip(levels[chosen] + steps, 1, q - 1)
        n_drop = round(cfg.dropout_rate * len(levels))
        keep = np.ones(len(levels), dtype=bool)
        if n_drop and len(others):
            dropped = rng.choice(others, size=min(n_drop, len(others)), replace=False)
            keep[dropped] = False
        pmz = refs[src].precursor_mz
        if cfg.query_pmz_shift_da > 0:
            pmz += float(
                rng.uniform(-cfg.query_pmz_shift_da, cfg.query_pmz_shift_da)
            )
        title = f"QUERY_{j:06d}"
        queries.append(
            _spectrum_from_grid(
                j, title, pmz, refs[src].charge, bins[keep], levels[keep], cfg
            )
        )
        truth.append(GroundTruth(j, title, src, refs[src].title))
    return refs, queries, truth


_TRUTH_HEADER = ("query_id", "query_title", "ref_id", "ref_title")


def write_ground_truth(entries: list[GroundTruth], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(_TRUTH_HEADER) + "\n")
        for e in entries:
            fh.write(f"{e.query_id}\t{e.query_title}\t{e.ref_id}\t{e.ref_title}\n")


def read_ground_truth(path: str | Path) -> list[GroundTruth]:
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if tuple(header) != _TRUTH_HEADER:
            raise ValueError(f"unrecognized ground truth header: {header}")
        for line in fh:
            fields = line.rstrip("\n").split("\t")
            if len(fields) == 4:
                entries.append(
                    GroundTruth(int(fields[0]), fields[1], int(fields[2]), fields[3])
                )
    return entries
