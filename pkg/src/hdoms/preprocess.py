"""Spectrum preprocessing: noise filtering, m/z binning and intensity
quantization into sparse (bin, level) vectors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectra_io import Spectrum

__all__ = [
    "PreprocessConfig",
    "QuantizedSpectrum",
    "bin_peaks",
    "filter_peaks",
    "preprocess_spectrum",
    "quantize",
]

_TRANSFORMS = ("linear", "sqrt")


@dataclass(frozen=True)
class PreprocessConfig:
    """Preprocessing parameters.

    rel_intensity_floor is the noise threshold as a fraction of the base
    peak; peaks below it are removed. The m/z axis from mz_min (inclusive)
    to mz_max (exclusive) is discretized into bins of bin_size Thomson.
    Intensities are transformed (sqrt by default), normalized to the base
    peak and rounded to num_levels discrete levels.
    """

    rel_intensity_floor: float = 0.01
    bin_size: float = 0.05
    mz_min: float = 50.0
    mz_max: float = 2500.0
    num_levels: int = 64
    intensity_transform: str = "sqrt"
    drop_level_zero: bool = False

    def __post_init__(self) -> None:
        if not 0 <= self.rel_intensity_floor < 1:
            raise ValueError("rel_intensity_floor must be in [0, 1)")
        if self.bin_size <= 0:
            raise ValueError("bin_size must be positive")
        if self.mz_min >= self.mz_max:
            raise ValueError("mz_min must be below mz_max")
        if self.num_levels < 2:
            raise ValueError("num_levels must be at least 2")
        if self.intensity_transform not in _TRANSFORMS:
            raise ValueError(
                f"intensity_transform must be one of {_TRANSFORMS}"
            )

    def num_bins(self) -> int:
        """Number of m/z bins spanned by [mz_min, mz_max)."""
        return math.ceil((self.mz_max - self.mz_min) / self.bin_size)

    def to_snapshot(self) -> str:
        """Serialize as key=value lines (embedded verbatim in index files)."""
        return "\n".join(
            (
                f"rel_intensity_floor={self.rel_intensity_floor!r}",
                f"bin_size={self.bin_size!r}",
                f"mz_min={self.mz_min!r}",
                f"mz_max={self.mz_max!r}",
                f"num_levels={self.num_levels}",
                f"intensity_transform={self.intensity_transform}",
                f"drop_level_zero={'true' if self.drop_level_zero else 'false'}",
            )
        )

    @classmethod
    def from_snapshot(cls, text: str) -> "PreprocessConfig":
        values: dict[str, str] = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
        return cls(
            rel_intensity_floor=float(values["rel_intensity_floor"]),
            bin_size=float(values["bin_size"]),
            mz_min=float(values["mz_min"]),
            mz_max=float(values["mz_max"]),
            num_levels=int(values["num_levels"]),
            intensity_transform=values["intensity_transform"],
            drop_level_zero=values["drop_level_zero"] == "true",
        )


@dataclass
class QuantizedSpectrum:
    """Sparse quantized spectrum: parallel arrays of bin indices (strictly
    ascending) and intensity levels in [0, num_levels)."""

    source_id: int
    precursor_mz: float
    charge: int
    bins: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    levels: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))

    def __len__(self) -> int:
        return len(self.bins)


def filter_peaks(spectrum: Spectrum, cfg: PreprocessConfig) -> Spectrum:
    """Drop noise peaks below the relative intensity floor and peaks
    outside [mz_min, mz_max); peak order is preserved."""
    if not spectrum.peaks:
        return spectrum
    floor = cfg.rel_intensity_floor * max(p.intensity for p in spectrum.peaks)
    kept = [
        p
        for p in spectrum.peaks
        if p.intensity >= floor and cfg.mz_min <= p.mz < cfg.mz_max
    ]
    return Spectrum(
        id=spectrum.id,
        title=spectrum.title,
        precursor_mz=spectrum.precursor_mz,
        charge=spectrum.charge,
        peaks=kept,
        is_decoy=spectrum.is_decoy,
    )


def bin_peaks(
    spectrum: Spectrum, cfg: PreprocessConfig
) -> list[tuple[int, float]]:
    """Map peaks of an already filtered spectrum onto discrete m/z bins.

    bin = floor((mz - mz_min) / bin_size); intensities of peaks falling in
    the same bin are summed. Returns (bin, intensity) pairs sorted by bin.
    """
    sums: dict[int, float] = {}
    for p in spectrum.peaks:
        b = int((p.mz - cfg.mz_min) // cfg.bin_size)
        sums[b] = sums.get(b, 0.0) + p.intensity
    return sorted(sums.items())


def quantize(
    binned: list[tuple[int, float]],
    cfg: PreprocessConfig,
    source_id: int = 0,
    precursor_mz: float = 0.0,
    charge: int = 0,
) -> QuantizedSpectrum:
    """Quantize binned intensities to discrete levels.

    The configured transform is applied (sqrt compresses the dynamic
    range), values are normalized by the maximum so the base peak maps to
    level num_levels - 1, and levels are rounded to nearest with ties to
    even. Level-0 entries are kept unless drop_level_zero is set.
    """
    if not binned:
        return QuantizedSpectrum(source_id, precursor_mz, charge)
    bins = np.array([b for b, _ in binned], dtype=np.int64)
    values = np.array([v for _, v in binned], dtype=np.float64)
    if cfg.intensity_transform == "sqrt":
        values = np.sqrt(values)
    top = values.max()
    if top <= 0:
        # A spectrum whose peaks all have zero intensity carries no signal.
        return QuantizedSpectrum(source_id, precursor_mz, charge)
    values /= top
    levels = np.rint(values * (cfg.num_levels - 1)).astype(np.int64)
    if cfg.drop_level_zero:
        keep = levels > 0
        bins, levels = bins[keep], levels[keep]
    return QuantizedSpectrum(source_id, precursor_mz, charge, bins, levels)


def preprocess_spectrum(
    spectrum: Spectrum, cfg: PreprocessConfig
) -> QuantizedSpectrum:
    """Full pipeline: filter, bin and quantize one spectrum."""
    filtered = filter_peaks(spectrum, cfg)
    return quantize(
        bin_peaks(filtered, cfg),
        cfg,
        source_id=spectrum.id,
        precursor_mz=spectrum.precursor_mz,
        charge=spectrum.charge,
    )
