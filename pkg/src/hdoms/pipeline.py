"""Composition helpers tying parsing, preprocessing and encoding together."""

from __future__ import annotations

from .encoder import Hypervector, ItemMemory, encode_batch
from .index import RefRecord
from .preprocess import PreprocessConfig, preprocess_spectrum
from .search import EncodedQuery
from .spectra_io import Spectrum

__all__ = ["encode_queries", "encode_references"]


def encode_references(
    spectra: list[Spectrum], cfg: PreprocessConfig, im: ItemMemory
) -> list[RefRecord]:
    """Preprocess and encode spectra into index-ready reference records."""
    quantized = [preprocess_spectrum(s, cfg) for s in spectra]
    words = encode_batch(quantized, im)
    return [
        RefRecord(
            ref_id=s.id,
            title=s.title,
            precursor_mz=s.precursor_mz,
            charge=s.charge,
            is_decoy=s.is_decoy,
            hv=Hypervector(words[i], im.dim),
        )
        for i, s in enumerate(spectra)
    ]


def encode_queries(
    spectra: list[Spectrum], cfg: PreprocessConfig, im: ItemMemory
) -> list[EncodedQuery]:
    """Preprocess and encode spectra into search-ready queries."""
    quantized = [preprocess_spectrum(s, cfg) for s in spectra]
    words = encode_batch(quantized, im)
    return [
        EncodedQuery(
            query_id=s.id,
            title=s.title,
            precursor_mz=s.precursor_mz,
            charge=s.charge,
            words=words[i],
        )
        for i, s in enumerate(spectra)
    ]
