"""Open modification search of MS/MS spectra against spectral libraries
using binary hypervector encoding and blockwise Hamming-distance search."""

from .encoder import (
    EncodingError,
    Hypervector,
    ItemMemory,
    encode_batch,
    encode_spectrum,
    gen_item_memory,
    hamming,
    similarity_matrix,
    similarity_score,
)
from .fdr import FdrConfig, FdrResult, fdr_summary, filter_fdr
from .index import (
    Block,
    BlockCache,
    IndexFormatError,
    LibraryIndex,
    RefRecord,
    build_index,
    select_blocks,
)
from .pipeline import encode_queries, encode_references
from .preprocess import (
    PreprocessConfig,
    QuantizedSpectrum,
    bin_peaks,
    filter_peaks,
    preprocess_spectrum,
    quantize,
)
from .search import (
    EncodedQuery,
    Psm,
    SearchConfig,
    SearchStats,
    in_open_window,
    in_standard_window,
    search_all,
)
from .spectra_io import (
    MgfParseError,
    Peak,
    Spectrum,
    parse_mgf,
    read_psms,
    write_mgf,
    write_psms,
)
from .synth import SynthConfig, generate_dataset

__version__ = "0.1.0"

__all__ = [
    "Block",
    "BlockCache",
    "EncodedQuery",
    "EncodingError",
    "FdrConfig",
    "FdrResult",
    "Hypervector",
    "IndexFormatError",
    "ItemMemory",
    "LibraryIndex",
    "MgfParseError",
    "Peak",
    "PreprocessConfig",
    "Psm",
    "QuantizedSpectrum",
    "RefRecord",
    "SearchConfig",
    "SearchStats",
    "Spectrum",
    "SynthConfig",
    "bin_peaks",
    "build_index",
    "encode_batch",
    "encode_queries",
    "encode_references",
    "encode_spectrum",
    "fdr_summary",
    "filter_fdr",
    "filter_peaks",
    "gen_item_memory",
    "generate_dataset",
    "hamming",
    "in_open_window",
    "in_standard_window",
    "parse_mgf",
    "preprocess_spectrum",
    "quantize",
    "read_psms",
    "search_all",
    "select_blocks",
    "similarity_matrix",
    "similarity_score",
    "write_mgf",
    "write_psms",
]
