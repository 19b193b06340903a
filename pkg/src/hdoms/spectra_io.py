"""Reading and writing of spectral data files.

MGF (Mascot Generic Format) is the interchange format for both reference
libraries and query runs; search results are written as tab separated PSM
tables.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Union

__all__ = [
    "DEFAULT_DECOY_PREFIX",
    "MgfParseError",
    "Peak",
    "Spectrum",
    "parse_mgf",
    "read_psms",
    "write_mgf",
    "write_psms",
]

DEFAULT_DECOY_PREFIX = "DECOY_"

PSM_COLUMNS = (
    "query_id",
    "query_title",
    "ref_id",
    "ref_title",
    "mode",
    "score",
    "precursor_mass_diff",
    "decoy",
)

Source = Union[str, Path, IO[str], IO[bytes]]


class MgfParseError(ValueError):
    """Structurally invalid MGF input (bad framing or corrupt peak lines)."""

    def __init__(self, message: str, line_number: int) -> None:
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass(frozen=True)
class Peak:
    """A single fragment peak: m/z in Thomson, intensity in arbitrary units."""

    mz: float
    intensity: float


@dataclass
class Spectrum:
    """A single MS/MS spectrum.

    Attributes
    ----------
    id : int
        Ordinal identifier, unique within the dataset it was parsed from.
    title : str
        Free text label from the TITLE header (empty if absent).
    precursor_mz : float
        Precursor m/z in Thomson, always positive.
    charge : int
        Precursor charge state, in 1..8.
    peaks : list[Peak]
        Fragment peaks sorted ascending by m/z without duplicate m/z values.
    is_decoy : bool
        True iff the title starts with the configured decoy prefix.
    """

    id: int
    title: str
    precursor_mz: float
    charge: int
    peaks: list[Peak] = field(default_factory=list)
    is_decoy: bool = False


def _open_text(source: Source) -> tuple[Iterable[str], bool]:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8"), True
    if not hasattr(source, "read"):
        raise TypeError(f"unsupported MGF source: {source!r}")
    if isinstance(source, (io.BufferedIOBase, io.RawIOBase)):
        return io.TextIOWrapper(source, encoding="utf-8"), False
    return source, False


def _parse_charge(text: str) -> int | None:
    """Parse a CHARGE header value; accepts the forms "2+", "2" and "+2"."""
    text = text.strip()
    if text.endswith("+"):
        text = text[:-1]
    elif text.startswith("+"):
        text = text[1:]
    if not text.isdigit():
        return None
    return int(text)


def parse_mgf(
    source: Source, decoy_prefix: str = DEFAULT_DECOY_PREFIX
) -> tuple[list[Spectrum], int]:
    """Parse an MGF stream into spectra.

    Records are framed by BEGIN IONS / END IONS. Headers are KEY=value
    lines; the first PEPMASS token is the precursor m/z and CHARGE accepts
    the forms "2+", "2" and "+2". Peaks are "mz intensity" lines; peaks
    sharing an identical m/z are merged by intensity summation and the peak
    list is sorted ascending by m/z.

    Records whose CHARGE is missing or unparsable (or that otherwise cannot
    form a valid spectrum, e.g. a non-positive precursor mass) are skipped
    and counted, because a spectrum without a usable charge or precursor
    cannot be searched.

    Parameters
    ----------
    source : str, Path or file-like
        MGF text (UTF-8).
    decoy_prefix : str
        Title prefix marking decoy entries.

    Returns
    -------
    (list[Spectrum], int)
        Parsed spectra with ids assigned 0, 1, 2, ... in file order, and
        the number of skipped records.

    Raises
    ------
    MgfParseError
        On malformed framing or a non-numeric peak line, with the
        offending line number.
    """
    fh, should_close = _open_text(source)
    spectra: list[Spectrum] = []
    skipped = 0
    in_block = False
    begin_line = 0
    title = ""
    pepmass: float | None = None
    charge: int | None = None
    mzs: list[float] = []
    intensities: list[float] = []
    lineno = 0
    try:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if not in_block:
                if line == "BEGIN IONS":
                    in_block = True
                    begin_line = lineno
                    title = ""
                    pepmass = None
                    charge = None
                    mzs = []
                    intensities = []
                elif line == "END IONS":
                    raise MgfParseError("END IONS without BEGIN IONS", lineno)
                # Anything else outside a block (file headers, comments) is
                # ignored.
                continue
            if line == "END IONS":
                in_block = False
                spectrum = _finalize_record(
                    len(spectra), title, pepmass, charge, mzs, intensities,
                    decoy_prefix,
                )
                if spectrum is None:
                    skipped += 1
                else:
                    spectra.append(spectrum)
                continue
            if line == "BEGIN IONS":
                raise MgfParseError("BEGIN IONS inside an open block", lineno)
            eq = line.find("=")
            if eq > 0 and not line[0].isdigit() and line[0] not in "+-.":
                key = line[:eq].upper()
                value = line[eq + 1 :]
                if key == "TITLE":
                    title = value.strip()
                elif key == "PEPMASS":
                    tokens = value.split()
                    try:
                        pepmass = float(tokens[0]) if tokens else None
                    except ValueError:
                        pepmass = None
                elif key == "CHARGE":
                    charge = _parse_charge(value)
                # Other headers (RTINSECONDS, SCANS, ...) are ignored.
                continue
            tokens = line.split()
            if len(tokens) < 2:
                raise MgfParseError(f"peak line needs m/z and intensity: {line!r}", lineno)
            try:
                mz = float(tokens[0])
                intensity = float(tokens[1])
            except ValueError:
                raise MgfParseError(f"non-numeric peak line: {line!r}", lineno) from None
            mzs.append(mz)
            intensities.append(intensity)
        if in_block:
            raise MgfParseError(
                f"unterminated BEGIN IONS block opened at line {begin_line}",
                lineno,
            )
    finally:
        if should_close:
            fh.close()
    return spectra, skipped


def _finalize_record(
    next_id: int,
    title: str,
    pepmass: float | None,
    charge: int | None,
    mzs: list[float],
    intensities: list[float],
    decoy_prefix: str,
) -> Spectrum | None:
    """Build a Spectrum from one parsed block, or None if it must be skipped."""
    if charge is None or not 1 <= charge <= 8:
        return None
    if pepmass is None or not math.isfinite(pepmass) or pepmass <= 0:
        return None
    for mz, intensity in zip(mzs, intensities):
        if not math.isfinite(mz) or mz <= 0:
            return None
        if not math.isfinite(intensity) or intensity < 0:
            return None
    order = sorted(range(len(mzs)), key=mzs.__getitem__)
    peaks: list[Peak] = []
    for i in order:
        if peaks and peaks[-1].mz == mzs[i]:
            # Duplicate m/z values merge by intensity summation.
            peaks[-1] = Peak(peaks[-1].mz, peaks[-1].intensity + intensities[i])
        else:
            peaks.append(Peak(mzs[i], intensities[i]))
    return Spectrum(
        id=next_id,
        title=title,
        precursor_mz=pepmass,
        charge=charge,
        peaks=peaks,
        is_decoy=title.startswith(decoy_prefix),
    )


def write_mgf(spectra: Iterable[Spectrum], sink: Source) -> int:
    """Write spectra as MGF text; returns the number of bytes written."""
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8", newline="\n") as fh:
            return write_mgf(spectra, fh)
    written = 0
    for spectrum in spectra:
        lines = [
            "BEGIN IONS",
            f"TITLE={spectrum.title}",
            f"PEPMASS={spectrum.precursor_mz!r}",
            f"CHARGE={spectrum.charge}+",
        ]
        lines.extend(f"{p.mz!r} {p.intensity!r}" for p in spectrum.peaks)
        lines.append("END IONS")
        block = "\n".join(lines) + "\n\n"
        sink.write(block)
        written += len(block.encode("utf-8"))
    return written


def _psm_sort_key(psm) -> tuple[int, int, int]:
    return (psm.query_id, 0 if psm.mode == "standard" else 1, psm.ref_id)


def write_psms(psms, sink: Source) -> int:
    """Write PSMs as a TSV table and return the number of bytes written.

    One header row, then one row per PSM ordered by query_id ascending with
    the standard mode row before the open mode row for the same query.
    """
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8", newline="\n") as fh:
            return write_psms(psms, fh)
    written = 0
    header = "\t".join(PSM_COLUMNS) + "\n"
    sink.write(header)
    written += len(header.encode("utf-8"))
    for psm in sorted(psms, key=_psm_sort_key):
        row = "\t".join(
            (
                str(psm.query_id),
                psm.query_title,
                str(psm.ref_id),
                psm.ref_title,
                psm.mode,
                str(psm.score),
                repr(psm.mass_diff),
                "1" if psm.is_decoy else "0",
            )
        ) + "\n"
        sink.write(row)
        written += len(row.encode("utf-8"))
    return written


def read_psms(source: Source):
    """Read a PSM TSV table written by :func:`write_psms`."""
    from .search import Psm

    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return read_psms(fh)
    header = source.readline().rstrip("\n").split("\t")
    if tuple(header) != PSM_COLUMNS:
        raise ValueError(f"unrecognized PSM table header: {header}")
    psms = []
    for line in source:
        line = line.rstrip("\n")
        if not line:
            continue
        fields = line.split("\t")
        psms.append(
            Psm(
                query_id=int(fields[0]),
                query_title=fields[1],
                ref_id=int(fields[2]),
                ref_title=fields[3],
                mode=fields[4],
                score=int(fields[5]),
                mass_diff=float(fields[6]),
                is_decoy=fields[7] == "1",
            )
        )
    return psms
