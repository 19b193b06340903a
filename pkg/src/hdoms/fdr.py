"""Target-decoy false discovery rate estimation and PSM filtering."""

from __future__ import annotations

from dataclasses import dataclass

from .search import Psm

__all__ = ["FdrConfig", "FdrResult", "FdrSummary", "fdr_summary", "filter_fdr"]


@dataclass(frozen=True)
class FdrConfig:
    """threshold is the accepted decoy-to-target ratio (default 1%).

    With conservative_plus_one the running estimate counts one extra decoy
    ((decoys + 1) / targets), a common correction for small decoy counts.
    """

    threshold: float = 0.01
    conservative_plus_one: bool = False

    def __post_init__(self) -> None:
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must be in (0, 1)")


@dataclass
class FdrResult:
    """Outcome of FDR filtering one mode's PSM set.

    accepted holds the surviving target PSMs (decoys are never returned);
    cutoff_score is the score of the last PSM inside the accepted prefix,
    or None when nothing was accepted. fdr is the decoy-to-target ratio
    achieved at the cutoff.
    """

    accepted: list[Psm]
    cutoff_score: int | None
    fdr: float


def filter_fdr(psms: list[Psm], cfg: FdrConfig) -> FdrResult:
    """Filter one mode's PSMs at the configured FDR threshold.

    PSMs are ranked by score descending, decoys before targets at tied
    scores (the conservative order). Walking down the ranking, the running
    estimate is decoys / max(targets, 1); the accepted set is the longest
    prefix whose estimate stays at or below the threshold. Target PSMs of
    that prefix are returned; decoys are excluded from the output.
    """
    ranked = sorted(psms, key=lambda p: (-p.score, 0 if p.is_decoy else 1))
    extra = 1 if cfg.conservative_plus_one else 0
    decoys = 0
    targets = 0
    best_len = 0
    best_fdr = 0.0
    for i, psm in enumerate(ranked):
        if psm.is_decoy:
            decoys += 1
        else:
            targets += 1
        running = (decoys + extra) / max(targets, 1)
        if running <= cfg.threshold:
            best_len = i + 1
            best_fdr = running
    accepted = [p for p in ranked[:best_len] if not p.is_decoy]
    cutoff = ranked[best_len - 1].score if best_len else None
    return FdrResult(accepted=accepted, cutoff_score=cutoff, fdr=best_fdr)


@dataclass
class FdrSummary:
    """Identification counts after filtering both search modes."""

    standard_accepted: int
    open_accepted: int
    overlap_queries: int
    cutoff_standard: int | None
    cutoff_open: int | None
    fdr_standard: float
    fdr_open: float

    def as_key_values(self) -> str:
        return "\n".join(
            (
                f"standard_accepted={self.standard_accepted}",
                f"open_accepted={self.open_accepted}",
                f"overlap_queries={self.overlap_queries}",
                f"cutoff_standard={self.cutoff_standard}",
                f"cutoff_open={self.cutoff_open}",
                f"fdr_standard={self.fdr_standard:.6f}",
                f"fdr_open={self.fdr_open:.6f}",
            )
        )


def fdr_summary(standard: FdrResult, open_: FdrResult) -> FdrSummary:
    """Summarize both modes' accepted sets; overlap counts query ids
    identified in both."""
    std_queries = {p.query_id for p in standard.accepted}
    open_queries = {p.query_id for p in open_.accepted}
    return FdrSummary(
        standard_accepted=len(standard.accepted),
        open_accepted=len(open_.accepted),
        overlap_queries=len(std_queries & open_queries),
        cutoff_standard=standard.cutoff_score,
        cutoff_open=open_.cutoff_score,
        fdr_standard=standard.fdr,
        fdr_open=open_.fdr,
    )
