"""Source ranking over attribution frames plus planted-truth scoring.

A frame's attributions are first normalized to per-window shares; the
default convention divides each attribution's absolute value by the sum of
absolute values, which keeps shares in [0, 1] even when attributions carry
mixed signs. The signed convention (raw values over their raw sum) is
available for comparison but can leave the unit interval. Shares are then
averaged over all frames of an event and ranked.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import fsum
from typing import Sequence

import numpy as np

from .errors import AllZeroAttributionsWarning, EmptyEventWindow, UnknownTruthName
from .explainer import AttributionFrame

ABSOLUTE = "absolute"
SIGNED = "signed"


@dataclass(frozen=True)
class RankingReport:
    """Per-group mean shares over an event, ranked descending."""

    per_group: tuple[tuple[str, float, int], ...]  # (name, mean_share, rank)
    window_count: int
    share_convention: str

    @property
    def names(self) -> list[str]:
        return [name for name, _, _ in self.per_group]

    def rank_of(self, name: str) -> int:
        for group, _, rank in self.per_group:
            if group == name:
                return rank
        raise UnknownTruthName(f"group {name!r} not present in the ranking")

    def top(self, k: int = 1) -> list[str]:
        ordered = sorted(self.per_group, key=lambda item: item[2])
        return [name for name, _, _ in ordered[:k]]

    def to_dict(self) -> dict:
        ordered = sorted(self.per_group, key=lambda item: item[2])
        return {
            "windows": self.window_count,
            "convention": self.share_convention,
            "ranking": [
                {"name": name, "share": share, "rank": rank}
                for name, share, rank in ordered
            ],
        }


def normalize_shares(
    frame: AttributionFrame, convention: str = ABSOLUTE
) -> np.ndarray:
    """Per-group shares of one frame, summing to 1.

    An all-zero frame (or a signed frame whose attributions cancel exactly)
    has no meaningful shares; it degrades to uniform shares and emits
    :class:`AllZeroAttributionsWarning`.
    """
    if convention not in (ABSOLUTE, SIGNED):
        raise ValueError(f"unknown share convention {convention!r}")
    attributions = np.asarray(frame.attributions, dtype=float)
    weights = np.abs(attributions) if convention == ABSOLUTE else attributions
    denominator = weights.sum()
    if denominator == 0.0:
        warnings.warn(
            f"window {frame.window_origin}: attributions sum to zero under the "
            f"{convention} convention; falling back to uniform shares",
            AllZeroAttributionsWarning,
            stacklevel=2,
        )
        return np.full(len(attributions), 1.0 / len(attributions))
    return weights / denominator


def rank_sources(
    frames: Sequence[AttributionFrame],
    group_names: Sequence[str],
    convention: str = ABSOLUTE,
) -> RankingReport:
    """Average per-window shares over an event and rank groups by the mean.

    Ties are broken by ascending group index, so rank 1 is always unique
    and reproducible.
    """
    frames = list(frames)
    if not frames:
        raise EmptyEventWindow("cannot rank an event with no frames")
    group_names = list(group_names)
    for frame in frames:
        if len(frame.attributions) != len(group_names):
            raise ValueError(
                f"frame at origin {frame.window_origin} has "
                f"{len(frame.attributions)} attributions for {len(group_names)} groups"
            )
    # Collapse per-frame all-zero warnings into one summary; an all-normal
    # event would otherwise emit one warning per window.
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        shares = np.stack([normalize_shares(frame, convention) for frame in frames])
    degenerate = sum(
        1 for w in caught if issubclass(w.category, AllZeroAttributionsWarning)
    )
    for w in caught:
        if not issubclass(w.category, AllZeroAttributionsWarning):
            warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    if degenerate:
        warnings.warn(
            f"{degenerate} of {len(frames)} frames have all-zero attributions; "
            "their shares defaulted to uniform",
            AllZeroAttributionsWarning,
            stacklevel=2,
        )
    # fsum is exactly rounded, so the means (and hence the ranks) are
    # independent of frame order.
    mean_shares = np.array(
        [fsum(shares[:, g]) / len(frames) for g in range(len(group_names))]
    )
    order = sorted(range(len(group_names)), key=lambda g: (-mean_shares[g], g))
    ranks = {g: position + 1 for position, g in enumerate(order)}
    return RankingReport(
        per_group=tuple(
            (group_names[g], float(mean_shares[g]), ranks[g])
            for g in range(len(group_names))
        ),
        window_count=len(frames),
        share_convention=convention,
    )


def localization_score(
    reports: Sequence[RankingReport], truth: Sequence[str], k: int = 1
) -> float:
    """Fraction of events whose true group appears in the top-k ranks."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(reports) != len(truth):
        raise ValueError(
            f"{len(reports)} reports but {len(truth)} truth labels"
        )
    if not reports:
        raise EmptyEventWindow("localization over zero events is undefined")
    hits = sum(
        1 for report, name in zip(reports, truth) if report.rank_of(name) <= k
    )
    return hits / len(reports)
