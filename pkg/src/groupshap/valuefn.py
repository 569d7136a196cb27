"""Background-set coalition values for one explicand window.

The value of a coalition of groups is the predictor's mean output over K
hybrid windows: each hybrid keeps the explicand's values at every cell
belonging to a group in the coalition and takes the k-th background window's
values everywhere else. The empty coalition is therefore the background mean
prediction (the baseline) and the grand coalition is the raw prediction on
the explicand.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import fsum

import numpy as np

from .errors import PredictorError, PredictorFailure, ShapeMismatch
from .game import Coalition
from .grouping import Grouping
from .predictors import Predictor

DEFAULT_MAX_BATCH = 1024


@dataclass(frozen=True)
class BackgroundSet:
    """K reference windows whose values stand in for absent groups."""

    windows: np.ndarray  # (K, w, f)
    source: str = "file"  # "file" | "sampled-from-training"

    def __post_init__(self) -> None:
        windows = np.asarray(self.windows, dtype=float)
        if windows.ndim != 3 or windows.shape[0] < 1:
            raise ShapeMismatch(
                f"background must be (K>=1, w, f), got {windows.shape}"
            )
        object.__setattr__(self, "windows", windows)

    @property
    def size(self) -> int:
        return int(self.windows.shape[0])


class CoalitionValueContext:
    """Memoized coalition values for one explicand window.

    The cache is keyed by coalition bitmask and shared across every player
    and stratum of one attribution computation; evaluating the same
    coalition twice never re-invokes the predictor. A context is confined to
    one explanation task; contexts for different windows are independent.
    """

    def __init__(
        self,
        explicand: np.ndarray,
        background: BackgroundSet,
        grouping: Grouping,
        predictor: Predictor,
        max_batch: int = DEFAULT_MAX_BATCH,
    ):
        explicand = np.asarray(explicand, dtype=float)
        expected = (grouping.window_size, grouping.feature_count)
        if explicand.shape != expected:
            raise ShapeMismatch(
                f"explicand shape {explicand.shape} does not match grouping {expected}"
            )
        if background.windows.shape[1:] != expected:
            raise ShapeMismatch(
                f"background shape {background.windows.shape[1:]} does not match "
                f"grouping {expected}"
            )
        if max_batch < 1:
            raise ValueError(f"max_batch must be >= 1, got {max_batch}")
        self.explicand = explicand
        self.background = background
        self.grouping = grouping
        self.predictor = predictor
        self.max_batch = max_batch
        self.cache: dict[int, float] = {}
        self._masks = grouping.cell_masks()

    def seed_baseline(self, baseline: float) -> None:
        """Record a precomputed empty-coalition value, shared across windows."""
        self.cache.setdefault(0, float(baseline))


def predictor_mean(
    predictor: Predictor, windows: np.ndarray, max_batch: int = DEFAULT_MAX_BATCH
) -> float:
    """Mean predictor output over a batch, chunked to bound memory."""
    outputs: list[float] = []
    for start in range(0, len(windows), max_batch):
        chunk = windows[start : start + max_batch]
        try:
            out = predictor(chunk)
        except PredictorError:
            raise  # protocol violations, timeouts, etc. keep their identity
        except Exception as exc:
            raise PredictorFailure(
                f"{predictor.name} failed on batch starting at {start}: {exc}"
            ) from exc
        outputs.extend(float(v) for v in out)
    return fsum(outputs) / len(outputs)


def coalition_key(coalition: Coalition) -> int:
    mask = 0
    for group_index in coalition:
        mask |= 1 << group_index
    return mask


def coalition_value(ctx: CoalitionValueContext, coalition: Coalition) -> float:
    """Mean prediction over the K hybrids for one coalition of groups.

    Results are cached; the K hybrid windows of an uncached coalition are
    submitted to the predictor as one batch (chunked only past
    ``ctx.max_batch``).
    """
    group_count = ctx.grouping.group_count
    for g in coalition:
        if not 0 <= g < group_count:
            raise ShapeMismatch(f"coalition member {g} outside 0..{group_count - 1}")
    key = coalition_key(coalition)
    if key in ctx.cache:
        return ctx.cache[key]

    if coalition:
        keep = np.logical_or.reduce(ctx._masks[list(coalition)])
        hybrids = np.where(keep, ctx.explicand, ctx.background.windows)
    else:
        hybrids = ctx.background.windows
    value = predictor_mean(ctx.predictor, hybrids, ctx.max_batch)
    ctx.cache[key] = value
    return value
