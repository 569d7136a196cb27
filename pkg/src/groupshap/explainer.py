"""Attribution engine: bind grouping, background, and predictor to a game.

Each window to explain becomes a coalition game over its groups, whose value
function is the background-hybrid mean prediction. Exact attribution
enumerates every coalition; approximate attribution allocates the coalition
budget across size strata and samples. Windows are processed sequentially
in input order, so predictors declaring themselves serial need no extra
queueing and results are reproducible for a fixed request seed (per-window
seeds are derived as ``seed XOR origin``).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .errors import (
    ExactMethodInfeasible,
    GroupShapError,
    InvalidBudget,
    ShapeMismatch,
)
from .game import (
    DEFAULT_EXACT_CAP,
    CoalitionGame,
    allocate_strata,
    exact_shapley,
    sampled_shapley,
)
from .grouping import Grouping
from .predictors import CountingPredictor, Predictor
from .valuefn import (
    DEFAULT_MAX_BATCH,
    BackgroundSet,
    CoalitionValueContext,
    coalition_value,
    predictor_mean,
)

DEFAULT_BUDGET_PER_GROUP = 20

_METHOD_ALIASES = {"exact": "exact", "approximate": "approximate", "approx": "approximate"}


@dataclass(frozen=True)
class AttributionFrame:
    """Per-window attribution vector plus the values needed to read it.

    ``prediction`` is the model's raw output on the window (the grand
    coalition value) and ``baseline`` the background mean prediction (the
    empty coalition value). Under the exact method the attributions sum to
    ``prediction - baseline``. Both are carried so either the raw or the
    baseline-subtracted reading of the attributions can be recovered.
    """

    window_origin: int
    prediction: float
    baseline: float
    attributions: np.ndarray
    method: str
    budget: int | None
    seed: int

    def to_dict(self) -> dict:
        return {
            "origin": int(self.window_origin),
            "prediction": self.prediction,
            "baseline": self.baseline,
            "attributions": [float(v) for v in self.attributions],
        }

    @classmethod
    def from_dict(
        cls,
        record: dict,
        method: str = "exact",
        budget: int | None = None,
        seed: int = 0,
    ) -> "AttributionFrame":
        return cls(
            window_origin=int(record["origin"]),
            prediction=float(record["prediction"]),
            baseline=float(record["baseline"]),
            attributions=np.asarray(record["attributions"], dtype=float),
            method=method,
            budget=budget,
            seed=seed,
        )


@dataclass
class ExplainRequest:
    """One attribution job: windows, grouping, background, predictor, knobs.

    ``budget`` defaults to 20 coalitions per group for the approximate
    method and is ignored by the exact method, which always evaluates all
    ``2**group_count`` coalitions (and is refused above ``exact_cap``).
    """

    windows: np.ndarray  # (N, w, F)
    grouping: Grouping
    background: BackgroundSet
    predictor: Predictor
    method: str = "exact"
    budget: int | None = None
    seed: int = 0
    origins: np.ndarray | None = None
    exact_cap: int = DEFAULT_EXACT_CAP
    max_batch: int = DEFAULT_MAX_BATCH

    def __post_init__(self) -> None:
        self.windows = np.asarray(self.windows, dtype=float)
        if self.windows.ndim != 3:
            raise ShapeMismatch(
                f"windows must be (N, w, F), got {self.windows.shape}"
            )
        expected = (self.grouping.window_size, self.grouping.feature_count)
        if self.windows.shape[1:] != expected:
            raise ShapeMismatch(
                f"window shape {self.windows.shape[1:]} does not match grouping {expected}"
            )
        if self.background.windows.shape[1:] != expected:
            raise ShapeMismatch(
                f"background shape {self.background.windows.shape[1:]} does not "
                f"match grouping {expected}"
            )
        if self.method not in _METHOD_ALIASES:
            raise ValueError(f"method must be 'exact' or 'approximate', got {self.method!r}")
        self.method = _METHOD_ALIASES[self.method]
        if self.origins is None:
            self.origins = np.arange(len(self.windows), dtype=np.int64)
        else:
            self.origins = np.asarray(self.origins, dtype=np.int64)
            if len(self.origins) != len(self.windows):
                raise ShapeMismatch("origins length does not match window count")
        if self.method == "approximate":
            group_count = self.grouping.group_count
            if self.budget is None:
                self.budget = DEFAULT_BUDGET_PER_GROUP * group_count
            if self.budget < group_count:
                raise InvalidBudget(
                    f"budget {self.budget} below group count {group_count}"
                )

    @property
    def effective_budget(self) -> int | None:
        return self.budget if self.method == "approximate" else None


def _explain_one(
    request: ExplainRequest, window: np.ndarray, origin: int, baseline: float
) -> AttributionFrame:
    group_count = request.grouping.group_count
    ctx = CoalitionValueContext(
        window,
        request.background,
        request.grouping,
        request.predictor,
        max_batch=request.max_batch,
    )
    ctx.seed_baseline(baseline)
    game = CoalitionGame(
        player_count=group_count,
        value_fn=lambda coalition, ctx=ctx: coalition_value(ctx, coalition),
    )
    if request.method == "exact":
        vector = exact_shapley(game, exact_cap=request.exact_cap)
    else:
        plan = allocate_strata(request.budget, group_count)
        vector = sampled_shapley(game, plan, request.seed ^ origin)
    prediction = coalition_value(ctx, tuple(range(group_count)))
    return AttributionFrame(
        window_origin=origin,
        prediction=prediction,
        baseline=baseline,
        attributions=vector.values,
        method=request.method,
        budget=request.effective_budget,
        seed=request.seed,
    )


def explain_batch(request: ExplainRequest) -> list[AttributionFrame]:
    """Explain every window of the request, preserving input order.

    The background baseline is window-independent, so it is computed once
    per request and shared across all window contexts. The first failing
    window aborts the batch with its origin attached.
    """
    if request.method == "exact" and request.grouping.group_count > request.exact_cap:
        raise ExactMethodInfeasible(
            f"{request.grouping.group_count} groups exceed the exact cap "
            f"{request.exact_cap}; use the approximate method or raise the cap"
        )
    if len(request.windows) == 0:
        return []
    baseline = predictor_mean(
        request.predictor, request.background.windows, request.max_batch
    )
    frames = []
    for window, origin in zip(request.windows, request.origins):
        try:
            frames.append(_explain_one(request, window, int(origin), baseline))
        except GroupShapError as exc:
            raise type(exc)(f"{exc} (window origin {int(origin)})") from exc
    return frames


def explain_window(request: ExplainRequest) -> AttributionFrame:
    """Explain a single-window request."""
    if len(request.windows) != 1:
        raise ShapeMismatch(
            f"explain_window expects exactly one window, got {len(request.windows)}"
        )
    return explain_batch(request)[0]


def count_predictor_calls(request: ExplainRequest) -> int:
    """Number of individual predictor evaluations the request would issue.

    Runs the request against a constant counting predictor; the coalition
    set depends only on the grouping, method, budget, and seed, so the
    count equals what the real predictor would see.
    """
    counter = CountingPredictor()
    probe = replace(request, predictor=counter)
    explain_batch(probe)
    return counter.windows_seen


class GroupedShapleyExplainer(BaseEstimator):
    """scikit-learn style front end for grouped window attribution.

    ``fit`` binds the background windows; ``explain`` returns one
    :class:`AttributionFrame` per input window and ``transform`` just the
    ``(n_windows, n_groups)`` attribution matrix, so the explainer composes
    with scikit-learn tooling (``get_params``/``set_params``/cloning).

    Example::

        explainer = GroupedShapleyExplainer(grouping=g, predictor=p, method="approximate")
        explainer.fit(background_windows)
        attributions = explainer.transform(test_windows)
    """

    def __init__(
        self,
        grouping: Grouping | None = None,
        predictor: Predictor | None = None,
        method: str = "exact",
        budget: int | None = None,
        seed: int = 0,
        exact_cap: int = DEFAULT_EXACT_CAP,
        max_batch: int = DEFAULT_MAX_BATCH,
    ):
        self.grouping = grouping
        self.predictor = predictor
        self.method = method
        self.budget = budget
        self.seed = seed
        self.exact_cap = exact_cap
        self.max_batch = max_batch

    def fit(self, X, y=None) -> "GroupedShapleyExplainer":
        """Bind the background windows, shaped ``(K, w, F)``."""
        if self.grouping is None or self.predictor is None:
            raise ValueError("grouping and predictor must be set before fit")
        background = X if isinstance(X, BackgroundSet) else BackgroundSet(np.asarray(X, dtype=float))
        expected = (self.grouping.window_size, self.grouping.feature_count)
        if background.windows.shape[1:] != expected:
            raise ShapeMismatch(
                f"background shape {background.windows.shape[1:]} does not match "
                f"grouping {expected}"
            )
        self.background_ = background
        self.group_names_ = list(self.grouping.names)
        return self

    def _request(self, X, origins) -> ExplainRequest:
        if not hasattr(self, "background_"):
            raise ValueError("explainer is not fitted; call fit(background) first")
        return ExplainRequest(
            windows=np.asarray(X, dtype=float),
            grouping=self.grouping,
            background=self.background_,
            predictor=self.predictor,
            method=self.method,
            budget=self.budget,
            seed=self.seed,
            origins=origins,
            exact_cap=self.exact_cap,
            max_batch=self.max_batch,
        )

    def explain(self, X, origins: Sequence[int] | None = None) -> list[AttributionFrame]:
        """Full attribution frames for windows shaped ``(N, w, F)``."""
        origins = None if origins is None else np.asarray(origins, dtype=np.int64)
        return explain_batch(self._request(X, origins))

    def transform(self, X) -> np.ndarray:
        """Attribution matrix ``(n_windows, n_groups)`` aligned to group order."""
        frames = self.explain(X)
        if not frames:
            return np.empty((0, self.grouping.group_count))
        return np.stack([frame.attributions for frame in frames])
