"""Grouped Shapley attribution for sliding-window time-series models.

Cells of a ``w x F`` window are partitioned a priori into named groups (by
instant, by feature, or by logical unit) and each group is treated as one
player of a coalition game whose value is the model's mean prediction over
background-hybrid windows. Attributions are computed exactly by subset
enumeration or approximately by stratified coalition sampling under a fixed
budget.
"""

from .errors import GroupShapError
from .explainer import (
    AttributionFrame,
    ExplainRequest,
    GroupedShapleyExplainer,
    count_predictor_calls,
    explain_batch,
    explain_window,
)
from .game import (
    CoalitionGame,
    ShapleyVector,
    StrataPlan,
    allocate_strata,
    exact_shapley,
    exact_shapley_stratified,
    sample_stratum,
    sampled_shapley,
)
from .grouping import (
    FeatureMap,
    FeatureMapEntry,
    Grouping,
    feature_grouping,
    grouping_from_group_map,
    multifeature_grouping,
    temporal_grouping,
)
from .heatmap import HeatmapSpec, render
from .pipeline import (
    EncodingReport,
    SplitSpec,
    TimeSeriesTable,
    WindowSet,
    encode_and_normalize,
    load_table,
    make_windows,
    prune_zero_variance,
    sample_background,
    split_with_padding,
)
from .predictors import (
    CountingPredictor,
    Predictor,
    builtin_predictor,
    spawn_external_predictor,
)
from .ranking import RankingReport, localization_score, normalize_shares, rank_sources
from .valuefn import BackgroundSet, CoalitionValueContext, coalition_value

__version__ = "0.1.0"

__all__ = [
    "AttributionFrame",
    "BackgroundSet",
    "CoalitionGame",
    "CoalitionValueContext",
    "CountingPredictor",
    "EncodingReport",
    "ExplainRequest",
    "FeatureMap",
    "FeatureMapEntry",
    "GroupShapError",
    "GroupedShapleyExplainer",
    "Grouping",
    "HeatmapSpec",
    "Predictor",
    "RankingReport",
    "ShapleyVector",
    "SplitSpec",
    "StrataPlan",
    "TimeSeriesTable",
    "WindowSet",
    "allocate_strata",
    "builtin_predictor",
    "coalition_value",
    "count_predictor_calls",
    "encode_and_normalize",
    "exact_shapley",
    "exact_shapley_stratified",
    "explain_batch",
    "explain_window",
    "feature_grouping",
    "grouping_from_group_map",
    "load_table",
    "localization_score",
    "make_windows",
    "multifeature_grouping",
    "normalize_shares",
    "prune_zero_variance",
    "rank_sources",
    "render",
    "sample_background",
    "sample_stratum",
    "sampled_shapley",
    "spawn_external_predictor",
    "split_with_padding",
    "temporal_grouping",
]
