"""Partitions of the window cell grid into Shapley players.

A grouping assigns every cell ``(instant, feature)`` of a ``w x F`` window
to exactly one named group. Three construction strategies are provided:
per-instant (temporal), per-feature, and multi-feature, which merges all
encoded features belonging to the same source column or the same larger
logical unit (for example, all sensors of one physical process). Groupings
are immutable after construction and freely shareable across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import IncompleteFeatureMap, InvalidDimensions

Cell = tuple[int, int]  # (instant, feature)


@dataclass(frozen=True)
class FeatureMapEntry:
    """Provenance of one encoded feature column."""

    index: int
    source: str  # original (pre-encoding) column name
    unit: str  # higher-level aggregation, e.g. a process name


@dataclass(frozen=True)
class FeatureMap:
    """Maps every encoded feature index back to its source column and unit.

    One-hot expansion produces several encoded columns per source column;
    they share the same ``source`` and therefore land in the same group
    under multi-feature grouping.
    """

    entries: tuple[FeatureMapEntry, ...]

    def __post_init__(self) -> None:
        indices = sorted(e.index for e in self.entries)
        if indices != list(range(len(self.entries))):
            raise IncompleteFeatureMap(
                "feature map must cover indices 0..F'-1 exactly once, "
                f"got {indices}"
            )

    @property
    def feature_count(self) -> int:
        return len(self.entries)

    def sources(self) -> list[str]:
        """Distinct source names, in first-appearance order."""
        return _first_appearance(e.source for e in sorted(self.entries, key=lambda e: e.index))

    def units(self) -> list[str]:
        return _first_appearance(e.unit for e in sorted(self.entries, key=lambda e: e.index))

    def indices_for_source(self, source: str) -> list[int]:
        return [e.index for e in self.entries if e.source == source]

    @classmethod
    def single_unit_per_source(
        cls, sources: Sequence[str], *, units: Mapping[str, str] | None = None
    ) -> "FeatureMap":
        """Build a map from an ordered list of per-index source names."""
        units = units or {}
        return cls(
            tuple(
                FeatureMapEntry(index=i, source=s, unit=units.get(s, s))
                for i, s in enumerate(sources)
            )
        )


def _first_appearance(names: Iterable[str]) -> list[str]:
    seen: dict[str, None] = {}
    for name in names:
        seen.setdefault(name)
    return list(seen)


@dataclass(frozen=True)
class Grouping:
    """A named, exact partition of the ``window_size x feature_count`` grid."""

    window_size: int
    feature_count: int
    groups: tuple[tuple[str, frozenset[Cell]], ...]
    strategy: str  # "temporal" | "feature" | "multifeature"

    def __post_init__(self) -> None:
        if self.window_size < 1 or self.feature_count < 1:
            raise InvalidDimensions(
                f"window_size={self.window_size}, feature_count={self.feature_count}"
            )
        names = [name for name, _ in self.groups]
        if len(set(names)) != len(names):
            raise ValueError(f"group names are not unique: {names}")
        covered: set[Cell] = set()
        total = 0
        for name, cells in self.groups:
            if not cells:
                raise ValueError(f"group {name!r} is empty")
            total += len(cells)
            covered |= cells
        grid = self.window_size * self.feature_count
        if total != grid or len(covered) != grid:
            raise ValueError(
                f"groups do not partition the grid: {total} cells assigned, "
                f"{len(covered)} distinct, grid has {grid}"
            )
        for name, cells in self.groups:
            for t, f in cells:
                if not (0 <= t < self.window_size and 0 <= f < self.feature_count):
                    raise ValueError(f"cell {(t, f)} of group {name!r} outside grid")

    @property
    def group_count(self) -> int:
        return len(self.groups)

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.groups]

    def cell_masks(self) -> np.ndarray:
        """Boolean masks of shape ``(group_count, window_size, feature_count)``.

        Built once per grouping and cached read-only; contexts for many
        windows share the same array.
        """
        masks = getattr(self, "_mask_cache", None)
        if masks is None:
            masks = np.zeros(
                (self.group_count, self.window_size, self.feature_count), dtype=bool
            )
            for g, (_, cells) in enumerate(self.groups):
                for t, f in cells:
                    masks[g, t, f] = True
            masks.setflags(write=False)
            object.__setattr__(self, "_mask_cache", masks)
        return masks

    def permuted(self, order: Sequence[int]) -> "Grouping":
        """The same partition with groups listed in a different order."""
        if sorted(order) != list(range(self.group_count)):
            raise ValueError(f"order must permute 0..{self.group_count - 1}")
        return Grouping(
            window_size=self.window_size,
            feature_count=self.feature_count,
            groups=tuple(self.groups[i] for i in order),
            strategy=self.strategy,
        )


def temporal_grouping(window_size: int, feature_count: int) -> Grouping:
    """One group per instant: group ``t`` holds every feature at instant ``t``."""
    if window_size < 1 or feature_count < 1:
        raise InvalidDimensions(
            f"window_size={window_size}, feature_count={feature_count}"
        )
    groups = tuple(
        (f"t{t}", frozenset((t, f) for f in range(feature_count)))
        for t in range(window_size)
    )
    return Grouping(window_size, feature_count, groups, strategy="temporal")


def feature_grouping(
    window_size: int, feature_count: int, names: Sequence[str] | None = None
) -> Grouping:
    """One group per feature column, spanning every instant of the window."""
    if window_size < 1 or feature_count < 1:
        raise InvalidDimensions(
            f"window_size={window_size}, feature_count={feature_count}"
        )
    if names is None:
        names = [f"f{f}" for f in range(feature_count)]
    if len(names) != feature_count:
        raise InvalidDimensions(
            f"{len(names)} names supplied for {feature_count} features"
        )
    groups = tuple(
        (str(names[f]), frozenset((t, f) for t in range(window_size)))
        for f in range(feature_count)
    )
    return Grouping(window_size, feature_count, groups, strategy="feature")


def multifeature_grouping(
    window_size: int, feature_map: FeatureMap, level: str = "source"
) -> Grouping:
    """One group per source column or per unit, merging one-hot siblings.

    Groups are ordered by first appearance of their name in the feature map,
    which keeps heatmap axes stable across runs.
    """
    if level not in ("source", "unit"):
        raise ValueError(f"level must be 'source' or 'unit', got {level!r}")
    if window_size < 1 or feature_map.feature_count < 1:
        raise InvalidDimensions(
            f"window_size={window_size}, feature_count={feature_map.feature_count}"
        )
    by_name: dict[str, list[int]] = {}
    for entry in sorted(feature_map.entries, key=lambda e: e.index):
        name = entry.source if level == "source" else entry.unit
        by_name.setdefault(name, []).append(entry.index)
    groups = tuple(
        (
            name,
            frozenset(
                (t, f) for t in range(window_size) for f in feature_indices
            ),
        )
        for name, feature_indices in by_name.items()
    )
    return Grouping(
        window_size, feature_map.feature_count, groups, strategy="multifeature"
    )


def grouping_from_group_map(
    document: Mapping | str | Path,
    feature_map: FeatureMap,
    window_size: int,
) -> Grouping:
    """Build a multi-feature grouping from a group-map JSON document.

    The document has the form::

        {"level": "source" | "unit" | "custom",
         "groups": {"<group name>": ["<source column>", ...], ...}}

    Group members name pre-encoding columns; each expands to every encoded
    feature derived from that column, across all instants. Every source
    column in the feature map must be claimed by exactly one group.
    """
    if isinstance(document, (str, Path)):
        document = json.loads(Path(document).read_text(encoding="utf-8"))
    level = document.get("level", "custom")
    if level not in ("source", "unit", "custom"):
        raise ValueError(f"unknown group-map level {level!r}")
    group_spec = document.get("groups")
    if not isinstance(group_spec, Mapping) or not group_spec:
        raise ValueError("group map must contain a non-empty 'groups' object")

    known = {entry.source for entry in feature_map.entries}
    claimed: dict[str, str] = {}
    groups: list[tuple[str, frozenset[Cell]]] = []
    for name, columns in group_spec.items():
        feature_indices: list[int] = []
        for column in columns:
            if column not in known:
                raise IncompleteFeatureMap(
                    f"group {name!r} names unknown column {column!r}"
                )
            if column in claimed:
                raise ValueError(
                    f"column {column!r} claimed by both {claimed[column]!r} and {name!r}"
                )
            claimed[column] = name
            feature_indices.extend(feature_map.indices_for_source(column))
        groups.append(
            (
                str(name),
                frozenset(
                    (t, f) for t in range(window_size) for f in feature_indices
                ),
            )
        )
    missing = known - set(claimed)
    if missing:
        raise IncompleteFeatureMap(
            f"group map leaves columns unassigned: {sorted(missing)}"
        )
    return Grouping(
        window_size, feature_map.feature_count, tuple(groups), strategy="multifeature"
    )
