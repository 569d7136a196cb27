from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groupshap.errors import IncompleteFeatureMap, InvalidDimensions
from groupshap.grouping import (
    FeatureMap,
    FeatureMapEntry,
    Grouping,
    feature_grouping,
    grouping_from_group_map,
    multifeature_grouping,
    temporal_grouping,
)


def plant_feature_map() -> FeatureMap:
    # 69 encoded features from 44 source columns across 6 units: 25 continuous
    # sources one feature each, 19 categorical sources expanding to 44 columns
    # (13 sources x 2 siblings + 6 sources x 3 siblings).
    entries = []
    index = 0
    source_id = 0
    for _ in range(25):
        unit = f"u{source_id % 6}"
        entries.append(FeatureMapEntry(index, f"cont{source_id}", unit))
        index += 1
        source_id += 1
    for width in [2] * 13 + [3] * 6:
        unit = f"u{source_id % 6}"
        for _ in range(width):
            entries.append(FeatureMapEntry(index, f"cat{source_id}", unit))
            index += 1
        source_id += 1
    return FeatureMap(tuple(entries))


def test_temporal_matches_reference_shape():
    grouping = temporal_grouping(10, 69)
    assert grouping.group_count == 10
    assert all(len(cells) == 69 for _, cells in grouping.groups)
    assert grouping.names == [f"t{t}" for t in range(10)]


def test_temporal_single_instant():
    grouping = temporal_grouping(1, 5)
    assert grouping.group_count == 1
    assert len(grouping.groups[0][1]) == 5


def test_temporal_enumeration():
    grouping = temporal_grouping(3, 2)
    assert [cells for _, cells in grouping.groups] == [
        frozenset({(0, 0), (0, 1)}),
        frozenset({(1, 0), (1, 1)}),
        frozenset({(2, 0), (2, 1)}),
    ]


def test_temporal_rejects_zero_sizes():
    with pytest.raises(InvalidDimensions):
        temporal_grouping(0, 5)
    with pytest.raises(InvalidDimensions):
        temporal_grouping(5, 0)


def test_feature_transpose_of_temporal():
    grouping = feature_grouping(10, 69)
    assert grouping.group_count == 69
    assert all(len(cells) == 10 for _, cells in grouping.groups)


def test_feature_single_column():
    grouping = feature_grouping(4, 1)
    assert grouping.group_count == 1
    assert len(grouping.groups[0][1]) == 4


def test_feature_enumeration_disjoint_cover():
    grouping = feature_grouping(2, 3)
    cells = [c for _, cs in grouping.groups for c in cs]
    assert len(cells) == len(set(cells)) == 6
    assert all(len(cs) == 2 for _, cs in grouping.groups)


def test_feature_names_from_columns():
    grouping = feature_grouping(2, 3, names=["a", "b", "c"])
    assert grouping.names == ["a", "b", "c"]


def test_multifeature_source_level_counts():
    grouping = multifeature_grouping(10, plant_feature_map(), level="source")
    assert grouping.group_count == 44
    assert grouping.feature_count == 69


def test_multifeature_unit_level_counts():
    grouping = multifeature_grouping(10, plant_feature_map(), level="unit")
    assert grouping.group_count == 6


def test_multifeature_one_hot_siblings_merge():
    fm = FeatureMap(
        (
            FeatureMapEntry(0, "valve", "p1"),
            FeatureMapEntry(1, "valve", "p1"),
        )
    )
    grouping = multifeature_grouping(3, fm, level="source")
    assert grouping.group_count == 1
    assert len(grouping.groups[0][1]) == 6


def test_multifeature_with_one_unit_per_feature_equals_feature_grouping():
    fm = FeatureMap.single_unit_per_source([f"c{i}" for i in range(5)])
    by_unit = multifeature_grouping(4, fm, level="unit")
    by_feature = feature_grouping(4, 5)
    assert {cells for _, cells in by_unit.groups} == {
        cells for _, cells in by_feature.groups
    }


def test_feature_map_requires_full_coverage():
    with pytest.raises(IncompleteFeatureMap):
        FeatureMap((FeatureMapEntry(0, "a", "a"), FeatureMapEntry(2, "b", "b")))


def test_grouping_rejects_overlap_and_holes():
    with pytest.raises(ValueError):
        Grouping(
            window_size=1,
            feature_count=2,
            groups=(("a", frozenset({(0, 0)})), ("b", frozenset({(0, 0)}))),
            strategy="feature",
        )
    with pytest.raises(ValueError):
        Grouping(
            window_size=1,
            feature_count=2,
            groups=(("a", frozenset({(0, 0)})),),
            strategy="feature",
        )


def test_grouping_construction_is_order_stable():
    a = multifeature_grouping(5, plant_feature_map(), level="source")
    b = multifeature_grouping(5, plant_feature_map(), level="source")
    assert a.names == b.names
    assert a.groups == b.groups


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=1, max_value=12), st.integers(min_value=1, max_value=12))
def test_partition_property_by_cell_counting(w, f):
    for grouping in (temporal_grouping(w, f), feature_grouping(w, f)):
        assert sum(len(cells) for _, cells in grouping.groups) == w * f
        union = set().union(*(cells for _, cells in grouping.groups))
        assert len(union) == w * f


def test_group_map_loader_custom_partition(tmp_path):
    fm = FeatureMap(
        (
            FeatureMapEntry(0, "s1", "p1"),
            FeatureMapEntry(1, "s2", "p1"),
            FeatureMapEntry(2, "s2", "p1"),
            FeatureMapEntry(3, "s3", "p2"),
        )
    )
    doc = {"level": "custom", "groups": {"left": ["s1", "s2"], "right": ["s3"]}}
    path = tmp_path / "groups.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    grouping = grouping_from_group_map(path, fm, window_size=2)
    assert grouping.names == ["left", "right"]
    assert len(grouping.groups[0][1]) == 6  # s1 + two s2 siblings, 2 instants
    assert len(grouping.groups[1][1]) == 2


def test_group_map_loader_rejects_unknown_and_missing_columns():
    fm = FeatureMap.single_unit_per_source(["a", "b"])
    with pytest.raises(IncompleteFeatureMap):
        grouping_from_group_map(
            {"level": "custom", "groups": {"g": ["a", "zzz"]}}, fm, window_size=1
        )
    with pytest.raises(IncompleteFeatureMap):
        grouping_from_group_map(
            {"level": "custom", "groups": {"g": ["a"]}}, fm, window_size=1
        )


def test_grouping_permuted_preserves_partition():
    grouping = feature_grouping(2, 4)
    permuted = grouping.permuted([3, 1, 0, 2])
    assert permuted.names == ["f3", "f1", "f0", "f2"]
    assert {c for _, cs in permuted.groups for c in cs} == {
        c for _, cs in grouping.groups for c in cs
    }
