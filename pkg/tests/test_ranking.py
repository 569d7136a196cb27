from __future__ import annotations

import numpy as np
import pytest

from groupshap.errors import (
    AllZeroAttributionsWarning,
    EmptyEventWindow,
    UnknownTruthName,
)
from groupshap.explainer import AttributionFrame
from groupshap.ranking import (
    localization_score,
    normalize_shares,
    rank_sources,
)


def frame(attributions, origin=0, prediction=0.9, baseline=0.1):
    return AttributionFrame(
        window_origin=origin,
        prediction=prediction,
        baseline=baseline,
        attributions=np.asarray(attributions, dtype=float),
        method="exact",
        budget=None,
        seed=0,
    )


def test_shares_simple_arithmetic():
    assert normalize_shares(frame([3.0, 1.0, 0.0])) == pytest.approx([0.75, 0.25, 0.0])


def test_shares_absolute_convention_with_mixed_signs():
    assert normalize_shares(frame([2.0, -2.0])) == pytest.approx([0.5, 0.5])


def test_shares_signed_convention_available():
    shares = normalize_shares(frame([3.0, -1.0]), convention="signed")
    assert shares == pytest.approx([1.5, -0.5])


def test_shares_single_group():
    assert normalize_shares(frame([0.4])) == pytest.approx([1.0])


def test_shares_sum_to_one():
    rng = np.random.default_rng(0)
    for _ in range(20):
        shares = normalize_shares(frame(rng.standard_normal(7)))
        assert shares.sum() == pytest.approx(1.0, abs=1e-12)
        assert (shares >= 0).all()


def test_all_zero_attributions_warn_and_go_uniform():
    with pytest.warns(AllZeroAttributionsWarning):
        shares = normalize_shares(frame([0.0, 0.0, 0.0, 0.0]))
    assert shares == pytest.approx([0.25] * 4)


def test_rank_sources_tie_break_by_group_index():
    frames = [frame([1.0, 0.0], origin=0), frame([0.0, 1.0], origin=1)]
    report = rank_sources(frames, ["a", "b"])
    shares = {name: share for name, share, _ in report.per_group}
    assert shares == pytest.approx({"a": 0.5, "b": 0.5})
    assert report.rank_of("a") == 1  # tie broken toward the earlier group
    assert report.rank_of("b") == 2
    assert report.window_count == 2


def test_rank_sources_dominant_group_wins():
    rng = np.random.default_rng(1)
    frames = []
    for origin in range(10):
        attributions = rng.random(4) * 0.1
        attributions[2] = 1.0 + rng.random()
        frames.append(frame(attributions, origin=origin))
    report = rank_sources(frames, ["g0", "g1", "g2", "g3"])
    assert report.top(1) == ["g2"]


def test_rank_sources_invariant_to_frame_order():
    rng = np.random.default_rng(2)
    frames = [frame(rng.standard_normal(5), origin=o) for o in range(8)]
    forward = rank_sources(frames, [f"g{i}" for i in range(5)])
    backward = rank_sources(frames[::-1], [f"g{i}" for i in range(5)])
    assert forward.per_group == backward.per_group


def test_shares_invariant_under_positive_scaling():
    rng = np.random.default_rng(3)
    attributions = rng.standard_normal(6)
    base = normalize_shares(frame(attributions))
    scaled = normalize_shares(frame(attributions * 37.5))
    assert scaled == pytest.approx(base, abs=1e-12)


def test_argmax_preserved_by_shares():
    rng = np.random.default_rng(4)
    for _ in range(20):
        attributions = rng.standard_normal(6)
        shares = normalize_shares(frame(attributions))
        assert int(np.argmax(shares)) == int(np.argmax(np.abs(attributions)))


def test_rank_sources_empty_event():
    with pytest.raises(EmptyEventWindow):
        rank_sources([], ["a"])


def test_report_to_dict_shape():
    report = rank_sources([frame([0.2, 0.8])], ["low", "high"])
    doc = report.to_dict()
    assert doc["windows"] == 1
    assert doc["convention"] == "absolute"
    assert doc["ranking"][0] == {"name": "high", "share": 0.8, "rank": 1}


def test_localization_score_counting():
    def report_with_truth_at(rank):
        # Groups before the truth group score higher, so the truth group
        # lands exactly at the requested rank.
        attributions = [2.0 if i < rank - 1 else 0.0 for i in range(4)]
        attributions[rank - 1] = 1.0
        return rank_sources([frame(attributions)], ["g0", "g1", "g2", "g3"])

    always_first = [report_with_truth_at(1) for _ in range(5)]
    assert localization_score(always_first, ["g0"] * 5, k=1) == 1.0

    always_second = [report_with_truth_at(2) for _ in range(4)]
    truth = ["g1"] * 4
    assert localization_score(always_second, truth, k=1) == 0.0
    assert localization_score(always_second, truth, k=2) == 1.0


def test_localization_hand_counted_mixed_suite():
    reports = [
        rank_sources([frame([1.0, 0.1, 0.0])], ["a", "b", "c"]),  # a first
        rank_sources([frame([0.1, 1.0, 0.0])], ["a", "b", "c"]),  # b first
        rank_sources([frame([0.5, 0.4, 0.0])], ["a", "b", "c"]),  # a first
        rank_sources([frame([0.0, 0.2, 0.9])], ["a", "b", "c"]),  # c first
        rank_sources([frame([0.3, 0.2, 0.1])], ["a", "b", "c"]),  # a first
    ]
    truth = ["a", "a", "a", "c", "b"]
    assert localization_score(reports, truth, k=1) == pytest.approx(3 / 5)
    assert localization_score(reports, truth, k=2) == pytest.approx(5 / 5)


def test_localization_unknown_truth_name():
    report = rank_sources([frame([1.0, 0.0])], ["a", "b"])
    with pytest.raises(UnknownTruthName):
        localization_score([report], ["zzz"], k=1)
