from __future__ import annotations

import numpy as np
import pytest

from groupshap.errors import DataError
from groupshap.explainer import AttributionFrame
from groupshap.io import (
    read_encoding_report,
    read_frames,
    read_window_set,
    write_encoding_report,
    write_frames,
    write_window_set,
)
from groupshap.pipeline import TimeSeriesTable, WindowSet, fit_encoding


def test_window_set_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    window_set = WindowSet(
        windows=rng.standard_normal((7, 4, 3)),
        labels=np.array([0, 1, 0, 0, 1, 0, 1], dtype=np.int64),
        origins=np.arange(3, 10, dtype=np.int64),
        stride=2,
    )
    write_window_set(tmp_path / "ws", window_set)
    loaded = read_window_set(tmp_path / "ws")
    assert np.array_equal(loaded.windows, window_set.windows)
    assert loaded.windows.dtype == np.float64
    assert np.array_equal(loaded.labels, window_set.labels)
    assert np.array_equal(loaded.origins, window_set.origins)
    assert loaded.stride == 2


def test_window_set_binary_layout_is_little_endian_row_major(tmp_path):
    windows = np.arange(12, dtype=float).reshape(1, 3, 4)
    write_window_set(
        tmp_path / "ws",
        WindowSet(windows=windows, labels=np.zeros(1, dtype=np.int64),
                  origins=np.array([2]), stride=1),
    )
    raw = (tmp_path / "ws" / "windows.bin").read_bytes()
    assert np.array_equal(
        np.frombuffer(raw, dtype="<f8"), np.arange(12, dtype=float)
    )


def test_window_set_truncated_binary_rejected(tmp_path):
    windows = np.zeros((2, 2, 2))
    write_window_set(
        tmp_path / "ws",
        WindowSet(windows=windows, labels=np.zeros(2, dtype=np.int64),
                  origins=np.arange(2), stride=1),
    )
    binary = tmp_path / "ws" / "windows.bin"
    binary.write_bytes(binary.read_bytes()[:-8])
    with pytest.raises(DataError):
        read_window_set(tmp_path / "ws")


def test_missing_window_set_rejected(tmp_path):
    with pytest.raises(DataError):
        read_window_set(tmp_path / "nothing")


def test_encoding_report_round_trip(tmp_path):
    table = TimeSeriesTable(
        names=("a", "s"),
        columns={"a": np.array([1.0, 2.0, 3.0]), "s": ("x", "y", "x")},
        kinds={"a": "continuous", "s": "categorical"},
    )
    report = fit_encoding(table, np.arange(3), mode="minmax", dropped_columns=["flat"])
    write_encoding_report(tmp_path / "encoding.json", report)
    loaded = read_encoding_report(tmp_path / "encoding.json")
    assert loaded == report


def test_frames_round_trip(tmp_path):
    frames = [
        AttributionFrame(
            window_origin=i,
            prediction=0.5 + i,
            baseline=0.25,
            attributions=np.array([0.1 * i, -0.2]),
            method="approximate",
            budget=40,
            seed=3,
        )
        for i in range(3)
    ]
    meta = {"method": "approximate", "budget": 40, "seed": 3, "K": 10}
    write_frames(tmp_path / "frames.json", ["g0", "g1"], frames, meta)
    names, loaded, loaded_meta = read_frames(tmp_path / "frames.json")
    assert names == ["g0", "g1"]
    assert loaded_meta == meta
    for original, parsed in zip(frames, loaded):
        assert parsed.window_origin == original.window_origin
        assert np.array_equal(parsed.attributions, original.attributions)
        assert parsed.prediction == original.prediction
