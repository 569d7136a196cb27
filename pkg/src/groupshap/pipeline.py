"""Raw multivariate time series to model-ready windows.

Stages, in order: load a CSV table (with optional per-column kind sidecar),
split rows into train/validation/test runs with anti-leakage padding, prune
zero-variance columns, fit and apply encoding plus normalization with
train-row statistics only, slide windows over each split's contiguous runs,
and optionally draw a stratified background sample from the training
windows.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from math import floor
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import (
    DataError,
    DegenerateScale,
    InsufficientWindows,
    SegmentTooShort,
)
from .grouping import FeatureMap, FeatureMapEntry
from .valuefn import BackgroundSet

UNSEEN_CATEGORY = "<unseen>"


@dataclass(frozen=True)
class TimeSeriesTable:
    """A named multivariate series with optional binary labels."""

    names: tuple[str, ...]
    columns: Mapping[str, np.ndarray | tuple[str, ...]]
    kinds: Mapping[str, str]  # "continuous" | "categorical"
    labels: np.ndarray | None = None
    timestamps: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        lengths = {name: len(self.columns[name]) for name in self.names}
        if len(set(lengths.values())) > 1:
            raise DataError(f"columns have unequal lengths: {lengths}")
        if self.labels is not None and len(self.labels) != self.row_count:
            raise DataError("label series length does not match columns")

    @property
    def row_count(self) -> int:
        return len(self.columns[self.names[0]]) if self.names else 0

    def drop(self, names: Sequence[str]) -> "TimeSeriesTable":
        dropped = set(names)
        return replace(
            self,
            names=tuple(n for n in self.names if n not in dropped),
            columns={n: v for n, v in self.columns.items() if n not in dropped},
            kinds={n: k for n, k in self.kinds.items() if n not in dropped},
        )


@dataclass(frozen=True)
class SplitSpec:
    """Segmented train/validation/test split with anti-leakage padding.

    Within each segment the subsets are laid out contiguously in
    train/validation/test order. Subset lengths are ``floor(fraction *
    segment_length)`` with the test subset absorbing the remainder, and the
    ``padding`` rows discarded between consecutive subsets are taken from
    the end of the earlier subset.
    """

    segment_length: int
    train_fraction: float
    val_fraction: float
    padding: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.train_fraction < 1 or not 0 < self.val_fraction < 1:
            raise SegmentTooShort(
                f"fractions must lie in (0,1): {self.train_fraction}, {self.val_fraction}"
            )
        if self.train_fraction + self.val_fraction >= 1:
            raise SegmentTooShort("train + validation fractions leave no test data")
        if self.padding < 0:
            raise SegmentTooShort(f"padding must be >= 0, got {self.padding}")
        if self.segment_length <= 2 * self.padding + 3:
            raise SegmentTooShort(
                f"segment_length={self.segment_length} cannot fit three non-empty "
                f"subsets with padding={self.padding}"
            )


def load_table(
    path: str | Path,
    schema_path: str | Path | None = None,
    clean: Callable[[TimeSeriesTable], TimeSeriesTable] | None = None,
) -> TimeSeriesTable:
    """Load a headered CSV into a table, autodetecting column kinds.

    Columns named ``timestamp`` and ``label`` are split off. A JSON sidecar
    of the form ``{"columns": {"<name>": "continuous" | "categorical"}}``
    overrides autodetection (parseable-as-number means continuous). Rows
    with values that fail to parse under the resolved kind are rejected with
    their file line numbers; no imputation is attempted. ``clean`` is a
    pass-through hook applied to the loaded table.
    """
    path = Path(path)
    overrides: dict[str, str] = {}
    if schema_path is not None:
        sidecar = json.loads(Path(schema_path).read_text(encoding="utf-8"))
        overrides = dict(sidecar.get("columns", {}))
        bad = {k for k, v in overrides.items() if v not in ("continuous", "categorical")}
        if bad:
            raise DataError(f"schema sidecar has invalid kinds for {sorted(bad)}")

    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        rows = list(reader)

    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names in header")
    ragged = [i + 2 for i, row in enumerate(rows) if len(row) != len(header)]
    if ragged:
        raise DataError(f"{path}: ragged rows at lines {ragged[:10]}")

    raw = {name: [row[i] for row in rows] for i, name in enumerate(header)}
    timestamps = tuple(raw.pop("timestamp")) if "timestamp" in raw else None

    labels = None
    if "label" in raw:
        label_values = raw.pop("label")
        parsed = []
        bad_lines = []
        for i, v in enumerate(label_values):
            try:
                as_int = int(float(v))
            except ValueError:
                bad_lines.append(i + 2)
                continue
            if as_int not in (0, 1) or float(v) != as_int:
                bad_lines.append(i + 2)
            else:
                parsed.append(as_int)
        if bad_lines:
            raise DataError(f"{path}: non-binary labels at lines {bad_lines[:10]}")
        labels = np.asarray(parsed, dtype=np.int64)

    names = tuple(n for n in header if n not in ("timestamp", "label"))
    if not names:
        raise DataError(f"{path}: no feature columns besides timestamp/label")
    columns: dict[str, np.ndarray | tuple[str, ...]] = {}
    kinds: dict[str, str] = {}
    for name in names:
        values = raw[name]
        kind = overrides.get(name)
        if kind is None:
            kind = "continuous" if all(_parses(v) for v in values) else "categorical"
        if kind == "continuous":
            bad_lines = [i + 2 for i, v in enumerate(values) if not _parses(v)]
            if bad_lines:
                raise DataError(
                    f"{path}: column {name!r} has non-numeric values at "
                    f"lines {bad_lines[:10]}"
                )
            parsed = np.asarray([float(v) for v in values], dtype=float)
            # "nan"/"inf" parse as floats but poison normalization later.
            bad_lines = [i + 2 for i, v in enumerate(parsed) if not np.isfinite(v)]
            if bad_lines:
                raise DataError(
                    f"{path}: column {name!r} has non-finite values at "
                    f"lines {bad_lines[:10]}"
                )
            columns[name] = parsed
        else:
            columns[name] = tuple(values)
        kinds[name] = kind

    table = TimeSeriesTable(
        names=names, columns=columns, kinds=kinds, labels=labels, timestamps=timestamps
    )
    return clean(table) if clean is not None else table


def _parses(value: str) -> bool:
    try:
        float(value)
    except ValueError:
        return False
    return True


def split_with_padding(
    table: TimeSeriesTable, spec: SplitSpec
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Partition row indices into train/validation/test with padding gaps.

    Rows are processed segment by segment; a final partial segment follows
    the same fractional rule, except that segments too short to fit three
    non-empty subsets plus padding go wholly to training rather than being
    discarded.
    """
    total = table.row_count
    if total < 1:
        raise DataError("cannot split an empty table")
    train: list[np.ndarray] = []
    val: list[np.ndarray] = []
    test: list[np.ndarray] = []
    for start in range(0, total, spec.segment_length):
        length = min(spec.segment_length, total - start)
        if length < 2 * spec.padding + 3:
            train.append(np.arange(start, start + length))
            continue
        train_total = floor(spec.train_fraction * length)
        val_total = floor(spec.val_fraction * length)
        train_kept = max(train_total - spec.padding, 0)
        val_kept = max(val_total - spec.padding, 0)
        train.append(np.arange(start, start + train_kept))
        val.append(np.arange(start + train_total, start + train_total + val_kept))
        test.append(np.arange(start + train_total + val_total, start + length))
    empty = np.array([], dtype=np.int64)
    return (
        np.concatenate(train) if train else empty,
        np.concatenate(val) if val else empty,
        np.concatenate(test) if test else empty,
    )


def prune_zero_variance(
    table: TimeSeriesTable, train_rows: np.ndarray
) -> tuple[TimeSeriesTable, list[str]]:
    """Drop columns that are constant on the training rows."""
    if len(train_rows) == 0:
        raise DataError("prune requires a non-empty training row set")
    dropped = []
    for name in table.names:
        values = table.columns[name]
        if table.kinds[name] == "continuous":
            train_values = np.asarray(values)[train_rows]
            constant = bool(np.all(train_values == train_values[0]))
        else:
            train_values = [values[i] for i in train_rows]
            constant = len(set(train_values)) == 1
        if constant:
            dropped.append(name)
    return table.drop(dropped), dropped


@dataclass(frozen=True)
class EncodingReport:
    """Fitted encoding: train-row statistics plus full column provenance.

    Categorical columns encode as one indicator per training-observed
    category beyond the first (the first category is the all-zeros
    reference) plus a trailing unseen-category indicator, so each column
    contributes exactly as many encoded features as it has observed
    categories.
    """

    mode: str  # "standard" | "minmax"
    dropped_columns: tuple[str, ...]
    continuous: tuple[tuple[str, float, float], ...]  # (name, mean, std) | (name, min, max)
    categorical: tuple[tuple[str, tuple[str, ...]], ...]  # (name, observed categories)
    encoded_feature_count: int
    feature_map: FeatureMap
    encoded_names: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "dropped_columns": list(self.dropped_columns),
            "continuous": [
                {"name": n, "stats": [a, b]} for n, a, b in self.continuous
            ],
            "categorical": [
                {"name": n, "categories": list(cats)} for n, cats in self.categorical
            ],
            "encoded_feature_count": self.encoded_feature_count,
            "encoded_names": list(self.encoded_names),
            "feature_map": [
                {"index": e.index, "source": e.source, "unit": e.unit}
                for e in self.feature_map.entries
            ],
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "EncodingReport":
        return cls(
            mode=doc["mode"],
            dropped_columns=tuple(doc["dropped_columns"]),
            continuous=tuple(
                (c["name"], float(c["stats"][0]), float(c["stats"][1]))
                for c in doc["continuous"]
            ),
            categorical=tuple(
                (c["name"], tuple(c["categories"])) for c in doc["categorical"]
            ),
            encoded_feature_count=int(doc["encoded_feature_count"]),
            encoded_names=tuple(doc["encoded_names"]),
            feature_map=FeatureMap(
                tuple(
                    FeatureMapEntry(int(e["index"]), e["source"], e["unit"])
                    for e in doc["feature_map"]
                )
            ),
        )


def fit_encoding(
    table: TimeSeriesTable,
    train_rows: np.ndarray,
    mode: str = "standard",
    dropped_columns: Sequence[str] = (),
    units: Mapping[str, str] | None = None,
) -> EncodingReport:
    """Fit normalization statistics and category lists on training rows only.

    Raises:
        DegenerateScale: a continuous column has zero spread on the training
            rows; such columns should have been pruned.
    """
    if mode not in ("standard", "minmax"):
        raise DataError(f"unknown normalization mode {mode!r}")
    if len(train_rows) == 0:
        raise DataError("encoding requires a non-empty training row set")
    units = units or {}
    continuous: list[tuple[str, float, float]] = []
    categorical: list[tuple[str, tuple[str, ...]]] = []
    entries: list[FeatureMapEntry] = []
    encoded_names: list[str] = []
    index = 0
    for name in table.names:
        unit = units.get(name, name)
        if table.kinds[name] == "continuous":
            train_values = np.asarray(table.columns[name])[train_rows]
            if mode == "standard":
                center, scale = float(train_values.mean()), float(train_values.std())
            else:
                center, scale = float(train_values.min()), float(
                    train_values.max() - train_values.min()
                )
            if scale == 0.0:
                raise DegenerateScale(
                    f"column {name!r} has zero spread on training rows; "
                    "it should have been pruned"
                )
            if mode == "standard":
                continuous.append((name, center, scale))
            else:
                continuous.append((name, center, center + scale))
            entries.append(FeatureMapEntry(index, name, unit))
            encoded_names.append(name)
            index += 1
        else:
            observed = tuple(sorted({table.columns[name][i] for i in train_rows}))
            categorical.append((name, observed))
            for category in observed[1:]:
                entries.append(FeatureMapEntry(index, name, unit))
                encoded_names.append(f"{name}={category}")
                index += 1
            entries.append(FeatureMapEntry(index, name, unit))
            encoded_names.append(f"{name}={UNSEEN_CATEGORY}")
            index += 1
    return EncodingReport(
        mode=mode,
        dropped_columns=tuple(dropped_columns),
        continuous=tuple(continuous),
        categorical=tuple(categorical),
        encoded_feature_count=index,
        feature_map=FeatureMap(tuple(entries)),
        encoded_names=tuple(encoded_names),
    )


def apply_encoding(table: TimeSeriesTable, report: EncodingReport) -> np.ndarray:
    """Encode every row of the table with the fitted statistics."""
    total = table.row_count
    matrix = np.zeros((total, report.encoded_feature_count), dtype=float)
    continuous = {name: (a, b) for name, a, b in report.continuous}
    categorical = dict(report.categorical)
    index = 0
    for name in table.names:
        if name in continuous:
            a, b = continuous[name]
            values = np.asarray(table.columns[name], dtype=float)
            if report.mode == "standard":
                matrix[:, index] = (values - a) / b
            else:
                matrix[:, index] = (values - a) / (b - a)
            index += 1
        elif name in categorical:
            observed = categorical[name]
            position = {cat: k for k, cat in enumerate(observed[1:])}
            width = len(observed)  # len(observed)-1 indicators + 1 unseen
            values = table.columns[name]
            for row, value in enumerate(values):
                if value == observed[0]:
                    continue
                slot = position.get(value)
                if slot is None:
                    matrix[row, index + width - 1] = 1.0  # unseen indicator
                else:
                    matrix[row, index + slot] = 1.0
            index += width
        else:
            raise DataError(f"column {name!r} missing from the encoding report")
    return matrix


def encode_and_normalize(
    table: TimeSeriesTable,
    train_rows: np.ndarray,
    mode: str = "standard",
    dropped_columns: Sequence[str] = (),
    units: Mapping[str, str] | None = None,
) -> tuple[np.ndarray, EncodingReport]:
    """Fit on training rows, then encode the whole table."""
    report = fit_encoding(table, train_rows, mode, dropped_columns, units)
    return apply_encoding(table, report), report


@dataclass(frozen=True)
class WindowSet:
    """Sliding windows with per-window labels and origin row indices.

    ``origins[i]`` is the global row index of window i's last instant, and
    each window's label is the raw label at that instant.
    """

    windows: np.ndarray  # (N, w, F)
    labels: np.ndarray  # (N,)
    origins: np.ndarray  # (N,)
    stride: int

    def __post_init__(self) -> None:
        if self.windows.ndim != 3:
            raise DataError(f"windows must be (N, w, F), got {self.windows.shape}")
        n = len(self.windows)
        if len(self.labels) != n or len(self.origins) != n:
            raise DataError("labels and origins must match the window count")
        if self.stride < 1:
            raise DataError(f"stride must be >= 1, got {self.stride}")

    def __len__(self) -> int:
        return len(self.windows)

    @property
    def window_size(self) -> int:
        return int(self.windows.shape[1])

    @property
    def feature_count(self) -> int:
        return int(self.windows.shape[2])


def contiguous_runs(rows: np.ndarray) -> list[np.ndarray]:
    """Maximal runs of consecutive indices within a sorted row set."""
    rows = np.sort(np.asarray(rows, dtype=np.int64))
    if len(rows) == 0:
        return []
    breaks = np.flatnonzero(np.diff(rows) != 1) + 1
    return np.split(rows, breaks)


def make_windows(
    matrix: np.ndarray,
    rows: np.ndarray,
    labels: np.ndarray | None,
    window_size: int,
    stride: int,
) -> WindowSet:
    """Slide windows over each contiguous run of the row set.

    Runs shorter than ``window_size`` yield no windows. A run of length L
    yields ``floor((L - window_size) / stride) + 1`` windows.
    """
    if window_size < 1:
        raise DataError(f"window_size must be >= 1, got {window_size}")
    if stride < 1:
        raise DataError(f"stride must be >= 1, got {stride}")
    windows: list[np.ndarray] = []
    window_labels: list[int] = []
    origins: list[int] = []
    for run in contiguous_runs(rows):
        length = len(run)
        if length < window_size:
            continue
        for position in range(window_size - 1, length, stride):
            origin = int(run[position])
            windows.append(matrix[origin - window_size + 1 : origin + 1])
            window_labels.append(int(labels[origin]) if labels is not None else 0)
            origins.append(origin)
    feature_count = matrix.shape[1]
    return WindowSet(
        windows=(
            np.stack(windows)
            if windows
            else np.empty((0, window_size, feature_count))
        ),
        labels=np.asarray(window_labels, dtype=np.int64),
        origins=np.asarray(origins, dtype=np.int64),
        stride=stride,
    )


def sample_background(
    window_set: WindowSet,
    size: int,
    stratify: bool = True,
    seed: int = 0,
) -> BackgroundSet:
    """Draw a background sample from training windows, optionally stratified.

    With stratification the anomalous share of the sample matches the
    training share up to one window of rounding. Selection is uniform
    without replacement and deterministic for a given seed.
    """
    total = len(window_set)
    if size < 1 or size > total:
        raise InsufficientWindows(
            f"requested background of {size} from {total} windows"
        )
    rng = np.random.default_rng(seed)
    if stratify:
        anomalous = np.flatnonzero(window_set.labels == 1)
        normal = np.flatnonzero(window_set.labels != 1)
        want_anomalous = int(round(size * len(anomalous) / total))
        want_anomalous = min(want_anomalous, len(anomalous))
        want_normal = size - want_anomalous
        if want_normal > len(normal):
            want_normal = len(normal)
            want_anomalous = size - want_normal
        picked = np.concatenate(
            [
                rng.choice(anomalous, size=want_anomalous, replace=False),
                rng.choice(normal, size=want_normal, replace=False),
            ]
        )
    else:
        picked = rng.choice(total, size=size, replace=False)
    picked = np.sort(picked.astype(np.int64))
    return BackgroundSet(
        windows=window_set.windows[picked], source="sampled-from-training"
    )
