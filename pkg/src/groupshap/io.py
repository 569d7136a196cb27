"""On-disk formats: window-set directories, encoding reports, frame files.

A window set serializes as a directory holding ``windows.bin`` (row-major
little-endian float64) and ``windows.json`` (shape header plus labels,
origins, and stride). Attribution frames serialize as a single JSON document
carrying the group names and run metadata alongside the per-window records.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DataError
from .explainer import AttributionFrame
from .pipeline import EncodingReport, WindowSet


def write_window_set(directory: str | Path, window_set: WindowSet) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    data = np.ascontiguousarray(window_set.windows, dtype="<f8")
    (directory / "windows.bin").write_bytes(data.tobytes(order="C"))
    header = {
        "shape": list(window_set.windows.shape),
        "dtype": "<f8",
        "order": "C",
        "stride": window_set.stride,
        "labels": [int(v) for v in window_set.labels],
        "origins": [int(v) for v in window_set.origins],
    }
    (directory / "windows.json").write_text(
        json.dumps(header, indent=1), encoding="utf-8"
    )


def read_window_set(directory: str | Path) -> WindowSet:
    directory = Path(directory)
    try:
        header = json.loads((directory / "windows.json").read_text(encoding="utf-8"))
        raw = (directory / "windows.bin").read_bytes()
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read window set at {directory}: {exc}") from exc
    shape = tuple(int(v) for v in header["shape"])
    expected = int(np.prod(shape)) * 8
    if len(raw) != expected:
        raise DataError(
            f"{directory}: windows.bin holds {len(raw)} bytes, header implies {expected}"
        )
    windows = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    return WindowSet(
        windows=windows,
        labels=np.asarray(header["labels"], dtype=np.int64),
        origins=np.asarray(header["origins"], dtype=np.int64),
        stride=int(header["stride"]),
    )


def write_encoding_report(path: str | Path, report: EncodingReport) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=1), encoding="utf-8")


def read_encoding_report(path: str | Path) -> EncodingReport:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read encoding report at {path}: {exc}") from exc
    return EncodingReport.from_dict(doc)


def write_frames(
    path: str | Path,
    group_names: list[str],
    frames: list[AttributionFrame],
    meta: dict,
) -> None:
    document = {
        "grouping": list(group_names),
        "frames": [frame.to_dict() for frame in frames],
        "meta": meta,
    }
    Path(path).write_text(json.dumps(document, indent=1), encoding="utf-8")


def read_frames(path: str | Path) -> tuple[list[str], list[AttributionFrame], dict]:
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read frames at {path}: {exc}") from exc
    frames = [AttributionFrame.from_dict(record) for record in document["frames"]]
    return list(document["grouping"]), frames, dict(document.get("meta", {}))
