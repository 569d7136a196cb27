"""Window-by-group attribution heatmap with a prediction overlay.

The SVG variant draws one cell per (group, window) on a symmetric diverging
scale anchored at zero: deep red at +a, white at zero, deep blue at -a, with
linear interpolation inside each half. Sign carries meaning (anomalous
versus normal influence), so the scale is never anchored to the data minimum
or maximum. Cells with negligible magnitude stay unfilled but are still
emitted (with an ``empty`` class) so the cell count is checkable. A purple
polyline tracks the predicted anomaly probability against a right-hand axis,
crossed by a single dashed threshold line.

The CSV variant emits the same matrix: one header row of window origins, one
row per group, and a trailing ``prediction`` row, all serialized with 17
significant digits so parsing reproduces the floats exactly.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .errors import EmptyFrames
from .explainer import AttributionFrame

DEEP_RED = (178, 24, 43)
DEEP_BLUE = (33, 102, 172)
WHITE = (255, 255, 255)
NEGLIGIBLE_FRACTION = 0.005


@dataclass(frozen=True)
class HeatmapSpec:
    """Rendering request: frames in display order plus style knobs."""

    frames: tuple[AttributionFrame, ...]
    group_names: tuple[str, ...]
    threshold: float = 0.5
    color_scale: float | None = None  # symmetric [-a, +a]; None means max |phi|
    cell_size: int = 14
    kind: str = "svg"  # "svg" | "csv"

    def __post_init__(self) -> None:
        if not self.frames:
            raise EmptyFrames("heatmap requires at least one frame")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must lie in [0, 1], got {self.threshold}")
        if self.color_scale is not None and self.color_scale <= 0:
            raise ValueError(f"color scale must be positive, got {self.color_scale}")
        if self.kind not in ("svg", "csv"):
            raise ValueError(f"kind must be 'svg' or 'csv', got {self.kind!r}")
        for frame in self.frames:
            if len(frame.attributions) != len(self.group_names):
                raise ValueError(
                    f"frame at origin {frame.window_origin} has "
                    f"{len(frame.attributions)} attributions for "
                    f"{len(self.group_names)} groups"
                )

    def matrix(self) -> np.ndarray:
        """Attributions as (groups, windows)."""
        return np.stack([f.attributions for f in self.frames], axis=1)

    def scale(self) -> float:
        if self.color_scale is not None:
            return float(self.color_scale)
        peak = float(np.max(np.abs(self.matrix())))
        return peak if peak > 0 else 1.0


def diverging_color(value: float, scale: float) -> str | None:
    """Fill color for one cell, or None when the value is negligible."""
    if abs(value) < NEGLIGIBLE_FRACTION * scale:
        return None
    t = min(abs(value) / scale, 1.0)
    anchor = DEEP_RED if value > 0 else DEEP_BLUE
    channels = tuple(int(round(255 + t * (c - 255))) for c in anchor)
    return f"rgb({channels[0]},{channels[1]},{channels[2]})"


def render(spec: HeatmapSpec) -> bytes:
    """Render the spec to SVG or CSV bytes."""
    return _render_svg(spec) if spec.kind == "svg" else _render_csv(spec)


def _render_csv(spec: HeatmapSpec) -> bytes:
    matrix = spec.matrix()
    out = io.StringIO()
    origins = [str(f.window_origin) for f in spec.frames]
    out.write(",".join(["group"] + origins) + "\n")
    for g, name in enumerate(spec.group_names):
        cells = [f"{v:.17g}" for v in matrix[g]]
        out.write(",".join([_csv_field(name)] + cells) + "\n")
    predictions = [f"{f.prediction:.17g}" for f in spec.frames]
    out.write(",".join(["prediction"] + predictions) + "\n")
    return out.getvalue().encode("utf-8")


def _csv_field(name: str) -> str:
    if any(ch in name for ch in ',"\n'):
        return '"' + name.replace('"', '""') + '"'
    return name


def _render_svg(spec: HeatmapSpec) -> bytes:
    matrix = spec.matrix()
    scale = spec.scale()
    cell = spec.cell_size
    n_groups, n_windows = matrix.shape

    left = 10 + 7 * max((len(name) for name in spec.group_names), default=1)
    top = 12
    right = 46
    bottom = 34
    plot_w = n_windows * cell
    plot_h = n_groups * cell
    width = left + plot_w + right
    height = top + plot_h + bottom

    parts: list[str] = []
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
    )
    parts.append(
        "<style>text{font-family:monospace;font-size:10px;}"
        ".cell.empty{fill:none;}</style>"
    )

    for g in range(n_groups):
        for w in range(n_windows):
            x = left + w * cell
            y = top + g * cell
            color = diverging_color(float(matrix[g, w]), scale)
            if color is None:
                parts.append(
                    f'<rect class="cell empty" x="{x}" y="{y}" '
                    f'width="{cell}" height="{cell}"/>'
                )
            else:
                parts.append(
                    f'<rect class="cell" x="{x}" y="{y}" width="{cell}" '
                    f'height="{cell}" fill="{color}"/>'
                )

    for g, name in enumerate(spec.group_names):
        y = top + g * cell + cell * 0.72
        parts.append(f'<text x="4" y="{y:.1f}">{escape(name)}</text>')

    label_step = max(1, n_windows // 8)
    for w in range(0, n_windows, label_step):
        x = left + w * cell + cell * 0.2
        parts.append(
            f'<text x="{x:.1f}" y="{top + plot_h + 14}">'
            f"{spec.frames[w].window_origin}</text>"
        )

    def probability_y(p: float) -> float:
        clamped = min(max(p, 0.0), 1.0)
        return top + plot_h * (1.0 - clamped)

    threshold_y = probability_y(spec.threshold)
    parts.append(
        f'<line class="threshold" x1="{left}" y1="{threshold_y:.2f}" '
        f'x2="{left + plot_w}" y2="{threshold_y:.2f}" stroke="#555" '
        f'stroke-dasharray="5 4"/>'
    )

    points = " ".join(
        f"{left + (w + 0.5) * cell:.2f},{probability_y(frame.prediction):.2f}"
        for w, frame in enumerate(spec.frames)
    )
    parts.append(
        f'<polyline class="prediction" points="{points}" fill="none" '
        f'stroke="purple" stroke-width="1.5"/>'
    )

    for tick in (0.0, 0.5, 1.0):
        parts.append(
            f'<text x="{left + plot_w + 6}" y="{probability_y(tick) + 3:.1f}">'
            f"{tick:.1f}</text>"
        )

    parts.append("</svg>")
    return "\n".join(parts).encode("utf-8")


def parse_heatmap_csv(data: bytes) -> tuple[list[str], list[int], np.ndarray, np.ndarray]:
    """Inverse of the CSV renderer: (group names, origins, matrix, predictions)."""
    import csv as _csv

    rows = list(_csv.reader(io.StringIO(data.decode("utf-8"))))
    header, *body = rows
    origins = [int(v) for v in header[1:]]
    if body[-1][0] != "prediction":
        raise ValueError("heatmap CSV is missing its trailing prediction row")
    predictions = np.asarray([float(v) for v in body[-1][1:]])
    names = [row[0] for row in body[:-1]]
    matrix = np.asarray([[float(v) for v in row[1:]] for row in body[:-1]])
    return names, origins, matrix, predictions
