"""Command-line entry point: preprocess -> explain -> rank -> heatmap.

All commands read one JSON run configuration (``--config``) whose fields
have flag twins; flags win over the file. Every source of randomness is
funneled through the single configured seed, so rerunning a command with
the same configuration and inputs produces byte-identical outputs.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 predictor
error, 5 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys
from pathlib import Path

import numpy as np

from . import heatmap as heatmap_mod
from . import io as io_mod
from .errors import (
    ConfigError,
    DataError,
    GroupShapError,
    PredictorError,
)
from .explainer import ExplainRequest, explain_batch
from .game import CoalitionGame, exact_shapley, exact_shapley_stratified, sampled_shapley, StrataPlan
from .grouping import (
    feature_grouping,
    grouping_from_group_map,
    multifeature_grouping,
    temporal_grouping,
)
from .pipeline import (
    SplitSpec,
    encode_and_normalize,
    load_table,
    make_windows,
    prune_zero_variance,
    sample_background,
    split_with_padding,
)
from .predictors import CountingPredictor, builtin_predictor, spawn_external_predictor
from .ranking import ABSOLUTE, rank_sources
from .valuefn import BackgroundSet

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_PREDICTOR = 4
EXIT_INTERNAL = 5

DEFAULT_CONFIG = {
    "data": None,
    "schema": None,
    "split": {
        "segment_length": 1000,
        "train_fraction": 0.64,
        "val_fraction": 0.16,
        "padding": 50,
    },
    "window_size": 10,
    "stride": 1,
    "normalization": "standard",
    "windows_dir": None,
    "grouping": {"strategy": "temporal", "level": "source", "group_map": None},
    "background": {"path": None, "sample": None, "stratify": True},
    "predictor": {"builtin": None, "params": {}, "exec": None, "timeout_ms": 30000},
    "explain": {"split": "test", "start": 0, "count": None},
    "method": "exact",
    "budget": None,
    "seed": 0,
    "exact_cap": 20,
    "max_batch": 1024,
    "outputs": {"frames": None, "ranking": None, "heatmap": None},
}

# flag destination -> dotted config path
FLAG_PATHS = {
    "data": "data",
    "schema": "schema",
    "segment_length": "split.segment_length",
    "train_fraction": "split.train_fraction",
    "val_fraction": "split.val_fraction",
    "padding": "split.padding",
    "window_size": "window_size",
    "stride": "stride",
    "normalization": "normalization",
    "windows_dir": "windows_dir",
    "grouping_strategy": "grouping.strategy",
    "grouping_level": "grouping.level",
    "group_map": "grouping.group_map",
    "background_path": "background.path",
    "background_sample": "background.sample",
    "background_stratify": "background.stratify",
    "predictor_builtin": "predictor.builtin",
    "predictor_params": "predictor.params",
    "predictor_exec": "predictor.exec",
    "timeout_ms": "predictor.timeout_ms",
    "explain_split": "explain.split",
    "explain_start": "explain.start",
    "explain_count": "explain.count",
    "method": "method",
    "budget": "budget",
    "seed": "seed",
    "exact_cap": "exact_cap",
    "max_batch": "max_batch",
    "frames": "outputs.frames",
    "ranking_out": "outputs.ranking",
    "heatmap_out": "outputs.heatmap",
}


def _set_path(config: dict, dotted: str, value) -> None:
    node = config
    *head, last = dotted.split(".")
    for key in head:
        node = node.setdefault(key, {})
    node[last] = value


def _get_path(config: dict, dotted: str):
    node = config
    for key in dotted.split("."):
        if not isinstance(node, dict) or key not in node:
            return None
        node = node[key]
    return node


def _merge(base: dict, override: dict) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults, overlaid by the config file, overlaid by explicit flags."""
    config = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            config = _merge(config, json.loads(path.read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    for dest, dotted in FLAG_PATHS.items():
        value = getattr(args, dest, None)
        if value is not None:
            if dest == "predictor_params" and isinstance(value, str):
                try:
                    value = json.loads(value)
                except json.JSONDecodeError as exc:
                    raise ConfigError(f"--predictor-params is not JSON: {exc}") from exc
            if dest == "predictor_exec" and isinstance(value, str):
                value = shlex.split(value)
            _set_path(config, dotted, value)
    # A flag naming one side of a mutually exclusive pair supersedes the
    # other side's config-file value; giving both flags is still an error.
    for winner, loser in (
        ("predictor_exec", "predictor.builtin"),
        ("predictor_builtin", "predictor.exec"),
        ("background_path", "background.sample"),
        ("background_sample", "background.path"),
    ):
        if getattr(args, winner, None) is not None and getattr(
            args, loser.replace(".", "_"), None
        ) is None:
            _set_path(config, loser, None)
    return config


def _require(config: dict, dotted: str, flag: str):
    value = _get_path(config, dotted)
    if value is None:
        raise ConfigError(f"missing required setting {dotted!r} (flag {flag})")
    return value


def _require_path(config: dict, dotted: str, flag: str) -> Path:
    path = Path(_require(config, dotted, flag))
    if not path.exists():
        raise ConfigError(f"{dotted} refers to a missing path: {path}")
    return path


def _build_predictor(config: dict):
    builtin = _get_path(config, "predictor.builtin")
    exec_command = _get_path(config, "predictor.exec")
    if bool(builtin) == bool(exec_command):
        raise ConfigError(
            "exactly one of predictor.builtin and predictor.exec must be set"
        )
    if builtin:
        return builtin_predictor(builtin, _get_path(config, "predictor.params") or {})
    command = exec_command if isinstance(exec_command, list) else shlex.split(exec_command)
    return spawn_external_predictor(
        command, timeout_ms=int(_get_path(config, "predictor.timeout_ms") or 30000)
    )


def _build_grouping(config: dict, window_size: int, report):
    strategy = _get_path(config, "grouping.strategy")
    if strategy == "temporal":
        return temporal_grouping(window_size, report.encoded_feature_count)
    if strategy == "feature":
        return feature_grouping(
            window_size, report.encoded_feature_count, names=report.encoded_names
        )
    if strategy == "multifeature":
        group_map = _get_path(config, "grouping.group_map")
        if group_map:
            path = Path(group_map)
            if not path.exists():
                raise ConfigError(f"group map not found: {path}")
            return grouping_from_group_map(path, report.feature_map, window_size)
        level = _get_path(config, "grouping.level") or "source"
        return multifeature_grouping(window_size, report.feature_map, level=level)
    raise ConfigError(f"unknown grouping strategy {strategy!r}")


def _build_background(config: dict, windows_dir: Path, seed: int) -> BackgroundSet:
    path = _get_path(config, "background.path")
    sample = _get_path(config, "background.sample")
    if bool(path) == bool(sample):
        raise ConfigError(
            "exactly one of background.path and background.sample must be set"
        )
    if path:
        source = Path(path)
        if not source.exists():
            raise ConfigError(f"background path not found: {source}")
        return BackgroundSet(io_mod.read_window_set(source).windows, source="file")
    train = io_mod.read_window_set(windows_dir / "train")
    return sample_background(
        train,
        int(sample),
        stratify=bool(_get_path(config, "background.stratify")),
        seed=seed,
    )


# --- commands -------------------------------------------------------------------


def cmd_preprocess(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    data_path = _require_path(config, "data", "--data")
    windows_dir = Path(_require(config, "windows_dir", "--windows-dir"))
    schema = _get_path(config, "schema")
    if schema is not None and not Path(schema).exists():
        raise ConfigError(f"schema sidecar not found: {schema}")

    table = load_table(data_path, schema)
    spec = SplitSpec(
        segment_length=int(_get_path(config, "split.segment_length")),
        train_fraction=float(_get_path(config, "split.train_fraction")),
        val_fraction=float(_get_path(config, "split.val_fraction")),
        padding=int(_get_path(config, "split.padding")),
    )
    train_rows, val_rows, test_rows = split_with_padding(table, spec)
    pruned, dropped = prune_zero_variance(table, train_rows)
    matrix, report = encode_and_normalize(
        pruned,
        train_rows,
        mode=str(_get_path(config, "normalization")),
        dropped_columns=dropped,
    )
    window_size = int(_get_path(config, "window_size"))
    stride = int(_get_path(config, "stride"))
    counts = {}
    for name, rows in (("train", train_rows), ("val", val_rows), ("test", test_rows)):
        window_set = make_windows(matrix, rows, table.labels, window_size, stride)
        io_mod.write_window_set(windows_dir / name, window_set)
        counts[name] = len(window_set)
    io_mod.write_encoding_report(windows_dir / "encoding.json", report)

    print(f"rows: {table.row_count}")
    print(
        f"split rows: train {len(train_rows)}, val {len(val_rows)}, "
        f"test {len(test_rows)}"
    )
    print(f"dropped columns ({len(dropped)}): {', '.join(dropped) if dropped else '-'}")
    print(f"encoded features: {report.encoded_feature_count}")
    print(
        f"windows (w={window_size}, stride={stride}): "
        f"train {counts['train']}, val {counts['val']}, test {counts['test']}"
    )
    print(f"wrote {windows_dir}")
    return EXIT_OK


def cmd_explain(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    windows_dir = _require_path(config, "windows_dir", "--windows-dir")
    frames_path = Path(_require(config, "outputs.frames", "--frames"))
    report = io_mod.read_encoding_report(windows_dir / "encoding.json")

    split_name = str(_get_path(config, "explain.split"))
    if split_name not in ("train", "val", "test"):
        raise ConfigError(f"explain.split must be train/val/test, got {split_name!r}")
    window_set = io_mod.read_window_set(windows_dir / split_name)
    start = int(_get_path(config, "explain.start") or 0)
    count = _get_path(config, "explain.count")
    stop = len(window_set) if count is None else start + int(count)
    windows = window_set.windows[start:stop]
    origins = window_set.origins[start:stop]

    seed = int(_get_path(config, "seed"))
    grouping = _build_grouping(config, window_set.window_size, report)
    background = _build_background(config, windows_dir, seed)
    predictor = _build_predictor(config)
    counter = CountingPredictor(predictor)

    request = ExplainRequest(
        windows=windows,
        grouping=grouping,
        background=background,
        predictor=counter,
        method=str(_get_path(config, "method")),
        budget=_get_path(config, "budget"),
        seed=seed,
        origins=origins,
        exact_cap=int(_get_path(config, "exact_cap")),
        max_batch=int(_get_path(config, "max_batch")),
    )
    try:
        frames = explain_batch(request)
    finally:
        close = getattr(predictor, "close", None)
        if close is not None:
            close()
    meta = {
        "method": request.method,
        "budget": request.effective_budget,
        "seed": seed,
        "K": background.size,
    }
    frames_path.parent.mkdir(parents=True, exist_ok=True)
    io_mod.write_frames(frames_path, grouping.names, frames, meta)
    print(
        f"explained {len(frames)} windows from {split_name} "
        f"(groups: {grouping.group_count}, method: {meta['method']}, "
        f"budget: {meta['budget']}, seed: {seed}, K: {meta['K']})"
    )
    print(f"predictor calls: {counter.windows_seen}")
    print(f"wrote {frames_path}")
    return EXIT_OK


def cmd_rank(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    frames_path = _require_path(config, "outputs.frames", "--frames")
    out_path = Path(_require(config, "outputs.ranking", "--ranking-out"))
    names, frames, _meta = io_mod.read_frames(frames_path)
    convention = args.convention or ABSOLUTE

    if args.events:
        events_path = Path(args.events)
        if not events_path.exists():
            raise ConfigError(f"events file not found: {events_path}")
        events = json.loads(events_path.read_text(encoding="utf-8"))["events"]
        documents = []
        for event in events:
            start, end = int(event["start"]), int(event["end"])
            members = [f for f in frames if start <= f.window_origin <= end]
            report = rank_sources(members, names, convention)
            documents.append({"name": event.get("name", f"{start}-{end}"),
                              "report": report.to_dict()})
        payload: dict = {"events": documents}
    else:
        payload = rank_sources(frames, names, convention).to_dict()

    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(payload, indent=1), encoding="utf-8")
    print(f"wrote {out_path}")
    return EXIT_OK


def cmd_heatmap(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    frames_path = _require_path(config, "outputs.frames", "--frames")
    out_path = Path(_require(config, "outputs.heatmap", "--heatmap-out"))
    names, frames, _meta = io_mod.read_frames(frames_path)
    kind = args.kind or ("csv" if out_path.suffix == ".csv" else "svg")
    spec = heatmap_mod.HeatmapSpec(
        frames=tuple(frames),
        group_names=tuple(names),
        threshold=args.threshold if args.threshold is not None else 0.5,
        color_scale=args.color_scale,
        cell_size=args.cell_size if args.cell_size is not None else 14,
        kind=kind,
    )
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_bytes(heatmap_mod.render(spec))
    print(f"wrote {out_path}")
    return EXIT_OK


def cmd_selftest(args: argparse.Namespace) -> int:
    del args
    failures = 0

    def check(name: str, ok: bool) -> None:
        nonlocal failures
        print(f"[selftest] {name}: {'PASS' if ok else 'FAIL'}")
        failures += 0 if ok else 1

    rng = np.random.default_rng(0)

    def random_game(n):
        table = rng.standard_normal(1 << n)
        return CoalitionGame(
            n, lambda c, t=table: float(t[sum(1 << p for p in c)])
        )

    ok = True
    for _ in range(40):
        n = int(rng.integers(1, 8))
        game = random_game(n)
        phi = exact_shapley(game).values
        expected = game.value_fn(tuple(range(n))) - game.value_fn(())
        ok &= abs(phi.sum() - expected) <= 1e-9 * max(1.0, abs(expected))
    check("efficiency on random games", ok)

    ok = True
    for _ in range(20):
        n = int(rng.integers(1, 8))
        game = random_game(n)
        delta = exact_shapley(game).values - exact_shapley_stratified(game).values
        ok &= float(np.max(np.abs(delta))) < 1e-12
    check("stratified reformulation agreement", ok)

    ok = True
    for _ in range(10):
        n = int(rng.integers(1, 7))
        game = random_game(n)
        plan = StrataPlan.saturated(n)
        delta = sampled_shapley(game, plan, int(rng.integers(0, 1 << 16))).values - (
            exact_shapley(game).values
        )
        ok &= float(np.max(np.abs(delta))) < 1e-12
    check("saturated sampling equals exact", ok)

    weights = rng.standard_normal((3, 4))
    predictor = builtin_predictor("linear", {"weights": weights.tolist()})
    windows = rng.standard_normal((2, 3, 4))
    background = BackgroundSet(rng.standard_normal((5, 3, 4)))
    request = ExplainRequest(
        windows=windows,
        grouping=feature_grouping(3, 4),
        background=background,
        predictor=predictor,
    )
    ok = True
    for frame, window in zip(explain_batch(request), windows):
        closed_form = (weights * (window - background.windows.mean(axis=0))).sum(axis=0)
        ok &= bool(np.max(np.abs(frame.attributions - closed_form)) < 1e-9)
        ok &= abs(frame.attributions.sum() - (frame.prediction - frame.baseline)) < 1e-9
    check("grouped attribution closed form", ok)

    return EXIT_OK if failures == 0 else EXIT_INTERNAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="groupshap",
        description="Grouped Shapley attribution for windowed time series.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON run configuration; flags override it")
        p.add_argument("--seed", type=int, dest="seed")
        p.add_argument("--windows-dir", dest="windows_dir")

    pre = sub.add_parser("preprocess", help="CSV to window-set directories")
    add_common(pre)
    pre.add_argument("--data")
    pre.add_argument("--schema")
    pre.add_argument("--segment-length", type=int, dest="segment_length")
    pre.add_argument("--train-fraction", type=float, dest="train_fraction")
    pre.add_argument("--val-fraction", type=float, dest="val_fraction")
    pre.add_argument("--padding", type=int)
    pre.add_argument("--window-size", type=int, dest="window_size")
    pre.add_argument("--stride", type=int)
    pre.add_argument("--normalization", choices=["standard", "minmax"])
    pre.set_defaults(func=cmd_preprocess)

    exp = sub.add_parser("explain", help="attribute windows against a predictor")
    add_common(exp)
    exp.add_argument("--grouping-strategy", dest="grouping_strategy",
                     choices=["temporal", "feature", "multifeature"])
    exp.add_argument("--grouping-level", dest="grouping_level",
                     choices=["source", "unit"])
    exp.add_argument("--group-map", dest="group_map")
    exp.add_argument("--background-path", dest="background_path")
    exp.add_argument("--background-sample", type=int, dest="background_sample")
    exp.add_argument("--background-stratify", dest="background_stratify",
                     action="store_true", default=None)
    exp.add_argument("--predictor-builtin", dest="predictor_builtin")
    exp.add_argument("--predictor-params", dest="predictor_params")
    exp.add_argument("--predictor-exec", dest="predictor_exec")
    exp.add_argument("--timeout-ms", type=int, dest="timeout_ms")
    exp.add_argument("--explain-split", dest="explain_split",
                     choices=["train", "val", "test"])
    exp.add_argument("--explain-start", type=int, dest="explain_start")
    exp.add_argument("--explain-count", type=int, dest="explain_count")
    exp.add_argument("--method", choices=["exact", "approx", "approximate"])
    exp.add_argument("--budget", type=int)
    exp.add_argument("--exact-cap", type=int, dest="exact_cap")
    exp.add_argument("--max-batch", type=int, dest="max_batch")
    exp.add_argument("--frames")
    exp.set_defaults(func=cmd_explain)

    rank = sub.add_parser("rank", help="rank groups by mean share over frames")
    add_common(rank)
    rank.add_argument("--frames")
    rank.add_argument("--ranking-out", dest="ranking_out")
    rank.add_argument("--events", help="JSON file of {events: [{name, start, end}]}")
    rank.add_argument("--convention", choices=["absolute", "signed"])
    rank.set_defaults(func=cmd_rank)

    heat = sub.add_parser("heatmap", help="render frames as SVG or CSV")
    add_common(heat)
    heat.add_argument("--frames")
    heat.add_argument("--heatmap-out", dest="heatmap_out")
    heat.add_argument("--kind", choices=["svg", "csv"])
    heat.add_argument("--threshold", type=float)
    heat.add_argument("--color-scale", type=float, dest="color_scale")
    heat.add_argument("--cell-size", type=int, dest="cell_size")
    heat.set_defaults(func=cmd_heatmap)

    selftest = sub.add_parser("selftest", help="run the built-in sanity suite")
    selftest.set_defaults(func=cmd_selftest)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PredictorError as exc:
        print(f"predictor error: {exc}", file=sys.stderr)
        return EXIT_PREDICTOR
    except GroupShapError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
