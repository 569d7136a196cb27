"""Black-box predictor abstraction, analytic built-ins, and the external
line-protocol client.

A predictor maps a batch of windows, shaped ``(batch, w, f)``, to one scalar
per window. Built-in predictors are analytic stand-ins used for testing and
validation: their exact attributions are derivable by hand, so they serve as
ground truth for planted anomalies. Real models plug in either as an
in-process subclass or as an external process speaking newline-delimited
JSON over stdin/stdout.
"""

from __future__ import annotations

import json
import math
import queue
import subprocess
import threading
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    BadParams,
    PredictorError,
    PredictorFailure,
    PredictorTimeout,
    ProtocolViolation,
    SpawnFailure,
    UnknownPredictor,
)

PROTOCOL_VERSION = 1


class Predictor:
    """Base class for batch predictors.

    Subclasses implement :meth:`predict_batch`. ``declared_serial`` tells the
    engine whether calls must be funneled through a single submission queue;
    in-process predictors default to non-serial (safe under concurrent
    calls), external processes are always serial. ``is_probability`` opts in
    to output range checking against ``[0, 1]``.
    """

    name = "predictor"
    declared_serial = False
    is_probability = False

    def predict_batch(self, windows: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, windows: np.ndarray) -> np.ndarray:
        out = np.asarray(self.predict_batch(np.asarray(windows, dtype=float)), dtype=float)
        if out.shape != (len(windows),):
            raise PredictorFailure(
                f"{self.name}: expected {len(windows)} outputs, got shape {out.shape}"
            )
        bad = np.flatnonzero(~np.isfinite(out))
        if bad.size:
            raise PredictorFailure(
                f"{self.name}: non-finite output at batch index {int(bad[0])}"
            )
        if self.is_probability and ((out < 0) | (out > 1)).any():
            raise PredictorFailure(f"{self.name}: probability output outside [0, 1]")
        return out


class ConstantPredictor(Predictor):
    """Outputs the same value for every window."""

    def __init__(self, c: float):
        self.c = float(c)
        self.name = f"constant({self.c})"

    def predict_batch(self, windows: np.ndarray) -> np.ndarray:
        return np.full(len(windows), self.c)


class LinearPredictor(Predictor):
    """Weighted cell sum plus bias: ``f(x) = sum(w * x) + b``.

    ``weights`` may be a scalar (applied to every cell) or an array
    broadcastable to the window shape.
    """

    def __init__(self, weights: float | np.ndarray = 1.0, bias: float = 0.0):
        self.weights = np.asarray(weights, dtype=float)
        self.bias = float(bias)
        self.name = "linear"

    def predict_batch(self, windows: np.ndarray) -> np.ndarray:
        try:
            weighted = windows * self.weights
        except ValueError as exc:
            raise PredictorFailure(f"linear: weight shape mismatch: {exc}") from exc
        return weighted.sum(axis=(1, 2)) + self.bias


class ThresholdAnyPredictor(Predictor):
    """1 when any instant of one encoded feature exceeds ``tau``, else 0.

    Models a planted sensor anomaly: the feature column is the anomaly
    carrier and the detector fires whenever it spikes anywhere in the window.
    """

    is_probability = True

    def __init__(self, feature: int, tau: float):
        self.feature = int(feature)
        self.tau = float(tau)
        self.name = f"threshold-any(f={self.feature})"

    def predict_batch(self, windows: np.ndarray) -> np.ndarray:
        if not 0 <= self.feature < windows.shape[2]:
            raise PredictorFailure(
                f"threshold-any: feature {self.feature} outside window width "
                f"{windows.shape[2]}"
            )
        return (windows[:, :, self.feature] > self.tau).any(axis=1).astype(float)


class LastInstantThresholdPredictor(Predictor):
    """1 when any of the last ``k`` instants has a row sum above ``tau``.

    Models a planted temporal anomaly near the window's trailing edge.
    """

    is_probability = True

    def __init__(self, k: int, tau: float):
        if k < 1:
            raise BadParams(f"last-instant-threshold: k must be >= 1, got {k}")
        self.k = int(k)
        self.tau = float(tau)
        self.name = f"last-instant-threshold(k={self.k})"

    def predict_batch(self, windows: np.ndarray) -> np.ndarray:
        tail = windows[:, -self.k :, :].sum(axis=2)
        return (tail > self.tau).any(axis=1).astype(float)


class LogisticSumPredictor(Predictor):
    """Sigmoid of a weighted cell sum: a smooth probability model."""

    is_probability = True

    def __init__(self, weights: float | np.ndarray = 1.0, bias: float = 0.0):
        self.weights = np.asarray(weights, dtype=float)
        self.bias = float(bias)
        self.name = "logistic-sum"

    def predict_batch(self, windows: np.ndarray) -> np.ndarray:
        z = (windows * self.weights).sum(axis=(1, 2)) + self.bias
        return 1.0 / (1.0 + np.exp(-z))


_BUILTINS = {
    "constant": (ConstantPredictor, {"c"}),
    "linear": (LinearPredictor, {"weights", "bias"}),
    "threshold-any": (ThresholdAnyPredictor, {"feature", "tau"}),
    "last-instant-threshold": (LastInstantThresholdPredictor, {"k", "tau"}),
    "logistic-sum": (LogisticSumPredictor, {"weights", "bias"}),
}


def builtin_predictor(name: str, params: Mapping | None = None) -> Predictor:
    """Construct a named analytic predictor from a parameter mapping.

    Raises:
        UnknownPredictor: unrecognized name.
        BadParams: unexpected keys or construction failure.
    """
    if name not in _BUILTINS:
        raise UnknownPredictor(
            f"unknown predictor {name!r}; choose from {sorted(_BUILTINS)}"
        )
    cls, allowed = _BUILTINS[name]
    params = dict(params or {})
    unexpected = set(params) - allowed
    if unexpected:
        raise BadParams(f"{name}: unexpected parameters {sorted(unexpected)}")
    if "weights" in params and isinstance(params["weights"], list):
        params["weights"] = np.asarray(params["weights"], dtype=float)
    try:
        return cls(**params)
    except BadParams:
        raise
    except (TypeError, ValueError) as exc:
        raise BadParams(f"{name}: {exc}") from exc


class CountingPredictor(Predictor):
    """Delegating wrapper that counts batches and individual window evaluations.

    With no inner predictor it returns a constant, which makes dry-run call
    accounting possible without touching the real model.
    """

    def __init__(self, inner: Predictor | None = None, constant: float = 0.5):
        self.inner = inner
        self.constant = float(constant)
        self.batches = 0
        self.windows_seen = 0
        self.name = f"counting({inner.name if inner else 'constant'})"
        self.declared_serial = inner.declared_serial if inner else False
        self.is_probability = inner.is_probability if inner else False

    def predict_batch(self, windows: np.ndarray) -> np.ndarray:
        self.batches += 1
        self.windows_seen += len(windows)
        if self.inner is None:
            return np.full(len(windows), self.constant)
        return self.inner(windows)

    def reset(self) -> None:
        self.batches = 0
        self.windows_seen = 0


class ExternalPredictor(Predictor):
    """Client for a prediction process speaking the line protocol.

    Wire format (UTF-8, one JSON object per line):

    * handshake, child's first line: ``{"proto": 1, "name": "<string>"}``
    * request:  ``{"id": n, "w": w, "f": f, "windows": [[[...]...]...]}``
      where ``windows`` is ``batch x w x f``, instant-major
    * response: ``{"id": n, "outputs": [...]}`` with one float per window

    Any other line from the child is a protocol violation. The child process
    persists across calls; closing this predictor closes its stdin. External
    predictors are always serial.
    """

    declared_serial = True

    def __init__(self, command: Sequence[str], timeout_ms: int = 30_000):
        self.command = list(command)
        self.timeout_s = timeout_ms / 1000.0
        self._next_id = 0
        self._lock = threading.Lock()
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise SpawnFailure(f"could not start {self.command}: {exc}") from exc
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._read_lines, daemon=True)
        self._reader.start()
        try:
            handshake = self._parse_line(self._next_line(), context="handshake")
        except PredictorError:
            self.close()
            raise
        if handshake.get("proto") != PROTOCOL_VERSION or "name" not in handshake:
            self.close()
            raise SpawnFailure(f"bad handshake from {self.command}: {handshake}")
        self.name = str(handshake["name"])

    def _read_lines(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF sentinel

    def _next_line(self) -> str:
        try:
            line = self._lines.get(timeout=self.timeout_s)
        except queue.Empty:
            raise PredictorTimeout(
                f"{self.command}: no response within {self.timeout_s:.1f}s"
            ) from None
        if line is None:
            raise ProtocolViolation(f"{self.command}: process closed its output")
        return line

    @staticmethod
    def _parse_line(line: str, context: str) -> dict:
        def reject_constant(token: str) -> float:
            raise ProtocolViolation(f"non-finite constant {token!r} in {context}")

        try:
            parsed = json.loads(line, parse_constant=reject_constant)
        except json.JSONDecodeError as exc:
            raise ProtocolViolation(f"malformed {context} line: {line!r}") from exc
        if not isinstance(parsed, dict):
            raise ProtocolViolation(f"{context} line is not an object: {line!r}")
        return parsed

    def predict_batch(self, windows: np.ndarray) -> np.ndarray:
        windows = np.asarray(windows, dtype=float)
        if windows.ndim != 3:
            raise PredictorFailure(f"expected (batch, w, f) windows, got {windows.shape}")
        with self._lock:
            request_id = self._next_id
            self._next_id += 1
            request = {
                "id": request_id,
                "w": int(windows.shape[1]),
                "f": int(windows.shape[2]),
                "windows": windows.tolist(),
            }
            if self._proc.stdin is None or self._proc.poll() is not None:
                raise ProtocolViolation(f"{self.command}: process has exited")
            try:
                self._proc.stdin.write(json.dumps(request) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise ProtocolViolation(f"{self.command}: pipe closed: {exc}") from exc
            response = self._parse_line(self._next_line(), context="response")
        if set(response) != {"id", "outputs"}:
            raise ProtocolViolation(f"unexpected response keys: {sorted(response)}")
        if response["id"] != request_id:
            raise ProtocolViolation(
                f"response id {response['id']} does not match request {request_id}"
            )
        outputs = response["outputs"]
        if not isinstance(outputs, list) or len(outputs) != len(windows):
            raise ProtocolViolation(
                f"expected {len(windows)} outputs, got "
                f"{len(outputs) if isinstance(outputs, list) else type(outputs)}"
            )
        if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in outputs):
            raise ProtocolViolation("outputs contain non-numeric or non-finite values")
        return np.asarray(outputs, dtype=float)

    def close(self) -> None:
        """Close the child's input stream and reap the process."""
        proc = getattr(self, "_proc", None)
        if proc is None:
            return
        if proc.stdin is not None:
            try:
                proc.stdin.close()
            except OSError:
                pass
        try:
            proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()

    def __enter__(self) -> "ExternalPredictor":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def __del__(self) -> None:
        try:
            self.close()
        except Exception:
            pass


def spawn_external_predictor(
    command: Sequence[str], timeout_ms: int = 30_000
) -> ExternalPredictor:
    """Launch an external prediction process and complete the handshake."""
    return ExternalPredictor(command, timeout_ms=timeout_ms)
