"""Serve a built-in predictor over the external line protocol.

Runs as ``python -m groupshap.serve --builtin <name> [--params JSON]`` and is
the reference implementation of the child side of the protocol: handshake
first, then one JSON response line per request line, until stdin closes.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .predictors import PROTOCOL_VERSION, builtin_predictor


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--builtin", required=True, help="built-in predictor name")
    parser.add_argument("--params", default="{}", help="predictor parameters as JSON")
    args = parser.parse_args(argv)

    predictor = builtin_predictor(args.builtin, json.loads(args.params))
    sys.stdout.write(
        json.dumps({"proto": PROTOCOL_VERSION, "name": predictor.name}) + "\n"
    )
    sys.stdout.flush()

    for line in sys.stdin:
        request = json.loads(line)
        windows = np.asarray(request["windows"], dtype=float)
        outputs = predictor(windows)
        sys.stdout.write(
            json.dumps({"id": request["id"], "outputs": outputs.tolist()}) + "\n"
        )
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
