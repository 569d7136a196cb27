from __future__ import annotations

import numpy as np
import pytest

from groupshap.game import CoalitionGame


def table_game(player_count: int, rng: np.random.Generator) -> CoalitionGame:
    """A game whose values are a fixed random table indexed by coalition."""
    table = rng.standard_normal(1 << player_count)

    def value_fn(coalition: tuple[int, ...]) -> float:
        mask = 0
        for player in coalition:
            mask |= 1 << player
        return float(table[mask])

    return CoalitionGame(player_count=player_count, value_fn=value_fn)


def additive_game(weights: list[float]) -> CoalitionGame:
    def value_fn(coalition: tuple[int, ...]) -> float:
        return sum(weights[p] for p in coalition)

    return CoalitionGame(player_count=len(weights), value_fn=value_fn)


def majority_game(player_count: int, quota: int) -> CoalitionGame:
    def value_fn(coalition: tuple[int, ...]) -> float:
        return 1.0 if len(coalition) >= quota else 0.0

    return CoalitionGame(player_count=player_count, value_fn=value_fn)


TWO_PLAYER_VALUES = {(): 0.0, (0,): 1.0, (1,): 2.0, (0, 1): 4.0}


@pytest.fixture
def two_player_game() -> CoalitionGame:
    return CoalitionGame(
        player_count=2, value_fn=lambda c: TWO_PLAYER_VALUES[tuple(c)]
    )
