"""Coalition-game Shapley values: exact, per-size-stratum, and sampled estimators.

This module is pure game mathematics and knows nothing about windows,
features, or predictors. Players are integers ``0..player_count-1`` and a
coalition is a strictly increasing tuple of player indices. Coalitions are
keyed internally by bitmask, and every distinct coalition value is computed
at most once per call, no matter how many marginal-contribution pairs it
appears in.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb, floor, fsum
from typing import Callable

import numpy as np

from .errors import InvalidBudget, PlayerCountExceedsExactCap, StratumExhausted

Coalition = tuple[int, ...]

DEFAULT_EXACT_CAP = 20

# Strata up to this many coalitions are materialised and index-sampled;
# larger strata fall back to rejection sampling of random subsets.
_ENUMERATION_LIMIT = 200_000


@dataclass(frozen=True)
class CoalitionGame:
    """A cooperative game ``value_fn: coalitions -> reals``.

    ``value_fn`` must be total (defined for every subset of the players,
    including the empty tuple) and deterministic: evaluating the same
    coalition twice must return the same scalar. All functions in this
    module are pure and hold no shared mutable state, so a game may be
    solved from several threads at once provided its ``value_fn`` tolerates
    concurrent calls.
    """

    player_count: int
    value_fn: Callable[[Coalition], float]

    def __post_init__(self) -> None:
        if self.player_count < 1:
            raise ValueError(f"player_count must be >= 1, got {self.player_count}")


@dataclass(frozen=True)
class StrataPlan:
    """Per-coalition-size sample counts for the stratified estimator.

    ``per_stratum[j]`` is the number of size-``j`` coalitions to draw for
    each player; it never exceeds the stratum cardinality ``C(n-1, j)`` and
    the counts never sum past ``total_budget``.
    """

    total_budget: int
    per_stratum: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.total_budget < 1:
            raise InvalidBudget(f"total_budget must be >= 1, got {self.total_budget}")
        n = len(self.per_stratum)
        if n < 1:
            raise ValueError("per_stratum must have at least one entry")
        for j, m_j in enumerate(self.per_stratum):
            if m_j < 0:
                raise ValueError(f"per_stratum[{j}] is negative")
            if m_j > comb(n - 1, j):
                raise ValueError(
                    f"per_stratum[{j}]={m_j} exceeds stratum cardinality {comb(n - 1, j)}"
                )
        if sum(self.per_stratum) > self.total_budget:
            raise ValueError("per_stratum sums past total_budget")

    @property
    def player_count(self) -> int:
        return len(self.per_stratum)

    def is_saturated(self) -> bool:
        """True when every stratum is sampled exhaustively."""
        n = self.player_count
        return all(m_j == comb(n - 1, j) for j, m_j in enumerate(self.per_stratum))

    @classmethod
    def saturated(cls, player_count: int) -> "StrataPlan":
        """The plan that enumerates every stratum completely."""
        per = tuple(comb(player_count - 1, j) for j in range(player_count))
        return cls(total_budget=sum(per), per_stratum=per)


@dataclass(frozen=True)
class ShapleyVector:
    """Attribution vector plus provenance of how it was computed."""

    values: np.ndarray
    method: str  # "exact" | "sampled"
    seed: int | None = None
    budget: int | None = None


def _members(mask: int, player_count: int) -> Coalition:
    return tuple(i for i in range(player_count) if mask >> i & 1)


def _mask_of(coalition: Coalition) -> int:
    mask = 0
    for player in coalition:
        mask |= 1 << player
    return mask


def _all_coalition_values(game: CoalitionGame) -> np.ndarray:
    """Evaluate value_fn exactly once per coalition, in ascending mask order."""
    n = game.player_count
    values = np.empty(1 << n, dtype=float)
    for mask in range(1 << n):
        values[mask] = float(game.value_fn(_members(mask, n)))
    return values


def exact_shapley(
    game: CoalitionGame, *, exact_cap: int = DEFAULT_EXACT_CAP
) -> ShapleyVector:
    """Exact Shapley values by full subset enumeration.

    Each player's value is the factorially weighted sum of its marginal
    contributions over all coalitions excluding it. Every one of the
    ``2**player_count`` coalition values is computed exactly once and shared
    across players.

    Raises:
        PlayerCountExceedsExactCap: above ``exact_cap`` players.
    """
    n = game.player_count
    if n > exact_cap:
        raise PlayerCountExceedsExactCap(
            f"exact method supports at most {exact_cap} players, got {n}"
        )
    values = _all_coalition_values(game)
    weights = [1.0 / (n * comb(n - 1, size)) for size in range(n)]
    phi = np.empty(n, dtype=float)
    for i in range(n):
        bit = 1 << i
        phi[i] = fsum(
            weights[mask.bit_count()] * (values[mask | bit] - values[mask])
            for mask in range(1 << n)
            if not mask & bit
        )
    return ShapleyVector(values=phi, method="exact")


def exact_shapley_stratified(
    game: CoalitionGame, *, exact_cap: int = DEFAULT_EXACT_CAP
) -> ShapleyVector:
    """Exact Shapley values via the per-coalition-size reformulation.

    Computes, for each player, the unweighted mean marginal contribution
    within each coalition size, then averages the per-size means. This is
    algebraically identical to :func:`exact_shapley` and agrees with it to
    float rounding; it exists because the sampled estimator approximates
    exactly this form.
    """
    n = game.player_count
    if n > exact_cap:
        raise PlayerCountExceedsExactCap(
            f"exact method supports at most {exact_cap} players, got {n}"
        )
    values = _all_coalition_values(game)
    phi = np.empty(n, dtype=float)
    for i in range(n):
        bit = 1 << i
        diffs_by_size: list[list[float]] = [[] for _ in range(n)]
        for mask in range(1 << n):
            if mask & bit:
                continue
            diffs_by_size[mask.bit_count()].append(values[mask | bit] - values[mask])
        phi[i] = fsum(fsum(diffs) / len(diffs) for diffs in diffs_by_size) / n
    return ShapleyVector(values=phi, method="exact")


def allocate_strata(total_budget: int, player_count: int) -> StrataPlan:
    """Split a coalition budget across coalition sizes.

    Stratum ``j`` receives ``floor(total_budget * (j+1)^(2/3) / D)`` samples,
    where ``D`` sums the ``(k+1)^(2/3)`` weights over the ``player_count``
    strata that exist, capped at the stratum cardinality ``C(n-1, j)``.
    Floor rounding can leave small strata empty, which would silently bias
    the size-averaged estimator, so leftover budget is then redistributed to
    empty strata (largest fractional remainder first) until every stratum
    has at least one sample.

    Raises:
        InvalidBudget: when ``total_budget`` is below ``player_count``; with
            fewer samples than strata some stratum necessarily stays empty.
    """
    if total_budget < 1:
        raise InvalidBudget(f"total_budget must be >= 1, got {total_budget}")
    if player_count < 1:
        raise ValueError(f"player_count must be >= 1, got {player_count}")
    if total_budget < player_count:
        raise InvalidBudget(
            f"total_budget={total_budget} cannot cover {player_count} strata"
        )
    n = player_count
    weights = [(j + 1) ** (2.0 / 3.0) for j in range(n)]
    denom = fsum(weights)
    caps = [comb(n - 1, j) for j in range(n)]
    raw = [total_budget * w / denom for w in weights]
    alloc = [min(floor(r), cap) for r, cap in zip(raw, caps)]

    leftover = total_budget - sum(alloc)
    empty = sorted(
        (j for j in range(n) if alloc[j] == 0),
        key=lambda j: raw[j] - floor(raw[j]),
        reverse=True,
    )
    for j in empty:
        if leftover > 0:
            leftover -= 1
        else:
            # Degenerate corner: the floors consumed the whole budget while a
            # stratum stayed empty. Take one sample back from the fullest
            # stratum; total_budget >= n guarantees a donor with >= 2.
            donor = max(range(n), key=lambda k: alloc[k])
            alloc[donor] -= 1
        alloc[j] = 1
    return StrataPlan(total_budget=total_budget, per_stratum=tuple(alloc))


def sample_stratum(
    player: int,
    size_j: int,
    count_mj: int,
    rng: int | np.random.Generator,
    *,
    player_count: int,
) -> list[Coalition]:
    """Draw distinct size-``size_j`` coalitions that exclude ``player``.

    Sampling is uniform without replacement over the stratum and
    deterministic for a given seed. When ``count_mj`` equals the stratum
    cardinality the full stratum is enumerated and the generator is not
    consumed, so a saturated draw is seed-independent.

    Raises:
        StratumExhausted: when more coalitions are requested than exist.
    """
    if not 0 <= player < player_count:
        raise ValueError(f"player {player} outside 0..{player_count - 1}")
    others = [p for p in range(player_count) if p != player]
    cardinality = comb(player_count - 1, size_j)
    if count_mj > cardinality:
        raise StratumExhausted(
            f"requested {count_mj} size-{size_j} coalitions, stratum has {cardinality}"
        )
    if count_mj == cardinality:
        return [tuple(c) for c in itertools.combinations(others, size_j)]

    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    if cardinality <= _ENUMERATION_LIMIT:
        pool = list(itertools.combinations(others, size_j))
        picks = gen.choice(cardinality, size=count_mj, replace=False)
        return [pool[int(k)] for k in picks]

    # Huge stratum: rejection-sample distinct subsets. Collisions are
    # vanishingly rare here because count_mj << cardinality.
    others_arr = np.asarray(others)
    seen: set[Coalition] = set()
    out: list[Coalition] = []
    while len(out) < count_mj:
        picked = gen.choice(others_arr, size=size_j, replace=False)
        coalition = tuple(sorted(int(p) for p in picked))
        if coalition not in seen:
            seen.add(coalition)
            out.append(coalition)
    return out


def sampled_shapley(
    game: CoalitionGame, plan: StrataPlan, rng_seed: int
) -> ShapleyVector:
    """Stratified-sampling Shapley estimate under a fixed budget plan.

    For each player the estimator averages, over coalition sizes, the mean
    marginal contribution across ``plan.per_stratum[j]`` coalitions drawn
    uniformly without replacement from each size stratum. Coalition values
    are cached by bitmask and shared across players and strata, so repeated
    coalitions never re-invoke ``value_fn``. With a fully saturated plan the
    estimate coincides with the exact value for any seed; with a partial
    plan it is unbiased per stratum.
    """
    n = game.player_count
    if plan.player_count != n:
        raise ValueError(
            f"plan covers {plan.player_count} players, game has {n}"
        )
    gen = np.random.default_rng(rng_seed)
    cache: dict[int, float] = {}

    def value(mask: int) -> float:
        if mask not in cache:
            cache[mask] = float(game.value_fn(_members(mask, n)))
        return cache[mask]

    phi = np.empty(n, dtype=float)
    for i in range(n):
        bit = 1 << i
        stratum_means = []
        for size_j, m_j in enumerate(plan.per_stratum):
            if m_j == 0:
                continue
            coalitions = sample_stratum(i, size_j, m_j, gen, player_count=n)
            diffs = [
                value(_mask_of(c) | bit) - value(_mask_of(c)) for c in coalitions
            ]
            stratum_means.append(fsum(diffs) / m_j)
        phi[i] = fsum(stratum_means) / n
    return ShapleyVector(
        values=phi, method="sampled", seed=rng_seed, budget=plan.total_budget
    )
