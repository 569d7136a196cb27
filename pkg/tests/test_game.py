from __future__ import annotations

from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groupshap.errors import (
    InvalidBudget,
    PlayerCountExceedsExactCap,
    StratumExhausted,
)
from groupshap.game import (
    CoalitionGame,
    StrataPlan,
    allocate_strata,
    exact_shapley,
    exact_shapley_stratified,
    sample_stratum,
    sampled_shapley,
)

from .conftest import additive_game, majority_game, table_game


# --- exact_shapley ----------------------------------------------------------

def test_exact_two_player_hand_enumeration(two_player_game):
    result = exact_shapley(two_player_game)
    assert result.values == pytest.approx([1.5, 2.5], abs=1e-12)
    assert result.method == "exact"


def test_exact_constant_game_is_zero():
    game = CoalitionGame(player_count=5, value_fn=lambda c: 3.25)
    assert exact_shapley(game).values == pytest.approx([0.0] * 5, abs=0.0)


def test_exact_additive_game_returns_weights():
    result = exact_shapley(additive_game([1.0, 2.0, 3.0]))
    assert result.values == pytest.approx([1.0, 2.0, 3.0], abs=1e-12)


def test_exact_cap_enforced():
    game = CoalitionGame(player_count=6, value_fn=lambda c: float(len(c)))
    with pytest.raises(PlayerCountExceedsExactCap):
        exact_shapley(game, exact_cap=5)


def test_exact_evaluates_each_coalition_once():
    calls: list[tuple[int, ...]] = []

    def counting_fn(coalition):
        calls.append(tuple(coalition))
        return float(sum(coalition))

    game = CoalitionGame(player_count=6, value_fn=counting_fn)
    exact_shapley(game)
    assert len(calls) == 2**6
    assert len(set(calls)) == 2**6


def test_exact_efficiency_up_to_twelve_players():
    rng = np.random.default_rng(7)
    for n in (1, 3, 8, 12):
        game = table_game(n, rng)
        phi = exact_shapley(game).values
        expected = game.value_fn(tuple(range(n))) - game.value_fn(())
        assert phi.sum() == pytest.approx(expected, rel=1e-9)


def test_exact_symmetry_axiom():
    # Players 0 and 1 are interchangeable by construction.
    rng = np.random.default_rng(11)
    base = rng.standard_normal(1 << 5)

    def value_fn(coalition):
        canonical = tuple(sorted({0 if p == 1 else p for p in coalition}))
        mask = sum(1 << p for p in canonical) | (
            2 if {0, 1} <= set(coalition) else 0
        )
        return float(base[mask])

    phi = exact_shapley(CoalitionGame(player_count=5, value_fn=value_fn)).values
    assert phi[0] == pytest.approx(phi[1], abs=1e-9)


def test_exact_dummy_axiom():
    rng = np.random.default_rng(13)
    base = table_game(4, rng)
    bonus = 0.7

    def value_fn(coalition):
        rest = tuple(p for p in coalition if p != 4)
        return base.value_fn(rest) + (bonus if 4 in coalition else 0.0)

    phi = exact_shapley(CoalitionGame(player_count=5, value_fn=value_fn)).values
    v_single = value_fn((4,)) - value_fn(())
    assert phi[4] == pytest.approx(v_single, abs=1e-9)


def test_exact_additivity_axiom():
    rng = np.random.default_rng(17)
    game_v = table_game(6, rng)
    game_w = table_game(6, rng)
    game_sum = CoalitionGame(
        player_count=6, value_fn=lambda c: game_v.value_fn(c) + game_w.value_fn(c)
    )
    combined = exact_shapley(game_sum).values
    separate = exact_shapley(game_v).values + exact_shapley(game_w).values
    assert combined == pytest.approx(separate, abs=1e-9)


# --- exact_shapley_stratified ------------------------------------------------

def test_stratified_matches_two_player(two_player_game):
    assert exact_shapley_stratified(two_player_game).values == pytest.approx(
        [1.5, 2.5], abs=1e-12
    )


def test_stratified_single_player():
    game = CoalitionGame(player_count=1, value_fn=lambda c: 7.0 if c else 0.0)
    assert exact_shapley_stratified(game).values == pytest.approx([7.0], abs=0.0)


def test_stratified_majority_game_quarter_shares():
    phi = exact_shapley_stratified(majority_game(4, 3)).values
    assert phi == pytest.approx([0.25] * 4, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=1, max_value=10), st.integers(min_value=0, max_value=2**32 - 1))
def test_reformulation_equivalence(player_count, seed):
    game = table_game(player_count, np.random.default_rng(seed))
    direct = exact_shapley(game).values
    stratified = exact_shapley_stratified(game).values
    assert np.max(np.abs(direct - stratified)) < 1e-12


# --- allocate_strata ----------------------------------------------------------

def test_allocate_matches_worked_example():
    plan = allocate_strata(20, 4)
    assert plan.per_stratum == (1, 3, 3, 1)
    assert plan.total_budget == 20


def test_allocate_huge_budget_saturates():
    plan = allocate_strata(4 * 2**3, 4)
    assert plan.per_stratum == (1, 3, 3, 1)
    assert plan.is_saturated()


def test_allocate_minimum_budget_gives_one_each():
    assert allocate_strata(4, 4).per_stratum == (1, 1, 1, 1)


def test_allocate_rejects_budget_below_player_count():
    with pytest.raises(InvalidBudget):
        allocate_strata(3, 4)
    with pytest.raises(InvalidBudget):
        allocate_strata(0, 1)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(min_value=1, max_value=24),
    st.integers(min_value=0, max_value=400),
)
def test_allocate_invariants(player_count, extra):
    budget = player_count + extra
    plan = allocate_strata(budget, player_count)
    assert len(plan.per_stratum) == player_count
    assert sum(plan.per_stratum) <= budget
    for j, m_j in enumerate(plan.per_stratum):
        assert 1 <= m_j <= comb(player_count - 1, j)
    # Deterministic.
    assert allocate_strata(budget, player_count).per_stratum == plan.per_stratum


# --- sample_stratum -----------------------------------------------------------

def test_sample_stratum_empty_coalition_only():
    assert sample_stratum(0, 0, 1, 42, player_count=4) == [()]


def test_sample_stratum_single_full_coalition():
    assert sample_stratum(2, 3, 1, 42, player_count=4) == [(0, 1, 3)]


def test_sample_stratum_subset_of_enumerated_stratum():
    first = sample_stratum(0, 1, 3, 123, player_count=4)
    again = sample_stratum(0, 1, 3, 123, player_count=4)
    assert first == again
    assert len(set(first)) == 3
    assert set(first) <= {(1,), (2,), (3,)}


def test_sample_stratum_excludes_player_and_has_exact_size():
    rng = np.random.default_rng(5)
    for _ in range(20):
        out = sample_stratum(3, 4, 10, rng, player_count=9)
        assert len(out) == len(set(out)) == 10
        for coalition in out:
            assert len(coalition) == 4
            assert 3 not in coalition
            assert list(coalition) == sorted(coalition)


def test_sample_stratum_exhaustion():
    with pytest.raises(StratumExhausted):
        sample_stratum(0, 1, 4, 0, player_count=4)


def test_sample_stratum_rejection_path():
    # C(39, 12) is far above the enumeration limit.
    out = sample_stratum(0, 12, 25, 99, player_count=40)
    assert len(out) == len(set(out)) == 25
    assert all(len(c) == 12 and 0 not in c for c in out)
    assert out == sample_stratum(0, 12, 25, 99, player_count=40)


# --- sampled_shapley -----------------------------------------------------------

def test_sampled_saturated_two_player(two_player_game):
    plan = StrataPlan(total_budget=2, per_stratum=(1, 1))
    for seed in (0, 1, 999):
        result = sampled_shapley(two_player_game, plan, seed)
        assert result.values == pytest.approx([1.5, 2.5], abs=1e-12)
        assert result.method == "sampled"
        assert result.budget == 2


def test_sampled_constant_game_all_zero():
    game = CoalitionGame(player_count=6, value_fn=lambda c: 0.4)
    plan = allocate_strata(30, 6)
    assert sampled_shapley(game, plan, 3).values == pytest.approx([0.0] * 6, abs=0.0)


def test_sampled_saturated_majority_game():
    plan = allocate_strata(80, 4)
    assert plan.is_saturated()
    for seed in (1, 2):
        phi = sampled_shapley(majority_game(4, 3), plan, seed).values
        assert phi == pytest.approx([0.25] * 4, abs=1e-12)


def test_sampled_deterministic_per_seed():
    game = table_game(7, np.random.default_rng(23))
    plan = allocate_strata(40, 7)
    a = sampled_shapley(game, plan, 11).values
    b = sampled_shapley(game, plan, 11).values
    c = sampled_shapley(game, plan, 12).values
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sampled_call_accounting_with_cache():
    calls: list[tuple[int, ...]] = []

    def counting_fn(coalition):
        calls.append(tuple(coalition))
        return float(len(coalition))

    n = 6
    game = CoalitionGame(player_count=n, value_fn=counting_fn)
    plan = allocate_strata(60, n)
    sampled_shapley(game, plan, 0)
    upper = 2 * sum(plan.per_stratum) * n
    assert len(calls) <= upper
    assert len(calls) < upper  # overlapping strata must hit the cache
    assert len(calls) == len(set(calls))


def test_sampled_rejects_mismatched_plan():
    game = CoalitionGame(player_count=3, value_fn=lambda c: float(len(c)))
    with pytest.raises(ValueError):
        sampled_shapley(game, StrataPlan(4, (1, 1, 1, 1)), 0)


def test_strata_plan_validation():
    with pytest.raises(InvalidBudget):
        StrataPlan(total_budget=0, per_stratum=(1,))
    with pytest.raises(ValueError):
        StrataPlan(total_budget=9, per_stratum=(2, 3, 3, 1))  # stratum 0 over cap
    with pytest.raises(ValueError):
        StrataPlan(total_budget=3, per_stratum=(1, 3, 3, 1))  # sums past budget
