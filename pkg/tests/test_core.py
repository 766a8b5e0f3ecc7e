import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shapeffects import (
    ALL_PERMUTATIONS,
    ConditionalElementTable,
    E_KIND,
    Permutation,
    V_KIND,
    convert_table,
    shapley_from_permutations,
    shapley_from_subsets,
    sobol_indices,
)
from shapeffects.errors import (
    IncompleteTableError,
    InvalidVarianceError,
    SubsetError,
    TableKindError,
)
from conftest import naive_shapley_by_permutations, random_complete_table, table_as_setdict


def make_v_table(p, var_y, entries):
    table = ConditionalElementTable(V_KIND, p, var_y)
    for mask, value in entries.items():
        table.set_value(mask, value)
    return table


class TestShapleyFromSubsets:
    def test_symmetric_two_inputs(self):
        table = make_v_table(2, 1.0, {0b01: 0.5, 0b10: 0.5})
        np.testing.assert_allclose(shapley_from_subsets(table), [0.5, 0.5])

    def test_hand_computed_asymmetric(self):
        # eta_1 = 0.5*[(0.3 - 0) + (1 - 0.7)] = 0.3, eta_2 = 0.7
        table = make_v_table(2, 1.0, {0b01: 0.3, 0b10: 0.7})
        np.testing.assert_allclose(shapley_from_subsets(table), [0.3, 0.7], atol=1e-15)

    def test_random_table_sums_to_one(self):
        rng = np.random.default_rng(7)
        table = random_complete_table(V_KIND, 4, rng)
        eta = shapley_from_subsets(table)
        assert abs(eta.sum() - 1.0) < 1e-12

    def test_incomplete_table_rejected(self):
        table = make_v_table(3, 1.0, {0b001: 0.1})
        with pytest.raises(IncompleteTableError):
            shapley_from_subsets(table)

    def test_nonpositive_variance_rejected(self):
        with pytest.raises(InvalidVarianceError):
            ConditionalElementTable(V_KIND, 2, 0.0)
        with pytest.raises(InvalidVarianceError):
            ConditionalElementTable(V_KIND, 2, -1.0)

    def test_pinned_entries_cannot_be_overwritten(self):
        table = ConditionalElementTable(V_KIND, 2, 1.0)
        with pytest.raises(SubsetError):
            table.set_value(0, 0.3)
        with pytest.raises(SubsetError):
            table.set_value(0b11, 0.3)


class TestShapleyFromPermutations:
    def test_single_variable(self):
        table = ConditionalElementTable(V_KIND, 1, 2.5)
        np.testing.assert_allclose(shapley_from_permutations(table), [1.0])

    def test_all_permutations_match_subsets(self):
        rng = np.random.default_rng(11)
        table = random_complete_table(V_KIND, 4, rng)
        by_perm = shapley_from_permutations(table, ALL_PERMUTATIONS)
        by_subset = shapley_from_subsets(table)
        np.testing.assert_allclose(by_perm, by_subset, atol=1e-12)
        # both agree with a plain-python reference enumeration
        naive = naive_shapley_by_permutations(table_as_setdict(table), 4, table.var_y)
        np.testing.assert_allclose(by_subset, naive, atol=1e-12)

    def test_single_permutation_is_telescoping_chain(self):
        rng = np.random.default_rng(3)
        table = random_complete_table(V_KIND, 3, rng)
        w = table.values
        eta = shapley_from_permutations(table, [Permutation((0, 1, 2))])
        expected = np.array(
            [w[0b001] - 0.0, w[0b011] - w[0b001], w[0b111] - w[0b011]]
        ) / table.var_y
        np.testing.assert_allclose(eta, expected, atol=1e-15)

    def test_empty_permutation_list_rejected(self):
        table = ConditionalElementTable(V_KIND, 1, 1.0)
        with pytest.raises(ValueError):
            shapley_from_permutations(table, [])

    def test_invalid_permutation_rejected(self):
        table = random_complete_table(V_KIND, 3, np.random.default_rng(0))
        with pytest.raises(ValueError):
            shapley_from_permutations(table, [(0, 0, 1)])


class TestSobolIndices:
    def test_singleton_closed_equals_interaction(self):
        rng = np.random.default_rng(5)
        table = random_complete_table(V_KIND, 3, rng)
        s, s_cl = sobol_indices(table)
        for i in range(3):
            mask = 1 << i
            assert s[mask] == pytest.approx(s_cl[mask])
            assert s_cl[mask] == pytest.approx(table.values[mask] / table.var_y)

    def test_empty_set_is_zero(self):
        table = random_complete_table(V_KIND, 3, np.random.default_rng(9))
        s, s_cl = sobol_indices(table)
        assert s[0] == 0.0 and s_cl[0] == 0.0

    def test_additive_two_input_interaction_vanishes(self):
        # V_1 = 0.3, V_2 = 0.7, V_12 = 1: S_12 = 1 - 0.7 - 0.3 + 0 = 0
        table = make_v_table(2, 1.0, {0b01: 0.3, 0b10: 0.7})
        s, _ = sobol_indices(table)
        assert s[0b11] == pytest.approx(0.0, abs=1e-15)

    def test_kind_error_without_convert_flag(self):
        table = random_complete_table(E_KIND, 3, np.random.default_rng(2))
        with pytest.raises(TableKindError):
            sobol_indices(table)
        s_converted, _ = sobol_indices(table, convert=True)
        s_direct, _ = sobol_indices(convert_table(table))
        np.testing.assert_allclose(s_converted, s_direct)

    def test_matches_naive_alternating_sum(self):
        rng = np.random.default_rng(21)
        table = random_complete_table(V_KIND, 4, rng)
        s, _ = sobol_indices(table)
        v = table.values
        for mask in range(1 << 4):
            expected = 0.0
            members = [i for i in range(4) if mask >> i & 1]
            for r in range(len(members) + 1):
                for combo in itertools.combinations(members, r):
                    sub = sum(1 << i for i in combo)
                    expected += (-1) ** (len(members) - r) * v[sub]
            assert s[mask] == pytest.approx(expected / table.var_y, abs=1e-12)


class TestConvertTable:
    def test_saturated_e_table_gives_zero_v(self):
        var_y = 2.0
        table = ConditionalElementTable(E_KIND, 3, var_y)
        for mask in range(1, 7):
            table.set_value(mask, var_y)
        converted = convert_table(table)
        assert converted.kind is V_KIND
        np.testing.assert_allclose(converted.values[1:-1], 0.0)
        assert converted.values[0] == 0.0 and converted.values[-1] == var_y

    def test_involution(self):
        rng = np.random.default_rng(13)
        table = random_complete_table(E_KIND, 4, rng)
        back = convert_table(convert_table(table))
        np.testing.assert_allclose(back.values, table.values, atol=1e-12)
        assert back.kind is table.kind

    def test_accuracies_follow_their_entries(self):
        table = ConditionalElementTable(E_KIND, 2, 1.0)
        table.set_value(0b01, 0.4, accuracy=7)
        table.set_value(0b10, 0.6, accuracy=9)
        converted = convert_table(table)
        # V_{1} comes from E_{2}
        assert converted.accuracies[0b01] == 9
        assert converted.accuracies[0b10] == 7


# -- spec invariants as property tests ---------------------------------------

table_dims = st.integers(min_value=1, max_value=5)


@settings(max_examples=40, deadline=None)
@given(table_dims, st.integers(min_value=0, max_value=2**32 - 1))
def test_property_shapley_sum_identity(p, seed):
    table = random_complete_table(V_KIND, p, np.random.default_rng(seed))
    eta = shapley_from_subsets(table)
    assert abs(eta.sum() - 1.0) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=2, max_value=5), st.integers(min_value=0, max_value=2**32 - 1))
def test_property_permutation_subset_agreement(p, seed):
    table = random_complete_table(V_KIND, p, np.random.default_rng(seed))
    np.testing.assert_allclose(
        shapley_from_permutations(table, ALL_PERMUTATIONS),
        shapley_from_subsets(table),
        atol=1e-12,
    )


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=2, max_value=5), st.integers(min_value=0, max_value=2**32 - 1))
def test_property_linearity_in_table_values(p, seed):
    rng = np.random.default_rng(seed)
    a, b = 0.75, 0.4  # keep a*W + b*W' a valid table with var_y normalized to a + b
    t1 = random_complete_table(V_KIND, p, rng, var_y=1.0)
    t2 = random_complete_table(V_KIND, p, rng, var_y=1.0)
    combo = ConditionalElementTable(V_KIND, p, a + b)
    for mask in range(1, (1 << p) - 1):
        combo.set_value(mask, a * t1.values[mask] + b * t2.values[mask])
    eta_combo = shapley_from_subsets(combo) * (a + b)
    expected = a * shapley_from_subsets(t1) + b * shapley_from_subsets(t2)
    np.testing.assert_allclose(eta_combo, expected, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=5), st.integers(min_value=0, max_value=2**32 - 1))
def test_property_kind_invariance(p, seed):
    table = random_complete_table(V_KIND, p, np.random.default_rng(seed))
    np.testing.assert_allclose(
        shapley_from_subsets(table),
        shapley_from_subsets(convert_table(table)),
        atol=1e-12,
    )
