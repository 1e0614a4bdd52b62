from __future__ import annotations

import math
from fractions import Fraction as F
from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dslab.errors import (BruteForceLimitExceeded, CapExceeded, GoodIndexSetNotFound,
                          SieveLimitTooSmall)
from dslab.primes import (PrimePairTable, YSystem, binomial_law, build_I, build_pairs,
                          compare_exp, conjugate, count_heavy, enumerate_Y, find_good_I, g_value,
                          good_I_ratio, level_of_pair, split_y, survivor_count,
                          survivor_count_naive, survivor_table, weight_identity_holds, xj_profile)

subsets = st.sets(st.integers(1, 5), max_size=5).map(lambda s: tuple(sorted(s)))


def test_pair_table():
    t = PrimePairTable(100)
    assert t.pair(1) == (2, 3) and t.pair(2) == (5, 7) and t.pair(3) == (11, 13)
    assert t.num_pairs() == 12
    with pytest.raises(SieveLimitTooSmall):
        t.p(26)
    with pytest.raises(IndexError):
        t.p(0)


def test_compare_exp():
    assert compare_exp(2, 1) == -1 and compare_exp(3, 1) == 1
    assert compare_exp(7, 2) == -1 and compare_exp(8, 2) == 1
    assert compare_exp(1, 0) == 0
    for n in range(1, 3000, 37):
        for j in range(1, 9):
            assert compare_exp(n, j) == (1 if n > math.exp(j) else -1)


def test_levels():
    assert build_pairs(1) == [2]
    assert build_pairs(2) == [3, 4]
    assert build_pairs(3) == [5, 6, 7, 8]
    assert build_I(3, j_min=1) == [2, 3, 4, 5, 6, 7, 8]
    with pytest.raises(ValueError):
        build_I(2, j_min=3)
    with pytest.raises(SieveLimitTooSmall):
        build_pairs(6, table=PrimePairTable(100))


def test_gap_coefficient_filters():
    # level 3 pairs (23,29),(31,37),(41,43),(47,53) have gaps 6,6,2,6
    assert build_pairs(3, gap_coeff=1) == [7]
    assert build_pairs(3, gap_coeff=2) == [5, 6, 7, 8]


def test_level_of_pair():
    assert [level_of_pair(i) for i in range(1, 9)] == [1, 1, 2, 2, 3, 3, 3, 3]


def test_ysystem_example():
    ys = enumerate_Y((1, 2))
    assert ys.Y == (10, 14, 15, 21)
    assert ys.P == 210
    assert (ys.g(10), ys.g(14), ys.g(15), ys.g(21)) == (F(1), F(6, 7), F(2, 3), F(4, 7))
    assert ys.y_min == 10 and ys.y_max == 21
    assert g_value((1, 2), 21) == F(4, 7)
    assert g_value((1, 2), 10) == 1
    assert g_value((1, 2), 15) == F(2, 3)


def test_g_values_example():
    assert g_value((1, 2), 42) == F(4, 7)
    assert g_value((2,), 7) == F(6, 7)
    assert g_value((1,), 2) == 1
    with pytest.raises(ValueError):
        g_value((1,), 0)


def test_empty_system():
    ys = enumerate_Y(())
    assert ys.Y == (1,) and ys.P == 1


def test_cap():
    with pytest.raises(CapExceeded):
        enumerate_Y(range(1, 6), cap=4)


def test_ysystem_lines_roundtrip():
    ys = enumerate_Y((1, 3))
    assert YSystem.from_lines(ys.to_lines()) == ys
    lines = ys.to_lines()
    lines[1] = "P 1"
    with pytest.raises(ValueError):
        YSystem.from_lines(lines)


@settings(max_examples=40, deadline=None)
@given(subsets)
def test_weight_identity(I):
    ys = enumerate_Y(I)
    assert all(weight_identity_holds(ys, y) for y in ys.Y)
    assert ys.harmonic_weight() == sum((F(ys.y_min, y) for y in ys.Y), F(0))
    for y in ys.Y:
        yo, ye = split_y(ys, y)
        assert yo * ye == y


@settings(max_examples=40, deadline=None)
@given(subsets)
def test_admissible_and_unique_factorization(I):
    ys = enumerate_Y(I)
    assert len(set(ys.Y)) == 2 ** len(I)
    assert all(ys.P % y == 0 for y in ys.Y)


def test_good_ratio_examples():
    assert good_I_ratio((1, 2), F(1, 2)) == F(7, 5)
    assert good_I_ratio((), F(1, 2)) == 1
    assert good_I_ratio((1, 2), F(2)) == 0
    # with delta small every y is heavy and the ratio is 4/harmonic weight
    ys = enumerate_Y((1, 2))
    assert good_I_ratio((1, 2), F(1, 100)) == 4 / ys.harmonic_weight()


@settings(max_examples=60, deadline=None)
@given(st.lists(st.builds(F, st.integers(1, 20), st.integers(20, 21)), max_size=10),
       st.builds(F, st.integers(1, 100), st.integers(1, 100)))
def test_count_heavy_matches_enumeration(factors, delta):
    brute = 0
    n = len(factors)
    for r in range(n + 1):
        for T in combinations(range(n), r):
            p = F(1)
            for t in T:
                p *= factors[t]
            brute += p >= delta
    assert count_heavy(factors, delta) == brute


def test_count_heavy_cap():
    with pytest.raises(CapExceeded):
        count_heavy([F(99, 100)] * 40, F(9, 10), node_cap=100)


def test_find_good_I_failure_carries_trajectory():
    with pytest.raises(GoodIndexSetNotFound) as info:
        find_good_I(F(1, 48), 6)
    traj = info.value.trajectory
    assert [s.K for s in traj] == [5, 6]
    assert all(s.ratio > F(1, 48) for s in traj)


def test_find_good_I_success_with_generous_delta():
    I, traj = find_good_I(F(1), 5, j_min=1)
    assert I and traj[-1].ratio < 1


def test_binomial_law():
    assert binomial_law(2) == (F(1, 4), F(1, 2), F(1, 4))
    assert sum(binomial_law(7)) == 1


def test_xj_profile_examples():
    assert xj_profile((1, 2)) == {1: (F(1, 4), F(1, 2), F(1, 4))}
    assert xj_profile(()) == {0: (F(1),)}
    prof = xj_profile((2, 3, 4))
    assert prof == {1: (F(1, 2), F(1, 2)), 2: (F(1, 4), F(1, 2), F(1, 4))}


def test_survivor_examples():
    ys = enumerate_Y((1, 2))
    counts = [survivor_count(ys, y).count for y in ys.Y]
    assert counts == [10, 12, 10, 12]
    assert all(s.ok for s in survivor_table(ys))
    assert [survivor_count(ys, y).bound for y in ys.Y] == [10, 12, 10, 12]


@settings(max_examples=30, deadline=None)
@given(subsets)
def test_survivor_matches_naive(I):
    ys = enumerate_Y(I)
    for y in ys.Y:
        if y <= 1000:
            assert survivor_count(ys, y).count == survivor_count_naive(ys, y)
            assert survivor_count(ys, y).ok


def test_survivor_limits():
    ys = enumerate_Y((1, 2, 3))
    with pytest.raises(BruteForceLimitExceeded):
        survivor_count(ys, ys.y_max, limit=10)
    with pytest.raises(BruteForceLimitExceeded):
        survivor_count_naive(ys, ys.y_max, limit=10)
    with pytest.raises(ValueError):
        survivor_count(ys, 4)


def test_conjugate():
    ys = enumerate_Y((1, 2))
    assert conjugate(ys, 21, 1) == 14
    assert conjugate(ys, 21, 2) == 15
    with pytest.raises(ValueError):
        conjugate(ys, 10, 1)
