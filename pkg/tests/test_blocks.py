from __future__ import annotations

from fractions import Fraction as F
from math import gcd

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dslab.blocks import (EmpiricalOverrides, arc_count, build_block, choose_parameters,
                          empirical_parameters, mass_term, overlap_sum, overlap_verify,
                          union_below, union_measure_exact, walk_progression)
from dslab.errors import (GoodIndexSetNotFound, HypothesisViolated, MassUnreachable,
                          PreconditionViolated, UnionTooLarge)
from dslab.functions import parse_function
from dslab.primes import enumerate_Y
from dslab.torus import normalize

F_BLOCK = parse_function("scaled:inv_bits:1/8")


def test_x_prime_min_example():
    p = choose_parameters(enumerate_Y((1,)), F(1, 2), parse_function("inv_bits"), 1)
    assert p.x_prime_min == 2**46
    assert p.x_min == 6 * p.B + 1 and p.x_min >= p.x_prime_min and gcd(p.B, 6) == 1
    assert (p.x_max - p.x_min) % 6 == 0
    assert F(1) <= p.mass <= F(2)


def test_x_prime_min_monotone_in_M():
    ys = enumerate_Y((1,))
    f = parse_function("inv_bits")
    assert choose_parameters(ys, F(1, 2), f, 2**50).x_prime_min > 2**46


def test_b_choice_p_minus_one():
    ys = enumerate_Y((1,))
    p = choose_parameters(ys, F(4), parse_function("const:1/8"), 1, b_choice="P-1")
    assert p.B == 5 and p.x_min == 31 and p.x_max == 61
    with pytest.raises(PreconditionViolated):
        choose_parameters(ys, F(1, 2), parse_function("inv_bits"), 1, b_choice="P-1")


def test_mass_unreachable_for_vanishing_f():
    ys = enumerate_Y((1,))
    with pytest.raises(MassUnreachable):
        empirical_parameters(ys, parse_function("cutoff:5:scaled:inv_bits:1/8"), 1, EmpiricalOverrides())


def test_mass_unreachable_on_cap_and_overshoot():
    with pytest.raises(MassUnreachable):
        walk_progression(parse_function("fk:2"), (1,), 10**6, 1, cap=50)
    with pytest.raises(MassUnreachable):
        walk_progression(parse_function("const:2/5"), (1, 2, 3), 1, 1, window=(F(1), F(2)))


def test_overrides_must_be_coprime():
    with pytest.raises(PreconditionViolated):
        empirical_parameters(enumerate_Y((1,)), F_BLOCK, 1, EmpiricalOverrides(B=2))


def test_overlap_verify_examples():
    c = overlap_verify(1, enumerate_Y((1, 2)), F_BLOCK)
    assert c.bound == F(313, 1680) and c.exact <= c.bound and c.ok
    f = parse_function("power:1/3:1")
    c = overlap_verify(1, enumerate_Y(()), f)
    assert c.bound == 2 * f(1) and c.exact == min(F(1), 2 * f(1))
    with pytest.raises(HypothesisViolated):
        overlap_verify(6, enumerate_Y((1, 2)), F_BLOCK)
    assert not overlap_verify(6, enumerate_Y((1, 2)), F_BLOCK, allow_violation=True).hypothesis


@settings(max_examples=80, deadline=None)
@given(st.sets(st.integers(1, 3)), st.integers(1, 300))
def test_overlap_bound_property(I, x):
    ys = enumerate_Y(I)
    if gcd(x, ys.P) == 1:
        assert overlap_verify(x, ys, F_BLOCK).ok


def test_union_measure_exact_examples():
    quarter = parse_function("const:1/4")
    assert union_measure_exact([2, 3], quarter) == F(3, 4)
    assert union_measure_exact([7], parse_function("const:1/10")) == F(1, 5)
    arcs = [(F(a, q) - F(1, 4 * q), F(a, q) + F(1, 4 * q)) for q in (2, 4) for a in range(q)]
    assert union_measure_exact([2, 4], quarter) == normalize(arcs).measure()


def test_union_budget_raises():
    with pytest.raises(UnionTooLarge):
        union_measure_exact([1000, 1001], F_BLOCK, budget=100)


def test_arc_count():
    assert arc_count([6, 10, 15]) == 31
    assert arc_count([4, 8]) == 3
    assert arc_count([]) == 0


def test_mass_term_clamps():
    assert mass_term(parse_function("const:3/4"), 5) == 1
    assert mass_term(F_BLOCK, 1) == F(1, 4)


@pytest.fixture(scope="module")
def block12():
    return build_block(F_BLOCK, F(1, 4), 1, "empirical", I=(1, 2), overrides=EmpiricalOverrides())


def test_empirical_block(block12):
    c = block12
    assert c.ok
    assert c.union is not None and c.union <= c.overlap_sum
    assert F(1) <= c.mass <= F(2)
    assert min(c.S) > c.M
    assert len(c.S) == len(c.X) * len(c.Y) == len(set(c.S))
    assert all(x % c.BP == 1 for x in c.X)
    assert c.mass == sum((mass_term(F_BLOCK, q) for q in c.S), F(0))
    assert c.overlap_sum == overlap_sum(F_BLOCK, c.X, enumerate_Y((1, 2)))
    assert union_below(c) is False  # the desk-scale union stays above 1/4


def test_block_above_M():
    c = build_block(F_BLOCK, F(1, 4), 10**4, "empirical", I=(1,))
    assert min(c.S) > 10**4 and c.ok


def test_block_parallel_overlap_is_identical(block12):
    ys = enumerate_Y((1, 2))
    assert overlap_sum(F_BLOCK, block12.X, ys, workers=2) == block12.overlap_sum


def test_block_union_modes():
    never = build_block(F_BLOCK, F(1, 4), 1, "empirical", I=(1,), compute_union="never")
    assert never.union is None and never.union_status == "skipped" and union_below(never) is None
    with pytest.raises(UnionTooLarge):
        build_block(F_BLOCK, F(1, 4), 1, "empirical", I=(1,), union_budget=10, compute_union="always")
    auto = build_block(F_BLOCK, F(1, 4), 1, "empirical", I=(1,), union_budget=10, compute_union="auto")
    assert auto.union is None


def test_block_preconditions():
    with pytest.raises(PreconditionViolated):
        build_block(F_BLOCK, F(0), 1, "empirical", I=(1,))
    with pytest.raises(PreconditionViolated):
        build_block(F_BLOCK, F(1, 4), 1, "empirical")
    with pytest.raises(ValueError):
        build_block(F_BLOCK, F(1, 4), 1, "fast", I=(1,))


def test_certificate_mode_needs_good_index_set():
    with pytest.raises(GoodIndexSetNotFound):
        build_block(F_BLOCK, F(1, 4), 1, "certificate", K_max=6)


def test_certificate_mode_with_given_I_reports_tolerance():
    c = build_block(parse_function("const:1/8"), F(1, 2), 1, "certificate", I=(1,), delta=F(4))
    assert "overlap_below_tolerance" in c.checks
    assert c.checks["overlap_below_tolerance"] == (c.overlap_sum < F(1, 2))
