from __future__ import annotations

from fractions import Fraction as F

import pytest

from dslab.assemble import (PsiFunction, build_thmA, build_thmC, square_partial_sum,
                            tail_certificate, verify_psi)
from dslab.functions import khintchine_partial, parse_function

F_BLOCK = parse_function("scaled:inv_bits:1/8")
HARMONIC = parse_function("power:1:1")


@pytest.fixture(scope="module")
def thmA():
    return build_thmA(F_BLOCK, 2, "empirical", I=(1,))


def test_thmA_blocks_are_stacked(thmA):
    a = thmA
    assert a.disjoint
    assert [b.eps for b in a.blocks] == [F(1, 2), F(1, 4)]
    assert a.blocks[1].M == a.blocks[0].S[-1]
    assert a.total_mass >= 2
    assert all(b.ok for b in a.blocks)


def test_tail_certificate(thmA):
    t = thmA.tail
    assert t.bound(1) == F(1, 2) + F(1, 4) + F(1, 4)
    assert t.bound(2) == F(1, 4) + F(1, 4)
    assert [r.K for r in t.rows] == [1, 2]
    assert t.rows[0].measured == sum(t.measured, F(0))
    # at desk scale the blocks miss their tolerances, so the bounds do not apply
    assert t.valid == all(m < e for m, e in zip(t.measured, t.eps))


def test_tail_falls_back_to_overlap_sum():
    b = build_thmA(F_BLOCK, 1, "empirical", I=(1,), compute_union="never").blocks
    t = tail_certificate(b)
    assert t.measured_kind == ("overlap",) and t.measured == (b[0].overlap_sum,)


def test_thmA_rejects_zero_blocks():
    with pytest.raises(ValueError):
        build_thmA(F_BLOCK, 0)


@pytest.fixture(scope="module")
def psi2():
    return build_thmC(HARMONIC, 2, "empirical", I=())


def test_psi_structure(psi2):
    b1, b2 = psi2.blocks
    assert b1.C.S == (3, 4) and b1.Q == 5
    assert b2.C.S[0] > b1.Q and b2.Q == max(2 * b2.C_max, b2.C_max + 1)
    assert psi2(1) == 1 and psi2(2) == 0 and psi2(3) == F(1, 3)
    assert psi2(5) == F(1, 25)
    assert psi2(b2.Q + 1) == 0


def test_psi_verifies(psi2):
    v = verify_psi(psi2)
    assert v.ok, v.first_failure
    assert all(F(1, 2) <= m <= 1 for m in v.block_mass)
    assert v.d_sum <= v.square_partial
    assert dict(v.density.checkpoints)[psi2.blocks[1].Q] >= F(1, 2)


def test_psi_support_count_matches_values(psi2):
    N = psi2.blocks[-1].Q
    brute = sum(1 for q in range(1, N + 1) if psi2(q) > 0)
    assert psi2.support_count(N) == brute
    assert [q for q, _, _ in psi2.support()] == [q for q in range(1, N + 1) if psi2(q) > 0]


def test_psi_tamper_monotonicity(psi2):
    b2 = psi2.blocks[1]
    q = b2.C_max + 5
    bad = psi2.tampered(q, HARMONIC(q))
    v = verify_psi(bad)
    assert not v.checks["non_increasing_on_support"]
    assert v.checks["psi_le_f"]
    assert v.first_failure == f"psi({q}) > psi({q - 1})"


def test_psi_tamper_above_f(psi2):
    v = verify_psi(psi2.tampered(4, F(1, 2)))
    assert not v.checks["psi_le_f"] and not v.ok


def test_psi_series_is_finite_on_D(psi2):
    # the D-runs carry at most q^-2 each
    d = sum((psi2(q) for blk in psi2.blocks for q in blk.D), F(0))
    assert d == verify_psi(psi2).d_sum
    assert khintchine_partial({q: psi2(q) for q in range(1, 6)}, 5).total == F(1) + F(1, 3) + F(1, 4) + F(1, 25)


def test_square_partial_sum():
    assert square_partial_sum(3) == F(49, 36)


def test_empty_psi():
    v = verify_psi(PsiFunction(HARMONIC, ()))
    assert v.ok and v.block_mass == ()
