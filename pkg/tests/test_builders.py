import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from commsplit import builders
from commsplit.evaluator import order_scan, pauli_xz_ops, random_ops
from commsplit.formula_ir import stats

# Frozen from scripts/oracle_constants.py (50-digit closed-form evaluation).
ODD_P1_K1 = (0.60355339059327376, 1.0986841134678100, 0.92387953251128676)
EVEN_P1_K2 = (0.33733587904468169, 1.1050302718729151, 0.8374563447866333)
XI_2 = 0.79370052598409974


class TestSchedules:
    def test_odd_p1_k1(self):
        s = builders.coeff_odd(1, 1)
        assert (s.r_p, s.beta_p, s.gamma_p) == pytest.approx(ODD_P1_K1, rel=1e-14)

    def test_even_p1_k2(self):
        s = builders.coeff_even(1, 2)
        assert (s.s_p, s.mu_p, s.nu_p) == pytest.approx(EVEN_P1_K2, rel=1e-14)

    def test_xi(self):
        assert builders.even_base(2).terms[0].coeff == pytest.approx(XI_2, rel=1e-15)

    @given(st.integers(1, 8), st.integers(0, 4))
    def test_odd_root_condition(self, p, j):
        s = builders.coeff_odd(p, 2 * j + 1)
        assert s.root_residual() <= 1e-12
        # order-(k+1) moments: 4 gamma^(k+1) - 2 beta^(k+1) = 1
        assert 4 * s.gamma_p ** (2 * j + 2) - 2 * s.beta_p ** (2 * j + 2) == pytest.approx(1.0, abs=1e-12)

    @given(st.integers(2, 16), st.integers(1, 5))
    def test_even_root_condition(self, p2, k):
        s = builders.coeff_even(p2 / 2, k)
        assert s.root_residual() <= 1e-12
        assert 4 * s.nu_p ** (k + 1) - s.mu_p ** (k + 1) == pytest.approx(1.0, abs=1e-12)

    def test_half_integer_only(self):
        with pytest.raises(ValueError):
            builders.coeff_even(1.25, 2)

    def test_even_k_rejected_for_odd(self):
        with pytest.raises(ValueError):
            builders.coeff_odd(1, 2)

    @given(st.integers(3, 12), st.integers(1, 4))
    def test_jk_schedule(self, nu, k):
        if nu <= k + 1:
            return
        a, b = builders.jk_schedule(nu, k)
        assert 2 * a ** (k + 1) - b ** (k + 1) == pytest.approx(1.0, abs=1e-12)
        assert 2 * a**nu - b**nu == pytest.approx(0.0, abs=1e-12)


class TestCounts:
    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_odd(self, p):
        assert len(builders.build_odd(p, 1)) == 4 * 6 ** (p - 1)

    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_even_raw(self, p):
        assert len(builders.build_even(p, 2, merge=False)) == builders.even_raw_count(p) == 5**p

    def test_even_merged_is_shorter(self):
        assert len(builders.build_even(2, 2)) < 25

    @pytest.mark.parametrize("p,k", [(1, 1), (1, 2), (1, 3), (2, 1), (2, 2), (2, 3), (1, 4)])
    def test_nested(self, p, k):
        assert len(builders.build_nested(p, k)) == builders.nested_count(p, k)

    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_gc(self, k):
        assert len(builders.build_gc_base(k)) == builders.gc_count(k) == 3 * 2**k - 2

    @pytest.mark.parametrize("p2,k,n", [(1, 1, 4), (2, 1, 20), (3, 2, 250), (4, 2, 1250)])
    def test_nestgc(self, p2, k, n):
        assert len(builders.build_nestgc(p2, k)) == n

    def test_bgc(self):
        assert len(builders.build_bgc(1)) == 8
        assert len(builders.build_bgc(3)) == 200
        assert len(builders.build_bgc(3, pauli_bonus=True)) == 40


class TestStructure:
    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_odd_symmetry_alternates(self, p):
        want = "symmetric" if p % 2 else "antisymmetric"
        assert builders.build_odd(p, 1).symmetry == want

    @pytest.mark.parametrize("family,p2,k", [("odd", 4, 1), ("even", 4, 2), ("nestf", 2, 3), ("nestgc", 3, 2), ("bgc", 2, 2)])
    def test_slot_sums_vanish(self, family, p2, k):
        # every exponent cancels at first order, so each slot's coefficients sum to zero
        for v in stats(builders.build_family(family, p2, k)).slot_sums.values():
            assert abs(v) <= 1e-12

    def test_nested_flattening_uses_all_slots(self):
        f = builders.build_nested(1, 3)
        assert f.slots == (0, 1, 2, 3)
        assert f.nesting == (3, 2, 1, 0)

    def test_build_family_rejects_odd_p2(self):
        with pytest.raises(ValueError):
            builders.build_family("odd", 3, 1)

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            builders.build_family("strang", 2, 1)


def scan_slope(f, ops):
    return order_scan(f, ops).fitted_slope


# (family, p2, k, tolerance): claimed order nu on Pauli operators
PAULI_ORDERS = [
    ("odd", 2, 1, 0.25),
    ("odd", 4, 1, 0.25),
    ("odd", 6, 1, 0.25),
    ("odd", 2, 3, 0.3),
    ("even", 2, 2, 0.25),
    ("even", 4, 2, 0.25),
    ("even", 6, 2, 0.25),
    ("odd-sym", 2, 1, 0.25),
    ("bgc", 2, 2, 0.3),
    ("bgc", 3, 2, 0.3),
    ("bgc", 4, 2, 0.3),
]


@pytest.mark.parametrize("family,p2,k,tol", PAULI_ORDERS)
def test_order_on_paulis(family, p2, k, tol):
    f = builders.build_family(family, p2, k)
    assert abs(scan_slope(f, pauli_xz_ops(f)) - f.nu) <= tol


# Random operators: the fitted slope must reach nu up to a small deficit.  The
# order-9 even formula is still pre-asymptotic inside the fit window and is
# excluded.
RANDOM_ORDERS = [
    ("odd", 2, 1),
    ("odd", 4, 1),
    ("odd", 2, 3),
    ("even", 2, 2),
    ("even", 4, 2),
    ("nestf", 2, 2),
    ("nestf", 2, 3),
    ("gc", 1, 2),
    ("nestgc", 3, 1),
    ("nestgc", 3, 2),
    ("bgc", 3, 2),
    ("jk", 3, 1),
]


@pytest.mark.parametrize("family,p2,k", RANDOM_ORDERS)
def test_order_on_random_operators(family, p2, k):
    f = builders.build_family(family, p2, k)
    ops = random_ops(max(f.slots) + 1, 4, np.random.default_rng(11))
    slope = scan_slope(f, ops)
    assert f.nu - 0.3 <= slope <= f.nu + 1.1


def test_pauli_bonus_order():
    f = builders.build_bgc(3, pauli_bonus=True)
    assert f.nu == 6
    assert abs(scan_slope(f, pauli_xz_ops(f)) - 6) <= 0.3


def test_bgc_base_gains_an_order_on_paulis():
    f = builders.build_bgc(1)
    assert f.nu == 4
    assert abs(scan_slope(f, pauli_xz_ops(f)) - 5) <= 0.3


def test_bgc_target_is_double_commutator():
    f = builders.build_bgc(1)
    assert f.nesting == (1, 1, 0) and f.target_sign == -1


def test_jk_verification_runs():
    f = builders.build_jk(2, 1)
    assert f.nu == 4 and len(f) == 12


def test_nested_min_rule():
    assert builders.build_nested(1, 3).nu == 5
    assert builders.build_nested(2, 3).nu == 8
    assert builders.build_nested(1, 1).nu == 4


def test_symmetrized_order():
    assert builders.build_odd_symmetrized(3).nu == 8


def test_gc_base_order():
    for k in range(1, 5):
        assert builders.build_gc_base(k).nu == k + 2


def test_refine_generic_schedule_exponent():
    w = builders.build_gc_base(2)
    r = builders.refine_generic(w)
    s = builders.coeff_even(0.5, 2)
    assert r.terms[0].coeff == pytest.approx(w.terms[0].coeff * s.nu_p)
    assert math.isclose(s.nu_p ** 4 * 4, s.mu_p ** 4)
