import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from commsplit import builders
from commsplit.evaluator import evaluate, random_ops
from commsplit.formula_ir import (
    ExpTerm,
    FormulaParseError,
    ProductFormula,
    concat,
    deserialize,
    invert,
    make_formula,
    power,
    same_terms,
    scale,
    serialize,
    simplify,
    stats,
    time_scale,
)
from commsplit.linalg import spectral_norm


def two_slot_formulas(max_terms=12):
    term = st.tuples(
        st.integers(0, 1),
        st.floats(-2, 2, allow_nan=False).filter(lambda c: abs(c) > 1e-3),
        st.just(1),
    )
    return st.lists(term, min_size=2, max_size=max_terms).filter(lambda ts: {s for s, _, _ in ts} == {0, 1}).map(lambda ts: make_formula(ts, k=1, p2=1, nu=3))


def group_commutator():
    return make_formula([(1, 1, 1), (0, 1, 1), (1, -1, 1), (0, -1, 1)], k=1, p2=2, nu=3, symmetry="symmetric")


class TestTypes:
    def test_term_rejects_zero_tpow(self):
        with pytest.raises(ValueError):
            ExpTerm(0, 1.0, 0)

    def test_term_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            ExpTerm(0, math.inf)

    def test_empty_formula_rejected(self):
        with pytest.raises(ValueError):
            ProductFormula(k=1, p2=2, terms=(), nu=3)

    def test_nu_must_exceed_k_plus_one(self):
        with pytest.raises(ValueError):
            make_formula([(0, 1, 1)], k=1, p2=2, nu=2)

    def test_bad_symmetry_tag(self):
        with pytest.raises(ValueError):
            make_formula([(0, 1, 1)], k=1, p2=2, nu=3, symmetry="odd")


class TestScale:
    def test_identity_factors(self):
        f = group_commutator()
        assert scale(f, {0: 1.0, 1: 1.0}) == f

    def test_gamma_scaling_of_base(self):
        g = builders.coeff_odd(1, 1).gamma_p
        assert g == pytest.approx(0.9238795, abs=1e-7)
        f = scale(group_commutator(), {1: g, 0: g})
        assert [t.coeff for t in f.terms] == pytest.approx([g, g, -g, -g])
        assert f.symmetry == "symmetric"

    def test_unequal_magnitudes_drop_tag(self):
        assert scale(group_commutator(), {1: 2.0, 0: 1.0}).symmetry == "none"

    def test_middle_factor_of_even_recursion(self):
        s = builders.coeff_even(1, 2)
        v = builders.build_even(1, 2)
        m = scale(v, {1: -s.mu_p, 0: s.mu_p**2})
        for a, b in zip(v.terms, m.terms):
            factor = -s.mu_p if a.slot == 1 else s.mu_p**2
            assert b.coeff == pytest.approx(a.coeff * factor, rel=1e-15)

    def test_missing_slot(self):
        with pytest.raises(ValueError):
            scale(group_commutator(), {1: 1.0})


class TestInvert:
    def test_reversal_negation(self):
        inv = invert(group_commutator())
        assert [(t.slot, t.coeff) for t in inv.terms] == [(0, 1), (1, 1), (0, -1), (1, -1)]

    @given(two_slot_formulas())
    def test_involution(self, f):
        assert invert(invert(f)) == f

    @given(two_slot_formulas(), st.integers(0, 2**31))
    def test_group_inverse_numerically(self, f, seed):
        ops = random_ops(2, 4, np.random.default_rng(seed))
        prod = evaluate(f, ops, 0.3) @ evaluate(invert(f), ops, 0.3)
        assert spectral_norm(prod - np.eye(4)) <= 1e-12


class TestConcat:
    def test_six_blocks_of_odd_recursion(self):
        assert len(builders.build_odd(2, 1)) == 6 * len(builders.build_odd(1, 1))

    def test_mismatched_k(self):
        with pytest.raises(ValueError):
            concat(builders.build_odd(1, 1), builders.build_odd(1, 3))

    def test_metadata(self):
        a, b = builders.build_odd(1, 1), builders.build_odd(2, 1)
        c = concat(a, b)
        assert c.symmetry == "none" and c.nu == 3
        assert concat(a, b, nu=9).nu == 9

    @given(two_slot_formulas(), two_slot_formulas(), st.integers(0, 1000))
    def test_evaluation_is_multiplicative(self, f, g, seed):
        ops = random_ops(2, 3, np.random.default_rng(seed))
        lhs = evaluate(concat(f, g), ops, 0.7)
        rhs = evaluate(f, ops, 0.7) @ evaluate(g, ops, 0.7)
        assert spectral_norm(lhs - rhs) <= 1e-12


class TestSimplify:
    def test_even_base_from_eight_terms(self):
        xi = 2 ** (-1 / 3)
        half = make_formula([(1, xi, 1), (0, xi**2, 2), (1, -xi, 1)], k=2, p2=2, nu=5)
        eight = concat(half, make_formula([(1, -xi, 1), (0, -(xi**2), 2), (1, xi, 1)], k=2, p2=2, nu=5))
        merged = simplify(eight)
        assert len(eight) == 6 and len(merged) == 5
        assert same_terms(merged.terms, builders.build_even(1, 2).terms, tol=1e-15)

    def test_cancellation(self):
        f = make_formula([(0, 1, 1), (1, 0.5, 1), (1, -0.5, 1), (0, 2, 1)], k=1, p2=1, nu=3)
        assert [(t.slot, t.coeff) for t in simplify(f).terms] == [(0, 3.0)]

    def test_to_identity_rejected(self):
        with pytest.raises(ValueError):
            simplify(make_formula([(0, 1, 1), (0, -1, 1)], k=1, p2=1, nu=3))

    @given(two_slot_formulas(20))
    def test_idempotent(self, f):
        try:
            once = simplify(f)
        except ValueError:
            return
        assert simplify(once) == once

    @given(two_slot_formulas(20), st.integers(0, 1000))
    def test_evaluation_unchanged(self, f, seed):
        try:
            g = simplify(f)
        except ValueError:
            return
        ops = random_ops(2, 4, np.random.default_rng(seed))
        assert spectral_norm(evaluate(f, ops, 0.5) - evaluate(g, ops, 0.5)) <= 1e-13 * len(f) + 1e-15


class TestStats:
    def test_group_commutator(self):
        s = stats(builders.build_odd(1, 1))
        assert (s.n_terms, s.q_mean, s.q_max) == (4, 1.0, 1.0)
        assert all(v == 0 for v in s.slot_sums.values())

    def test_symmetrized(self):
        assert stats(builders.build_odd_symmetrized(1)).n_terms == 8

    def test_even_base_max(self):
        s = stats(builders.build_even(1, 2))
        assert s.n_terms == 5
        assert s.q_max == pytest.approx(2 * 0.793701, abs=1e-6)

    @given(two_slot_formulas())
    def test_mean_below_max(self, f):
        s = stats(f)
        assert s.q_mean <= s.q_max + 1e-15
        assert s.n_terms == len(f.terms)


class TestSerialization:
    def test_round_trip(self):
        f = builders.build_odd(1, 1)
        assert deserialize(serialize(f)) == f

    def test_document_shape(self):
        doc = json.loads(serialize(builders.build_even(1, 2)))
        assert set(doc) >= {"k", "p2", "symmetry", "nu", "terms"}
        coeff = doc["terms"][0]["coeff"]
        assert isinstance(coeff, str) and len(coeff.replace("-", "").replace(".", "").split("e")[0]) >= 17

    def test_rejects_tpow_zero(self):
        doc = json.loads(serialize(builders.build_odd(1, 1)))
        doc["terms"][2]["tpow"] = 0
        with pytest.raises(FormulaParseError) as err:
            deserialize(json.dumps(doc))
        assert "terms[2].tpow" in str(err.value)

    def test_syntax_error_has_position(self):
        with pytest.raises(FormulaParseError) as err:
            deserialize(b'{"k": 1, "p2": ')
        assert err.value.position is not None

    def test_large_nestgc_preserves_order(self):
        f = builders.build_nestgc(3, 2)
        assert len(f) == 250
        assert deserialize(serialize(f)).terms == f.terms

    @given(two_slot_formulas())
    def test_round_trip_exact(self, f):
        assert deserialize(serialize(f)) == f

    def test_target_override_round_trips(self):
        f = builders.build_bgc(1)
        g = deserialize(serialize(f))
        assert g.nesting == (1, 1, 0) and g.target_sign == -1


def test_time_scale_matches_slot_scale():
    f = builders.build_odd(1, 3)
    lam = 0.7
    assert time_scale(f, lam).terms == scale(f, {1: lam, 0: lam**3}).terms


def test_power_repeats():
    f = builders.build_odd(1, 1)
    assert len(power(f, 3)) == 12
