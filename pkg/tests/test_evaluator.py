import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from commsplit import builders
from commsplit.evaluator import (
    InsufficientDataError,
    check_grid,
    default_grid,
    error_at,
    evaluate,
    exact_target,
    fit_slope,
    formula_target,
    order_scan,
    pauli_xz_ops,
    random_ops,
    segment_error,
    segment_evolve,
)
from commsplit.linalg import SIGMA_X, SIGMA_Z, OperatorSet, commutator, expm, is_unitary, spectral_norm


def test_evaluate_group_commutator_by_hand(pauli_xz):
    f = builders.build_odd(1, 1)
    t = 0.3
    a, b = pauli_xz[1], pauli_xz[0]
    want = expm(a * t) @ expm(b * t) @ expm(-a * t) @ expm(-b * t)
    assert spectral_norm(evaluate(f, pauli_xz, t) - want) <= 1e-14


def test_leftmost_term_is_leftmost_factor():
    f = builders.build_even(1, 2)
    ops = pauli_xz_ops(f)
    t = 0.4
    want = np.eye(2, dtype=complex)
    for term in f.terms:
        want = want @ expm(term.coeff * t**term.tpow * ops[term.slot])
    assert spectral_norm(evaluate(f, ops, t) - want) <= 1e-14


def test_target_uses_k_plus_one_power():
    f = builders.build_even(1, 2)
    ops = pauli_xz_ops(f)
    t = 0.5
    want = expm(commutator(ops[1], ops[0]) * t**3)
    assert spectral_norm(formula_target(f, ops, t) - want) <= 1e-14


def test_nested_target():
    ops = OperatorSet.from_list([-1j * SIGMA_Z, -1j * SIGMA_X, -1j * SIGMA_X])
    z = commutator(ops[2], commutator(ops[1], ops[0]))
    assert spectral_norm(exact_target(ops, 0.7) - expm(z * 0.7**3)) <= 1e-14


def test_missing_slot_raises():
    f = builders.build_gc_base(2)
    with pytest.raises(KeyError):
        evaluate(f, OperatorSet.from_list([SIGMA_X, SIGMA_Z]), 0.1)


@given(st.integers(0, 2**31), st.floats(0.01, 2.0))
def test_unitary_for_anti_hermitian_slots(seed, t):
    f = builders.build_nestgc(2, 2)
    ops = random_ops(3, 4, np.random.default_rng(seed))
    assert is_unitary(evaluate(f, ops, t), tol=1e-11)


@given(st.integers(0, 2**31))
def test_long_product_has_no_rounding_floor(seed):
    # 250 factors at a tiny time: error should be at the unit-roundoff scale, not accumulate
    f = builders.build_nestgc(3, 2)
    ops = random_ops(3, 4, np.random.default_rng(seed))
    assert error_at(f, ops, 1e-4) <= 1e-13


class TestGrid:
    def test_default(self):
        g = default_grid()
        assert g.size == 31 and g[0] == pytest.approx(1e-3) and g[-1] == pytest.approx(1.0)
        check_grid(g)

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            check_grid(np.geomspace(1e-3, 1, 7))

    def test_ratio_above_half_decade(self):
        with pytest.raises(ValueError):
            check_grid(np.geomspace(1e-4, 1, 8))

    def test_not_geometric(self):
        with pytest.raises(ValueError):
            check_grid(np.linspace(0.1, 1, 10))


class TestFit:
    @given(st.floats(1.0, 9.0), st.floats(-3, 3))
    def test_recovers_power_law(self, nu, logc):
        g = default_grid()
        rows = [(t, math.exp(logc) * t**nu) for t in g]
        try:
            slope, used = fit_slope(rows)
        except InsufficientDataError:
            return
        assert slope == pytest.approx(nu, abs=1e-9)
        assert used >= 4

    def test_insufficient_rows(self):
        rows = [(t, 1e-15) for t in default_grid()]
        with pytest.raises(InsufficientDataError):
            fit_slope(rows)

    def test_window_excludes_out_of_range(self):
        rows = [(t, t**3) for t in default_grid()] + [(2.0, 0.5)]
        slope, _ = fit_slope(rows)
        assert slope == pytest.approx(3.0)


def test_scan_csv_format():
    f = builders.build_odd(1, 1)
    res = order_scan(f, pauli_xz_ops(f))
    text = res.to_csv()
    lines = text.splitlines()
    assert "t,error" in lines
    body = [ln for ln in lines if ln and not ln.startswith("#") and ln != "t,error"]
    assert len(body) == 31
    assert lines[-1].startswith("# slope=") and "window=[1e-12,1e-02]" in lines[-1]
    assert res.fitted_slope == pytest.approx(3.0, abs=0.05)


def test_scan_is_deterministic():
    f = builders.build_odd(2, 1)
    ops = random_ops(2, 4, np.random.default_rng(3))
    assert order_scan(f, ops).to_csv() == order_scan(f, random_ops(2, 4, np.random.default_rng(3))).to_csv()


class TestSegments:
    def test_single_segment_equals_evaluate(self, pauli_xz):
        f = builders.build_odd(1, 1)
        assert np.allclose(segment_evolve(f, pauli_xz, 0.4, 1), evaluate(f, pauli_xz, 0.4))

    def test_step_time(self, pauli_xz):
        f = builders.build_odd(1, 1)
        step = evaluate(f, pauli_xz, 0.8 / 4 ** 0.5)
        assert np.allclose(segment_evolve(f, pauli_xz, 0.8, 4), np.linalg.matrix_power(step, 4))

    def test_error_decreases_with_r(self, pauli_xz):
        f = builders.build_odd(2, 1)
        errs = [segment_error(f, pauli_xz, 1.0, r) for r in (1, 4, 16, 64, 256)]
        assert all(b < a for a, b in zip(errs, errs[1:]))
        # error per segment ~ (t/r^(1/2))^5, total ~ r^(-3/2)
        assert errs[3] / errs[4] == pytest.approx(8.0, rel=0.05)

    def test_extended_precision_agrees(self, pauli_xz):
        f = builders.build_odd(1, 1)
        lo = segment_evolve(f, pauli_xz, 0.5, 1000, high_precision=False)
        hi = segment_evolve(f, pauli_xz, 0.5, 1000, high_precision=True)
        assert spectral_norm(lo - hi) <= 1e-11

    def test_rejects_zero_segments(self, pauli_xz):
        with pytest.raises(ValueError):
            segment_evolve(builders.build_odd(1, 1), pauli_xz, 1.0, 0)


def test_pauli_ops_require_two_slots():
    with pytest.raises(ValueError):
        pauli_xz_ops(builders.build_gc_base(2))
