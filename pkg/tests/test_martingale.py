"""Martingale decomposition, the positivity equivalence, shifted bounds,
and the product-measure diagnostics."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import walshriesz as wr

C = wr.FLATNESS_CONSTANT


def _random_series(seed, depth=5):
    rng = np.random.default_rng(seed)
    return wr.WalshSeries.from_coeffs(rng.uniform(-1, 1, 1 << depth))


# ---------------------------------------------------------------------------
# decomposition
# ---------------------------------------------------------------------------

def test_decompose_constant_series():
    series = wr.WalshSeries.from_coeffs([1.0, 0.0, 0.0, 0.0])
    dec = wr.decompose(series)
    for table in dec.m_tables:
        assert np.all(table.values == 1.0)
    for table in dec.n_tables:
        assert np.all(table.values == 0.0)


def test_decompose_index_bookkeeping():
    series = wr.WalshSeries.from_coeffs([1.0, 0.5, 0.25, 0.1])
    dec = wr.decompose(series)
    # N_1 carries c_2, c_3 on w_0, w_1
    n1 = dec.n_tables[1].values
    assert np.allclose(n1, [0.25 + 0.1, 0.25 - 0.1])


def test_decompose_recurrence_and_conservation():
    rng = np.random.default_rng(99)
    series = wr.WalshSeries.from_coeffs(rng.uniform(-1, 1, 64))
    dec = wr.decompose(series)
    c0 = series.coeffs[0]
    for k in range(series.depth):
        mk = dec.m_tables[k].values
        nk = dec.n_tables[k].values
        expected = np.concatenate([mk + nk, mk - nk])  # r_(k+1) = +-1 halves
        assert np.max(np.abs(dec.m_tables[k + 1].values - expected)) < 1e-12
        assert abs(dec.m_tables[k].values.mean() - c0) < 1e-12
    assert abs(dec.m_tables[series.depth].values.mean() - c0) < 1e-12


def test_decompose_telescopes_back_to_series():
    rng = np.random.default_rng(5)
    series = wr.WalshSeries.from_coeffs(rng.uniform(-1, 1, 64))
    dec = wr.decompose(series)
    rebuilt = wr.fwht(dec.m_tables[series.depth])
    assert np.max(np.abs(rebuilt.coeffs - series.coeffs)) < 1e-12


def test_n_star_dominates_prefixes():
    series = _random_series(17)
    dec = wr.decompose(series)
    for k in range(series.depth):
        coeffs = series.coeffs[1 << k : 1 << (k + 1)]
        acc = np.zeros(1 << k)
        for n in range(1 << k):
            acc = acc + coeffs[n] * wr.walsh_signs(n, k)
            assert np.all(dec.n_star[k].values >= np.abs(acc) - 1e-12)


# ---------------------------------------------------------------------------
# positivity equivalence
# ---------------------------------------------------------------------------

def test_equivalence_positive_example():
    report = wr.check_positivity_equivalence(
        wr.WalshSeries.from_coeffs([1.0, 0.5, 0.25, 0.1])
    )
    assert report.all_prefixes_nonneg and report.inequality_holds
    assert report.witness is None


def test_equivalence_negative_example_with_witness():
    report = wr.check_positivity_equivalence(
        wr.WalshSeries.from_coeffs([1.0, -1.5, 0.0, 0.0])
    )
    assert not report.all_prefixes_nonneg and not report.inequality_holds
    # frozen by hand: S_2 = 1 - 1.5 r_1 = -0.5 at the all-plus atom
    assert report.witness.kind == "prefix"
    assert report.witness.where == 2
    assert report.witness.atom == 0
    assert report.witness.value == pytest.approx(-0.5)


def test_equivalence_depth_zero():
    assert wr.check_positivity_equivalence(
        wr.WalshSeries.from_coeffs([2.0])
    ).all_prefixes_nonneg
    report = wr.check_positivity_equivalence(wr.WalshSeries.from_coeffs([-1.0]))
    assert not report.all_prefixes_nonneg and not report.inequality_holds


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=150, deadline=None)
def test_equivalence_never_disagrees(seed):
    # check_positivity_equivalence raises InvariantViolation on mismatch
    wr.check_positivity_equivalence(_random_series(seed))


def test_equivalence_random_bulk():
    agree_true = agree_false = 0
    for seed in range(300):
        report = wr.check_positivity_equivalence(_random_series(seed))
        if report.all_prefixes_nonneg:
            agree_true += 1
        else:
            agree_false += 1
    assert agree_false > 0  # random series mostly dip negative
    # engineered positives exercise the other branch
    for seed in range(40):
        rng = np.random.default_rng(seed)
        tail = rng.uniform(-1, 1, 31)
        coeffs = np.concatenate([[np.sum(np.abs(tail)) + 0.1], tail])
        report = wr.check_positivity_equivalence(wr.WalshSeries.from_coeffs(coeffs))
        assert report.all_prefixes_nonneg and report.inequality_holds


# ---------------------------------------------------------------------------
# shifted prefix bound
# ---------------------------------------------------------------------------

def test_shifted_bound_m_zero_reduces_to_maximal():
    series = wr.WalshSeries.from_coeffs([1.0, 0.5, 0.25, 0.1, 0, 0, 0, 0])
    for kj in range(3):
        for k in range(kj, 4):
            assert wr.check_shifted_bound(series, kj, 0, k)


def test_shifted_bound_hand_case():
    coeffs = np.zeros(8)
    coeffs[0], coeffs[1] = 1.0, 0.9
    series = wr.WalshSeries.from_coeffs(coeffs)
    assert wr.check_positivity_equivalence(series).all_prefixes_nonneg
    assert wr.check_shifted_bound(series, 1, 1, 1)


def test_shifted_bound_preconditions():
    series = wr.WalshSeries.from_coeffs([1.0, 0.5, 0.25, 0.1])
    with pytest.raises(ValueError):
        wr.check_shifted_bound(series, 1, 2, 1)  # m >= 2^kj
    with pytest.raises(ValueError):
        wr.check_shifted_bound(series, 1, 0, 0)  # k < kj
    with pytest.raises(ValueError):
        wr.check_shifted_bound(series, 2, 0, 2)  # kj = depth


def test_shifted_bound_exhaustive_on_positive_series():
    rng = np.random.default_rng(11)
    tail = rng.uniform(-1, 1, 63)
    coeffs = np.concatenate([[np.sum(np.abs(tail)) + 0.5], tail])
    series = wr.WalshSeries.from_coeffs(coeffs)
    assert wr.check_positivity_equivalence(series).all_prefixes_nonneg
    for kj in range(series.depth):
        for m in range(1 << kj):
            for k in range(kj, series.depth + 1):
                assert wr.check_shifted_bound(series, kj, m, k)


# ---------------------------------------------------------------------------
# P3
# ---------------------------------------------------------------------------

def test_p3_from_nonnegative_masses():
    rng = np.random.default_rng(3)
    masses = rng.uniform(0.0, 2.0, 16)
    series = wr.fwht(wr.AtomTable(4, masses))
    assert wr.check_p3(series)


def test_p3_negative_example():
    assert not wr.check_p3(wr.WalshSeries.from_coeffs([1.0, -1.5, 0.0, 0.0]))


def test_p3_equals_mass_positivity():
    for seed in range(60):
        series = _random_series(seed, depth=4)
        masses_ok = bool(np.min(wr.inverse_fwht(series).values) >= 0.0)
        assert wr.check_p3(series) == masses_ok


# ---------------------------------------------------------------------------
# singularity diagnostics
# ---------------------------------------------------------------------------

def _built_state(levels, cap=14):
    state = wr.empty_state(exhaustive_cap=cap)
    for level in levels:
        state = wr.add_factor(state, level)
    return state


def test_singularity_empty_product():
    report = wr.singularity_report(wr.empty_state())
    assert report.hellinger == (1.0,)
    assert report.concentration[0] == {0.5: 0.5, 0.9: 0.9, 0.99: 0.99}


def test_singularity_one_factor_closed_form():
    state = _built_state([0])
    report = wr.singularity_report(state)
    a = 0.5 / C
    expected = (math.sqrt(1 + a) + math.sqrt(1 - a)) / 2
    assert report.hellinger[1] == pytest.approx(expected, abs=1e-15)
    assert report.hellinger[1] < 1
    sigma2 = (0.5 / C) ** 2
    assert report.hellinger[1] <= 1 - sigma2 / 8 + sigma2**2


def test_singularity_multiplicative_cross_check():
    state = _built_state([0, 0, 3])
    report = wr.singularity_report(state)
    assert max(
        abs(a - b) for a, b in zip(report.hellinger, report.hellinger_direct)
    ) <= 1e-9
    assert all(b < a for a, b in zip(report.hellinger, report.hellinger[1:]))
    # total mass stays one: E|Pi_k| = E Pi_k = 1
    assert all(abs(x - 1.0) <= 1e-12 for x in report.l1_norms)


# ---------------------------------------------------------------------------
# orthogonality in L^2(mu)
# ---------------------------------------------------------------------------

def test_product_orthogonality_disjoint_blocks():
    state = _built_state([0, 1, 2])
    report = wr.verify_product_orthogonality(state)
    assert report.ok
    assert report.max_mean_residual <= 1e-10
    assert report.max_cross_residual <= 1e-10
    assert report.max_second_moment <= 2 * (1 + (0.5 / C) ** 2) + 1e-10


def test_product_orthogonality_needs_two_factors():
    with pytest.raises(ValueError):
        wr.verify_product_orthogonality(_built_state([0]))


def test_product_orthogonality_overlap_detected():
    # same coordinate in both factors: the cross term is visibly nonzero
    state = _built_state([0])
    shared = state.factors[0]
    report = wr.verify_product_orthogonality([shared, shared])
    assert not report.ok
    assert report.max_cross_residual > 1e-3


def test_strong_orthogonality_admissible_cases():
    state = _built_state([0, 1, 2])
    assert wr.verify_strong_orthogonality(state, [1])
    assert wr.verify_strong_orthogonality(state, [1, 2])
    assert wr.verify_strong_orthogonality(state, [2, 1, 2])


def test_strong_orthogonality_rejects_bad_indices():
    state = _built_state([0, 1])
    with pytest.raises(ValueError, match="at least one"):
        wr.verify_strong_orthogonality(state, [2, 2])
    with pytest.raises(ValueError, match="0, 1 or 2"):
        wr.verify_strong_orthogonality(state, [3])
    with pytest.raises(ValueError, match="at most two"):
        wr.verify_strong_orthogonality(_built_state([0, 1, 2, 3]), [2, 2, 2, 1])


# ---------------------------------------------------------------------------
# envelope diagnostic
# ---------------------------------------------------------------------------

def test_dyadic_block_envelope():
    series = wr.WalshSeries.from_coeffs([1.0, 0.5, -0.25, 0.1])
    assert wr.dyadic_block_envelope(series) == [(0, 0.5), (1, 0.25)]
