"""Product builder: psi gauges, the level rule, factor bookkeeping,
positivity certificates, psi summability, and export."""

import math

import numpy as np
import pytest

import walshriesz as wr
from walshriesz.riesz import make_factor, thread_cap

C = wr.FLATNESS_CONSTANT


# ---------------------------------------------------------------------------
# psi gauges
# ---------------------------------------------------------------------------

def test_logpow_values_and_envelope():
    psi = wr.PsiSpec.logpow(1.0)
    assert psi.psi(0.0) == 0.0
    x = 0.25
    assert psi.psi(x) == pytest.approx(x * x / (1 + math.log(1 / x)))
    assert psi.epsilon_bar(x) == pytest.approx(1 / (1 + math.log(1 / x)))
    # envelope is monotone and decays toward zero
    grid = np.logspace(-9, 0, 40)
    vals = [psi.epsilon_bar(g) for g in grid]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert vals[0] < 0.05
    psi.validate()


def test_power_preset():
    psi = wr.PsiSpec.power(1.0)
    assert psi.psi(0.5) == pytest.approx(0.125)
    assert psi.epsilon_bar(0.5) == pytest.approx(0.5)
    psi.validate()


def test_quadratic_rejected():
    psi = wr.PsiSpec.quadratic()
    with pytest.raises(wr.PsiHypothesisError, match="envelope"):
        psi.validate()


def test_parse_descriptors():
    assert wr.PsiSpec.parse("preset:logpow,p=2").descriptor == "preset:logpow,p=2"
    assert wr.PsiSpec.parse("preset:power,delta=0.5").psi(0.1) == pytest.approx(
        0.1**2.5
    )
    with pytest.raises(ValueError):
        wr.PsiSpec.parse("preset:unknown")
    with pytest.raises(ValueError):
        wr.PsiSpec.parse("spline:3")
    with pytest.raises(ValueError):
        wr.PsiSpec.parse("preset:logpow,p")


def test_table_psi():
    xs = np.logspace(-6, 0, 50)
    ys = xs**3  # cubic gauge sampled on a grid
    psi = wr.PsiSpec.from_table(xs, ys)
    psi.validate()
    assert psi.epsilon_bar(1e-3) <= 2e-3
    flat = wr.PsiSpec.from_table([0.1, 1.0], [0.01, 1.0])  # x^2 in disguise
    assert not flat.envelope_decays


def test_budget_terms():
    budget = wr.SummabilityBudget()
    assert budget.term_bound(1) == 0.5
    assert budget.term_bound(3) == 0.125
    assert wr.SummabilityBudget(scale=2.25).total(3) == pytest.approx(2.25 * 0.875)
    with pytest.raises(ValueError):
        budget.term_bound(0)


# ---------------------------------------------------------------------------
# level selection
# ---------------------------------------------------------------------------

def test_first_level_set_by_envelope_not_positivity():
    # on the empty state the positivity condition holds for every level,
    # so the envelope condition picks the level
    state = wr.empty_state()
    psi = wr.PsiSpec.power(1.0)  # psi = x^3, envelope x
    level = wr.choose_next_level(state, psi, wr.SummabilityBudget())
    assert level == 0  # (1/2C) <= 1/2 already


def test_level_monotone_in_budget():
    psi = wr.PsiSpec.logpow(1.0)
    state = wr.empty_state()
    state = wr.add_factor(state, 0)
    state = wr.add_factor(state, 0)
    levels = []
    for scale in (4.0, 2.25, 1.0, 0.5):
        levels.append(
            wr.choose_next_level(state, psi, wr.SummabilityBudget(scale), level_cap=256)
        )
    assert levels == sorted(levels)
    assert levels[0] < levels[-1]  # the log-slow envelope reacts strongly


def test_level_selection_fails_without_decay():
    psi = wr.PsiSpec.quadratic()  # envelope stuck at 1
    state = wr.empty_state()
    state = wr.add_factor(state, 0)
    with pytest.raises(wr.LevelSelectionError):
        wr.choose_next_level(state, psi, wr.SummabilityBudget(scale=0.5), level_cap=20)


# ---------------------------------------------------------------------------
# factors and state
# ---------------------------------------------------------------------------

def test_add_factor_single_rademacher():
    state = wr.add_factor(wr.empty_state(), 0)
    a = 0.5 / C
    assert state.spectrum[0] == 1.0
    assert state.spectrum[1] == pytest.approx(a)
    assert state.inf_value == pytest.approx(1 - a)
    assert state.inf_exact
    assert state.used_coordinates == 1


def test_add_factor_norm_product_matches_direct_sum():
    state = wr.empty_state()
    for level in (0, 2, 3):
        state = wr.add_factor(state, level)
    direct = sum(abs(c) for c in state.spectrum.values())
    assert abs(state.norm_a - direct) < 1e-12 * state.norm_a
    norm2_direct = math.sqrt(sum(c * c for c in state.spectrum.values()))
    norm2_product = math.prod(
        math.sqrt(1 + f.norm_2**2) for f in state.factors
    )
    assert abs(norm2_direct - norm2_product) < 1e-12


def test_add_factor_block_overlap_is_hard_error():
    state = wr.add_factor(wr.empty_state(), 1)
    with pytest.raises(wr.BlockOverlapError):
        wr.add_factor(state, 0, wr.BlockSpec((2,)))


def test_add_factor_coordinate_budget():
    state = wr.empty_state(max_coordinates=3)
    with pytest.raises(wr.CoordinateBudgetError):
        wr.add_factor(state, 3)


def test_add_factor_block_size_checked():
    with pytest.raises(ValueError, match="level"):
        wr.add_factor(wr.empty_state(), 1, wr.BlockSpec((1,)))


def test_factor_sup_on_far_block():
    # blocks far to the right must not force a dense transform at the
    # block's absolute coordinate depth
    from walshriesz.riesz import _factor_sup

    factor = make_factor(1, wr.BlockSpec((25, 26)))
    a = (0.5 / C) * 2.0 ** (-0.5)
    # phi at level 1 has values +-2 and 0 on its two coordinates
    assert _factor_sup(factor) == pytest.approx(2 * a)


def test_inf_lower_bound_past_cap():
    state = wr.empty_state(exhaustive_cap=2)
    state = wr.add_factor(state, 0)
    state = wr.add_factor(state, 0)
    exact = state.inf_value
    state = wr.add_factor(state, 0)  # three coordinates > cap of two
    assert not state.inf_exact
    a = 0.5 / C
    assert state.inf_value == pytest.approx(exact * (1 - a))
    true_inf = float(np.min(wr.product_values(state.factors, 3)))
    assert state.inf_value <= true_inf + 1e-15


def test_build_measure_flagship_shape():
    state = wr.build_measure(
        wr.PsiSpec.logpow(1.0), 3, wr.SummabilityBudget(scale=2.25)
    )
    assert [f.level for f in state.factors] == [0, 0, 10]
    assert state.used_coordinates == 13
    assert len(state.spectrum) == 2 * 2 * 1025
    assert state.block_boundaries() == [2, 4, 8192]


def test_sigma_constant_per_factor():
    state = wr.build_measure(
        wr.PsiSpec.logpow(1.0), 3, wr.SummabilityBudget(scale=2.25)
    )
    for f in state.factors:
        assert abs(f.norm_2 - 0.5 / C) < 1e-12
        # mean zero: no w_0 component
        assert 0 not in set(int(i) for i in f.indices)


# ---------------------------------------------------------------------------
# positivity certificates
# ---------------------------------------------------------------------------

def test_certificate_one_factor():
    state = wr.add_factor(wr.empty_state(), 0)
    cert = wr.verify_all_partial_sums(state)
    a = 0.5 / C
    assert cert.exhaustive
    # orders: S_1 = 1, S_2 = 1 +- a; minimum frozen at 1 - a > 1/2
    assert cert.global_min == pytest.approx(1 - a)
    assert cert.global_min > 0.5
    assert cert.passed


def test_certificate_empty_state():
    cert = wr.verify_all_partial_sums(wr.empty_state())
    assert cert.passed and cert.global_min == 1.0


def test_certificate_flags_negative_prefix():
    # an oversized hand-built factor breaks positivity: 1 + a r_1 + 0.9 r_2
    state = wr.add_factor(wr.empty_state(), 0)
    big = make_factor(0, wr.BlockSpec((2,)))
    big = wr.Factor(
        level=0,
        block=(2,),
        amplitude=0.9,
        indices=big.indices,
        coeffs=np.array([0.9]),
    )
    state = wr.RieszProductState(
        factors=state.factors + (big,),
        spectrum={**state.spectrum, 2: 0.9, 3: 0.9 * state.spectrum[1]},
        norm_a=state.norm_a * 1.9,
        inf_value=float(np.min(wr.product_values(state.factors + (big,), 2))),
        inf_exact=True,
        used_coordinates=2,
    )
    cert = wr.verify_all_partial_sums(state)
    assert not cert.passed
    expected = 1 - 0.5 / C - 0.9  # S_3 at r_1 = -1, r_2 = -1
    assert cert.global_min == pytest.approx(expected)


def test_certificate_with_gap_block():
    # blocks may skip coordinates; bands still track the block sups
    state = wr.add_factor(wr.empty_state(), 0, wr.BlockSpec((3,)))
    cert = wr.verify_all_partial_sums(state)
    assert cert.band_edges == (1, 8)
    assert cert.global_min == pytest.approx(1 - 0.5 / C)
    assert cert.passed


def test_certificate_sampled_past_cap():
    state = wr.empty_state(exhaustive_cap=2)
    for level in (0, 0, 1):
        state = wr.add_factor(state, level)
    cert = wr.verify_all_partial_sums(state, seed=7)
    assert not cert.exhaustive
    assert cert.sampling["seed"] == 7
    assert cert.passed  # the construction is positive even when sampled


def test_certificate_threaded_matches_serial(monkeypatch):
    state = wr.build_measure(
        wr.PsiSpec.power(1.0), 3, wr.SummabilityBudget()
    )
    serial = wr.verify_all_partial_sums(state)
    monkeypatch.setenv("WALSH_HELSON_THREADS", "4")
    assert thread_cap() == 4
    threaded = wr.verify_all_partial_sums(state)
    assert threaded.global_min == serial.global_min
    assert threaded.stage_margins == serial.stage_margins


def test_thread_cap_parsing(monkeypatch):
    monkeypatch.delenv("WALSH_HELSON_THREADS", raising=False)
    assert thread_cap() == 1
    monkeypatch.setenv("WALSH_HELSON_THREADS", "junk")
    assert thread_cap() == 1
    monkeypatch.setenv("WALSH_HELSON_THREADS", "0")
    assert thread_cap() == 1


# ---------------------------------------------------------------------------
# psi summability
# ---------------------------------------------------------------------------

def test_psi_report_single_stage_equality():
    # one stage of the cubic gauge: sum over the window has the closed form
    # 2^l a^3 and the bound 2^l a^2 * envelope(a) coincides with it
    psi = wr.PsiSpec.power(1.0)
    state = wr.add_factor(wr.empty_state(), 3)
    report = wr.psi_sum_report(state, psi)
    a = (0.5 / C) * 2.0 ** (-1.5)
    expected = 8 * a**3
    assert report.stage_exact[0] == pytest.approx(expected, rel=1e-12)
    assert report.stage_bounds[0] == pytest.approx(expected, rel=1e-12)
    assert report.ok


def test_psi_report_empty_product():
    report = wr.psi_sum_report(wr.empty_state(), wr.PsiSpec.logpow(1.0))
    assert report.exact_total == 0.0
    assert report.c0_term == pytest.approx(1.0)  # psi(1) for c_0, kept separate


def test_psi_report_flagship():
    psi = wr.PsiSpec.logpow(1.0)
    budget = wr.SummabilityBudget(scale=2.25)
    state = wr.build_measure(psi, 3, budget)
    report = wr.psi_sum_report(state, psi, budget)
    assert report.ok
    assert report.exact_total <= report.bound_total
    for exact, bound in zip(report.stage_exact, report.stage_bounds):
        assert exact <= bound * (1 + 1e-12)
    assert report.budget_terms == (1.125, 0.5625, 0.28125)


# ---------------------------------------------------------------------------
# export / import
# ---------------------------------------------------------------------------

def test_export_roundtrip(tmp_path):
    state = wr.build_measure(wr.PsiSpec.power(1.0), 2, wr.SummabilityBudget())
    path = tmp_path / "measure.csv"
    wr.export_measure(state, path)
    spectrum = wr.load_spectrum_csv(path)
    assert spectrum == state.spectrum


def test_export_empty_state(tmp_path):
    path = tmp_path / "measure.csv"
    wr.export_measure(wr.empty_state(), path)
    assert wr.load_spectrum_csv(path) == {0: 1.0}


def test_manifest_roundtrip():
    state = wr.build_measure(
        wr.PsiSpec.logpow(1.0), 3, wr.SummabilityBudget(scale=2.25)
    )
    manifest = wr.state_manifest(state)
    for stage, factor in zip(manifest["stages"], state.factors):
        expected = (0.5 / C) * 2.0 ** (-factor.level / 2)
        assert stage["amplitude"] == expected  # exact float equality
    rebuilt = wr.state_from_manifest(manifest)
    assert rebuilt.spectrum == state.spectrum
    assert rebuilt.norm_a == state.norm_a


def test_state_series_matches_pointwise_product():
    state = wr.build_measure(wr.PsiSpec.power(1.0), 3, wr.SummabilityBudget())
    series = wr.state_series(state)
    from_spectrum = wr.inverse_fwht(series).values
    pointwise = wr.product_values(state.factors, state.used_coordinates)
    assert np.max(np.abs(from_spectrum - pointwise)) < 1e-12
