import math

import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st
from scipy.stats import binom

from ltem_ntn import retx as rx

H, A, B = rx.RetxPolicy.harq, rx.RetxPolicy.arq, rx.RetxPolicy.blind
CURVE = rx.WaterfallCurve.calibrated(-3.055 + 10 * math.log10(4), 0.1, 3.0)


# BLER curves

def test_logistic_midpoint_and_saturation():
    c = rx.BlerCurve(2.0, 1.5)
    assert rx.bler(c, 2.0) == 0.5
    assert rx.bler(c, 1e3) == pytest.approx(0.0, abs=1e-300)
    assert rx.bler(c, -1e3) == 1.0


def test_logistic_formula():
    c = rx.BlerCurve(-1.0, 0.7)
    for s in (-5.0, 0.0, 3.0):
        assert rx.bler(c, s) == pytest.approx(1 / (1 + math.exp(0.7 * (s + 1.0))), rel=1e-12)


@pytest.mark.parametrize("cls,steep", [(rx.BlerCurve, 0.4), (rx.BlerCurve, 2.0),
                                       (rx.WaterfallCurve, 1.0), (rx.WaterfallCurve, 3.0)])
def test_calibration_hits_target(cls, steep):
    c = cls.calibrated(4.2, 0.1, steep)
    assert rx.bler(c, 4.2) == pytest.approx(0.1, rel=1e-12)


def test_logistic_calibration_closed_form():
    # bler = 0.1  <=>  slope * (s - s50) = ln 9
    c = rx.BlerCurve.calibrated(0.0, 0.1, 2.0)
    assert c.snr50_dB == pytest.approx(-math.log(9) / 2.0, abs=1e-12)


def test_waterfall_midpoint_and_shape():
    c = rx.WaterfallCurve(1.0, 3.0)
    assert rx.bler(c, 1.0) == 0.5
    grid = np.linspace(-20, 8, 400)
    vals = rx.bler(c, grid)
    assert np.all(np.diff(vals) < 0)
    assert np.all((vals > 0) & (vals < 1))


def test_curve_validation():
    with pytest.raises(ValueError):
        rx.BlerCurve(0.0, 0.0)
    with pytest.raises(ValueError):
        rx.WaterfallCurve(0.0, 0.5)
    with pytest.raises(ValueError):
        rx.BlerCurve.calibrated(0.0, 1.0)


# residual BLER

def test_plain_arq_independence():
    c = rx.BlerCurve.calibrated(0.0, 0.1)
    assert rx.residual_bler(A(2), c, 0.0) == pytest.approx(0.01, rel=1e-12)


def test_harq_uses_combined_snr():
    s = -2.0
    assert rx.residual_bler(H(4), CURVE, s) == pytest.approx(rx.bler(CURVE, s + 6.0206), rel=1e-4)
    assert rx.residual_bler(H(4), CURVE, s) < rx.residual_bler(A(4), CURVE, s)


def test_blind4_equals_harq4():
    for s in np.arange(-15, 10, 0.5):
        assert rx.residual_bler(B(4, 1), CURVE, s, 4) == rx.residual_bler(H(4), CURVE, s)


def test_blind_requires_whole_rounds():
    with pytest.raises(ValueError):
        rx.residual_bler(B(4, 3), CURVE, 0.0, 6)
    with pytest.raises(ValueError):
        rx.residual_bler(H(4), CURVE, 0.0, 0)
    with pytest.raises(ValueError):
        B(3, 1)


def test_logistic_tail_breaks_combining_dominance():
    # why the waterfall family is the default: far above snr50 the logistic
    # tail makes two independent attempts beat 3 dB of combining
    c = rx.BlerCurve(0.0, 1.0)
    assert rx.residual_bler(H(2), c, 10.0) > rx.residual_bler(A(2), c, 10.0)
    assert rx.residual_bler(H(2), c, 0.0) < rx.residual_bler(A(2), c, 0.0)


# expected usage

def test_usage_high_snr_limits():
    assert rx.expected_subframes(B(4, 512), CURVE, 30.0) == pytest.approx(4.0, abs=1e-9)
    assert rx.expected_subframes(H(2048), CURVE, 30.0) == pytest.approx(1.0, abs=1e-9)


def test_usage_harq_sum_formula():
    pol = H(4)
    s = -6.0
    q = [1.0] + [rx.bler(CURVE, s + 10 * math.log10(m)) for m in (1, 2, 3)]
    assert rx.usage(pol, CURVE, s).expected_subframes == pytest.approx(sum(q), rel=1e-12)


def test_usage_blind_geometric_formula():
    pol = B(4, 3)
    s = -5.0
    p = rx.bler(CURVE, s + 10 * math.log10(4))
    assert rx.usage(pol, CURVE, s).expected_subframes == pytest.approx(4 * (1 + p + p * p), rel=1e-12)


def test_blind_diverges_relative_to_harq():
    harq, blind = H(2048), B(4, 512)
    s50 = CURVE.snr50_dB
    assert rx.expected_subframes(blind, CURVE, s50) > rx.expected_subframes(harq, CURVE, s50)
    ratios = [rx.usage(blind, CURVE, s).expected_subframes / rx.usage(harq, CURVE, s).expected_subframes
              for s in np.arange(-30, s50, 0.5)]
    assert max(ratios) > 10


def test_non_convergence_reported():
    with pytest.raises(rx.NonConvergenceError):
        rx.expected_subframes(H(2), CURVE, -30.0)
    rows = rx.curve_rows([H(2)], CURVE, [-30.0, 20.0])
    assert rows[0][-1] == "nonconverged" and rows[1][-1] == ""


def test_curve_csv(tmp_path):
    rows = rx.curve_rows(rx.figure_policies()["fig1"], CURVE, [-1.0, 0.0])
    path = rx.write_curve_csv(tmp_path / "c.csv", rows)
    lines = open(path).read().splitlines()
    assert lines[0].startswith("snr_db,policy,n,residual_bler,expected_subframes")
    assert len(lines) == 1 + 2 * 5


# Monte Carlo

def test_mc_plain_arq_binomial_oracle():
    c = rx.BlerCurve.calibrated(0.0, 0.1)
    mc = rx.monte_carlo_retx(A(2), c, 0.0, 10**6, seed=7)
    assert abs(mc.residual_bler - 0.01) <= 3 * math.sqrt(0.01 * 0.99 / 10**6)
    # 99.7% interval of the exact binomial count covers the estimate
    lo, hi = binom.interval(0.997, 10**6, 0.01)
    assert lo <= mc.residual_bler * 10**6 <= hi


def test_mc_harq_matches_closed_form():
    for s in (-8.0, -5.0, -3.0):
        mc = rx.monte_carlo_retx(H(4), CURVE, s, 200_000, seed=1)
        exact = rx.residual_bler(H(4), CURVE, s)
        assert abs(mc.residual_bler - exact) <= mc.confidence_halfwidth
        assert abs(mc.mean_subframes - rx.usage(H(4), CURVE, s).expected_subframes) <= 4 * mc.subframes_stderr


def test_mc_deterministic_and_worker_independent():
    a = rx.monte_carlo_retx(B(4, 3), CURVE, -6.0, 300_000, seed=11)
    b = rx.monte_carlo_retx(B(4, 3), CURVE, -6.0, 300_000, seed=11)
    c = rx.monte_carlo_retx(B(4, 3), CURVE, -6.0, 300_000, seed=11, workers=4)
    assert a == b == c
    assert rx.monte_carlo_retx(B(4, 3), CURVE, -6.0, 300_000, seed=12) != a


def test_mc_rejects_small_trial_counts():
    with pytest.raises(ValueError):
        rx.monte_carlo_retx(A(2), CURVE, 0.0, 999)


def test_mc_twenty_random_points():
    rng = np.random.default_rng(2024)
    pols = [H(1), H(2), H(4), A(2), A(4), B(4, 1), B(4, 3), B(8, 2)]
    inside = 0
    for i in range(20):
        pol = pols[rng.integers(len(pols))]
        s = float(rng.uniform(-12, 3))
        mc = rx.monte_carlo_retx(pol, CURVE, s, 100_000, seed=i)
        inside += abs(mc.residual_bler - rx.residual_bler(pol, CURVE, s)) <= mc.confidence_halfwidth
    assert inside >= 19


# HARQ-process and repetition arithmetic

def test_peak_rate_geo():
    cfg = rx.harq_config("ce_mode_a", rx.CAT_M1_DL_TBS, 541.0)
    assert cfg.n_processes == 10
    assert rx.peak_rate(cfg) == pytest.approx(18_484, abs=1)
    assert rx.peak_rate(cfg) / 1e3 == pytest.approx(18.5, abs=0.05)


def test_processes_for_peak():
    assert rx.harq_processes_for_peak(541.0, 1.0) == 541
    assert rx.harq_processes_for_peak(8.0, 1.0) == 8


@pytest.mark.parametrize("n", [1, 2, 10])
def test_peak_rate_when_rtt_equals_tti(n):
    assert rx.peak_rate(rx.HarqConfig(n, 1000, 1.0, 1.0)) == pytest.approx(1e6)


def test_ce_presets():
    assert rx.CE_MODE_PRESETS["ce_mode_a"] == rx.CeModePreset(32, 10)
    assert rx.CE_MODE_PRESETS["ce_mode_b"] == rx.CeModePreset(2048, 2)


@pytest.mark.parametrize("tbs,rate,dur,reps", [(504, 7000, 72, 128), (504, 504_000, 1, 1),
                                               (2984, 7000, 427, 512)])
def test_required_repetitions(tbs, rate, dur, reps):
    assert rx.transmission_duration_ms(tbs, rate) == dur
    assert rx.required_repetitions(tbs, rate) == reps


def test_required_repetitions_errors():
    with pytest.raises(ValueError):
        rx.required_repetitions(504, 0)
    with pytest.raises(ValueError):
        rx.required_repetitions(100_000, 10)
    with pytest.raises(ValueError):
        rx.required_repetitions(504, 7000, [4, 2])


# properties

curves = st.builds(rx.WaterfallCurve, st.floats(-10, 10), st.floats(1.0, 5.0))
snrs = st.floats(-30, 30)


@settings(max_examples=300, deadline=None)
@given(curves, snrs, st.integers(2, 64))
def test_harq_never_worse_than_arq(curve, s, n):
    # order 1 gives exact equality, so allow for rounding in the dB round trip
    arq = rx.residual_bler(A(n), curve, s, n)
    assert rx.residual_bler(H(n), curve, s, n) <= arq * (1 + 1e-12)


@settings(max_examples=200, deadline=None)
@given(curves, snrs, st.integers(1, 32), st.sampled_from([1, 2, 4, 8]))
def test_residual_non_increasing_in_n(curve, s, n, nb):
    assert rx.residual_bler(H(64), curve, s, n + 1) <= rx.residual_bler(H(64), curve, s, n)
    assert rx.residual_bler(A(64), curve, s, n + 1) <= rx.residual_bler(A(64), curve, s, n)
    pol = B(nb, 64)
    assert rx.residual_bler(pol, curve, s, nb * (n + 1)) <= rx.residual_bler(pol, curve, s, nb * n)


@settings(max_examples=200, deadline=None)
@given(curves, snrs, st.floats(0, 10),
       st.sampled_from([H(1), H(4), A(4), B(4, 1), B(4, 8), B(16, 2)]))
@example(rx.WaterfallCurve(0.0, 5.0), -21.0, 5.960464477539063e-08, B(16, 2))
def test_usage_non_increasing_in_snr_and_bounded(curve, s, ds, pol):
    lo, hi = rx.usage(pol, curve, s), rx.usage(pol, curve, s + ds)
    assert hi.expected_subframes <= lo.expected_subframes + 1e-12
    floor = pol.n_blind if pol.kind is rx.RetxKind.BLIND_PLUS_ARQ else 1
    assert lo.expected_subframes >= floor


@settings(max_examples=200, deadline=None)
@given(curves, snrs)
def test_harq_usage_never_above_blind(curve, s):
    assert (rx.usage(H(2048), curve, s).expected_subframes
            <= rx.usage(B(4, 512), curve, s).expected_subframes + 1e-9)
