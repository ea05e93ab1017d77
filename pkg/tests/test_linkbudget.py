import math
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from ltem_ntn import linkbudget as lb
from ltem_ntn.constants import BOLTZMANN_DB

FX = lb.TABLE2_FIXTURES
K_BOLTZMANN = 1.380649e-23


def test_geo_dl_snr():
    assert lb.snr(FX["geo_dl"]).snr_dB == pytest.approx(-3.04, abs=0.02)


def test_leo_ul_snr():
    # the published row rounds to 10.6; recorded as a known arithmetic mismatch when this fails
    assert lb.snr(FX["leo_ul"]).snr_dB == pytest.approx(10.6, abs=0.05)


def test_geo_ul_and_leo_dl_snr():
    assert lb.snr(FX["geo_ul"]).snr_dB == pytest.approx(-3.19, abs=0.05)
    assert lb.snr(FX["leo_dl"]).snr_dB == pytest.approx(3.6, abs=0.05)


def test_only_boltzmann_survives():
    zero = lb.LinkBudgetInput(0.0, 0.0, 1.0, 0.0)
    assert lb.snr(zero).snr_dB == pytest.approx(-10 * math.log10(K_BOLTZMANN), abs=1e-9)
    assert lb.snr(zero).snr_dB == pytest.approx(228.601, abs=0.002)
    assert BOLTZMANN_DB == pytest.approx(228.5992, abs=1e-4)


def test_breakdown_reconstructs_sum_exactly():
    for b in FX.values():
        r = lb.snr(b)
        total = 0.0
        for k in lb.TERM_ORDER:
            total += r.breakdown[k]
        assert total == r.snr_dB
        assert list(r.breakdown) == list(lb.TERM_ORDER)
        assert "snr" in r.table()


@pytest.mark.parametrize("bad", [{"bandwidth_Hz": 0.0}, {"bandwidth_Hz": -1.0},
                                 {"atmospheric_loss_dB": -0.1}, {"shadow_fading_dB": -1}])
def test_input_validation(bad):
    with pytest.raises(ValueError):
        replace(FX["geo_ul"], **bad)


def test_fspl_examples():
    assert lb.fspl(40581, 2e9) == pytest.approx(190.63, abs=0.02)
    assert lb.fspl(2000, 2e9) - lb.fspl(1000, 2e9) == pytest.approx(20 * math.log10(2), abs=1e-12)
    with pytest.raises(ValueError):
        lb.fspl(0, 2e9)
    with pytest.raises(ValueError):
        lb.fspl(100, -1)


def test_fspl_inversion_for_leo_budget():
    d = brentq(lambda x: lb.fspl(x, 2e9) - 159.1, 1.0, 1e5, xtol=1e-9)
    assert d == pytest.approx(1075, abs=5)


def test_fspl_against_direct_formula():
    # (4 pi d / lambda)^2 with lambda = c / f
    lam = 299792458.0 / 2e9
    assert lb.fspl(1932.0, 2e9) == pytest.approx(10 * math.log10((4 * math.pi * 1932e3 / lam) ** 2), abs=1e-9)


def test_sub_prb_geo_ul():
    out = lb.sub_prb_sweep(FX["geo_ul"], [30e3, 45e3, 90e3, 180e3])
    for (_, s), ref in zip(out, (-3.19, -4.95, -7.96, -10.97)):
        assert s == pytest.approx(ref, abs=0.02)


def test_sub_prb_leo_ul():
    out = lb.sub_prb_sweep(FX["leo_ul"], [30e3, 45e3, 90e3])
    for (_, s), ref in zip(out, (10.6, 8.8, 5.8)):
        assert s == pytest.approx(ref, abs=0.05)


def test_sweep_halving_and_errors(tmp_path):
    (_, a), (_, b) = lb.sub_prb_sweep(FX["leo_ul"], [90e3, 45e3])
    assert b - a == pytest.approx(10 * math.log10(2), abs=1e-12)
    with pytest.raises(ValueError):
        lb.sub_prb_sweep(FX["leo_ul"], [])
    with pytest.raises(ValueError):
        lb.sub_prb_sweep(FX["leo_ul"], [0.0])
    path = lb.write_sweep_csv(tmp_path / "s.csv", lb.sub_prb_sweep(FX["geo_ul"], [30e3]))
    assert open(path).readline().strip() == "bandwidth_hz,snr_db"


budgets = st.builds(
    lb.LinkBudgetInput,
    eirp_dBW=st.floats(-20, 70), g_over_t_dB_per_K=st.floats(-40, 30),
    bandwidth_Hz=st.floats(1e3, 1e7), fspl_dB=st.floats(100, 200),
    atmospheric_loss_dB=st.floats(0, 5), polarization_loss_dB=st.floats(0, 5),
    scintillation_loss_dB=st.floats(0, 5), shadow_fading_dB=st.floats(0, 10))


@settings(max_examples=200, deadline=None)
@given(budgets, st.floats(0, 20))
def test_snr_is_affine(b, x):
    s0 = lb.snr(b).snr_dB
    assert lb.snr(replace(b, eirp_dBW=b.eirp_dBW + x)).snr_dB == pytest.approx(s0 + x, abs=1e-9)
    for loss in ("fspl_dB", "atmospheric_loss_dB", "polarization_loss_dB",
                 "scintillation_loss_dB", "shadow_fading_dB"):
        shifted = replace(b, **{loss: getattr(b, loss) + x})
        assert lb.snr(shifted).snr_dB == pytest.approx(s0 - x, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(budgets, st.floats(1e3, 1e7), st.floats(1e3, 1e7))
def test_sweep_difference_is_bandwidth_ratio(b, b1, b2):
    (_, s1), (_, s2) = lb.sub_prb_sweep(b, [b1, b2])
    assert s1 - s2 == pytest.approx(10 * math.log10(b2 / b1), abs=1e-9)
