import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize

from wignerbulk.eigensolver import Spectrum, eigenvalues
from wignerbulk.ensemble import sample_gue
from wignerbulk.spectral import (
    EnergyWindow,
    LocalLawReport,
    classical_location,
    count_in_interval,
    eta_grid,
    interval_density_check,
    local_law_check,
    localization_check,
    rho_sc,
    semicircle_cdf,
    semicircle_ks,
    stieltjes_empirical,
    stieltjes_sc,
    sup_deviation,
)


def test_window_invariants():
    w = EnergyWindow(0.5, 0.2)
    assert (w.lo, w.hi) == pytest.approx((0.3, 0.7))
    with pytest.raises(ValueError, match="inside"):
        EnergyWindow(1.9, 0.2)
    with pytest.raises(ValueError):
        EnergyWindow(0.0, 0.0)
    with pytest.raises(ValueError):
        EnergyWindow(-1.85, 0.2)


def test_rho_sc_values():
    assert rho_sc(0.0) == pytest.approx(1 / math.pi)
    assert rho_sc(2.0) == 0.0 and rho_sc(-3.0) == 0.0
    assert integrate.quad(rho_sc, -2, 2)[0] == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("x", [-2.5, -2.0, -1.3, 0.0, 0.4, 1.99, 2.0, 7.0])
def test_cdf_matches_quadrature(x):
    # high-precision quadrature; double-precision quad loses digits at the sqrt endpoint
    mpmath.mp.dps = 30
    top = min(max(x, -2), 2)
    ref = float(mpmath.quad(lambda y: mpmath.sqrt(4 - y * y) / (2 * mpmath.pi), [-2, 0, top])) if x > -2 else 0.0
    assert semicircle_cdf(x) == pytest.approx(ref, abs=1e-12)


def test_classical_location_against_root_finder():
    for a in [0.001, 0.1, 0.25, 0.5, 0.77, 0.999]:
        ref = optimize.brentq(lambda t: semicircle_cdf(t) - a, -2, 2, xtol=1e-15)
        assert classical_location(a) == pytest.approx(ref, abs=1e-13)
    assert classical_location(0.5) == pytest.approx(0.0, abs=1e-15)
    assert classical_location(0.0) == -2.0 and classical_location(1.0) == 2.0
    with pytest.raises(ValueError):
        classical_location(1.2)
    with pytest.raises(ValueError):
        classical_location(np.nan)


@settings(max_examples=100, deadline=None)
@given(a=st.floats(0, 1), b=st.floats(0, 1))
def test_classical_location_monotone(a, b):
    lo, hi = sorted((a, b))
    assert classical_location(lo) <= classical_location(hi)


@pytest.mark.parametrize("z", [0.3 + 0.01j, -1.7 + 1e-4j, 5 + 2j, 100 + 1j, -3 + 1e-8j, 1j])
def test_stieltjes_sc_matches_high_precision(z):
    mpmath.mp.dps = 40
    zz = mpmath.mpc(z.real, z.imag)
    roots = [(-zz + s * mpmath.sqrt(zz * zz - 4)) / 2 for s in (1, -1)]
    ref = complex(max(roots, key=lambda m: m.imag))
    got = stieltjes_sc(z)
    assert abs(got - ref) <= 1e-13 * max(1.0, abs(ref))
    assert got.imag > 0
    assert abs(got * got + z * got + 1) <= 1e-12 * max(1, abs(z * got))


def test_stieltjes_sc_against_density_integral():
    z = 0.5 + 0.3j
    re = integrate.quad(lambda x: (rho_sc(x) / (x - z)).real, -2, 2, epsabs=1e-13)[0]
    im = integrate.quad(lambda x: (rho_sc(x) / (x - z)).imag, -2, 2, epsabs=1e-13)[0]
    assert stieltjes_sc(z) == pytest.approx(complex(re, im), abs=1e-10)


def test_stieltjes_empirical():
    lam = np.array([-1.0, 0.0, 2.0])
    z = 0.5 + 0.25j
    ref = np.mean([1 / (x - z) for x in lam])
    assert stieltjes_empirical(lam, z) == pytest.approx(ref, abs=1e-15)
    grid = np.linspace(-1, 1, 700) + 0.1j
    out = stieltjes_empirical(Spectrum(lam), grid, chunk=64)
    assert out.shape == grid.shape
    with pytest.raises(ValueError):
        stieltjes_empirical(lam, 0.5 + 0j)
    with pytest.raises(ValueError):
        stieltjes_sc(0.1 - 1j)


def test_eta_grid():
    g = eta_grid(2000, 0.2)
    assert g[0] == pytest.approx(2000**-0.8) and g[-1] == pytest.approx(1.0)
    assert len(g) == 6 and np.all(np.diff(g) > 0)
    assert len(eta_grid(10, 0.2, count=1)) == 1


def test_sup_deviation_zero_for_quantile_spectrum_at_large_eta():
    n = 4000
    lam = classical_location((np.arange(1, n + 1) - 0.5) / n)
    assert sup_deviation(lam, 1.0, 0.5) < 1e-3
    assert sup_deviation(lam, 0.01, 0.5) < 5e-2


def test_local_law_report():
    g = np.random.default_rng(0)
    spectra = [eigenvalues(sample_gue(200, g)) for _ in range(4)]
    rep = local_law_check(spectra, kappa=0.5, delta=0.3, eps0=[0.05, 0.5])
    assert rep.sup_dev.shape == (4, 6)
    assert rep.samples == 4
    j = rep.to_json()
    assert set(j["exceed_rate"]) == {"0.05", "0.5"}
    assert j["sup_dev_quantiles"]["q50"][0] > j["sup_dev_quantiles"]["q50"][-1]
    assert np.all(rep.exceed_rate(1e9) == 0) and np.all(rep.exceed_rate(0.0) == 1)
    with pytest.raises(ValueError):
        local_law_check([], 0.5, 0.2)
    with pytest.raises(ValueError):
        local_law_check([np.zeros(3), np.zeros(4)], 0.5, 0.2)


def test_local_law_report_single_sample_error():
    rep = LocalLawReport(0.5, 0.2, np.array([0.1, 1.0]), np.array([0.2, 0.01]))
    assert rep.samples == 1
    assert np.all(rep.median_std_error() == 0)


def test_count_in_interval_closed():
    lam = np.array([-1.0, 0.0, 0.0, 1.0, 2.0])
    assert count_in_interval(lam, (0.0, 1.0)) == 3
    assert count_in_interval(lam, (0.5, 0.5)) == 0
    assert count_in_interval(lam, (-5, 5)) == 5
    with pytest.raises(ValueError):
        count_in_interval(lam, (1, 0))


def test_interval_density_check():
    n = 2000
    lam = classical_location((np.arange(1, n + 1) - 0.5) / n)
    w = EnergyWindow(0.0, 0.2)
    rep = interval_density_check(lam, w)
    assert rep["length"] == pytest.approx(0.4)  # nominal log(n)^4/n exceeds the window
    assert rep["nominal_length"] > 0.4
    assert rep["max_ratio"] == pytest.approx(rho_sc(0.0), rel=0.02)
    short = interval_density_check(lam, w, length=0.05)
    assert short["intervals"] > 1
    with pytest.raises(ValueError):
        interval_density_check(lam, w, length=1.0)


def test_localization_on_classical_points():
    n = 500
    lam = classical_location(np.arange(1, n + 1) / n)
    rep = localization_check([lam, lam], 0.1)
    assert rep["ensemble_max"] < 1e-12
    assert rep["samples"] == 2
    shifted = lam + 0.01
    assert localization_check([shifted], 0.1)["ensemble_max"] == pytest.approx(0.01)
    with pytest.raises(ValueError):
        localization_check([lam], 0.5)


def test_semicircle_ks():
    n = 3000
    lam = classical_location((np.arange(1, n + 1) - 0.5) / n)
    assert semicircle_ks([lam]) == pytest.approx(0.5 / n, rel=1e-6)
    assert semicircle_ks([np.zeros(10)]) == pytest.approx(0.5)


def test_stieltjes_large_imaginary_asymptotics():
    y = 1e6
    assert stieltjes_sc(1j * y) == pytest.approx(1j / y, abs=1e-9)
    lam = np.array([-1.0, 0.3, 1.7])
    for y in (1e4, 1e6):
        assert stieltjes_empirical(lam, 1j * y) * (1j * y) == pytest.approx(-1.0, abs=5 / y)


def test_resampled_semicircle_spectrum_at_unit_eta():
    n = 2000
    lam = np.sort(classical_location(np.random.default_rng(11).uniform(size=n)))
    assert sup_deviation(lam, 1.0, 0.5) <= 0.05


def test_all_zero_spectrum_is_a_known_bad_fixture():
    lam = np.zeros(50)
    eta, kappa = 0.5, 0.5
    energies = np.linspace(-1.5, 1.5, int(math.ceil(3.0 / (0.25 * eta))) + 1)
    z = energies + 1j * eta
    exact = np.max(np.abs(-1 / z - stieltjes_sc(z)))
    assert sup_deviation(lam, eta, kappa) == pytest.approx(exact, rel=1e-14)
    assert exact > 0.5


def test_count_in_interval_examples():
    assert count_in_interval(np.array([1.0, 2.0, 3.0]), (1.5, 2.5)) == 1
    lam = eigenvalues(sample_gue(30, np.random.default_rng(2))).values
    point = 0.5 * (lam[10] + lam[11])
    assert count_in_interval(lam, (point, point)) == 0
