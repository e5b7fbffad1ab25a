import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from wignerbulk.eigensolver import eigenvalues
from wignerbulk.ensemble import sample_gue
from wignerbulk.gapstats import (
    MeanAccumulator,
    correlation_sample,
    correlation_statistic,
    gap_curve,
    gap_sample_curve,
    gap_statistic,
    tuple_indices,
)
from wignerbulk.predict import sine_correlation_integral
from wignerbulk.spectral import EnergyWindow, classical_location, rho_sc
from wignerbulk.testfunctions import make_bump, make_pair_bump, zero_function

W = EnergyWindow(0.0, 0.2)


def gue_spectra(n, count, seed=0):
    g = np.random.default_rng(seed)
    return [eigenvalues(sample_gue(n, g)) for _ in range(count)]


def gap_literal(lam, window, s):
    n = len(lam)
    dens = n * rho_sc(window.u)
    hits = 0
    for j in range(n - 1):
        if abs(lam[j] - window.u) <= window.eps and lam[j + 1] - lam[j] <= s / dens:
            hits += 1
    return hits / (2 * window.eps * dens)


def test_gap_statistic_matches_literal_count():
    lam = gue_spectra(150, 1)[0].values
    w = EnergyWindow(0.3, 0.25)
    for s in [0.0, 0.2, 0.7, 1.0, 2.5, 6.0]:
        assert gap_statistic(lam, w, s) == pytest.approx(gap_literal(lam, w, s), abs=1e-15)


def test_gap_curve_on_picket_fence():
    n = 4000
    lam = classical_location((np.arange(1, n + 1) - 0.5) / n)
    curve = gap_sample_curve(lam, W, [0.9, 1.1])
    assert curve[0] == 0.0
    assert curve[1] == pytest.approx(1.0, abs=0.02)


def test_gap_curve_statistics():
    spectra = gue_spectra(200, 6)
    grid = np.arange(0, 3.01, 0.5)
    out = gap_curve(spectra, W, grid)
    assert [g.s for g in out] == grid.tolist()
    vals = np.array([g.value for g in out])
    assert np.all(np.diff(vals) >= 0)
    direct = np.mean([gap_sample_curve(s, W, grid) for s in spectra], axis=0)
    assert np.allclose(vals, direct, atol=1e-14)
    assert all(g.samples == 6 and g.n == 200 for g in out)
    assert out[-1].std_error > 0
    with pytest.raises(ValueError):
        gap_curve(spectra, W, [1.0, 0.5])
    with pytest.raises(ValueError):
        gap_statistic(spectra[0], W, -0.1)


def test_mean_accumulator_matches_numpy():
    x = np.random.default_rng(1).normal(size=(50, 3))
    acc = MeanAccumulator((3,))
    for row in x:
        acc.add(row)
    assert np.allclose(acc.mean, x.mean(axis=0), atol=1e-14)
    assert np.allclose(acc.std_error, x.std(axis=0, ddof=1) / math.sqrt(50), atol=1e-14)
    single = MeanAccumulator()
    single.add(2.0)
    assert single.std_error == 0


@settings(max_examples=60, deadline=None)
@given(xs=st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30), cut=st.integers(0, 30))
def test_mean_accumulator_merge(xs, cut):
    cut = min(cut, len(xs))
    a, b, whole = MeanAccumulator(), MeanAccumulator(), MeanAccumulator()
    for x in xs[:cut]:
        a.add(x)
    for x in xs[cut:]:
        b.add(x)
    for x in xs:
        whole.add(x)
    m = a.merge(b)
    assert m.count == whole.count
    assert float(m.mean) == pytest.approx(float(whole.mean), abs=1e-9)
    assert float(m.m2) == pytest.approx(float(whole.m2), rel=1e-9, abs=1e-6)


def test_tuple_indices_full_and_pruned():
    y = np.arange(10.0)
    assert tuple_indices(y, 2, 0, 9, 1.0, prune=False).shape == (90, 2)
    assert tuple_indices(y, 3, 0, 9, 1.0, prune=False).shape == (720, 3)
    pruned = tuple_indices(y, 2, 4, 5, 0.5)
    assert {tuple(t) for t in pruned} == {(4, 3), (4, 5), (5, 4), (5, 6)}
    with pytest.raises(ValueError):
        tuple_indices(y, 4, 0, 9, 1.0)


def test_k1_statistic_on_smooth_spectrum():
    # the one-point function of a spectrum at classical locations is the constant 1
    n = 3000
    lam = classical_location((np.arange(1, n + 1) - 0.5) / n)
    f = make_bump(1, (-0.5, 0.5))
    assert correlation_sample(lam, f, W) == pytest.approx(1.0, abs=2e-3)


def brute_force_correlation(lam, f, window):
    """Full ordered-tuple sum, each v-integral by adaptive quadrature."""
    n = len(lam)
    y = n * np.asarray(lam)
    v0, v1 = n * window.lo, n * window.hi
    grid = np.linspace(v0, v1, 97)
    total = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue

            def g(v, i=i, j=j):
                r = rho_sc(v / n)
                return f(np.array([r * (y[i] - v), r * (y[j] - v)]))

            # cheap scan on the grid first; skip pairs that never reach the support
            r = rho_sc(grid / n)
            a = np.stack([r * (y[i] - grid), r * (y[j] - grid)], axis=-1)
            if np.all(np.max(np.abs(a), axis=1) > f.radius + 0.5):
                continue
            total += integrate.quad(g, v0, v1, points=grid[1:-1], limit=400, epsabs=1e-13, epsrel=1e-12)[0]
    c = n * n / (n * (n - 1))
    return c * total / (2 * window.eps * n)


def test_correlation_sample_against_brute_force():
    lam = gue_spectra(40, 1, seed=3)[0].values
    f = make_pair_bump(2.0, 1.0)
    ref = brute_force_correlation(lam, f, W)
    assert correlation_sample(lam, f, W) == pytest.approx(ref, rel=1e-7)


@pytest.mark.parametrize("k, f", [(2, make_pair_bump()), (3, make_bump(3, (-1.5, 1.5), width=0.1))])
def test_pruning_is_exact(k, f):
    lam = gue_spectra(30, 1, seed=k)[0].values
    assert correlation_sample(lam, f, W, prune=True) == correlation_sample(lam, f, W, prune=False)


def test_correlation_statistic_and_errors():
    spectra = gue_spectra(300, 5)
    f = make_pair_bump()
    est = correlation_statistic(spectra, f, W)
    vals = [correlation_sample(s, f, W) for s in spectra]
    assert est.value == pytest.approx(np.mean(vals), rel=1e-14)
    assert est.std_error == pytest.approx(np.std(vals, ddof=1) / math.sqrt(5), rel=1e-10)
    assert est.samples == 5 and est.k == 2
    # loose sanity against the limit: a few standard errors plus finite-n slack
    assert abs(est.value - sine_correlation_integral(f)) < 5 * est.std_error + 0.1
    assert correlation_sample(spectra[0], zero_function(2), W) == 0.0
    with pytest.raises(ValueError):
        correlation_sample(spectra[0], make_bump(4, (-1, 1)), W)
    with pytest.raises(ValueError):
        correlation_sample(np.array([0.1]), make_pair_bump(), W)
    with pytest.raises(ValueError):
        correlation_statistic([], f, W)
