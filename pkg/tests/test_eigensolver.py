import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wignerbulk.eigensolver import (
    ConvergenceError,
    Spectrum,
    eigenvalues,
    tridiagonal_eigenvalues,
    tridiagonalize,
)
from wignerbulk.ensemble import make_atom, sample_gue, sample_wigner


def random_hermitian(n, g):
    a = g.normal(size=(n, n)) + 1j * g.normal(size=(n, n))
    return (a + a.conj().T) / 2


def charpoly_roots(h):
    # independent route: roots of det(x - H) via Faddeev-LeVerrier coefficients
    n = h.shape[0]
    coeffs = [1.0 + 0j]
    m = np.zeros_like(h)
    eye = np.eye(n)
    for k in range(1, n + 1):
        m = h @ m + coeffs[-1] * eye
        coeffs.append(-np.trace(h @ m) / k)
    return np.sort(np.roots(np.real(coeffs)).real)


def test_small_matrices_match_characteristic_polynomial():
    g = np.random.default_rng(0)
    for n in range(1, 7):
        for _ in range(30):
            h = random_hermitian(n, g)
            got = eigenvalues(h).values
            assert np.max(np.abs(got - charpoly_roots(h))) < 1e-10


def test_agrees_with_lapack_medium():
    g = np.random.default_rng(1)
    h = sample_gue(150, g).entries
    ref = np.linalg.eigvalsh(h)
    got = eigenvalues(h).values
    assert np.max(np.abs(got - ref)) < 1e-12


@pytest.mark.parametrize("n", [1, 2, 31, 32, 33, 65, 97])
def test_block_boundaries(n):
    g = np.random.default_rng(n)
    h = random_hermitian(n, g)
    got = eigenvalues(h).values
    assert np.allclose(got, np.linalg.eigvalsh(h), atol=1e-11 * max(1.0, np.abs(got).max()))


def test_tridiagonal_form_preserves_invariants():
    g = np.random.default_rng(3)
    h = random_hermitian(80, g)
    d, e = tridiagonalize(h)
    assert d.shape == (80,) and e.shape == (79,)
    assert np.all(e >= 0)
    assert np.sum(d) == pytest.approx(np.trace(h).real, rel=1e-12)
    fro = np.sum(d**2) + 2 * np.sum(e**2)
    assert fro == pytest.approx(np.sum(np.abs(h) ** 2), rel=1e-12)


def test_real_symmetric_and_diagonal_inputs():
    diag = np.diag([3.0, -1.0, 2.0, 2.0])
    assert np.array_equal(eigenvalues(diag).values, [-1.0, 2.0, 2.0, 3.0])
    s = np.array([[2.0, 1.0], [1.0, 2.0]])
    assert np.allclose(eigenvalues(s).values, [1.0, 3.0], atol=1e-15)


def test_degenerate_spectrum():
    g = np.random.default_rng(4)
    q, _ = np.linalg.qr(g.normal(size=(12, 12)) + 1j * g.normal(size=(12, 12)))
    lam = np.array([1.0] * 6 + [-2.0] * 6)
    h = (q * lam) @ q.conj().T
    h = (h + h.conj().T) / 2
    assert np.allclose(eigenvalues(h).values, np.sort(lam), atol=1e-12)


def test_tridiagonal_solver_direct():
    n = 50
    d = np.zeros(n)
    e = np.ones(n - 1)
    exact = 2 * np.cos(np.pi * np.arange(n, 0, -1) / (n + 1))
    assert np.allclose(tridiagonal_eigenvalues(d, e), exact, atol=1e-13)


def test_sweep_cap_raises():
    g = np.random.default_rng(5)
    with pytest.raises(ConvergenceError):
        tridiagonal_eigenvalues(g.normal(size=40), g.normal(size=39), max_sweeps=0)


def test_input_validation():
    with pytest.raises(ValueError):
        eigenvalues(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        eigenvalues(np.zeros((0, 0)))
    with pytest.raises(ValueError):
        Spectrum(np.array([1.0, 0.0]))


def test_wigner_matrix_accepted_and_sorted():
    g = np.random.default_rng(6)
    h = sample_wigner(40, make_atom("bernoulli"), make_atom("bernoulli", "diagonal"), g)
    s = eigenvalues(h)
    assert s.n == len(s) == 40
    assert np.all(np.diff(s.values) >= 0)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 24), seed=st.integers(0, 2**32 - 1), scale=st.floats(1e-3, 1e3))
def test_trace_and_frobenius_invariants(n, seed, scale):
    h = scale * random_hermitian(n, np.random.default_rng(seed))
    lam = eigenvalues(h).values
    norm = np.sqrt(np.sum(np.abs(h) ** 2))
    assert abs(lam.sum() - np.trace(h).real) <= 1e-12 * n * norm + 1e-300
    assert abs(np.sum(lam**2) - norm**2) <= 1e-12 * n * norm**2


def test_tridiagonalize_trivial_inputs():
    d, e = tridiagonalize(np.diag([0.5, -2.0, 3.0, 1.0]).astype(complex))
    assert np.allclose(d, [0.5, -2.0, 3.0, 1.0], atol=1e-15)
    assert np.all(e == 0) or np.allclose(e, 0, atol=1e-15)
    a, b, c = 0.3, -1.2, 0.4 - 0.7j
    d, e = tridiagonalize(np.array([[a, c], [np.conj(c), b]]))
    assert np.allclose(d, [a, b], atol=1e-15)
    assert e == pytest.approx([abs(c)], abs=1e-15)
    half = 1 / np.sqrt(2)
    assert np.allclose(eigenvalues(np.array([[0, half], [half, 0]])).values, [-half, half], atol=1e-15)
    assert np.array_equal(eigenvalues(np.eye(5)).values, np.ones(5))
