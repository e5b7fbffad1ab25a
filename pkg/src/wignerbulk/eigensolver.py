"""Eigenvalues of dense complex Hermitian matrices.

Blocked Householder reduction to a real symmetric tridiagonal matrix, followed
by implicit QL iterations with Wilkinson shifts. Eigenvectors are never formed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

__all__ = [
    "ConvergenceError",
    "Spectrum",
    "tridiagonalize",
    "tridiagonal_eigenvalues",
    "eigenvalues",
    "MAX_SWEEPS",
    "DEFLATION_TOL",
]

MAX_SWEEPS = 30
DEFLATION_TOL = 1e-14
_BLOCK = 32


class ConvergenceError(RuntimeError):
    """QL iteration did not converge within the sweep cap."""


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of one sample in ascending order."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("spectrum must be one-dimensional")
        if v.size > 1 and np.any(np.diff(v) < 0):
            raise ValueError("spectrum values must be ascending")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    def __len__(self) -> int:
        return self.values.size


def _as_array(h) -> np.ndarray:
    a = getattr(h, "entries", h)
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    return a


def tridiagonalize(h, block: int = _BLOCK) -> tuple[np.ndarray, np.ndarray]:
    """Unitarily reduce a Hermitian matrix to real symmetric tridiagonal form.

    Only the lower triangle of ``h`` is referenced. Reflectors are accumulated
    over panels of ``block`` columns and the trailing matrix receives one
    rank-``2*block`` update per panel. The complex subdiagonal is made real and
    non-negative by a diagonal phase similarity, i.e. replaced by its modulus.

    Returns
    -------
    diag : ndarray, shape (n,)
    offdiag : ndarray, shape (n-1,), entries >= 0
    """
    a = np.array(_as_array(h), dtype=np.complex128, order="C", copy=True)
    n = a.shape[0]
    d = np.empty(n)
    e = np.zeros(max(n - 1, 0), dtype=np.complex128)
    k0 = 0
    while k0 < n - 2:
        kb = min(block, n - 2 - k0)
        V = np.zeros((n, kb), dtype=np.complex128)
        W = np.zeros((n, kb), dtype=np.complex128)
        for j in range(kb):
            k = k0 + j
            # column k of the matrix with the pending panel update applied
            col = a[k:, k] - V[k:, :j] @ W[k, :j].conj() - W[k:, :j] @ V[k, :j].conj()
            d[k] = col[0].real
            x = col[1:]
            tail = np.vdot(x[1:], x[1:]).real
            if tail == 0.0:
                e[k] = x[0]
                continue
            x0 = x[0]
            norm = math.sqrt(abs(x0) ** 2 + tail)
            phase = x0 / abs(x0) if x0 != 0 else 1.0
            alpha = -phase * norm
            v = x.copy()
            v[0] -= alpha
            v /= math.sqrt(np.vdot(v, v).real)
            e[k] = alpha
            r = slice(k + 1, n)
            p = a[r, r] @ v
            if j:
                p -= V[r, :j] @ (W[r, :j].conj().T @ v) + W[r, :j] @ (V[r, :j].conj().T @ v)
            K = np.vdot(v, p).real
            V[r, j] = v
            W[r, j] = 2.0 * (p - K * v)
        k1 = k0 + kb
        r = slice(k1, n)
        s = a[r, r]
        s -= V[r] @ W[r].conj().T
        s -= W[r] @ V[r].conj().T
        k0 = k1
    if n >= 2:
        d[n - 2] = a[n - 2, n - 2].real
        e[n - 2] = a[n - 1, n - 2]
    if n >= 1:
        d[n - 1] = a[n - 1, n - 1].real
    return d, np.abs(e)


@numba.njit(cache=True)
def _tql(d, e, tol, max_sweeps):
    # e[i] couples d[i] and d[i+1]; e[n-1] is scratch. Returns -1 on success,
    # otherwise the index whose eigenvalue failed to converge.
    n = d.size
    for l in range(n):
        sweeps = 0
        while True:
            m = l
            while m < n - 1:
                if abs(e[m]) <= tol * (abs(d[m]) + abs(d[m + 1])):
                    break
                m += 1
            if m == l:
                break
            if sweeps == max_sweeps:
                return l
            sweeps += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = 1.0
            c = 1.0
            p = 0.0
            i = m - 1
            restart = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    restart = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                i -= 1
            if restart:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return -1


def tridiagonal_eigenvalues(diag, offdiag, tol: float = DEFLATION_TOL, max_sweeps: int = MAX_SWEEPS) -> np.ndarray:
    """Eigenvalues (ascending) of the symmetric tridiagonal matrix ``T(diag, offdiag)``.

    Raises
    ------
    ConvergenceError
        If some eigenvalue needs more than ``max_sweeps`` QL sweeps.
    """
    d = np.array(diag, dtype=float, copy=True)
    n = d.size
    e = np.zeros(n)
    e[: n - 1] = offdiag
    if n == 0:
        return d
    failed = _tql(d, e, tol, max_sweeps)
    if failed >= 0:
        raise ConvergenceError(f"eigenvalue {failed} not converged after {max_sweeps} QL sweeps")
    # stable sort keeps ties in input order
    return np.sort(d, kind="stable")


def eigenvalues(h) -> Spectrum:
    """All eigenvalues of a Hermitian matrix (``WignerMatrix`` or array)."""
    a = _as_array(h)
    if a.shape[0] == 0:
        raise ValueError("empty matrix")
    d, e = tridiagonalize(a)
    return Spectrum(tridiagonal_eigenvalues(d, e))
