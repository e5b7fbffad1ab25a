"""Empirical windowed gap distribution and averaged k-point correlations.

Both statistics rescale local eigenvalue coordinates by ``n * rho_sc`` so that
the mean spacing is one.

The correlation statistic for one spectrum is

    c(n, k) / n * sum over distinct (i_1..i_k) of G(n lambda_{i_1}, ..., n lambda_{i_k}),
    G(y) = (1 / 2 eps) * int_{n(u-eps)}^{n(u+eps)} f(r(v) (y_1 - v), ..., r(v) (y_k - v)) dv,

with ``r(v) = rho_sc(v / n)`` and ``c(n, k) = n^k (n-k)! / n!``, the exact
conversion between the L^1-normalized k-point function and the sum over
distinct tuples. Its expectation is the averaged correlation integral whose
limit is ``int f det K``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations
from typing import Sequence

import numpy as np

from .eigensolver import Spectrum
from .spectral import EnergyWindow, rho_sc
from .testfunctions import TestFunction

__all__ = [
    "GapStatistic",
    "CorrelationEstimate",
    "MeanAccumulator",
    "gap_statistic",
    "gap_sample_curve",
    "gap_curve",
    "correlation_sample",
    "correlation_statistic",
    "tuple_indices",
    "MAX_K",
]

MAX_K = 3
DEFAULT_QUAD_NODES = 16


def _values(s) -> np.ndarray:
    return s.values if isinstance(s, Spectrum) else np.asarray(s, dtype=float)


class MeanAccumulator:
    """Welford running mean/variance; ``merge`` is associative."""

    def __init__(self, shape=()):
        self.count = 0
        self.mean = np.zeros(shape)
        self.m2 = np.zeros(shape)

    def add(self, x) -> None:
        x = np.asarray(x, dtype=float)
        self.count += 1
        delta = x - self.mean
        self.mean = self.mean + delta / self.count
        self.m2 = self.m2 + delta * (x - self.mean)

    def merge(self, other: "MeanAccumulator") -> "MeanAccumulator":
        out = MeanAccumulator(np.shape(self.mean))
        out.count = self.count + other.count
        if out.count == 0:
            return out
        delta = other.mean - self.mean
        out.mean = self.mean + delta * (other.count / out.count)
        out.m2 = self.m2 + other.m2 + delta * delta * (self.count * other.count / out.count)
        return out

    @property
    def std_error(self):
        if self.count < 2:
            return np.zeros_like(self.mean)
        return np.sqrt(self.m2 / (self.count - 1) / self.count)


# --- gap statistic ----------------------------------------------------------


@dataclass(frozen=True)
class GapStatistic:
    u: float
    s: float
    eps: float
    value: float
    n: int
    samples: int
    std_error: float = 0.0


def _window_gaps(lam: np.ndarray, window: EnergyWindow) -> np.ndarray:
    # j < n (1-based) with |lambda_j - u| <= eps; gap to the right neighbour
    left = lam[:-1]
    keep = np.abs(left - window.u) <= window.eps
    return np.sort(np.diff(lam)[keep])


def gap_sample_curve(s_spec, window: EnergyWindow, s_grid) -> np.ndarray:
    """Empirical gap distribution of one spectrum on every point of ``s_grid``."""
    lam = _values(s_spec)
    n = lam.size
    s_grid = np.asarray(s_grid, dtype=float)
    if np.any(s_grid < 0):
        raise ValueError("s must be >= 0")
    dens = n * rho_sc(window.u)
    gaps = _window_gaps(lam, window)
    counts = np.searchsorted(gaps, s_grid / dens, side="right")
    return counts / (2.0 * window.eps * dens)


def gap_statistic(s_spec, window: EnergyWindow, s: float) -> float:
    """``(2 eps n rho(u))^-1 #{j < n : lambda_{j+1} - lambda_j <= s/(n rho(u)), |lambda_j - u| <= eps}``."""
    return float(gap_sample_curve(s_spec, window, [s])[0])


def gap_curve(spectra: Sequence, window: EnergyWindow, s_grid) -> list[GapStatistic]:
    """Sample mean of the gap distribution at each grid point, with standard errors."""
    spectra = list(spectra)
    s_grid = np.asarray(s_grid, dtype=float)
    if not spectra or s_grid.size == 0:
        raise ValueError("gap_curve needs spectra and a non-empty s grid")
    if np.any(np.diff(s_grid) < 0):
        raise ValueError("s grid must be ascending")
    acc = MeanAccumulator(s_grid.shape)
    for sp in spectra:
        acc.add(gap_sample_curve(sp, window, s_grid))
    n = len(_values(spectra[0]))
    se = acc.std_error
    return [
        GapStatistic(window.u, float(s), window.eps, float(v), n, acc.count, float(e))
        for s, v, e in zip(s_grid, acc.mean, se)
    ]


# --- averaged k-point correlations -------------------------------------------


@dataclass(frozen=True)
class CorrelationEstimate:
    k: int
    window: EnergyWindow
    test_function: dict
    value: float
    std_error: float
    samples: int


class _Unfolding:
    """``r(v) = rho_sc(v/n)`` and its derivative, with ``v/n`` kept off the edges."""

    def __init__(self, n: int):
        self.n = n

    def r(self, v):
        x = np.clip(v / self.n, -2.0 + 1e-12, 2.0 - 1e-12)
        return np.sqrt(4.0 - x * x) / (2.0 * math.pi)

    def dr(self, v):
        x = np.clip(v / self.n, -2.0 + 1e-12, 2.0 - 1e-12)
        return -x / (2.0 * math.pi * np.sqrt(4.0 - x * x)) / self.n


def _level_crossing(unf: _Unfolding, c, s: float, beta: float, v_mid: float) -> np.ndarray:
    """Solve ``r(v) * (c - s v) = beta`` for each entry of ``c``.

    For ``s != 0`` the left side is strictly monotone in the bulk and Newton
    from the constant-density guess converges in a few steps. For ``s == 0``
    the equation is ``rho_sc(v/n) = beta / c`` with two explicit roots; both
    are returned (shape ``(..., 2)``), NaN where there is none.
    """
    c = np.asarray(c, dtype=float)
    if s == 0.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            target = 2.0 * math.pi * beta / c
            x2 = 4.0 - target * target
            root = np.where((c != 0) & (target >= 0) & (x2 >= 0), unf.n * np.sqrt(np.maximum(x2, 0.0)), np.nan)
        return np.stack([-root, root], axis=-1)
    v = (c - beta / unf.r(v_mid)) / s
    for _ in range(8):
        r = unf.r(v)
        h = r * (c - s * v) - beta
        dh = unf.dr(v) * (c - s * v) - s * r
        v = v - h / dh
    return v


def tuple_indices(y: np.ndarray, k: int, lo: float, hi: float, reach: float, prune: bool = True) -> np.ndarray:
    """Ordered tuples of distinct indices that may contribute.

    With ``prune`` the first index must satisfy ``lo - reach <= y <= hi + reach``
    and every other index must lie within ``2 reach`` of it; this keeps every
    tuple whose integrand can be non-zero. Without ``prune`` all
    ``n!/(n-k)!`` tuples are returned.
    """
    n = y.size
    if k > MAX_K:
        raise ValueError(f"k > {MAX_K} not supported")
    if not prune:
        if k == 1:
            return np.arange(n)[:, None]
        return np.array(list(permutations(range(n), k)), dtype=np.int64).reshape(-1, k)
    first = np.flatnonzero((y >= lo - reach) & (y <= hi + reach))
    if k == 1:
        return first[:, None]
    left = np.searchsorted(y, y[first] - 2 * reach, side="left")
    right = np.searchsorted(y, y[first] + 2 * reach, side="right")
    out = []
    for i, a, b in zip(first, left, right):
        nb = [j for j in range(a, b) if j != i]
        for rest in permutations(nb, k - 1):
            out.append((i,) + rest)
    return np.array(out, dtype=np.int64).reshape(-1, k)


def _tuple_integrals(yt: np.ndarray, f: TestFunction, window: EnergyWindow, unf: _Unfolding, nodes: int) -> np.ndarray:
    """``int f(alpha(v)) dv`` over the window for each row of ``yt`` (shape ``(T, k)``)."""
    t_count, k = yt.shape
    if t_count == 0:
        return np.zeros(0)
    n = unf.n
    v0, v1 = n * window.lo, n * window.hi
    v_mid = n * window.u
    # support interval from single-coordinate factors (alpha_j decreases in v)
    lo = np.full(t_count, v0)
    hi = np.full(t_count, v1)
    breaks = []
    for fac in f.factors:
        coeffs = np.asarray(fac.coeffs)
        c = yt @ coeffs
        s = float(coeffs.sum())
        nz = np.flatnonzero(coeffs)
        for beta in fac.profile.breakpoints:
            root = _level_crossing(unf, c, s, beta, v_mid)
            breaks.append(root.reshape(t_count, -1))
        if nz.size == 1:
            cj = coeffs[nz[0]]
            a_lo, a_hi = fac.profile.support
            v_a = _level_crossing(unf, c, s, a_hi if cj > 0 else a_lo, v_mid)
            v_b = _level_crossing(unf, c, s, a_lo if cj > 0 else a_hi, v_mid)
            lo = np.maximum(lo, v_a)
            hi = np.minimum(hi, v_b)
    hi = np.maximum(hi, lo)
    pts = np.concatenate([lo[:, None], hi[:, None]] + breaks, axis=1)
    pts = np.where(np.isnan(pts), lo[:, None], pts)
    pts = np.sort(np.clip(pts, lo[:, None], hi[:, None]), axis=1)
    a, b = pts[:, :-1], pts[:, 1:]
    half = 0.5 * (b - a)
    tq, wq = np.polynomial.legendre.leggauss(nodes)
    v = (0.5 * (a + b))[..., None] + half[..., None] * tq
    alpha = unf.r(v)[..., None] * (yt[:, None, None, :] - v[..., None])
    vals = f(alpha)
    return np.sum(half[..., None] * wq * vals, axis=(1, 2))


def _tuple_factor(n: int, k: int) -> float:
    # n^k (n-k)! / n!
    out = 1.0
    for i in range(k):
        out *= n / (n - i)
    return out


def correlation_sample(
    s_spec,
    f: TestFunction,
    window: EnergyWindow,
    quad_nodes: int = DEFAULT_QUAD_NODES,
    prune: bool = True,
    chunk: int = 4096,
) -> float:
    """Averaged k-point correlation statistic of one spectrum (see module docstring)."""
    k = f.k
    if k > MAX_K:
        raise ValueError(f"k > {MAX_K} not supported")
    lam = _values(s_spec)
    n = lam.size
    if n < k:
        raise ValueError("spectrum smaller than k")
    if f.scale == 0:
        return 0.0
    y = n * lam
    unf = _Unfolding(n)
    r_min = min(rho_sc(window.lo), rho_sc(window.hi))
    reach = f.radius / r_min
    idx = tuple_indices(y, k, n * window.lo, n * window.hi, reach, prune)
    parts = []
    for start in range(0, idx.shape[0], chunk):
        parts.append(_tuple_integrals(y[idx[start : start + chunk]], f, window, unf, quad_nodes))
    integrals = np.concatenate(parts) if parts else np.zeros(0)
    total = math.fsum(integrals.tolist())
    return _tuple_factor(n, k) * total / (2.0 * window.eps * n)


def correlation_statistic(
    spectra: Sequence,
    f: TestFunction,
    window: EnergyWindow,
    quad_nodes: int = DEFAULT_QUAD_NODES,
    prune: bool = True,
) -> CorrelationEstimate:
    """Monte Carlo mean of :func:`correlation_sample` with its standard error."""
    spectra = list(spectra)
    if not spectra:
        raise ValueError("correlation_statistic needs at least one spectrum")
    if f.k > MAX_K:
        raise ValueError(f"k > {MAX_K} not supported")
    n = len(_values(spectra[0]))
    if any(len(_values(s)) != n for s in spectra):
        raise ValueError("all spectra must have the same size")
    acc = MeanAccumulator()
    for sp in spectra:
        acc.add(correlation_sample(sp, f, window, quad_nodes, prune))
    return CorrelationEstimate(f.k, window, f.to_dict(), float(acc.mean), float(acc.std_error), acc.count)
