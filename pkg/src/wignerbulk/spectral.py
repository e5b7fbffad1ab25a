"""Semicircle reference quantities and spectrum-level checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .eigensolver import Spectrum

__all__ = [
    "EnergyWindow",
    "LocalLawReport",
    "rho_sc",
    "semicircle_cdf",
    "classical_location",
    "stieltjes_empirical",
    "stieltjes_sc",
    "eta_grid",
    "sup_deviation",
    "local_law_check",
    "count_in_interval",
    "interval_density_check",
    "localization_check",
    "semicircle_ks",
]


@dataclass(frozen=True)
class EnergyWindow:
    """Bulk energy window ``[u - eps, u + eps]`` strictly inside ``(-2, 2)``."""

    u: float
    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"window half-width eps must be > 0, got {self.eps!r}")
        if not (-2.0 < self.u - self.eps and self.u + self.eps < 2.0):
            raise ValueError(f"window [u-eps, u+eps] = [{self.u - self.eps}, {self.u + self.eps}] must lie inside (-2, 2)")

    @property
    def lo(self) -> float:
        return self.u - self.eps

    @property
    def hi(self) -> float:
        return self.u + self.eps


def rho_sc(u):
    """Semicircle density ``(2 pi)^-1 sqrt(4 - u^2)_+``."""
    u = np.asarray(u, dtype=float)
    out = np.sqrt(np.maximum(4.0 - u * u, 0.0)) / (2.0 * math.pi)
    return out if out.ndim else float(out)


def semicircle_cdf(x):
    """Distribution function of the semicircle law."""
    x = np.asarray(x, dtype=float)
    xc = np.clip(x, -2.0, 2.0)
    out = 0.5 + xc * np.sqrt(4.0 - xc * xc) / (4.0 * math.pi) + np.arcsin(xc / 2.0) / math.pi
    out = np.where(x <= -2.0, 0.0, np.where(x >= 2.0, 1.0, out))
    return out if out.ndim else float(out)


def classical_location(a):
    """Semicircle quantile ``t(a)``: ``semicircle_cdf(t(a)) = a``.

    Vectorized bisection; 64 halvings of ``[-2, 2]`` reach the resolution of
    doubles, and the result is monotone in ``a``.
    """
    a = np.asarray(a, dtype=float)
    if np.any(~np.isfinite(a)) or np.any(a < 0.0) or np.any(a > 1.0):
        raise ValueError("classical_location needs 0 <= a <= 1")
    lo = np.full(a.shape, -2.0)
    hi = np.full(a.shape, 2.0)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        below = semicircle_cdf(mid) < a
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = 0.5 * (lo + hi)
    out = np.where(a == 0.0, -2.0, np.where(a == 1.0, 2.0, out))
    return out if out.ndim else float(out)


def _values(s) -> np.ndarray:
    return s.values if isinstance(s, Spectrum) else np.asarray(s, dtype=float)


def _check_upper(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= 0):
        raise ValueError("Stieltjes transforms need Im z > 0")
    return z


def stieltjes_empirical(s, z, chunk: int = 256):
    """``(1/n) sum_i 1/(lambda_i - z)`` for ``Im z > 0``."""
    lam = _values(s)
    z = _check_upper(z)
    flat = z.reshape(-1)
    out = np.empty(flat.shape, dtype=complex)
    for start in range(0, flat.size, chunk):
        zz = flat[start : start + chunk]
        out[start : start + chunk] = np.mean(1.0 / (lam[None, :] - zz[:, None]), axis=1)
    out = out.reshape(z.shape)
    return out if out.ndim else complex(out)


def stieltjes_sc(z):
    """Semicircle Stieltjes transform, the root of ``m^2 + z m + 1 = 0`` with ``Im m > 0``."""
    z = _check_upper(z)
    # sqrt(z-2)*sqrt(z+2) has its cut on [-2, 2], so this branch is the Herglotz one
    root = np.sqrt(z - 2.0) * np.sqrt(z + 2.0)
    m = (-z + root) / 2.0
    # for |z| large the formula cancels; use the product of roots (= 1)
    big = np.abs(z) > 4.0
    if np.any(big):
        other = (-z - root) / 2.0
        m = np.where(big, 1.0 / other, m)
    return m if m.ndim else complex(m)


def eta_grid(n: int, delta: float, count: int = 6) -> np.ndarray:
    """Geometric grid of spectral scales from ``n**(-1+delta)`` up to 1."""
    lo = float(n) ** (-1.0 + delta)
    if lo > 1.0:
        raise ValueError("need n**(-1+delta) <= 1")
    if count < 2 or lo == 1.0:
        return np.array([lo])
    return np.geomspace(lo, 1.0, count)


def sup_deviation(s, eta: float, kappa: float, step_fraction: float = 0.25) -> float:
    """``sup_E |m_n(E + i eta) - m_sc(E + i eta)|`` over ``E`` in ``[-2+kappa, 2-kappa]``.

    The energy grid has spacing at most ``step_fraction * eta``.
    """
    if not 0 < kappa < 2:
        raise ValueError("kappa must be in (0, 2)")
    width = 4.0 - 2.0 * kappa
    points = int(math.ceil(width / (step_fraction * eta))) + 1
    energies = np.linspace(-2.0 + kappa, 2.0 - kappa, points)
    z = energies + 1j * eta
    return float(np.max(np.abs(stieltjes_empirical(s, z) - stieltjes_sc(z))))


@dataclass
class LocalLawReport:
    """Per-sample sup deviations of ``m_n`` from ``m_sc`` on a grid of scales.

    ``sup_dev[i, j]`` belongs to sample ``i`` and scale ``etas[j]``.
    """

    kappa: float
    delta: float
    etas: np.ndarray
    sup_dev: np.ndarray
    eps0: tuple[float, ...] = (0.1,)
    samples: int = field(init=False)

    def __post_init__(self):
        self.sup_dev = np.atleast_2d(np.asarray(self.sup_dev, dtype=float))
        self.etas = np.asarray(self.etas, dtype=float)
        self.samples = self.sup_dev.shape[0]

    def exceed_rate(self, eps0: float) -> np.ndarray:
        """Fraction of samples with sup deviation ``>= eps0``, per scale."""
        return np.mean(self.sup_dev >= eps0, axis=0)

    def quantile(self, q: float) -> np.ndarray:
        return np.quantile(self.sup_dev, q, axis=0)

    def median_std_error(self) -> np.ndarray:
        """Large-sample standard error of the median, ``1.2533 * sd / sqrt(S)``."""
        if self.samples < 2:
            return np.zeros(self.etas.size)
        return 1.2533 * np.std(self.sup_dev, axis=0, ddof=1) / math.sqrt(self.samples)

    def to_json(self) -> dict:
        rates = {}
        rate_se = {}
        for e0 in self.eps0:
            r = self.exceed_rate(e0)
            rates[repr(float(e0))] = [float(x) for x in r]
            rate_se[repr(float(e0))] = [float(math.sqrt(x * (1 - x) / self.samples)) for x in r]
        return {
            "kappa": float(self.kappa),
            "delta": float(self.delta),
            "samples": int(self.samples),
            "etas": [float(x) for x in self.etas],
            "sup_dev_quantiles": {
                "q50": [float(x) for x in self.quantile(0.5)],
                "q90": [float(x) for x in self.quantile(0.9)],
                "max": [float(x) for x in np.max(self.sup_dev, axis=0)],
            },
            "sup_dev_median_std_error": [float(x) for x in self.median_std_error()],
            "exceed_rate": rates,
            "exceed_rate_std_error": rate_se,
        }


def local_law_check(
    spectra: Sequence,
    kappa: float,
    delta: float,
    eps0: float | Sequence[float] = 0.1,
    step_fraction: float = 0.25,
    eta_count: int = 6,
) -> LocalLawReport:
    """Sup deviation of the empirical Stieltjes transform on a range of scales."""
    spectra = list(spectra)
    if not spectra:
        raise ValueError("local_law_check needs at least one spectrum")
    n = len(_values(spectra[0]))
    if any(len(_values(s)) != n for s in spectra):
        raise ValueError("all spectra must have the same size")
    etas = eta_grid(n, delta, eta_count)
    dev = np.array([[sup_deviation(s, eta, kappa, step_fraction) for eta in etas] for s in spectra])
    e0 = (float(eps0),) if np.isscalar(eps0) else tuple(float(x) for x in eps0)
    return LocalLawReport(kappa=kappa, delta=delta, etas=etas, sup_dev=dev, eps0=e0)


def count_in_interval(s, interval: tuple[float, float]) -> int:
    """Number of eigenvalues in the closed interval ``[a, b]``."""
    a, b = interval
    if a > b:
        raise ValueError("interval must satisfy a <= b")
    lam = _values(s)
    return int(np.searchsorted(lam, b, side="right") - np.searchsorted(lam, a, side="left"))


def interval_density_check(s, window: EnergyWindow, length: float | None = None, power: float = 4.0, step: float | None = None) -> dict:
    """Largest ``count / (n |I|)`` over a sliding grid of intervals ``I`` in the window.

    ``length`` defaults to ``log(n)**power / n``, capped at the window width
    (the uncapped value exceeds ``2 eps`` for moderate ``n``).
    """
    lam = _values(s)
    n = lam.size
    nominal = math.log(n) ** power / n if n > 1 else 2 * window.eps
    if length is None:
        length = min(nominal, 2.0 * window.eps)
    if not 0 < length <= 2.0 * window.eps:
        raise ValueError("interval length must be in (0, 2 eps]")
    if step is None:
        step = length / 4.0
    starts = np.arange(window.lo, window.hi - length + 1e-15, step)
    if starts.size == 0:
        starts = np.array([window.lo])
    counts = np.searchsorted(lam, starts + length, side="right") - np.searchsorted(lam, starts, side="left")
    ratio = counts / (n * length)
    return {"length": float(length), "nominal_length": float(nominal), "intervals": int(starts.size), "max_ratio": float(np.max(ratio))}


def localization_check(spectra: Sequence, delta_idx: float) -> dict:
    """``max_i |lambda_i - t(i/n)|`` over bulk indices ``delta_idx*n <= i <= (1-delta_idx)*n``.

    Indices are 1-based, as in ``lambda_1 <= ... <= lambda_n``.
    """
    if not 0 <= delta_idx < 0.5:
        raise ValueError("delta_idx must be in [0, 1/2)")
    per_sample = []
    for s in spectra:
        lam = _values(s)
        n = lam.size
        i = np.arange(1, n + 1)
        bulk = (i >= delta_idx * n) & (i <= (1 - delta_idx) * n)
        t = classical_location(i[bulk] / n)
        per_sample.append(float(np.max(np.abs(lam[bulk] - t))) if bulk.any() else 0.0)
    return {
        "delta_idx": float(delta_idx),
        "per_sample_max": per_sample,
        "ensemble_max": max(per_sample) if per_sample else 0.0,
        "samples": len(per_sample),
    }


def semicircle_ks(spectra: Sequence) -> float:
    """Kolmogorov-Smirnov distance between the pooled eigenvalues and the semicircle law."""
    pooled = np.sort(np.concatenate([_values(s) for s in spectra]))
    m = pooled.size
    if m == 0:
        raise ValueError("no eigenvalues")
    f = semicircle_cdf(pooled)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - f), np.max(f - (i - 1) / m)))
