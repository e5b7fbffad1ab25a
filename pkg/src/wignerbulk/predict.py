"""Universal bulk limits: the sine kernel, its determinants, and the gap law.

The gap-probability function ``E(alpha) = det(1 - K_alpha)`` is evaluated by a
Nystrom discretization of the sine-kernel operator on ``(0, alpha)``. The
limiting nearest-gap density is ``E''`` and its distribution function is
``E'(s) - E'(0)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .testfunctions import TestFunction

__all__ = [
    "FredholmEvaluation",
    "QuadratureError",
    "StepSizeError",
    "sine_kernel",
    "sine_det",
    "sine_correlation_integral",
    "fredholm_det",
    "gap_function",
    "gap_limit_cdf",
    "gap_density",
    "fredholm_table",
    "DEFAULT_ORDER",
    "DEFAULT_STEP",
]

DEFAULT_ORDER = 40
DEFAULT_STEP = 1e-3
# absolute error allowed for a finite-difference derivative, judged by Richardson
_DERIVATIVE_TOL = 1e-5


class QuadratureError(RuntimeError):
    pass


class StepSizeError(ValueError):
    """Finite-difference step too coarse for the curvature of ``E``."""


def sine_kernel(x, y):
    """Dyson sine kernel ``sin(pi (x-y)) / (pi (x-y))``, equal to 1 on the diagonal."""
    d = np.subtract(x, y, dtype=float)
    pd = math.pi * d
    small = np.abs(d) < 1e-8
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(small, 1.0 - pd * pd / 6.0, np.sin(pd) / np.where(small, 1.0, pd))
    return out if out.ndim else float(out)


def sine_det(points):
    """``det(K(a_i, a_j))`` for points of shape ``(k,)`` or a stack ``(..., k)``.

    Computed by LU factorization with partial pivoting.
    """
    p = np.asarray(points, dtype=float)
    if p.ndim == 0 or p.shape[-1] < 1:
        raise ValueError("need at least one point")
    kmat = sine_kernel(p[..., :, None], p[..., None, :])
    out = np.linalg.det(kmat)
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class FredholmEvaluation:
    alpha: float
    m: int
    value: float
    error_estimate: float


def _nystrom(alpha: float, m: int) -> float:
    if alpha == 0.0:
        return 1.0
    t, w = np.polynomial.legendre.leggauss(m)
    x = 0.5 * alpha * (t + 1.0)
    w = 0.5 * alpha * w
    kmat = sine_kernel(x[:, None], x[None, :])
    if alpha > 0:
        sw = np.sqrt(w)
        lam = np.linalg.eigvalsh(sw[:, None] * kmat * sw[None, :])
        return float(np.prod(1.0 - lam))
    # alpha < 0: same quadrature rule continued analytically (weights negative);
    # only used by the finite differences at the origin
    return float(np.linalg.det(np.eye(m) - kmat * w[None, :]))


def gap_function(alpha: float, m: int = DEFAULT_ORDER) -> float:
    """``E(alpha) = det(1 - K_alpha)`` at quadrature order ``m``.

    Negative ``alpha`` gives the analytic continuation of the quadrature
    formula; the differencing routines below rely on it near 0.
    """
    if m < 4:
        raise ValueError("quadrature order m must be >= 4")
    return _nystrom(float(alpha), int(m))


def fredholm_det(alpha: float, m: int = DEFAULT_ORDER) -> FredholmEvaluation:
    """Nystrom value of ``det(1 - K_alpha)`` with an order-doubling error estimate."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if m < 4:
        raise ValueError("quadrature order m must be >= 4")
    if alpha == 0:
        return FredholmEvaluation(0.0, int(m), 1.0, 0.0)
    v = _nystrom(float(alpha), int(m))
    v2 = _nystrom(float(alpha), 2 * int(m))
    return FredholmEvaluation(float(alpha), int(m), v, abs(v - v2))


def _first_derivative(s: float, m: int, h: float) -> float:
    def central(step):
        return (_nystrom(s + step, m) - _nystrom(s - step, m)) / (2.0 * step)

    d1 = central(h)
    d2 = central(2.0 * h)
    if abs(d2 - d1) / 3.0 > _DERIVATIVE_TOL:
        raise StepSizeError(f"step h={h} too large for E'({s}): Richardson estimate {abs(d2 - d1) / 3.0:.2e}")
    return d1


def _second_derivative(s: float, m: int, h: float) -> float:
    def central(step):
        return (_nystrom(s + step, m) - 2.0 * _nystrom(s, m) + _nystrom(s - step, m)) / (step * step)

    d1 = central(h)
    d2 = central(2.0 * h)
    if abs(d2 - d1) / 3.0 > _DERIVATIVE_TOL:
        raise StepSizeError(f"step h={h} too large for E''({s}): Richardson estimate {abs(d2 - d1) / 3.0:.2e}")
    return d1


def gap_limit_cdf(s: float, m: int = DEFAULT_ORDER, h: float = DEFAULT_STEP) -> float:
    """Limiting probability that a normalized bulk gap is at most ``s``.

    Uses ``int_0^s E'' = E'(s) - E'(0)`` with central differences of step ``h``;
    ``E'(0) = -1`` is checked to ``O(h^2)``.
    """
    if s < 0:
        raise ValueError("s must be >= 0")
    if s == 0:
        return 0.0
    d0 = _first_derivative(0.0, m, h)
    if abs(d0 + 1.0) > max(h * h, 1e-9):
        raise StepSizeError(f"E'(0) = {d0!r} deviates from -1 by more than h^2")
    return _first_derivative(float(s), m, h) - d0


def gap_density(s: float, m: int = DEFAULT_ORDER, h: float = DEFAULT_STEP) -> float:
    """Limiting density ``E''(s)`` of the normalized nearest gap."""
    if s < 0:
        raise ValueError("s must be >= 0")
    return _second_derivative(float(s), m, h)


def fredholm_table(alphas, m: int = DEFAULT_ORDER, h: float = DEFAULT_STEP) -> list[dict]:
    """Rows ``alpha, E, E_err, density, cdf`` for each grid value."""
    rows = []
    for a in alphas:
        ev = fredholm_det(float(a), m)
        rows.append(
            {
                "alpha": float(a),
                "E": ev.value,
                "E_err": ev.error_estimate,
                "density": gap_density(float(a), m, h),
                "cdf": gap_limit_cdf(float(a), m, h),
            }
        )
    return rows


# --- integrals of test functions against sine-kernel determinants -----------

_GL_NODES = 16


def _gl(m: int):
    return np.polynomial.legendre.leggauss(m)


def _inner_breaks(f: TestFunction, prefix: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Breakpoints in the last coordinate with the first ``k-1`` fixed."""
    j = f.k - 1
    pts = [lo, hi]
    for fac in f.factors:
        c = fac.coeffs[j]
        if c == 0:
            continue
        rest = float(np.dot(fac.coeffs[:j], prefix)) if j else 0.0
        for b in fac.profile.breakpoints:
            x = (b - rest) / c
            if lo < x < hi:
                pts.append(x)
    return np.unique(pts)


def _integrate_last(f: TestFunction, prefix: np.ndarray, box, nodes: int) -> float:
    lo, hi = box[-1]
    br = _inner_breaks(f, prefix, lo, hi)
    t, w = _gl(nodes)
    a, b = br[:-1], br[1:]
    half = 0.5 * (b - a)
    x = (0.5 * (a + b))[:, None] + half[:, None] * t[None, :]
    pts = np.empty(x.shape + (f.k,))
    pts[..., : f.k - 1] = prefix
    pts[..., -1] = x
    vals = f(pts)
    if f.k > 1:
        vals = vals * sine_det(pts)
    return float(np.sum(half[:, None] * w[None, :] * vals))


def _axis_breaks(f: TestFunction, j: int, lo: float, hi: float) -> list[float]:
    out = []
    for fac in f.factors:
        nz = [i for i, c in enumerate(fac.coeffs) if c != 0]
        if nz == [j]:
            out += [b / fac.coeffs[j] for b in fac.profile.breakpoints if lo < b / fac.coeffs[j] < hi]
    return sorted(out)


def sine_correlation_integral(f: TestFunction, rtol: float = 1e-6, nodes: int = _GL_NODES, return_error: bool = False):
    """``int f(a) det(K(a_i, a_j)) da`` over the support box of ``f``.

    The last coordinate is integrated by Gauss-Legendre rules on the pieces
    between the exact breakpoints of ``f``; outer coordinates use adaptive
    quadrature with the axis breakpoints as hints.

    Raises
    ------
    QuadratureError
        If the adaptive error estimate exceeds ``rtol`` relative to the result.
    """
    if f.k > 3:
        raise ValueError("sine_correlation_integral supports k <= 3")
    if f.scale == 0:
        return (0.0, 0.0) if return_error else 0.0
    box = f.support_box
    errors: list[float] = []

    def level(prefix: tuple[float, ...]) -> float:
        j = len(prefix)
        if j == f.k - 1:
            return _integrate_last(f, np.array(prefix), box, nodes)
        lo, hi = box[j]
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, err = integrate.quad(
                    lambda x: level(prefix + (x,)),
                    lo,
                    hi,
                    points=_axis_breaks(f, j, lo, hi) or None,
                    epsabs=1e-13,
                    epsrel=min(rtol, 1e-8),
                    limit=400,
                )
            except integrate.IntegrationWarning as exc:
                raise QuadratureError(str(exc)) from exc
        if j == 0:
            errors.append(err)
        return val

    value = level(())
    err = errors[0] if errors else 0.0
    if err > rtol * max(abs(value), 1e-300) and err > 1e-12:
        raise QuadratureError(f"quadrature error estimate {err:.2e} exceeds tolerance")
    return (value, err) if return_error else value
