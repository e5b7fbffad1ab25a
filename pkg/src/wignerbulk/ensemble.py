"""Atom distributions and Wigner Hermitian matrix sampling.

An atom is the scalar law of one real component of a matrix entry. Off-diagonal
atoms have variance 1/2 (real and imaginary parts are independent copies), the
diagonal atom has variance 1, and the matrix is scaled by ``n**-0.5``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import numpy as np
from scipy import special

__all__ = [
    "ROLE_VARIANCE",
    "KINDS",
    "AtomDistribution",
    "WignerMatrix",
    "MomentReport",
    "make_atom",
    "make_truncated",
    "truncate_atom",
    "truncation_bound",
    "sample_wigner",
    "sample_gue",
    "ou_coefficients",
    "ou_interpolate",
    "ou_atom_moments",
    "paper_ou_time",
]

Number = Union[Fraction, float]

ROLE_VARIANCE = {"off_diagonal": Fraction(1, 2), "diagonal": Fraction(1)}
KINDS = ("gaussian", "bernoulli", "uniform", "laplace", "three_point", "truncated")

# Skewed default: E x^3 != 0 while E x^4 matches the Gaussian value.
DEFAULT_THREE_POINT = ((-1.0, 0.0, 2.0), (1 / 3, 1 / 2, 1 / 6))


def _double_factorial(k: int) -> int:
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


@dataclass(frozen=True)
class AtomDistribution:
    """Zero-mean scalar law with the variance fixed by its role.

    ``points``/``probs`` are used by ``three_point`` (already standardized);
    ``inner``, ``bound``, ``shift`` and ``scale`` describe a ``truncated`` atom,
    whose samples are ``(x - shift) * scale`` for ``x ~ inner`` conditioned on
    ``|x| <= bound``.
    """

    kind: str
    role: str
    points: tuple[float, ...] = ()
    probs: tuple[float, ...] = ()
    inner: "AtomDistribution | None" = None
    bound: float | None = None
    shift: float = 0.0
    scale: float = 1.0

    @property
    def variance(self) -> Fraction:
        return ROLE_VARIANCE[self.role]

    @property
    def moments(self) -> tuple[Number, Number, Number, Number]:
        """``(E x, E x^2, E x^3, E x^4)``."""
        return tuple(self.moment(j) for j in range(1, 5))  # type: ignore[return-value]

    @property
    def support_bound(self) -> float | None:
        """Smallest ``B`` with ``|x| <= B`` almost surely, or ``None`` if unbounded."""
        v = float(self.variance)
        if self.kind == "bernoulli":
            return math.sqrt(v)
        if self.kind == "uniform":
            return math.sqrt(3 * v)
        if self.kind == "three_point":
            return max(abs(p) for p, w in zip(self.points, self.probs) if w > 0)
        if self.kind == "truncated":
            return (self.bound + abs(self.shift)) * self.scale
        return None

    def moment(self, j: int) -> Number:
        """Exact raw moment ``E x^j`` (a ``Fraction`` whenever it is rational)."""
        if j < 0:
            raise ValueError("moment order must be non-negative")
        if j == 0:
            return Fraction(1)
        if j == 1:
            # every kind is centred by construction; skip the float round-off
            return Fraction(0)
        if self.kind == "three_point":
            return math.fsum(w * p**j for p, w in zip(self.points, self.probs))
        if self.kind == "truncated":
            c = [_conditional_moment(self.inner, self.bound, i) for i in range(j + 1)]
            s = math.fsum(math.comb(j, i) * c[i] * (-self.shift) ** (j - i) for i in range(j + 1))
            return s * self.scale**j
        if j % 2:
            return Fraction(0)
        p = j // 2
        v = self.variance
        if self.kind == "gaussian":
            return v**p * _double_factorial(2 * p - 1)
        if self.kind == "bernoulli":
            return v**p
        if self.kind == "uniform":
            return (3 * v) ** p / (2 * p + 1)
        if self.kind == "laplace":
            return math.factorial(2 * p) * (v / 2) ** p
        raise ValueError(f"unknown atom kind {self.kind!r}")

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        sd = math.sqrt(float(self.variance))
        if self.kind == "gaussian":
            return rng.normal(0.0, sd, size)
        if self.kind == "bernoulli":
            return sd * (2.0 * rng.integers(0, 2, size) - 1.0)
        if self.kind == "uniform":
            a = math.sqrt(3.0) * sd
            return rng.uniform(-a, a, size)
        if self.kind == "laplace":
            return rng.laplace(0.0, sd / math.sqrt(2.0), size)
        if self.kind == "three_point":
            return rng.choice(np.asarray(self.points), size=size, p=np.asarray(self.probs))
        if self.kind == "truncated":
            x = np.asarray(self.inner.sample(rng, size), dtype=float)
            flat = x.reshape(-1)
            bad = np.flatnonzero(np.abs(flat) > self.bound)
            while bad.size:
                flat[bad] = self.inner.sample(rng, bad.size)
                bad = bad[np.abs(flat[bad]) > self.bound]
            return (x - self.shift) * self.scale
        raise ValueError(f"unknown atom kind {self.kind!r}")

    def describe(self) -> dict:
        """JSON-friendly description (used in manifests and config echoes)."""
        out: dict = {"kind": self.kind, "role": self.role}
        if self.kind == "three_point":
            out.update(points=list(self.points), probs=list(self.probs))
        if self.kind == "truncated":
            out.update(inner=self.inner.describe(), bound=self.bound)
        return out


def _check_role(role: str) -> None:
    if role not in ROLE_VARIANCE:
        raise ValueError(f"role must be one of {sorted(ROLE_VARIANCE)}, got {role!r}")


def make_atom(
    kind: str,
    role: str = "off_diagonal",
    points: Sequence[float] | None = None,
    probs: Sequence[float] | None = None,
) -> AtomDistribution:
    """Build a standardized atom of the given kind for ``role``.

    For ``three_point`` the raw ``points``/``probs`` must have mean zero; they
    are rescaled to the role's variance. Sets with zero variance are rejected.
    """
    _check_role(role)
    if kind in ("gaussian", "bernoulli", "uniform", "laplace"):
        if points is not None or probs is not None:
            raise ValueError(f"{kind} atoms take no points/probs")
        return AtomDistribution(kind, role)
    if kind == "three_point":
        pts = DEFAULT_THREE_POINT[0] if points is None else tuple(float(p) for p in points)
        prb = DEFAULT_THREE_POINT[1] if probs is None else tuple(float(p) for p in probs)
        if len(pts) != 3 or len(prb) != 3:
            raise ValueError("three_point needs exactly three points and three probabilities")
        if any(p < 0 for p in prb) or not math.isclose(sum(prb), 1.0, rel_tol=0, abs_tol=1e-12):
            raise ValueError("three_point probabilities must be non-negative and sum to 1")
        mean = math.fsum(w * p for p, w in zip(pts, prb))
        var = math.fsum(w * p * p for p, w in zip(pts, prb)) - mean**2
        spread = max(abs(p) for p in pts)
        if var <= 1e-24 * max(spread, 1.0) ** 2:
            raise ValueError("three_point parameters have zero variance; cannot normalize")
        if abs(mean) > 1e-12 * spread:
            raise ValueError(f"three_point parameters must have mean 0, got {mean!r}")
        c = math.sqrt(float(ROLE_VARIANCE[role]) / var)
        return AtomDistribution("three_point", role, points=tuple(c * p for p in pts), probs=prb)
    if kind == "truncated":
        raise ValueError("use make_truncated(inner, bound) for truncated atoms")
    raise ValueError(f"unknown atom kind {kind!r}; expected one of {KINDS}")


def _conditional_mass(inner: AtomDistribution, bound: float) -> float:
    v = float(inner.variance)
    if inner.kind == "gaussian":
        return float(special.erf(bound / math.sqrt(2 * v)))
    if inner.kind == "laplace":
        return -math.expm1(-bound / math.sqrt(v / 2))
    if inner.kind == "uniform":
        return min(1.0, bound / math.sqrt(3 * v))
    if inner.kind in ("bernoulli", "three_point"):
        return math.fsum(w for p, w in _atoms(inner) if abs(p) <= bound)
    raise ValueError(f"cannot truncate a {inner.kind} atom")


def _atoms(dist: AtomDistribution) -> list[tuple[float, float]]:
    if dist.kind == "bernoulli":
        c = math.sqrt(float(dist.variance))
        return [(-c, 0.5), (c, 0.5)]
    return list(zip(dist.points, dist.probs))


def _conditional_moment(inner: AtomDistribution, bound: float, j: int) -> float:
    """``E[x^j | |x| <= bound]`` for an untruncated base atom."""
    if j == 0:
        return 1.0
    v = float(inner.variance)
    if inner.kind in ("bernoulli", "three_point"):
        kept = [(p, w) for p, w in _atoms(inner) if abs(p) <= bound]
        mass = math.fsum(w for _, w in kept)
        return math.fsum(w * p**j for p, w in kept) / mass
    if j % 2:
        return 0.0
    p = j // 2
    if inner.kind == "gaussian":
        z = bound * bound / (2 * v)
        ratio = special.gammainc(p + 0.5, z) / special.gammainc(0.5, z)
        return v**p * _double_factorial(2 * p - 1) * float(ratio)
    if inner.kind == "laplace":
        b = math.sqrt(v / 2)
        ratio = special.gammainc(2 * p + 1, bound / b) / special.gammainc(1, bound / b)
        return math.factorial(2 * p) * b ** (2 * p) * float(ratio)
    if inner.kind == "uniform":
        a = min(bound, math.sqrt(3 * v))
        return a ** (2 * p) / (2 * p + 1)
    raise ValueError(f"cannot truncate a {inner.kind} atom")


def make_truncated(inner: AtomDistribution, bound: float) -> AtomDistribution:
    """Condition ``inner`` on ``|x| <= bound`` and re-standardize exactly.

    The re-standardization is the affine map that restores mean 0 and the
    role's variance, computed from the exact conditional moments.
    """
    if bound <= 0:
        raise ValueError("truncation bound must be positive")
    if inner.kind == "truncated":
        if inner.support_bound <= bound:
            return inner
        if inner.shift != 0.0:
            raise ValueError("nested truncation of an asymmetric truncated atom is not supported")
        # |scale * x| <= bound is |x| <= bound / scale; the re-standardizations compose
        return make_truncated(inner.inner, bound / inner.scale)
    if _conditional_mass(inner, bound) <= 0.0:
        raise ValueError(f"truncation at {bound!r} removes all mass of the {inner.kind} atom")
    c1 = _conditional_moment(inner, bound, 1)
    var = _conditional_moment(inner, bound, 2) - c1 * c1
    if var <= 0.0:
        raise ValueError(f"truncation at {bound!r} leaves a degenerate {inner.kind} atom")
    scale = math.sqrt(float(inner.variance) / var)
    return AtomDistribution("truncated", inner.role, inner=inner, bound=float(bound), shift=c1, scale=scale)


def truncation_bound(n: int, exponent: float = 3.0) -> float:
    """``(log n) ** exponent``: the almost-sure bound imposed on atoms at size ``n``."""
    if n < 2:
        raise ValueError("truncation needs n >= 2")
    return math.log(n) ** exponent


def truncate_atom(dist: AtomDistribution, n: int, exponent: float = 3.0) -> AtomDistribution:
    """Truncate ``dist`` at ``(log n)**3``; atoms already inside the bound pass through."""
    bound = truncation_bound(n, exponent)
    sb = dist.support_bound
    if sb is not None and sb <= bound:
        return dist
    return make_truncated(dist, bound)


@dataclass(frozen=True)
class WignerMatrix:
    """Dense Hermitian matrix with both triangles stored bit-consistently."""

    entries: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def is_hermitian(self) -> bool:
        a = self.entries
        return bool(np.array_equal(a, a.conj().T))

    def upper_rows(self):
        """Rows ``(l, k, re, im)`` of the upper triangle, 1-based, ``l <= k``."""
        il, ik = np.triu_indices(self.n)
        vals = self.entries[il, ik]
        for l, k, z in zip(il, ik, vals):
            yield int(l) + 1, int(k) + 1, float(z.real), float(z.imag)


def sample_wigner(
    n: int,
    off_diag: AtomDistribution,
    diag: AtomDistribution,
    rng: np.random.Generator,
) -> WignerMatrix:
    """Draw one Wigner Hermitian matrix.

    Draw order is fixed (real parts, imaginary parts, diagonal) so a given
    generator state always produces the same matrix.
    """
    if n < 1:
        raise ValueError("matrix size n must be >= 1")
    if off_diag.role != "off_diagonal":
        raise ValueError("off_diag atom must have role 'off_diagonal'")
    if diag.role != "diagonal":
        raise ValueError("diag atom must have role 'diagonal'")
    m = n * (n - 1) // 2
    x = off_diag.sample(rng, m)
    y = off_diag.sample(rng, m)
    d = diag.sample(rng, n)
    scale = 1.0 / math.sqrt(n)
    h = np.zeros((n, n), dtype=np.complex128)
    iu = np.triu_indices(n, 1)
    upper = (x + 1j * y) * scale
    h[iu] = upper
    h[iu[1], iu[0]] = upper.conj()
    h[np.diag_indices(n)] = d * scale
    return WignerMatrix(h)


def sample_gue(n: int, rng: np.random.Generator) -> WignerMatrix:
    return sample_wigner(n, make_atom("gaussian", "off_diagonal"), make_atom("gaussian", "diagonal"), rng)


def ou_coefficients(t: float) -> tuple[float, float]:
    """``(exp(-t/2), sqrt(1 - exp(-t)))`` evaluated without cancellation."""
    if t < 0:
        raise ValueError("Ornstein-Uhlenbeck time must be non-negative")
    return math.exp(-t / 2), math.sqrt(-math.expm1(-t))


def paper_ou_time(n: int, delta: float = 0.01) -> float:
    """Short interpolation time ``n**(-1 + delta)``."""
    return float(n) ** (-1.0 + delta)


def ou_interpolate(h: WignerMatrix, t: float, rng: np.random.Generator) -> WignerMatrix:
    """Run ``h`` for time ``t`` along the Ornstein-Uhlenbeck flow towards GUE."""
    a, b = ou_coefficients(t)
    v = sample_gue(h.n, rng)
    return WignerMatrix(a * h.entries + b * v.entries)


@dataclass(frozen=True)
class MomentReport:
    """Moments ``E x^j`` (index ``j``) before and after the OU step."""

    t: float
    source: tuple[Number, ...]
    target: tuple[Number, ...]

    @property
    def differences(self) -> tuple[Number, ...]:
        return tuple(b - a for a, b in zip(self.source, self.target))


def ou_atom_moments(moments_in: AtomDistribution | Sequence[Number], t: float) -> MomentReport:
    """Moments of ``x' = e^{-t/2} x + (1 - e^{-t})^{1/2} g`` with ``g ~ N(0, E x^2)``.

    ``moments_in`` is an atom or the sequence ``(E x, E x^2, ...)``. The
    expansion runs in exact rational arithmetic on ``q = e^{-t}`` (as stored in
    binary), so orders 0, 1 and 2 are reproduced exactly; odd powers of
    ``sqrt(q)`` are the only inexact factors.
    """
    if isinstance(moments_in, AtomDistribution):
        raw = list(moments_in.moments)
    else:
        raw = list(moments_in)
    if len(raw) < 2:
        raise ValueError("need at least (E x, E x^2)")
    m = [Fraction(1)] + [x if isinstance(x, Fraction) else Fraction(float(x)) for x in raw]
    if m[1] != 0:
        raise ValueError("input atom must have mean zero")
    if t < 0:
        raise ValueError("Ornstein-Uhlenbeck time must be non-negative")
    q = Fraction(math.exp(-t))
    sqrt_q = math.sqrt(q)
    var = m[2]

    def gauss(k: int) -> Fraction:
        return Fraction(0) if k % 2 else var ** (k // 2) * _double_factorial(k - 1)

    target: list[Number] = []
    for j in range(len(m)):
        exact = Fraction(0)
        inexact = Fraction(0)
        for i in range(j + 1):
            g = gauss(j - i)
            if g == 0 or m[i] == 0:
                continue
            term = math.comb(j, i) * q ** (i // 2) * (1 - q) ** ((j - i) // 2) * m[i] * g
            if i % 2:
                inexact += term
            else:
                exact += term
        target.append(exact if inexact == 0 else float(exact) + float(inexact) * sqrt_q)
    return MomentReport(t=float(t), source=tuple(m), target=tuple(target))
