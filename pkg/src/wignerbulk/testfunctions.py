"""Compactly supported test functions built from smoothed indicators.

A test function on ``R^k`` is ``scale * prod_m b_m(<c_m, alpha>)`` where each
``b_m`` is a C^2 smoothed indicator of an interval and ``c_m`` a coefficient
vector. Every profile is piecewise polynomial with known breakpoints, which
lets the quadrature routines split their integration ranges exactly there.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Profile", "Factor", "TestFunction", "make_bump", "make_pair_bump", "zero_function", "from_descriptor"]

DEFAULT_WIDTH = 0.05


def _smootherstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


@dataclass(frozen=True)
class Profile:
    """Smoothed indicator of ``[lo, hi]``.

    Equal to 1 on ``[lo + w/2, hi - w/2]``, 0 outside ``[lo - w/2, hi + w/2]``,
    with quintic C^2 ramps of width ``w`` in between. The ramps are symmetric
    about ``lo`` and ``hi``, so the integral is exactly ``hi - lo``.
    """

    lo: float
    hi: float
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("smoothing width must be > 0")
        if not self.hi - self.lo >= self.width:
            raise ValueError(f"degenerate box [{self.lo}, {self.hi}] for smoothing width {self.width}")

    @property
    def breakpoints(self) -> tuple[float, float, float, float]:
        h = 0.5 * self.width
        return (self.lo - h, self.lo + h, self.hi - h, self.hi + h)

    @property
    def support(self) -> tuple[float, float]:
        h = 0.5 * self.width
        return (self.lo - h, self.hi + h)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        h = 0.5 * self.width
        up = _smootherstep((x - (self.lo - h)) / self.width)
        down = _smootherstep(((self.hi + h) - x) / self.width)
        return np.minimum(up, down)


@dataclass(frozen=True)
class Factor:
    coeffs: tuple[float, ...]
    profile: Profile


@dataclass(frozen=True)
class TestFunction:
    """Product of profiles applied to linear forms of ``(alpha_1, ..., alpha_k)``.

    Every coordinate must carry a single-coordinate factor so that the
    support lies in the box reported by :attr:`support_box`.
    """

    __test__ = False  # not a pytest class

    k: int
    factors: tuple[Factor, ...]
    scale: float = 1.0
    descriptor: tuple = ()

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        for fac in self.factors:
            if len(fac.coeffs) != self.k:
                raise ValueError("factor coefficient vector has wrong length")
        self.support_box  # validates compact support

    @property
    def support_box(self) -> list[tuple[float, float]]:
        box: list[tuple[float, float] | None] = [None] * self.k
        for fac in self.factors:
            nz = [j for j, c in enumerate(fac.coeffs) if c != 0]
            if len(nz) != 1:
                continue
            j = nz[0]
            c = fac.coeffs[j]
            a, b = (s / c for s in fac.profile.support)
            lo, hi = min(a, b), max(a, b)
            if box[j] is not None:
                lo, hi = max(lo, box[j][0]), min(hi, box[j][1])
            box[j] = (lo, hi)
        if any(b is None for b in box):
            raise ValueError("test function is not compactly supported in every coordinate")
        return box  # type: ignore[return-value]

    @property
    def radius(self) -> float:
        return max(max(abs(lo), abs(hi)) for lo, hi in self.support_box)

    @property
    def sup_norm(self) -> float:
        return abs(self.scale)

    def __call__(self, alpha):
        """Evaluate on points of shape ``(..., k)``."""
        alpha = np.asarray(alpha, dtype=float)
        if alpha.shape[-1] != self.k:
            raise ValueError(f"expected points with last axis {self.k}")
        out = np.full(alpha.shape[:-1], float(self.scale))
        for fac in self.factors:
            out = out * fac.profile(alpha @ np.asarray(fac.coeffs))
        return out

    def to_dict(self) -> dict:
        return dict(self.descriptor) if self.descriptor else {
            "type": "factors",
            "k": self.k,
            "scale": self.scale,
            "factors": [{"coeffs": list(f.coeffs), "lo": f.profile.lo, "hi": f.profile.hi, "width": f.profile.width} for f in self.factors],
        }


def _unit(k: int, j: int) -> tuple[float, ...]:
    return tuple(1.0 if i == j else 0.0 for i in range(k))


def make_bump(k: int, box, width: float = DEFAULT_WIDTH, scale: float = 1.0) -> TestFunction:
    """Product of smoothed indicators of the intervals in ``box``.

    ``box`` is one ``(lo, hi)`` pair (used for every coordinate) or ``k`` pairs.
    """
    pairs = [tuple(box)] * k if np.ndim(box) == 1 else [tuple(b) for b in box]
    if len(pairs) != k:
        raise ValueError("box must give one interval per coordinate")
    factors = tuple(Factor(_unit(k, j), Profile(float(lo), float(hi), float(width))) for j, (lo, hi) in enumerate(pairs))
    desc = (("type", "bump"), ("k", k), ("box", [list(p) for p in pairs]), ("width", width), ("scale", scale))
    return TestFunction(k, factors, float(scale), desc)


def make_pair_bump(half_width: float = 2.0, pair_half_width: float = 1.0, width: float = DEFAULT_WIDTH) -> TestFunction:
    """``phi(a1) phi(a2) psi(a1 - a2)``: pairs inside ``[-half_width, half_width]``
    whose separation is at most ``pair_half_width`` (both smoothed)."""
    phi = Profile(-half_width, half_width, width)
    psi = Profile(-pair_half_width, pair_half_width, width)
    factors = (Factor((1.0, 0.0), phi), Factor((0.0, 1.0), phi), Factor((1.0, -1.0), psi))
    desc = (("type", "pair_bump"), ("half_width", half_width), ("pair_half_width", pair_half_width), ("width", width))
    return TestFunction(2, factors, 1.0, desc)


def zero_function(k: int, box=(-0.5, 0.5), width: float = DEFAULT_WIDTH) -> TestFunction:
    return make_bump(k, box, width, scale=0.0)


def from_descriptor(desc: dict) -> TestFunction:
    """Inverse of :meth:`TestFunction.to_dict`."""
    kind = desc.get("type")
    if kind == "bump":
        return make_bump(int(desc["k"]), desc["box"], float(desc.get("width", DEFAULT_WIDTH)), float(desc.get("scale", 1.0)))
    if kind == "pair_bump":
        return make_pair_bump(float(desc.get("half_width", 2.0)), float(desc.get("pair_half_width", 1.0)), float(desc.get("width", DEFAULT_WIDTH)))
    if kind == "factors":
        k = int(desc["k"])
        factors = tuple(
            Factor(tuple(float(c) for c in f["coeffs"]), Profile(float(f["lo"]), float(f["hi"]), float(f.get("width", DEFAULT_WIDTH))))
            for f in desc["factors"]
        )
        return TestFunction(k, factors, float(desc.get("scale", 1.0)))
    raise ValueError(f"unknown test function type {kind!r}")

