import numpy as np
import pytest
from scipy import integrate

from wignerbulk.testfunctions import (
    Factor,
    Profile,
    TestFunction,
    from_descriptor,
    make_bump,
    make_pair_bump,
    zero_function,
)


def test_profile_shape():
    p = Profile(-1.0, 2.0, 0.2)
    assert p(0.5) == 1.0
    assert p(-1.1) == 0.0 and p(2.1) == 0.0
    assert p(-1.0) == pytest.approx(0.5)
    assert p.breakpoints == pytest.approx((-1.1, -0.9, 1.9, 2.1))
    assert p.support == pytest.approx((-1.1, 2.1))


def test_profile_integral_is_interval_length():
    p = Profile(-0.3, 0.8, 0.1)
    val = integrate.quad(p, -1, 1, points=p.breakpoints, epsabs=1e-14)[0]
    assert val == pytest.approx(1.1, abs=1e-13)


def test_profile_is_c2():
    p = Profile(0.0, 1.0, 0.2)
    h = 1e-5
    for b in p.breakpoints:
        d1l = (p(b) - p(b - h)) / h
        d1r = (p(b + h) - p(b)) / h
        d2l = (p(b) - 2 * p(b - h) + p(b - 2 * h)) / h**2
        d2r = (p(b + 2 * h) - 2 * p(b + h) + p(b)) / h**2
        assert abs(d1l - d1r) < 1e-2
        assert abs(d2l - d2r) < 0.2  # vs a peak |p''| near 144


def test_profile_rejects_degenerate():
    with pytest.raises(ValueError):
        Profile(0.0, 0.01, 0.05)
    with pytest.raises(ValueError):
        Profile(0.0, 1.0, 0.0)


def test_bump_evaluation_and_box():
    f = make_bump(2, [(-1, 1), (0, 2)], width=0.1)
    assert f(np.array([0.0, 1.0])) == 1.0
    assert f(np.array([[0.0, 3.0], [5.0, 1.0]])).tolist() == [0.0, 0.0]
    assert f.support_box == pytest.approx([(-1.05, 1.05), (-0.05, 2.05)])
    assert f.radius == pytest.approx(2.05)
    with pytest.raises(ValueError):
        f(np.zeros(3))
    with pytest.raises(ValueError):
        make_bump(2, [(-1, 1)])


def test_pair_bump():
    f = make_pair_bump(2.0, 1.0)
    assert f.k == 2
    assert f(np.array([0.0, 0.5])) == 1.0
    assert f(np.array([-1.0, 1.0])) == 0.0  # separation 2 > 1 + width/2
    assert f.sup_norm == 1.0


def test_non_compact_rejected():
    with pytest.raises(ValueError, match="compactly"):
        TestFunction(2, (Factor((1.0, 0.0), Profile(-1, 1, 0.1)), Factor((1.0, -1.0), Profile(-1, 1, 0.1))))
    with pytest.raises(ValueError):
        TestFunction(2, (Factor((1.0,), Profile(-1, 1, 0.1)),))


@pytest.mark.parametrize(
    "f",
    [
        make_bump(1, (-0.5, 0.5)),
        make_bump(3, (-1, 1), width=0.2, scale=2.5),
        make_pair_bump(1.5, 0.7, 0.1),
        zero_function(2),
        TestFunction(2, (Factor((1.0, 0.0), Profile(-1, 1, 0.1)), Factor((0.0, 2.0), Profile(-1, 1, 0.1)))),
    ],
)
def test_descriptor_roundtrip(f):
    g = from_descriptor(f.to_dict())
    pts = np.random.default_rng(0).uniform(-2, 2, size=(200, f.k))
    assert np.array_equal(f(pts), g(pts))
    assert g.support_box == f.support_box


def test_unknown_descriptor():
    with pytest.raises(ValueError):
        from_descriptor({"type": "gaussian"})
