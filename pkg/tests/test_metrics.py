import numpy as np
import pytest
from scipy import integrate, stats

from tomoproj.errors import DegenerateDistributionError
from tomoproj.metrics import (CdfCurve, log_abs_error, mallows_distance, mm1_curve, mm1_std,
                              normalized_mallows)


def uniform(a, b, n=101):
    x = np.linspace(a, b, n)
    return CdfCurve(x, (x - a) / (b - a))


def test_identical_zero():
    F = mm1_curve(0.4, 2.0)
    assert mallows_distance(F, F) == 0.0
    assert normalized_mallows(F, F) == 0.0


def test_uniform_pair():
    assert mallows_distance(uniform(0, 1), uniform(0, 2)) == pytest.approx(0.5, abs=1e-3)


@pytest.mark.parametrize("c", [0.01, 0.7, 5.0])
def test_shift(c):
    x = np.linspace(-6, 6, 2001)
    F = CdfCurve(x, stats.norm.cdf(x) / stats.norm.cdf(6))
    G = CdfCurve(x + c, F.values)
    assert abs(mallows_distance(F, G, 10_000) - c) < 1e-3 * c


def test_atom_handled_by_generalized_inverse():
    F = CdfCurve(np.array([0.0, 1.0]), np.array([0.5, 1.0]))  # atom 1/2 at 0, uniform above
    p = np.array([0.2, 0.5, 0.75])
    np.testing.assert_allclose(F.inverse(p), [0.0, 0.0, 0.5])


def test_mm1_std_matches_integration():
    u, v = 0.35, 2.5
    m1 = integrate.quad(lambda x: u * np.exp(-x / v), 0, np.inf)[0]
    m2 = integrate.quad(lambda x: 2 * x * u * np.exp(-x / v), 0, np.inf)[0]
    assert mm1_std(u, v) == pytest.approx(np.sqrt(m2 - m1 ** 2), rel=1e-10)


def test_normalized_scale_invariant():
    F, G = mm1_curve(0.5, 1.0), mm1_curve(0.6, 1.3)
    Fs, Gs = mm1_curve(0.5, 3.0), mm1_curve(0.6, 3.9)  # both scaled by 3
    assert normalized_mallows(Fs, Gs) == pytest.approx(normalized_mallows(F, G), rel=1e-9)
    a = uniform(0, 1)
    b = uniform(0, 2)
    a3 = CdfCurve(a.x * 3, a.values)
    b3 = CdfCurve(b.x * 3, b.values)
    assert normalized_mallows(a3, b3) == pytest.approx(normalized_mallows(a, b), rel=1e-9)


def test_degenerate_truth():
    point = CdfCurve(np.array([1.0]), np.array([1.0]))
    with pytest.raises(DegenerateDistributionError):
        normalized_mallows(point, uniform(0, 1))


def test_curve_invariants():
    with pytest.raises(ValueError):
        CdfCurve(np.array([0.0, 0.0]), np.array([0.1, 0.2]))
    with pytest.raises(ValueError):
        CdfCurve(np.array([0.0, 1.0]), np.array([0.5, 0.4]))
    with pytest.raises(ValueError):
        CdfCurve(np.array([0.0, 1.0]), np.array([0.5, 1.2]))


def test_log_abs_error():
    th = np.array([1.0, 2.0, 0.3])
    np.testing.assert_array_equal(log_abs_error(th, th), 0.0)
    np.testing.assert_allclose(log_abs_error(np.e * th, th), 1.0)
    assert log_abs_error([2.0], [1.0])[0] == pytest.approx(0.6931, abs=1e-4)


def test_csv(tmp_path):
    p = tmp_path / "c.csv"
    uniform(0, 1, 3).to_csv(p)
    assert p.read_bytes() == b"x,F\n0,0\n0.5,0.5\n1,1\n"
