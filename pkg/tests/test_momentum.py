import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from qfelo.exceptions import QuadratureError
from qfelo.momentum import MomentumDistribution, average


def eq2_factor(gT, n, wrT):
    """sinc^2 of the detuned Rabi angle, as a function of p/q."""
    def f(p):
        x = np.sqrt(gT**2 * n + (wrT * (p - 0.5)) ** 2)
        return (np.sin(x) / x) ** 2
    return f


def quad_oracle(dist, f):
    lo, hi = dist.center - 12 * dist.width, dist.center + 12 * dist.width
    val, _ = quad(lambda p: float(f(np.array([p]))[0]) * float(dist.pdf(p)), lo, hi,
                  points=[dist.center], limit=2000, epsabs=0, epsrel=1e-13)
    return val


def test_delta_sifting():
    assert average(MomentumDistribution.delta(0.5), lambda p: p) == 0.5


def test_delta_vector_valued():
    out = average(MomentumDistribution.delta(0.25), lambda p: np.stack([p, p**2]))
    assert np.array_equal(out, [0.25, 0.0625])


def test_gaussian_normalization():
    val = average(MomentumDistribution.gaussian(0.5, 0.1), lambda p: np.ones_like(p), 1e-10)
    assert val == pytest.approx(1.0, rel=1e-10)


@pytest.mark.parametrize("sigma", [1e-3, 0.05, 0.1, 0.7])
def test_gaussian_second_moment(sigma):
    val = average(MomentumDistribution.gaussian(0.5, sigma), lambda p: (p - 0.5) ** 2, 1e-10)
    assert val == pytest.approx(sigma**2, rel=1e-10)


def test_degenerate_width_promoted():
    d = MomentumDistribution.gaussian(0.4, 1e-13)
    assert d.is_delta and d.center == 0.4


def test_invalid_inputs():
    with pytest.raises(ValueError):
        MomentumDistribution("gaussian", 0.5, -0.1)
    with pytest.raises(ValueError):
        average(MomentumDistribution.delta(), lambda p: p, rel_tol=1e-15)
    with pytest.raises(ValueError):
        average(MomentumDistribution.delta(), lambda p: p, rel_tol=0.1)


@pytest.mark.parametrize("gT,n,wrT,sigma", [
    (1 / math.sqrt(150), 1, 10.0, 0.05),
    (3 / math.sqrt(150), 40, 30.0, 0.05),
    (0.2, 100, 150.0, 0.1),
    (0.01, 5, 20.0, 0.02),
])
def test_eq2_integrand_against_quad(gT, n, wrT, sigma):
    dist = MomentumDistribution.gaussian(0.5, sigma)
    f = eq2_factor(gT, n, wrT)
    assert average(dist, f, 1e-12) == pytest.approx(quad_oracle(dist, f), rel=1e-9)


def test_frozen_gaussian_ratio():
    # theta^2 <sinc^2> at n = 40 for N_a = 150, theta = 3, alpha = 0.1, width 0.05;
    # reference value from 40-digit adaptive quadrature
    dist = MomentumDistribution.gaussian(0.5, 0.05)
    f = eq2_factor(3 / math.sqrt(150), 40, 30.0)
    assert 9 * average(dist, f, 1e-12) == pytest.approx(2.153523777201723, rel=1e-10)


def test_hermite_matches_legendre():
    dist = MomentumDistribution.gaussian(0.45, 0.08)
    f = eq2_factor(0.3, 20, 80.0)
    a = average(dist, f, 1e-11, method="hermite")
    b = average(dist, f, 1e-11, method="legendre")
    assert a == pytest.approx(b, rel=1e-9)


@pytest.mark.parametrize("gT,n", [(1 / math.sqrt(150), 1), (1 / math.sqrt(150), 150), (0.5, 10)])
def test_narrow_gaussian_tends_to_delta(gT, n):
    f = eq2_factor(gT, n, 10.0)
    g = average(MomentumDistribution.gaussian(0.5, 1e-4), f, 1e-12)
    d = average(MomentumDistribution.delta(0.5), f)
    assert abs(g - d) <= 1e-6 * abs(d)


@pytest.mark.parametrize("gT,n,wrT", [(0.2, 50, 100.0), (0.007, 3000, 20.0)])
def test_narrow_gaussian_gap_is_second_order(gT, n, wrT):
    # the gap is sigma^2 f''(1/2) / 2, so halving sigma quarters it
    f = eq2_factor(gT, n, wrT)
    d = average(MomentumDistribution.delta(0.5), f)
    gaps = [average(MomentumDistribution.gaussian(0.5, s), f, 1e-13) - d for s in (2e-4, 1e-4)]
    assert gaps[0] / gaps[1] == pytest.approx(4.0, rel=1e-3)


def test_refinement_stops_converged():
    calls = []
    dist = MomentumDistribution.gaussian(0.5, 0.05)
    f = eq2_factor(0.2, 10, 60.0)

    def spy(p):
        calls.append(p.size)
        return f(p)

    val = average(dist, spy, 1e-10)
    assert calls[0] == 32 and all(b == 2 * a for a, b in zip(calls, calls[1:]))

    def estimate(n):
        x, w = np.polynomial.hermite.hermgauss(n)
        return f(0.5 + 0.05 * np.sqrt(2) * x) @ w / np.sqrt(np.pi)

    last, prev = estimate(calls[-1]), estimate(calls[-2])
    assert val == pytest.approx(last, rel=1e-13)
    assert abs(last - prev) < 1e-10 * abs(last)


def test_nonconvergence_carries_estimates():
    dist = MomentumDistribution.gaussian(0.5, 1.0)
    with pytest.raises(QuadratureError) as info:
        average(dist, lambda p: np.sign(np.sin(1e5 * p)), 1e-10)
    assert info.value.last is not None and info.value.previous is not None


@settings(max_examples=100, deadline=None)
@given(a=st.floats(-10, 10), b=st.floats(-10, 10),
       sigma=st.floats(1e-3, 0.3), center=st.floats(0, 1))
def test_linearity(a, b, sigma, center):
    tol = 1e-10
    dist = MomentumDistribution.gaussian(center, sigma)
    f = eq2_factor(0.1, 10, 30.0)
    g = np.cos
    lhs = average(dist, lambda p: a * f(p) + b * g(p), tol)
    rhs = a * average(dist, f, tol) + b * average(dist, g, tol)
    scale = abs(a) * average(dist, lambda p: np.abs(f(p)), tol) + abs(b) * 1.0
    assert abs(lhs - rhs) <= 4 * tol * scale
