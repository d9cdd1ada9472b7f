import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qfelo.classical import (
    ClassicalParams,
    classical_fano,
    classical_gaussian,
    comparison_table,
    discrete_gaussian,
    madey_gain,
)
from qfelo.momentum import MomentumDistribution
from qfelo.params import QuantumOscParams
from qfelo.quantum_stats import fano_small_signal, photon_statistics


def test_madey_gain_examples():
    assert madey_gain(1.0, math.pi**3 / 16) == pytest.approx(1.0, rel=1e-15)
    assert madey_gain(0.1, 0.2) == pytest.approx(0.010320491018623837, rel=1e-14)
    assert madey_gain(0.1, 0.0) == 0.0


def test_classical_fano_examples():
    assert classical_fano(0.2, 0.05) == pytest.approx(78.53981633974483, rel=1e-14)
    assert classical_fano(math.pi / 4, 1.0) == pytest.approx(1.0, rel=1e-15)
    assert classical_fano(0.2, 0.05) / fano_small_signal(0.05) == pytest.approx(3.93, abs=5e-3)


@pytest.mark.parametrize("wrT,delta", [(0.0, 0.05), (-1.0, 0.05), (0.2, 0.0), (0.2, 1.5)])
def test_classical_fano_domain(wrT, delta):
    with pytest.raises(ValueError):
        classical_fano(wrT, delta)


def test_validity_flag():
    assert ClassicalParams(0.2, 0.05).valid
    assert not ClassicalParams(0.5, 0.05).valid
    assert ClassicalParams(0.2, 0.05).fano == classical_fano(0.2, 0.05)


@settings(max_examples=200, deadline=None)
@given(wrT=st.floats(1e-4, math.pi / 4, exclude_max=True), delta=st.floats(1e-4, 1.0))
def test_classical_wider_than_quantum(wrT, delta):
    assert classical_fano(wrT, delta) > fano_small_signal(delta)


def _skewness(s):
    n = s.n
    m3 = ((n - s.mean) ** 3) @ s.probabilities
    return m3 / s.variance**1.5


def test_gaussian_surrogate_small_signal():
    c = classical_gaussian(3e3, 0.2, 0.05)
    assert c.fano == pytest.approx(78.5, rel=0.01)
    assert c.mean == pytest.approx(3e3, rel=1e-6)
    assert abs(_skewness(c)) < 0.05
    assert abs(c.probabilities.sum() - 1) < 1e-12


def test_unit_fano_matches_poisson():
    c = classical_gaussian(3e3, math.pi / 4, 1.0)
    assert c.fano == pytest.approx(1.0, rel=0.01)


def test_truncation_window():
    c = discrete_gaussian(50.0, 4.0)
    support = np.nonzero(c.probabilities)[0]
    assert support[0] == 30 and support[-1] == 70


def test_classical_broader_than_quantum_at_equal_mean():
    q = photon_statistics(MomentumDistribution.delta(0.5), QuantumOscParams.from_delta(0.05, 2e4, 20.0))
    c = classical_gaussian(q.mean, 0.2, 0.05)
    assert c.fano > q.fano > 1
    n, pq, pc, pp = comparison_table(q, c)
    assert n.size == pq.size == pc.size == pp.size
    assert pq.sum() == pytest.approx(1.0, abs=1e-12)
    assert pc.sum() == pytest.approx(1.0, abs=1e-12)
    assert n @ pp == pytest.approx(q.mean, rel=1e-9)


def test_mean_must_be_positive():
    with pytest.raises(ValueError):
        classical_gaussian(0.0, 0.2, 0.05)
