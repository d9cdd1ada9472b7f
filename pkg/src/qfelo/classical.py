"""Classical-FEL comparison quantities in the small-signal regime."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import poisson

from qfelo.quantum_stats import PhotonStatistics


@dataclass(frozen=True)
class ClassicalParams:
    recoil_wrT: float
    delta_cl: float
    loss_inverse_Na: float | None = None

    def __post_init__(self):
        if not self.recoil_wrT > 0:
            raise ValueError(f"non-positive recoil parameter {self.recoil_wrT}")
        if not 0 < self.delta_cl <= 1:
            raise ValueError(f"delta_cl must lie in (0, 1), got {self.delta_cl}")

    @property
    def valid(self) -> bool:
        """Small-recoil (classical) regime."""
        return self.recoil_wrT < 0.5

    @property
    def fano(self) -> float:
        return classical_fano(self.recoil_wrT, self.delta_cl)


def madey_gain(linear_gain_quantum: float, recoil_wrT: float) -> float:
    """Small-signal classical gain at the classical resonance 2kpT/m ~ pi."""
    if linear_gain_quantum < 0 or recoil_wrT < 0:
        raise ValueError("gain and recoil must be non-negative")
    return 16.0 / math.pi**3 * recoil_wrT * linear_gain_quantum


def classical_fano(recoil_wrT: float, delta_cl: float) -> float:
    """Fano factor (pi/4) / (wrT * delta_cl) of the classical small-signal FEL."""
    if not recoil_wrT > 0:
        raise ValueError(f"recoil parameter must be positive, got {recoil_wrT}")
    if not 0 < delta_cl <= 1:
        raise ValueError(f"delta_cl must lie in (0, 1), got {delta_cl}")
    return (math.pi / 4.0) / (recoil_wrT * delta_cl)


def classical_gaussian(mean: float, recoil_wrT: float, delta_cl: float, n_sigma: float = 10.0) -> PhotonStatistics:
    """Discrete Gaussian with variance classical_fano * mean.

    Support is cut at mean +- ``n_sigma`` standard deviations (and at n = 0),
    then renormalised.
    """
    if not mean > 0:
        raise ValueError("mean must be positive")
    variance = classical_fano(recoil_wrT, delta_cl) * mean
    return discrete_gaussian(mean, variance, n_sigma)


def discrete_gaussian(mean, variance, n_sigma=10.0) -> PhotonStatistics:
    sd = math.sqrt(variance)
    hi = int(math.ceil(mean + n_sigma * sd))
    lo = max(0, int(math.floor(mean - n_sigma * sd)))
    n = np.arange(hi + 1, dtype=float)
    log_w = -0.5 * ((n - mean) / sd) ** 2
    log_w[:lo] = -np.inf
    return PhotonStatistics.from_probabilities(np.exp(log_w - log_w.max()), log_w - log_w[lo])


def comparison_table(quantum: PhotonStatistics, classical: PhotonStatistics):
    """Rows (n, P_quantum, P_classical, P_poisson) on a common support.

    The Poisson reference has the quantum distribution's mean.
    """
    size = max(quantum.probabilities.size, classical.probabilities.size)
    n = np.arange(size)
    pq = np.zeros(size)
    pq[:quantum.probabilities.size] = quantum.probabilities
    pc = np.zeros(size)
    pc[:classical.probabilities.size] = classical.probabilities
    pp = poisson.pmf(n, quantum.mean)
    return n, pq, pc, pp
