"""Steady-state photon statistics of the quantum FEL oscillator.

The stationary distribution is a birth-death chain: P_n / P_{n-1} = r_n with

    r_n = theta^2 * < sinc^2( Omega_{n-1}(p) T ) >_rho,
    Omega_n(p) T = sqrt( (gT)^2 (n+1) + (wrT)^2 (p/q - 1/2)^2 ).

Products of r_n are accumulated as sums of logarithms, because r_n reaches
~N_a and the unnormalised weights overflow any float.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import logsumexp

from qfelo.exceptions import NumericalError, TruncationError
from qfelo.momentum import MomentumDistribution, average
from qfelo.params import QuantumOscParams

NMAX_CAP = 10**7
TAIL_TARGET = 1e-12
# Rows of the (n, node) integrand matrix evaluated at once.
CHUNK = 2048


def sinc(x):
    """sin(x)/x with the removable singularity handled by its series."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-4
    xs = x[small]
    out[small] = 1.0 - xs * xs / 6.0 + xs**4 / 120.0
    xl = x[~small]
    out[~small] = np.sin(xl) / xl
    return out[()] if out.ndim == 0 else out


def rabi_frequency_T(n, p_over_q, params: QuantumOscParams):
    """Momentum-dependent Rabi frequency times the flight time."""
    n = np.asarray(n)
    if np.any(n < 0):
        raise ValueError("photon number must be non-negative")
    gT, wrT = params.coupling_gT, params.recoil_wrT
    detuning = np.asarray(p_over_q, dtype=float) - 0.5
    out = np.sqrt(gT * gT * (n + 1) + (wrT * detuning) ** 2)
    return out[()] if out.ndim == 0 else out


def gain_ratios(ns, dist: MomentumDistribution, params: QuantumOscParams, rel_tol=1e-10):
    """Vector of r_n for the photon numbers ``ns`` (all >= 1)."""
    ns = np.asarray(ns, dtype=np.int64)
    if ns.size and ns.min() < 1:
        raise ValueError("gain ratio is defined for n >= 1")
    theta2 = params.pump_theta**2
    if theta2 == 0 or ns.size == 0:
        return np.zeros(ns.shape)
    gT2 = params.coupling_gT**2
    wrT = params.recoil_wrT
    out = np.empty(ns.shape)
    for start in range(0, ns.size, CHUNK):
        block = ns[start:start + CHUNK].astype(float)

        def integrand(p, block=block):
            detuning2 = (wrT * (p - 0.5)) ** 2
            return sinc(np.sqrt(gT2 * block[:, None] + detuning2[None, :])) ** 2

        out[start:start + CHUNK] = theta2 * average(dist, integrand, rel_tol)
    return out


def gain_ratio(n: int, dist: MomentumDistribution, params: QuantumOscParams, rel_tol=1e-10) -> float:
    """P_n / P_{n-1} at steady state."""
    if n < 1:
        raise ValueError("gain ratio is defined for n >= 1")
    return float(gain_ratios(np.array([n]), dist, params, rel_tol)[0])


@dataclass(frozen=True)
class PhotonStatistics:
    log_weights: np.ndarray
    probabilities: np.ndarray
    n_max: int
    mean: float
    variance: float
    fano: float
    tail_mass_bound: float = 0.0
    flags: tuple = field(default=())

    @classmethod
    def from_probabilities(cls, probabilities, log_weights=None, tail_mass_bound=0.0, flags=()):
        """Normalise ``probabilities`` and compute moments over the full array."""
        p = np.asarray(probabilities, dtype=float)
        if np.any(p < 0):
            raise ValueError("probabilities must be non-negative")
        p = p / p.sum()
        if log_weights is None:
            with np.errstate(divide="ignore"):
                log_weights = np.log(p) - np.log(p[0]) if p[0] > 0 else np.log(p)
        n = np.arange(p.size)
        mean = float(n @ p)
        variance = float(((n - mean) ** 2) @ p)
        flags = tuple(flags)
        if mean > 0:
            fano = variance / mean
        else:
            # empty cavity: coherent-vacuum convention
            fano = 1.0
            flags += ("fano_convention",)
        return cls(np.asarray(log_weights, dtype=float), p, p.size - 1, mean, variance, fano,
                   float(tail_mass_bound), flags)

    @property
    def n(self) -> np.ndarray:
        return np.arange(self.n_max + 1)


def _log_tail_sum(n_max, theta2, Na):
    """log of an upper bound on sum_{j>=1} prod_{i<=j} r_{n_max+i}.

    Uses r_n <= min(theta^2, N_a/n): sinc^2(x) <= min(1, 1/x^2) and
    x^2 >= (gT)^2 n. The bound is non-increasing in n, so once it drops
    below one the rest is a geometric series.
    """
    log_total = -math.inf
    log_term = 0.0
    n = n_max
    block = 4096
    while True:
        idx = np.arange(n + 1, n + block + 1, dtype=float)
        u = np.minimum(theta2, Na / idx)
        logs = log_term + np.cumsum(np.log(u))
        log_total = np.logaddexp(log_total, logsumexp(logs))
        log_term = logs[-1]
        n += block
        q = u[-1]
        if q < 0.5:
            return float(np.logaddexp(log_total, log_term + math.log(q / (1.0 - q))))
        block *= 2


def _initial_nmax(params):
    theta2 = params.pump_theta**2
    return int(math.ceil(4 * params.loss_inverse_Na * theta2 / (theta2 + 1))) + 64


def photon_statistics(
    dist: MomentumDistribution,
    params: QuantumOscParams,
    rel_tol: float = 1e-10,
    nmax_cap: int = NMAX_CAP,
) -> PhotonStatistics:
    """Steady-state photon distribution and its moments.

    The truncation starts at ceil(4 N_a theta^2/(theta^2+1)) + 64 and grows by
    half until r_{n_max} < 1/2 and the rigorous tail bound is below 1e-12 of
    the retained mass.
    """
    if params.pump_theta == 0:
        return PhotonStatistics.from_probabilities(np.array([1.0]), np.array([0.0]))

    theta2 = params.pump_theta**2
    Na = params.loss_inverse_Na
    n_max = min(_initial_nmax(params), nmax_cap)
    ratios = np.empty(0)
    while True:
        if ratios.size < n_max:
            new = np.arange(ratios.size + 1, n_max + 1)
            ratios = np.concatenate([ratios, gain_ratios(new, dist, params, rel_tol)])
        with np.errstate(divide="ignore"):
            log_w = np.concatenate([[0.0], np.cumsum(np.log(ratios[:n_max]))])
        log_norm = logsumexp(log_w)
        log_last = log_w[-1] - log_norm
        if log_last == -math.inf:
            tail = 0.0
        else:
            tail = math.exp(min(log_last + _log_tail_sum(n_max, theta2, Na), 0.0))
        if ratios[n_max - 1] < 0.5 and tail < TAIL_TARGET:
            break
        if n_max >= nmax_cap:
            raise TruncationError(
                f"n_max reached cap {nmax_cap}: r_nmax={ratios[n_max - 1]:.3g}, tail bound={tail:.3g}"
            )
        n_max = min(int(math.ceil(1.5 * n_max)), nmax_cap)

    p = np.exp(log_w - log_norm)
    return PhotonStatistics.from_probabilities(p, log_w, tail_mass_bound=tail)


def fano_small_signal(delta: float) -> float:
    """Fano factor 1/delta of the Gaussian small-signal approximation."""
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return 1.0 / delta


# -- parameter sweeps --------------------------------------------------------

class Scenario(str, Enum):
    THETA_VS_MOMENTUM = "theta_vs_momentum"
    THETA_VS_WIDTH = "theta_vs_width"


@dataclass(frozen=True)
class SweepResult:
    axis1: np.ndarray
    axis2: np.ndarray
    scenario: Scenario
    mean_over_Na: np.ndarray
    fano: np.ndarray
    status: np.ndarray

    def rows(self):
        """Row-major (axis1, axis2, mean_over_Na, fano, status) tuples."""
        for i, a in enumerate(self.axis1):
            for j, b in enumerate(self.axis2):
                yield float(a), float(b), float(self.mean_over_Na[i, j]), float(self.fano[i, j]), str(self.status[i, j])


def sweep_cell(theta, x, scenario, params: QuantumOscParams, rel_tol=1e-10, hold="alpha"):
    """One grid cell: (mean/N_a, Fano factor, status)."""
    scenario = Scenario(scenario)
    try:
        if scenario is Scenario.THETA_VS_MOMENTUM:
            dist = MomentumDistribution.delta(x)
        else:
            if not x > 0:
                raise ValueError(f"momentum width must be positive, got {x}")
            dist = MomentumDistribution.gaussian(0.5, x)
        if theta == 0:
            return 0.0, 1.0, "vacuum"
        stats = photon_statistics(dist, params.with_theta(theta, hold), rel_tol)
    except (NumericalError, ValueError) as exc:
        return math.nan, math.nan, f"error: {type(exc).__name__}: {exc}"
    status = "fano_convention" if "fano_convention" in stats.flags else "ok"
    return stats.mean / params.loss_inverse_Na, stats.fano, status


def _cell_star(args):
    return sweep_cell(*args)


def sweep(axis1, axis2, scenario, params: QuantumOscParams, rel_tol=1e-10, hold="alpha", workers=1) -> SweepResult:
    """Mean photon number over N_a and Fano factor on a (theta, x) grid.

    ``x`` is the sharp momentum p/q for ``theta_vs_momentum`` and the width of a
    Gaussian centred on resonance for ``theta_vs_width``. ``hold`` chooses
    whether alpha_at_Na (as in the published maps) or wrT stays fixed while theta
    varies. Cells fail independently; their status column carries the error.
    """
    scenario = Scenario(scenario)
    axis1 = np.asarray(axis1, dtype=float)
    axis2 = np.asarray(axis2, dtype=float)
    tasks = [(float(a), float(b), scenario, params, rel_tol, hold) for a in axis1 for b in axis2]
    if workers is None or workers <= 1 or len(tasks) < 2:
        results = [_cell_star(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell_star, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    shape = (axis1.size, axis2.size)
    mean = np.array([r[0] for r in results], dtype=float).reshape(shape)
    fano = np.array([r[1] for r in results], dtype=float).reshape(shape)
    status = np.array([r[2] for r in results], dtype=object).reshape(shape)
    return SweepResult(axis1, axis2, scenario, mean, fano, status)
