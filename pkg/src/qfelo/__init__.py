"""Photon statistics and design toolkit for a quantum free-electron-laser oscillator."""

from qfelo.exceptions import (
    ConfigError,
    ConvergenceError,
    DesignError,
    NumericalError,
    QfeloError,
    QuadratureError,
    TruncationError,
)
from qfelo.momentum import MomentumDistribution, average
from qfelo.params import QuantumOscParams, RunConfig, ThresholdDeviation, params_from_config
from qfelo.quantum_stats import (
    PhotonStatistics,
    fano_small_signal,
    gain_ratio,
    photon_statistics,
    rabi_frequency_T,
    sweep,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "DesignError",
    "MomentumDistribution",
    "NumericalError",
    "PhotonStatistics",
    "QfeloError",
    "QuadratureError",
    "QuantumOscParams",
    "RunConfig",
    "ThresholdDeviation",
    "TruncationError",
    "average",
    "fano_small_signal",
    "gain_ratio",
    "params_from_config",
    "photon_statistics",
    "rabi_frequency_T",
    "sweep",
]
