"""scikit-learn compatible wrappers.

These let the steady-state statistics and the design feasibility check sit in
pipelines and grid searches: parameters live in ``get_params``/``set_params``,
inputs go through ``check_array``, and nothing is computed in ``__init__``.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from qfelo import design
from qfelo.params import QuantumOscParams
from qfelo.quantum_stats import Scenario, sweep_cell


class PhotonStatisticsTransformer(TransformerMixin, BaseEstimator):
    """Map rows of (theta, x) to (mean photon number / N_a, Fano factor).

    ``x`` is the sharp momentum p/q for ``scenario="theta_vs_momentum"`` and
    the Gaussian width dp/q for ``"theta_vs_width"``. The transformer is
    stateless; ``fit`` only validates the input and the parameters.

    Parameters
    ----------
    Na : float
        Inverse loss parameter.
    alpha_at_Na : float or None
        Quantum parameter at n = N_a, held fixed across rows (wrT = theta/alpha).
    recoil_wrT : float or None
        Fixed recoil parameter; used instead of ``alpha_at_Na`` when given.
    scenario : str
    rel_tol : float
        Momentum-quadrature tolerance.
    """

    def __init__(self, Na=150.0, alpha_at_Na=0.1, recoil_wrT=None, scenario="theta_vs_momentum", rel_tol=1e-10):
        self.Na = Na
        self.alpha_at_Na = alpha_at_Na
        self.recoil_wrT = recoil_wrT
        self.scenario = scenario
        self.rel_tol = rel_tol

    def _base(self):
        if self.recoil_wrT is not None:
            return QuantumOscParams(1.0, self.Na, self.recoil_wrT), "recoil"
        return QuantumOscParams.from_alpha(1.0, self.Na, self.alpha_at_Na), "alpha"

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 2:
            raise ValueError(f"expected 2 columns (theta, x), got {X.shape[1]}")
        Scenario(self.scenario)
        self._base()
        self.n_features_in_ = 2
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        if np.any(X[:, 0] < 0):
            raise ValueError("theta must be non-negative")
        base, hold = self._base()
        out = np.empty((X.shape[0], 2))
        for i, (theta, x) in enumerate(X):
            mean, fano, status = sweep_cell(theta, x, self.scenario, base, self.rel_tol, hold)
            if status.startswith("error"):
                raise ValueError(f"row {i}: {status}")
            out[i] = mean, fano
        return out

    def get_feature_names_out(self, input_features=None):
        return np.array(["mean_over_Na", "fano"], dtype=object)


class DesignFeasibilityClassifier(ClassifierMixin, BaseEstimator):
    """Predict whether (sigma_e, eps_n) beam pairs satisfy every transverse constraint.

    ``fit`` solves the design chain for the configured fundamentals and stores
    the resulting report in ``report_``; X is ignored there. ``predict``
    returns booleans for rows of (sigma_e [m], eps_n [m rad]).
    """

    def __init__(self, lambda_L=1e-10, lambda_W=1.064e-6, gain_G1=0.1, recoil_wrT=2 * math.pi,
                 kpL_target=None, RspL_target=None, delta=0.01, f_rep=10e6, tau_e=1.2e-12):
        self.lambda_L = lambda_L
        self.lambda_W = lambda_W
        self.gain_G1 = gain_G1
        self.recoil_wrT = recoil_wrT
        self.kpL_target = kpL_target
        self.RspL_target = RspL_target
        self.delta = delta
        self.f_rep = f_rep
        self.tau_e = tau_e

    def fit(self, X=None, y=None):
        inputs = design.DesignInputs(**self.get_params())
        self.report_ = design.design(inputs)
        self.classes_ = np.array([False, True])
        self.n_features_in_ = 2
        return self

    def _check(self, X):
        check_is_fitted(self, "report_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 2:
            raise ValueError(f"expected 2 columns (sigma_e, eps_n), got {X.shape[1]}")
        return X

    def constraint_masks(self, X):
        X = self._check(X)
        return design.beam_constraints(self.report_, X[:, 0], X[:, 1])

    def predict(self, X):
        masks = self.constraint_masks(X)
        return np.logical_and.reduce([masks[c] for c in design.CONSTRAINTS])
