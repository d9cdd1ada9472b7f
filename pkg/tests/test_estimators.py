import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import FunctionTransformer

from qfelo import design
from qfelo.estimators import DesignFeasibilityClassifier, PhotonStatisticsTransformer
from qfelo.momentum import MomentumDistribution
from qfelo.params import QuantumOscParams
from qfelo.quantum_stats import photon_statistics


def test_transformer_matches_direct_call():
    X = np.array([[2.0, 0.5], [3.0, 0.52], [0.0, 0.5]])
    out = PhotonStatisticsTransformer().fit_transform(X)
    s = photon_statistics(MomentumDistribution.delta(0.52), QuantumOscParams.from_alpha(3.0, 150, 0.1))
    assert out[1, 0] == s.mean / 150 and out[1, 1] == s.fano
    assert out[2].tolist() == [0.0, 1.0]


def test_transformer_width_scenario_and_recoil_hold():
    t = PhotonStatisticsTransformer(scenario="theta_vs_width", recoil_wrT=10.0)
    out = t.fit_transform([[2.0, 0.05]])
    s = photon_statistics(MomentumDistribution.gaussian(0.5, 0.05), QuantumOscParams(2.0, 150, 10.0))
    assert out[0, 0] == s.mean / 150


def test_transformer_params_and_clone():
    t = PhotonStatisticsTransformer(Na=40.0, alpha_at_Na=0.2)
    c = clone(t)
    assert c.get_params() == t.get_params()
    c.set_params(Na=80.0)
    assert t.Na == 40.0 and c.Na == 80.0
    assert list(t.get_feature_names_out()) == ["mean_over_Na", "fano"]


def test_transformer_validation():
    t = PhotonStatisticsTransformer()
    with pytest.raises(NotFittedError):
        t.transform([[1.0, 0.5]])
    with pytest.raises(ValueError):
        t.fit([[1.0, 0.5, 0.1]])
    t.fit([[1.0, 0.5]])
    with pytest.raises(ValueError):
        t.transform([[-1.0, 0.5]])
    with pytest.raises(ValueError):
        PhotonStatisticsTransformer(scenario="theta_vs_width").fit_transform([[1.0, 0.0]])


def test_transformer_in_pipeline():
    pipe = make_pipeline(FunctionTransformer(lambda X: X * [1.0, 1.0]), PhotonStatisticsTransformer())
    out = pipe.fit_transform(np.array([[1.5, 0.5]]))
    assert out.shape == (1, 2) and out[0, 0] > 0


def test_classifier_reference_point():
    clf = DesignFeasibilityClassifier(kpL_target=0.145, RspL_target=0.145).fit()
    assert clf.predict([[0.68e-6, 0.0082e-6]]).tolist() == [True]
    hi = design.coherence_window(clf.report_)[1]
    assert clf.predict([[0.68e-6, 2 * hi], [1e-8, 1e-9]]).tolist() == [False, False]
    assert set(clf.constraint_masks([[0.68e-6, 0.0082e-6]])) == set(design.CONSTRAINTS)


def test_classifier_score_and_clone():
    clf = DesignFeasibilityClassifier(kpL_target=0.145, RspL_target=0.145)
    X = np.array([[0.68e-6, 0.0082e-6], [1e-8, 1e-9]])
    fitted = clone(clf).fit(X)
    assert fitted.score(X, [True, False]) == 1.0
    with pytest.raises(NotFittedError):
        clf.predict(X)
