import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from radcotrain.corpus import AGGRESSIVENESS, BT, FINDINGS, IMPRESSION, Report
from radcotrain.ensemble import accuracy, average_dist, ensemble_labels, ensemble_predict
from radcotrain.errors import ContractError
from radcotrain.features import build_vocab
from radcotrain.linear import ClassifierParams


def test_examples():
    np.testing.assert_allclose(average_dist([0.9, 0.1], [0.1, 0.9]), [0.5, 0.5])
    assert ensemble_labels(np.array([[0.9, 0.1]]), np.array([[0.1, 0.9]]))[0] == 0
    np.testing.assert_allclose(average_dist([0.6, 0.4], [0.2, 0.8]), [0.4, 0.6])
    assert ensemble_labels(np.array([0.6, 0.4]), np.array([0.2, 0.8])) == 1


def test_ensemble_predict_label_space_mismatch():
    r = Report("a", {FINDINGS: "x", IMPRESSION: "y"})
    v = build_vocab(["x y"], min_df=1)
    with pytest.raises(ContractError):
        ensemble_predict(ClassifierParams.zeros(BT, 3), ClassifierParams.zeros(AGGRESSIVENESS, 3), r, v, v)


def test_ensemble_predict_identical_classifiers():
    v = build_vocab(["mass", "normal"], min_df=1)
    w = np.array([[2.0, -1.0, 0.0], [-2.0, 1.0, 0.5]])
    p = ClassifierParams(w, BT)
    r = Report("a", {FINDINGS: "mass", IMPRESSION: "mass"})
    label, dist = ensemble_predict(p, p, r, v, v)
    from radcotrain.linear import predict_dist
    from radcotrain.features import featurize
    np.testing.assert_allclose(dist, predict_dist(p, featurize("mass", v)))
    assert label == int(np.argmax(dist))


def test_accuracy():
    assert accuracy([1, 1], [1, 1]) == 1.0
    assert accuracy([0, 0], [1, 1]) == 0.0
    assert accuracy([1, 0, 1, 1], [1, 0, 1, 0]) == 0.75
    with pytest.raises(ContractError):
        accuracy([1], [1, 0])
    with pytest.raises(ContractError):
        accuracy([], [])


dists = st.integers(2, 4).flatmap(
    lambda k: st.tuples(*(st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k) for _ in range(2)))
)


@settings(max_examples=200, deadline=None)
@given(pair=dists, c=st.floats(0.1, 10.0))
def test_ensemble_properties(pair, c):
    a, b = (np.asarray(v) / np.sum(v) for v in pair)
    d = average_dist(a, b)
    assert d.sum() == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_array_equal(average_dist(a, a), a)
    assert np.argmax(d) == np.argmax(average_dist(b, a)) == np.argmax(c * d)
