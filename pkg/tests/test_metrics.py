import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import accuracy_score, f1_score

from rtsfnet.data.metrics import compute_metrics, confusion_matrix
from rtsfnet.errors import UsageError

# rows = actual, columns = predicted
UCIHAR_CM = np.array([
    [495, 1, 0, 0, 0, 0],
    [4, 466, 1, 0, 0, 0],
    [2, 6, 412, 0, 0, 0],
    [0, 0, 0, 462, 29, 0],
    [0, 0, 0, 23, 509, 0],
    [0, 0, 0, 0, 0, 537],
])
DAPHNET_CM = np.array([[2095, 8], [89, 37]])


def expand(cm: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Label vectors whose confusion matrix is ``cm``."""
    actual, predicted = [], []
    for i, row in enumerate(cm):
        for j, n in enumerate(row):
            actual += [i] * int(n)
            predicted += [j] * int(n)
    return np.array(actual), np.array(predicted)


def sklearn_metrics(cm: np.ndarray) -> tuple[float, float, float]:
    a, p = expand(cm)
    labels = list(range(cm.shape[0]))
    return (100 * accuracy_score(a, p), f1_score(a, p, average="macro", labels=labels, zero_division=0),
            f1_score(a, p, average="weighted", labels=labels, zero_division=0))


def test_ucihar_table():
    r = compute_metrics(UCIHAR_CM)
    assert abs(r.accuracy - 97.76) <= 0.005
    assert abs(r.mf1 - 0.9779) <= 0.0005 and abs(r.wf1 - 0.9776) <= 0.0005
    np.testing.assert_allclose((r.accuracy, r.mf1, r.wf1), sklearn_metrics(UCIHAR_CM), rtol=1e-12)


def test_daphnet_table():
    r = compute_metrics(DAPHNET_CM)
    assert abs(r.accuracy - 95.65) <= 0.005 and abs(r.mf1 - 0.7051) <= 0.0005
    assert abs(r.wf1 - 0.9466) <= 0.0005
    np.testing.assert_allclose((r.accuracy, r.mf1, r.wf1), sklearn_metrics(DAPHNET_CM), rtol=1e-12)


def test_perfect_and_constant_predictions():
    r = compute_metrics(np.diag([5, 7, 9]))
    assert (r.accuracy, r.mf1, r.wf1) == (100.0, 1.0, 1.0)
    # every sample called the majority class: the minority class scores F1 = 0
    r = compute_metrics([[2103, 0], [126, 0]])
    assert r.accuracy == pytest.approx(100 * 2103 / 2229)
    assert r.mf1 == pytest.approx(0.5 * 2 * 2103 / (2 * 2103 + 126))
    assert r.f1[1] == 0.0


def test_bad_input():
    with pytest.raises(UsageError):
        compute_metrics(np.zeros((0, 0)))
    with pytest.raises(UsageError):
        compute_metrics(np.zeros((3, 3)))
    with pytest.raises(UsageError):
        compute_metrics(np.zeros((2, 3)))
    with pytest.raises(UsageError):
        compute_metrics([[1, -1], [0, 2]])
    with pytest.raises(UsageError):
        confusion_matrix([0, 1], [0], 2)
    with pytest.raises(UsageError):
        confusion_matrix([0, 3], [0, 1], 2)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 6).flatmap(lambda k: st.lists(st.lists(st.integers(0, 30), min_size=k, max_size=k),
                                                     min_size=k, max_size=k)))
def test_matches_sklearn(rows):
    cm = np.array(rows)
    if cm.sum() == 0:
        return
    a, p = expand(cm)
    np.testing.assert_array_equal(confusion_matrix(a, p, cm.shape[0]), cm)
    r = compute_metrics(cm)
    np.testing.assert_allclose((r.accuracy, r.mf1, r.wf1), sklearn_metrics(cm), rtol=1e-12, atol=1e-15)


def test_report_text_and_csv():
    r = compute_metrics(DAPHNET_CM, ("no_freeze", "freeze"))
    assert "acc: 95.6483" in r.to_text()
    assert r.confusion_csv().splitlines()[2] == "freeze,89,37"
