import numpy as np
import pytest
import torch

from gazeemb.evaluation import per_class_accuracy
from gazeemb.linear_svm import ovr_hinge_loss, train_ovr_svm
from gazeemb.sje import ModelError


def _blobs(rng, n):
    x = np.concatenate([rng.normal(-2., 1., size=(n, 3)), rng.normal(2., 1., size=(n, 3))])
    return x, ['neg'] * n + ['pos'] * n


def test_separates_two_blobs(rng):
    x_train, y_train = _blobs(rng, 100)
    x_test, y_test = _blobs(rng, 100)
    svm = train_ovr_svm(x_train, y_train)
    assert per_class_accuracy(svm.predict(x_test), y_test) >= 0.95


def test_deterministic(rng):
    x, y = _blobs(rng, 20)
    a = train_ovr_svm(x, y, seed=2).decision_function(x)
    b = train_ovr_svm(x, y, seed=2).decision_function(x)
    np.testing.assert_array_equal(a, b)


def test_needs_two_classes(rng):
    with pytest.raises(ModelError):
        train_ovr_svm(rng.normal(size=(5, 2)), ['a'] * 5)


def test_hinge_loss():
    outputs = torch.tensor([[2., -0.5]], dtype=torch.float64)
    targets = torch.tensor([[1., -1.]], dtype=torch.float64)
    assert ovr_hinge_loss(outputs, targets).item() == pytest.approx(0.25)
