""" One-vs-rest linear SVM probe

Per-class linear scorers trained jointly by SGD on the binary hinge loss with L2 weight decay.
Only used to compare fixation filter settings on stacked raw gaze features, so the aim is a
stable relative ranking rather than a tuned classifier.
"""
from typing import Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.optim as optim
from sklearn.preprocessing import StandardScaler

from .sje import ModelError

__all__ = ['OvRLinearSVM', 'ovr_hinge_loss', 'train_ovr_svm']


class OvRLinearSVM(nn.Module):
    def __init__(self, input_size, classes: Sequence[str]):
        super(OvRLinearSVM, self).__init__()
        self.classes = tuple(classes)
        self.linear = nn.Linear(input_size, len(self.classes)).to(torch.float64)
        nn.init.zeros_(self.linear.weight)
        nn.init.zeros_(self.linear.bias)
        self.scaler = None

    def forward(self, x):
        return self.linear(x)

    def decision_function(self, samples):
        x = np.array(samples, dtype=np.float64)
        if self.scaler is not None:
            x = self.scaler.transform(x)
        with torch.no_grad():
            return self(torch.from_numpy(x)).numpy()

    def predict(self, samples):
        """ argmax class score, ties to the lowest class index """
        return [self.classes[i] for i in np.argmax(self.decision_function(samples), axis=1)]


def ovr_hinge_loss(outputs, targets):
    """ Mean binary hinge over every (sample, class), targets in {-1, +1} """
    return torch.clamp(1. - targets * outputs, min=0).mean()


def train_ovr_svm(
        samples,
        labels: Sequence[str],
        epochs=30,
        learning_rate=0.01,
        weight_decay=1e-4,
        batch_size=16,
        seed=0) -> OvRLinearSVM:
    samples = np.asarray(samples, dtype=np.float64)
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise ModelError('one-vs-rest SVM needs at least 2 classes, got %d' % len(classes))
    if samples.ndim != 2 or len(samples) != len(labels):
        raise ModelError('%s samples for %d labels' % (samples.shape, len(labels)))

    model = OvRLinearSVM(samples.shape[1], classes)
    model.scaler = StandardScaler().fit(samples)
    x = torch.from_numpy(model.scaler.transform(samples))
    index = {c: i for i, c in enumerate(classes)}
    targets = -torch.ones(len(labels), len(classes), dtype=torch.float64)
    targets[torch.arange(len(labels)), torch.tensor([index[l] for l in labels])] = 1.

    optimizer = optim.SGD(model.parameters(), lr=learning_rate, weight_decay=weight_decay)
    g = torch.Generator().manual_seed(seed)
    for epoch in range(epochs):
        order = torch.randperm(len(x), generator=g)
        for start in range(0, len(x), batch_size):
            batch = order[start:start + batch_size]
            optimizer.zero_grad()
            loss = ovr_hinge_loss(model(x[batch]), targets[batch])
            loss.backward()
            optimizer.step()
    return model
