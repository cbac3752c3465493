""" Structured joint embedding

Bilinear compatibility F(x, y; W) = theta(x)^T W phi(y) between image features and class
embeddings, trained by SGD on the margin-rescaled ranking hinge loss with a 0/1 label cost.
Also holds the LATE participant fusion (score averaging) and the image ranking helper.

All math runs in float64 on CPU.
"""
import logging
from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence

import numpy as np
import torch
import torch.nn as nn
from sklearn.preprocessing import StandardScaler, normalize

from .embeddings import EmbeddingSet
from .helpers import AverageMeter

__all__ = ['TrainConfig', 'ModelError', 'CompatibilityModel', 'ImageFeatureScaler', 'score', 'predict',
           'structured_hinge_loss', 'structured_hinge_subgradient', 'hinge_step', 'train_sje', 'predict_late',
           'rank_images']

_logger = logging.getLogger(__name__)


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 10
    seed: int = 0
    shuffle: bool = True
    init: str = 'zero'  # 'zero' or seeded 'random' N(0, 1/sqrt(D*E))

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ModelError('learning_rate must be >= 0, got %r' % self.learning_rate)
        if self.epochs < 1:
            raise ModelError('epochs must be >= 1, got %r' % self.epochs)
        if self.init not in ('zero', 'random'):
            raise ModelError('unknown init %r' % self.init)

    def to_dict(self):
        return asdict(self)


class CompatibilityModel(nn.Module):
    """ W of the bilinear compatibility, D x E, plus the class order it was trained with """

    def __init__(self, feature_dim, embed_dim, classes: Sequence[str] = (), config: Optional[TrainConfig] = None):
        super(CompatibilityModel, self).__init__()
        self.weight = nn.Parameter(torch.zeros(feature_dim, embed_dim, dtype=torch.float64), requires_grad=False)
        self.classes = tuple(classes)
        self.config = config
        self.loss_history: List[float] = []
        if config is not None and config.init == 'random':
            g = torch.Generator().manual_seed(config.seed)
            std = 1. / np.sqrt(feature_dim * embed_dim)
            self.weight.data.normal_(0., std, generator=g)

    @property
    def feature_dim(self):
        return self.weight.shape[0]

    @property
    def embed_dim(self):
        return self.weight.shape[1]

    def forward(self, theta, phi):
        """ theta (B, D), phi (C, E) -> scores (B, C) """
        return theta @ self.weight @ phi.t()


def _as_tensor(x):
    if isinstance(x, torch.Tensor):
        return x.to(torch.float64)
    return torch.from_numpy(np.array(x, dtype=np.float64))


def _phi(embeddings):
    if isinstance(embeddings, EmbeddingSet):
        return _as_tensor(embeddings.vectors)
    return _as_tensor(embeddings)


def score(model: CompatibilityModel, theta, embeddings):
    """ Compatibility of one image vector (D,) or a batch (B, D) with every class, as numpy """
    theta = _as_tensor(theta)
    phi = _phi(embeddings)
    single = theta.dim() == 1
    theta = theta.reshape(-1, theta.shape[-1])
    if theta.shape[1] != model.feature_dim or phi.shape[1] != model.embed_dim:
        raise ModelError('dimension mismatch: W is %dx%d, image %d, class embedding %d' % (
            model.feature_dim, model.embed_dim, theta.shape[1], phi.shape[1]))
    with torch.no_grad():
        scores = model(theta, phi).numpy()
    return scores[0] if single else scores


def _labels(embeddings):
    if isinstance(embeddings, EmbeddingSet):
        return list(embeddings.classes)
    return list(range(len(embeddings)))


def predict(model: CompatibilityModel, theta, embeddings):
    """ Highest scoring class label, ties go to the lowest class index. Batched input -> list """
    scores = score(model, theta, embeddings)
    labels = _labels(embeddings)
    if scores.ndim == 1:
        return labels[int(np.argmax(scores))]
    return [labels[i] for i in np.argmax(scores, axis=1)]


def _most_violating(weight, theta, y_index, phi):
    scores = theta @ weight @ phi.t()
    augmented = scores + 1.
    augmented[y_index] = scores[y_index]
    y_star = int(np.argmax(augmented.numpy()))
    return y_star, float(augmented[y_star] - scores[y_index])


def structured_hinge_loss(weight, theta, y_index: int, phi):
    """ max_y [delta(y_n, y) + F(x, y)] - F(x, y_n) """
    _, violation = _most_violating(_as_tensor(weight), _as_tensor(theta), y_index, _as_tensor(phi))
    return violation


def structured_hinge_subgradient(weight, theta, y_index: int, phi):
    """ d loss / d W at the most violating label """
    weight, theta, phi = _as_tensor(weight), _as_tensor(theta), _as_tensor(phi)
    y_star, violation = _most_violating(weight, theta, y_index, phi)
    if y_star == y_index or violation <= 0:
        return torch.zeros_like(weight)
    return torch.outer(theta, phi[y_star] - phi[y_index])


def hinge_step(model: CompatibilityModel, theta, y_index: int, phi, learning_rate: float):
    """ One SGD update on a single example. Returns the example loss before the update. """
    theta, phi = _as_tensor(theta), _phi(phi)
    if not 0 <= y_index < phi.shape[0]:
        raise ModelError('label index %d outside the %d training classes' % (y_index, phi.shape[0]))
    with torch.no_grad():
        y_star, violation = _most_violating(model.weight, theta, y_index, phi)
        if y_star != y_index and violation > 0:
            model.weight.add_(torch.outer(theta, phi[y_index] - phi[y_star]), alpha=learning_rate)
    return max(violation, 0.)


def train_sje(thetas, labels: Sequence[str], embeddings: EmbeddingSet, config: TrainConfig = TrainConfig()):
    """ SGD over the training images, one pass per epoch, examples shuffled with `config.seed`.

    Args:
        thetas: (N, D) image features
        labels: class label per image, all in `embeddings`
        embeddings: class embeddings of the training classes
    """
    thetas = _as_tensor(thetas)
    if thetas.dim() != 2 or not len(thetas):
        raise ModelError('no training examples')
    if len(labels) != len(thetas):
        raise ModelError('%d images but %d labels' % (len(thetas), len(labels)))
    unknown = sorted(set(labels) - set(embeddings.classes))
    if unknown:
        raise ModelError('training labels without class embedding: %s' % ', '.join(unknown))
    y = [embeddings.index(l) for l in labels]
    phi = _phi(embeddings)
    model = CompatibilityModel(thetas.shape[1], phi.shape[1], embeddings.classes, config)
    g = torch.Generator().manual_seed(config.seed)
    losses = AverageMeter()
    for epoch in range(config.epochs):
        order = torch.randperm(len(y), generator=g).tolist() if config.shuffle else range(len(y))
        losses.reset()
        for n in order:
            losses.update(hinge_step(model, thetas[n], y[n], phi, config.learning_rate))
        model.loss_history.append(losses.avg)
    _logger.debug('=> SJE lr=%g epochs=%d final loss %.4f', config.learning_rate, config.epochs, losses.avg)
    return model


def predict_late(models: Sequence[CompatibilityModel], theta, embeddings: Sequence[EmbeddingSet]):
    """ LATE fusion: argmax of the mean per-participant scores, same tie rule as predict """
    if len(models) != len(embeddings) or not len(models):
        raise ModelError('need one embedding set per model')
    classes = embeddings[0].classes
    for e in embeddings[1:]:
        if e.classes != classes:
            raise ModelError('participant embedding sets disagree on class order')
    total = None
    for m, e in zip(models, embeddings):
        s = score(m, theta, e)
        total = s if total is None else total + s
    mean = total / len(models)
    if mean.ndim == 1:
        return classes[int(np.argmax(mean))]
    return [classes[i] for i in np.argmax(mean, axis=1)]


def rank_images(model: CompatibilityModel, thetas, image_ids: Sequence[str], embeddings: EmbeddingSet, top_n=5):
    """ Top-N images per class by compatibility, ties by image order """
    scores = score(model, np.asarray(thetas).reshape(len(image_ids), -1), embeddings)
    ranking = {}
    for j, c in enumerate(embeddings.classes):
        order = np.argsort(-scores[:, j], kind='stable')[:top_n]
        ranking[c] = [image_ids[i] for i in order]
    return ranking


class ImageFeatureScaler:
    """ Image feature preprocessing fitted on training images: 'none', 'std' (z-score) or 'l2' """

    def __init__(self, mode='none'):
        if mode not in ('none', 'std', 'l2'):
            raise ModelError('unknown image feature scaling %r' % mode)
        self.mode = mode
        self._scaler = None

    def fit(self, rows):
        if self.mode == 'std':
            self._scaler = StandardScaler().fit(np.asarray(rows, dtype=np.float64))
        return self

    def transform(self, rows):
        rows = np.asarray(rows, dtype=np.float64)
        if self.mode == 'std':
            assert self._scaler is not None, 'fit before transform'
            return self._scaler.transform(rows)
        if self.mode == 'l2':
            return normalize(rows, norm='l2')
        return rows
