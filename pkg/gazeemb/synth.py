""" Synthetic gaze datasets

Seeded generator producing a complete dataset in the on-disk formats: 300 Hz binocular gaze
logs, manifest, image features, class attributes, bubble tracks, a pseudo-word corpus and
saliency grids.

Every class owns a 2-D attention anchor on a circle around the image center (angles from a
van der Corput sequence) and a feature direction. `signal` in [0, 1] blends class structure with
noise: at 1 every gaze stream dwells exactly on its class anchor and image features are a
noise-free function of the class, at 0 anchors and features carry no class information.
"""
import logging
import os
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Tuple

import numpy as np
from scipy.stats import qmc

from .embeddings import EmbeddingSet
from .ingest import AttributeMatrix, BubbleTrack, CorpusDocument, DatasetManifest, FeatureMatrix, GazeStream, \
    ImageRecord, RawGazeSample, VALID_CODE, clamp_sample, filter_valid, write_attributes, write_bubble_tracks, \
    write_corpus, write_feature_matrix, write_gaze_log, write_manifest, write_saliency_map

__all__ = ['SynthSpec', 'SynthDataset', 'class_anchors', 'generate', 'separable_instance', 'SAMPLE_RATE_HZ']

_logger = logging.getLogger(__name__)

SAMPLE_RATE_HZ = 300.
IMAGE_SIZE = 500.
FEATURE_DIM = 32
ATTRIBUTE_DIM = 8
SALIENCY_SIZE = 12
ANCHOR_RADIUS = 0.3
INVALID_CODE = 4

_STOP_WORDS = ('the', 'and', 'of', 'with', 'a', 'its', 'is', 'on')
_CONSONANTS = 'bcdfghklmnprstvz'
_VOWELS = 'aeiou'


@dataclass(frozen=True)
class SynthSpec:
    n_classes: int = 8
    images_per_class: int = 20
    participants: int = 3
    samples_per_stream: int = 150
    signal: float = 1.
    seed: int = 0
    invalid_rate: float = 0.02

    def __post_init__(self):
        if min(self.n_classes, self.images_per_class, self.participants, self.samples_per_stream) < 1:
            raise ValueError('synthetic dataset counts must be >= 1: %r' % (self,))
        if not 0. <= self.signal <= 1.:
            raise ValueError('signal strength must lie in [0, 1], got %r' % self.signal)
        if not 0. <= self.invalid_rate < 1.:
            raise ValueError('invalid_rate must lie in [0, 1)')


class SynthDataset(NamedTuple):
    manifest: DatasetManifest
    features: FeatureMatrix
    streams: Dict[Tuple[str, str], GazeStream]  # (image_id, participant_id), invalid samples already dropped
    attributes: AttributeMatrix
    tracks: Dict[str, BubbleTrack]
    corpus: List[CorpusDocument]
    saliency: Dict[str, np.ndarray]
    anchors: Dict[str, Tuple[float, float]]  # class anchors, normalized


def class_anchors(n_classes):
    """ Normalized anchors at van der Corput angles on a circle of radius 0.3 around the center """
    fractions = qmc.Halton(d=1, scramble=False).random(n_classes)[:, 0]
    angles = 2. * np.pi * fractions
    return np.stack([0.5 + ANCHOR_RADIUS * np.cos(angles), 0.5 + ANCHOR_RADIUS * np.sin(angles)], axis=1), angles


def _pseudo_word(rng):
    n = int(rng.integers(2, 4))
    return ''.join(_CONSONANTS[rng.integers(len(_CONSONANTS))] + _VOWELS[rng.integers(len(_VOWELS))]
                   for _ in range(n)) + _CONSONANTS[rng.integers(len(_CONSONANTS))]


def _gaze_samples(rng, anchor_px, spec: SynthSpec, participant_offset):
    """ Three dwell segments around the image anchor, per-eye offsets of +-3 px """
    noise = 1. - spec.signal
    n = spec.samples_per_stream
    bounds = np.linspace(0, n, 4).astype(int)
    centers = anchor_px[None, :] + noise * (rng.normal(0., 0.08, size=(3, 2)) * IMAGE_SIZE + participant_offset)
    centers = np.clip(centers, 0.05 * IMAGE_SIZE, 0.95 * IMAGE_SIZE)
    points = np.zeros((n, 2))
    for s in range(3):
        points[bounds[s]:bounds[s + 1]] = centers[s]
    points += noise * rng.normal(0., 0.004 * IMAGE_SIZE, size=(n, 2))
    pupil = np.maximum(3. + noise * rng.normal(0., 0.2, size=n), 0.5)
    invalid = rng.random(n) < spec.invalid_rate
    invalid[0] = invalid[-1] = False
    samples = []
    for i in range(n):
        x, y = points[i]
        if invalid[i]:
            samples.append(RawGazeSample(i * 1000. / SAMPLE_RATE_HZ, -1., -1., -1., -1., 0., 0.,
                                         INVALID_CODE, INVALID_CODE))
        else:
            samples.append(RawGazeSample(i * 1000. / SAMPLE_RATE_HZ, float(x) - 3., float(y), float(x) + 3., float(y),
                                         float(pupil[i]), float(pupil[i]), VALID_CODE, VALID_CODE))
    return samples


def generate(spec: SynthSpec = SynthSpec(), out_dir=None) -> SynthDataset:
    """ Build a dataset from `spec`, written below `out_dir` when given.

    Layout: manifest.json, features.txt, attributes.csv, bubbles.csv, corpus/<class>.txt,
    saliency/<image_id>.txt and gaze/<participant>/<image_id>.csv
    """
    rng = np.random.default_rng(spec.seed)
    s = spec.signal
    classes = ['class_%02d' % c for c in range(spec.n_classes)]
    participants = ['p%d' % (p + 1) for p in range(spec.participants)]
    anchors, angles = class_anchors(spec.n_classes)
    directions = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    # orthonormal columns, class directions keep their angles in feature space
    projection = np.linalg.qr(rng.normal(size=(FEATURE_DIM, 2)))[0]
    attr_projection = rng.normal(0., 1., size=(ATTRIBUTE_DIM, 2))
    participant_offsets = rng.normal(0., 0.02 * IMAGE_SIZE, size=(spec.participants, 2))

    records, features, image_anchors = [], [], OrderedDict()
    for c, label in enumerate(classes):
        for i in range(spec.images_per_class):
            image_id = 'img_%04d' % len(records)
            random_anchor = rng.uniform(0.5 - ANCHOR_RADIUS, 0.5 + ANCHOR_RADIUS, size=2)
            image_anchors[image_id] = s * anchors[c] + (1. - s) * random_anchor
            noise = rng.normal(0., 1. / np.sqrt(FEATURE_DIM), size=FEATURE_DIM)
            features.append(s * projection @ directions[c] + (1. - s) * noise)
            records.append(ImageRecord(image_id, label, len(records), IMAGE_SIZE, IMAGE_SIZE))
    manifest = DatasetManifest(tuple(records), tuple(classes), tuple(participants))
    features = np.stack(features)

    raw_streams = OrderedDict()
    streams = OrderedDict()
    for p, participant in enumerate(participants):
        for r in records:
            samples = _gaze_samples(rng, image_anchors[r.image_id] * IMAGE_SIZE, spec, participant_offsets[p])
            raw_streams[(r.image_id, participant)] = samples
            valid = [clamp_sample(x, r.width, r.height) for x in filter_valid(samples)]
            streams[(r.image_id, participant)] = GazeStream(r.image_id, participant, valid, r.width, r.height)

    attr_values = np.stack([s * attr_projection @ directions[c] + (1. - s) * rng.normal(size=ATTRIBUTE_DIM)
                            for c in range(spec.n_classes)])
    attributes = AttributeMatrix(tuple(classes), attr_values)

    tracks = OrderedDict()
    for n, r in enumerate(records):
        if n % 2:
            continue
        m = int(rng.integers(1, 5))
        centers = image_anchors[r.image_id][None, :] + (1. - s) * rng.normal(0., 0.05, size=(m, 2))
        radii = rng.uniform(0.05, 0.15, size=(m, 1))
        tracks[r.image_id] = BubbleTrack(r.image_id, np.clip(np.hstack([centers, radii]), 0., 1.))

    shared = [_pseudo_word(rng) for _ in range(30)]
    corpus = []
    for label in classes:
        own = [_pseudo_word(rng) for _ in range(5)]
        words = []
        for _ in range(120):
            u = rng.random()
            if u < 0.2:
                words.append(_STOP_WORDS[rng.integers(len(_STOP_WORDS))])
            elif u < 0.2 + 0.5 * s:
                words.append(own[rng.integers(len(own))])
            else:
                words.append(shared[rng.integers(len(shared))])
        corpus.append(CorpusDocument(label, ' '.join(words) + '\n'))

    grid = (np.arange(SALIENCY_SIZE) + 0.5) / SALIENCY_SIZE
    saliency = OrderedDict()
    for r in records:
        ax, ay = image_anchors[r.image_id]
        saliency[r.image_id] = np.exp(-((grid[None, :] - ax) ** 2 + (grid[:, None] - ay) ** 2) / (2 * 0.1 ** 2))

    dataset = SynthDataset(
        manifest, FeatureMatrix(features), streams, attributes, tracks, corpus, saliency,
        OrderedDict((c, tuple(anchors[i])) for i, c in enumerate(classes)))
    if out_dir is not None:
        _write(dataset, raw_streams, out_dir)
    return dataset


def _write(dataset: SynthDataset, raw_streams, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    write_manifest(dataset.manifest, os.path.join(out_dir, 'manifest.json'))
    write_feature_matrix(dataset.features.rows, os.path.join(out_dir, 'features.txt'))
    write_attributes(dataset.attributes, os.path.join(out_dir, 'attributes.csv'))
    write_bubble_tracks(dataset.tracks, os.path.join(out_dir, 'bubbles.csv'))
    write_corpus(dataset.corpus, os.path.join(out_dir, 'corpus'))
    os.makedirs(os.path.join(out_dir, 'saliency'), exist_ok=True)
    for image_id, grid in dataset.saliency.items():
        write_saliency_map(grid, os.path.join(out_dir, 'saliency', image_id + '.txt'))
    for (image_id, participant), samples in raw_streams.items():
        folder = os.path.join(out_dir, 'gaze', participant)
        os.makedirs(folder, exist_ok=True)
        r = dataset.manifest[image_id]
        write_gaze_log(GazeStream(image_id, participant, samples, r.width, r.height),
                       os.path.join(folder, image_id + '.csv'))
    _logger.info('=> Wrote synthetic dataset to %s: %d images / %d classes / %d participants', out_dir,
                 len(dataset.manifest), len(dataset.manifest.classes), len(dataset.manifest.participants))


def separable_instance(n_per_class=10, n_classes=3):
    """ Noise-free linearly separable set: image features e_c, class embeddings e_c """
    classes = ['c%d' % c for c in range(n_classes)]
    eye = np.eye(n_classes)
    thetas = np.repeat(eye, n_per_class, axis=0)
    labels = [classes[c] for c in range(n_classes) for _ in range(n_per_class)]
    return thetas, labels, EmbeddingSet(classes, eye, 'attributes')
