""" Competitor class embeddings

Side information the gaze embeddings are compared against: random and central gaze points,
saliency histograms, bubble sequences (BFS), per-class attributes, bag-of-words over a class
corpus and the attribute + gaze fusion. Every builder returns an `EmbeddingSet` so the
compatibility model consumes all sources the same way.
"""
import logging
import re
from collections import OrderedDict
from typing import Dict, Optional, Sequence

import numpy as np
from nltk.stem.porter import PorterStemmer
from sklearn.feature_extraction.text import CountVectorizer, ENGLISH_STOP_WORDS

from .embeddings import EmbeddingError, EmbeddingSet, GridSpec, SequenceSpec, encode_sequences, grid_cells,\
    sample_indices, standardize
from .fixation import Fixation
from .gaze_features import FeatureMask, GazeSequences, fixation_features
from .ingest import AttributeMatrix, BubbleTrack, CorpusDocument, DatasetManifest

__all__ = ['random_point_sequences', 'central_point_sequences', 'embed_random_points', 'embed_central_point',
           'saliency_cells', 'embed_saliency_histogram', 'encode_bubbles_bfs', 'bow_analyzer',
           'build_bow_embeddings', 'attribute_embeddings', 'fuse_embeddings']

_logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r'[a-z]+')


def _point_features(points):
    return fixation_features([Fixation(x=float(x), y=float(y), duration=0., pupil=0., onset=float(i))
                              for i, (x, y) in enumerate(points)])


def random_point_sequences(sequences: GazeSequences, seed=0, count: Optional[int] = None) -> GazeSequences:
    """ Replace each sequence by uniform random points in [0, 1]^2.

    `count` points per sequence, or as many as the sequence has fixations (at least one) when None.
    Keys are visited in sorted order so the draw does not depend on dict order.
    """
    rng = np.random.default_rng(seed)
    out = OrderedDict()
    for key in sorted(sequences):
        n = count if count is not None else max(len(sequences[key]), 1)
        out[key] = _point_features(rng.uniform(0., 1., size=(n, 2)))
    return OrderedDict((k, out[k]) for k in sequences)


def central_point_sequences(sequences: GazeSequences) -> GazeSequences:
    """ Replace each sequence by a single fixation at the image center. """
    center = _point_features([(0.5, 0.5)])
    return OrderedDict((k, center.copy()) for k in sequences)


def embed_random_points(
        sequences: GazeSequences,
        manifest: DatasetManifest,
        method: str = 'GH',
        grid: GridSpec = GridSpec(),
        seq: Optional[SequenceSpec] = None,
        mask: FeatureMask = FeatureMask(),
        count: Optional[int] = None,
        seed: int = 0,
        **kwargs) -> Dict[str, EmbeddingSet]:
    return encode_sequences(
        random_point_sequences(sequences, seed, count), manifest, method, grid, seq, mask, source='random', **kwargs)


def embed_central_point(
        sequences: GazeSequences,
        manifest: DatasetManifest,
        method: str = 'GH',
        grid: GridSpec = GridSpec(),
        seq: Optional[SequenceSpec] = None,
        mask: FeatureMask = FeatureMask(),
        **kwargs) -> Dict[str, EmbeddingSet]:
    return encode_sequences(
        central_point_sequences(sequences), manifest, method, grid, seq, mask, source='central', **kwargs)


def saliency_cells(saliency, grid: GridSpec):
    """ Mean saliency per grid cell, pixel centers binned like fixations. Cells without pixels are 0. """
    saliency = np.asarray(saliency, dtype=np.float64)
    h, w = saliency.shape
    ys, xs = np.meshgrid((np.arange(h) + 0.5) / h, (np.arange(w) + 0.5) / w, indexing='ij')
    cells = grid_cells(np.stack([xs.ravel(), ys.ravel()], axis=1), grid)
    sums = np.bincount(cells, weights=saliency.ravel(), minlength=grid.cells)
    counts = np.bincount(cells, minlength=grid.cells)
    out = np.zeros(grid.cells)
    np.divide(sums, counts, out=out, where=counts > 0)
    return out


def embed_saliency_histogram(
        maps: Dict[str, np.ndarray],
        manifest: DatasetManifest,
        grid: GridSpec = GridSpec(),
        classes: Optional[Sequence[str]] = None) -> EmbeddingSet:
    classes = list(classes or manifest.classes)
    rows = []
    for c in classes:
        records = manifest.images_of(c)
        if not records:
            raise EmbeddingError('class %r has no images for the saliency histogram' % c)
        missing = [r.image_id for r in records if r.image_id not in maps]
        if missing:
            raise EmbeddingError('missing saliency map for image %s' % missing[0])
        rows.append(np.mean([saliency_cells(maps[r.image_id], grid) for r in records], axis=0))
    return EmbeddingSet(classes, np.stack(rows), 'saliency', OrderedDict(grid=str(grid)))


def encode_bubbles_bfs(
        tracks: Dict[str, BubbleTrack],
        manifest: DatasetManifest,
        seq: Optional[SequenceSpec] = None,
        classes: Optional[Sequence[str]] = None) -> EmbeddingSet:
    """ Bubble features with sequence: k sampled (x, y, radius) bubbles per image, averaged per class.

    k defaults to the shortest non-empty bubble track over `classes`.
    """
    classes = list(classes or manifest.classes)
    per_class = OrderedDict()
    for c in classes:
        per_class[c] = [tracks[r.image_id].bubbles for r in manifest.images_of(c)
                        if r.image_id in tracks and len(tracks[r.image_id].bubbles)]
        if not per_class[c]:
            raise EmbeddingError('class %r has no bubble tracks' % c)
    if seq is None:
        seq = SequenceSpec(k=min(len(b) for bs in per_class.values() for b in bs))
    rows = []
    for c, bubbles in per_class.items():
        vectors = [b[sample_indices(len(b), seq.k, seq.sampling)].ravel() for b in bubbles]
        rows.append(np.mean(vectors, axis=0))
    return EmbeddingSet(classes, np.stack(rows), 'bubbles', OrderedDict(k=seq.k, sampling=seq.sampling))


def bow_analyzer(stemmer: Optional[PorterStemmer] = None):
    """ Lowercase alphabetic tokens, English stop-words removed, Porter stems """
    stemmer = stemmer or PorterStemmer()

    def _analyze(text):
        return [stemmer.stem(t) for t in _TOKEN_RE.findall(text.lower()) if t not in ENGLISH_STOP_WORDS]
    return _analyze


def build_bow_embeddings(docs: Sequence[CorpusDocument], vocab_size: int = 1000) -> EmbeddingSet:
    """ Per-class counts of the `vocab_size` most frequent stems of the corpus.

    Columns are ordered by total frequency, ties by the stem in lexicographic order.
    """
    assert vocab_size >= 1
    labels = [d.class_label for d in docs]
    if len(set(labels)) != len(labels):
        raise EmbeddingError('more than one corpus document per class')
    vectorizer = CountVectorizer(analyzer=bow_analyzer())
    try:
        counts = vectorizer.fit_transform([d.text for d in docs]).toarray()
    except ValueError:
        raise EmbeddingError('empty vocabulary after stop-word removal and stemming')
    stems = vectorizer.get_feature_names_out()
    totals = counts.sum(axis=0)
    order = sorted(range(len(stems)), key=lambda i: (-totals[i], stems[i]))[:vocab_size]
    vectors = counts[:, order].astype(np.float64)
    for label, row in zip(labels, vectors):
        if not row.any():
            _logger.warning('=> Corpus document of class %s has no vocabulary word, zero BoW vector', label)
    meta = OrderedDict(vocab_size=vocab_size, vocabulary=[str(stems[i]) for i in order])
    return EmbeddingSet(labels, vectors, 'bow', meta)


def attribute_embeddings(attributes: AttributeMatrix, classes: Optional[Sequence[str]] = None) -> EmbeddingSet:
    embeddings = EmbeddingSet(attributes.classes, attributes.values, 'attributes')
    return embeddings.select(classes) if classes is not None else embeddings


def fuse_embeddings(a: EmbeddingSet, b: EmbeddingSet) -> EmbeddingSet:
    """ Standardize both sources and concatenate them, rows in the class order of `a` """
    if set(a.classes) != set(b.classes):
        raise EmbeddingError('cannot fuse %s and %s embeddings over different classes' % (a.source, b.source))
    sa = standardize(a)
    sb = standardize(b.select(a.classes))
    meta = OrderedDict(parts=[a.source, b.source], dims=[a.dim, b.dim])
    return EmbeddingSet(a.classes, np.concatenate([sa.vectors, sb.vectors], axis=1), 'fused', meta)
