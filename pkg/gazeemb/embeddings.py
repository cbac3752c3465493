""" Gaze embeddings

Encoders turning per-image gaze feature sequences into fixed-size vectors:

* GH  - gaze histogram, fixation counts over an m x n grid
* GFG - gaze features with grid, mean masked feature vector per grid cell
* GFS - gaze features with sequence, k temporally ordered fixations

plus the per-class aggregation, participant fusion (AVG / EARLY, LATE is a score fusion and
lives in `sje.py`) and the standardization applied before training.
"""
import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from PIL import Image
from sklearn.preprocessing import StandardScaler, normalize

from .gaze_features import FeatureMask, GazeSequences
from .ingest import DatasetManifest

__all__ = ['GridSpec', 'SequenceSpec', 'ClassEmbedding', 'EmbeddingSet', 'EmbeddingError', 'EMBEDDING_SOURCES',
           'grid_cells', 'encode_gh', 'encode_gfg', 'sample_indices', 'encode_gfs', 'aggregate_per_class',
           'min_sequence_length', 'encode_sequences', 'combine_participants', 'standardize', 'grid_density',
           'export_density_png']

_logger = logging.getLogger(__name__)

EMBEDDING_SOURCES = (
    'GH', 'GFG', 'GFS', 'bubbles', 'attributes', 'bow', 'random', 'central', 'saliency', 'fused')


class EmbeddingError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    m: int = 3
    n: int = 3

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise EmbeddingError('grid needs m, n >= 1, got %dx%d' % (self.m, self.n))

    @property
    def cells(self):
        return self.m * self.n

    def __str__(self):
        return '%dx%d' % (self.m, self.n)


@dataclass(frozen=True)
class SequenceSpec:
    k: int = 1
    sampling: str = 'even'  # 'even' spacing over the scanpath or the 'first' k fixations

    def __post_init__(self):
        if self.k < 1:
            raise EmbeddingError('sequence length k must be >= 1, got %d' % self.k)
        if self.sampling not in ('even', 'first'):
            raise EmbeddingError('unknown sequence sampling %r' % self.sampling)


class ClassEmbedding(NamedTuple):
    class_label: str
    vector: np.ndarray
    source: str


class EmbeddingSet:
    """ Ordered per-class embeddings sharing one dimension.

    Args:
        classes: class labels, row order of `vectors`
        vectors: (C, E) real matrix
        source: one of EMBEDDING_SOURCES
        meta: header entries (mask, grid, k, participants, fusion ...) kept for serialization
    """

    def __init__(self, classes: Sequence[str], vectors, source: str, meta: Optional[dict] = None):
        vectors = np.array(vectors, dtype=np.float64, ndmin=2)
        classes = tuple(classes)
        if source not in EMBEDDING_SOURCES:
            raise EmbeddingError('unknown embedding source %r' % source)
        if vectors.shape[0] != len(classes):
            raise EmbeddingError('%d classes but %d embedding rows' % (len(classes), vectors.shape[0]))
        if len(set(classes)) != len(classes):
            raise EmbeddingError('duplicate class in embedding set')
        if not np.isfinite(vectors).all():
            raise EmbeddingError('non-finite %s embedding entry' % source)
        vectors.setflags(write=False)
        self.classes = classes
        self.vectors = vectors
        self.source = source
        self.meta = OrderedDict(meta or {})
        self._index = {c: i for i, c in enumerate(classes)}

    @property
    def dim(self):
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.classes)

    def __contains__(self, label):
        return label in self._index

    def __getitem__(self, label) -> ClassEmbedding:
        return ClassEmbedding(label, self.vectors[self._index[label]], self.source)

    def __iter__(self):
        for c in self.classes:
            yield self[c]

    def index(self, label):
        return self._index[label]

    def select(self, labels: Sequence[str]) -> 'EmbeddingSet':
        missing = [c for c in labels if c not in self._index]
        if missing:
            raise EmbeddingError('no %s embedding for classes %s' % (self.source, ', '.join(missing)))
        return self.replace(classes=labels, vectors=self.vectors[[self._index[c] for c in labels]])

    def replace(self, **kwargs) -> 'EmbeddingSet':
        args = dict(classes=self.classes, vectors=self.vectors, source=self.source, meta=self.meta)
        args.update(kwargs)
        return EmbeddingSet(**args)

    def __repr__(self):
        return 'EmbeddingSet(source=%s, classes=%d, dim=%d)' % (self.source, len(self), self.dim)


def grid_cells(xy, grid: GridSpec):
    """ Row-major cell index of normalized points.

    A point on the boundary between two cells belongs to the lower-index cell; 0 and 1 belong
    to the first and the last cell.
    """
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    col = np.clip(np.ceil(xy[:, 0] * grid.n) - 1, 0, grid.n - 1).astype(np.int64)
    row = np.clip(np.ceil(xy[:, 1] * grid.m) - 1, 0, grid.m - 1).astype(np.int64)
    return row * grid.n + col


def encode_gh(features, grid: GridSpec):
    """ m*n fixation counts, features columns 0, 1 are normalized x, y """
    features = np.asarray(features, dtype=np.float64)
    if not len(features):
        return np.zeros(grid.cells)
    return np.bincount(grid_cells(features[:, :2], grid), minlength=grid.cells).astype(np.float64)


def encode_gfg(features, grid: GridSpec, mask: FeatureMask = FeatureMask()):
    """ |mask|*m*n vector, block c is the mean masked feature of the fixations inside cell c """
    out = np.zeros((grid.cells, len(mask)))
    features = np.asarray(features, dtype=np.float64)
    if not len(features):
        return out.ravel()
    cells = grid_cells(features[:, :2], grid)
    masked = features[:, mask.indices]
    for c in np.unique(cells):
        out[c] = masked[cells == c].mean(axis=0)
    return out.ravel()


def sample_indices(length: int, k: int, sampling: str = 'even'):
    """ k fixation indices in temporal order.

    even: round-half-up(i * (length - 1) / (k - 1)), k == 1 picks the middle fixation; indices
        repeat when length < k.
    first: the first k indices, the last index repeats when length < k.
    """
    assert length >= 1 and k >= 1
    if sampling == 'first':
        return np.minimum(np.arange(k), length - 1)
    if k == 1:
        pos = np.array([(length - 1) / 2.])
    else:
        pos = np.arange(k) * (length - 1) / (k - 1)
    return np.floor(pos + 0.5).astype(np.int64)


def encode_gfs(features, seq: SequenceSpec, mask: FeatureMask = FeatureMask()):
    """ |mask|*k vector, masked features of k sampled fixations concatenated in time order """
    features = np.asarray(features, dtype=np.float64)
    if not len(features):
        raise EmbeddingError('GFS is undefined for an empty gaze sequence')
    idx = sample_indices(len(features), seq.k, seq.sampling)
    return features[idx][:, mask.indices].ravel()


def aggregate_per_class(
        vectors: Dict[Tuple[str, str], List[np.ndarray]],
        classes: Sequence[str],
        participants: Sequence[str],
        source: str,
        meta: Optional[dict] = None) -> Dict[str, EmbeddingSet]:
    """ Mean per-sequence vector for every (class, participant).

    Args:
        vectors: (class_label, participant_id) -> per-sequence vectors in manifest order
    Returns:
        participant_id -> EmbeddingSet over `classes`
    """
    sets = OrderedDict()
    for p in participants:
        rows = []
        for c in classes:
            seqs = vectors.get((c, p), [])
            if not len(seqs):
                raise EmbeddingError('class %r has no %s sequence for participant %r' % (c, source, p))
            acc = np.zeros_like(np.asarray(seqs[0], dtype=np.float64))
            for v in seqs:
                acc = acc + v
            rows.append(acc / len(seqs))
        dims = set(len(r) for r in rows)
        if len(dims) != 1:
            raise EmbeddingError('%s vectors of participant %r differ in dimension %s' % (source, p, sorted(dims)))
        set_meta = OrderedDict(meta or {})
        set_meta['participants'] = [p]
        sets[p] = EmbeddingSet(classes, np.stack(rows), source, set_meta)
    return sets


def min_sequence_length(sequences: GazeSequences, image_ids: Sequence[str], participants: Sequence[str]):
    """ Shortest non-empty fixation sequence among the given images / participants, the GFS default k """
    wanted = set(image_ids)
    who = set(participants)
    lengths = [len(f) for (i, p), f in sequences.items() if i in wanted and p in who and len(f)]
    if not lengths:
        raise EmbeddingError('no non-empty gaze sequence to derive the GFS length from')
    return min(lengths)


def encode_sequences(
        sequences: GazeSequences,
        manifest: DatasetManifest,
        method: str = 'GFS',
        grid: GridSpec = GridSpec(),
        seq: Optional[SequenceSpec] = None,
        mask: FeatureMask = FeatureMask(),
        classes: Optional[Sequence[str]] = None,
        participants: Optional[Sequence[str]] = None,
        source: Optional[str] = None) -> Dict[str, EmbeddingSet]:
    """ Encode every gaze sequence with GH / GFG / GFS and average them per (class, participant).

    When `seq` is None the GFS length k is the shortest sequence of each participant over `classes`.
    Empty sequences carry no GFS information and are dropped.

    Returns:
        participant_id -> EmbeddingSet over `classes`
    """
    method = method.upper()
    if method not in ('GH', 'GFG', 'GFS'):
        raise EmbeddingError('unknown gaze embedding %r' % method)
    classes = list(classes or manifest.classes)
    participants = list(participants or manifest.participants)
    records = manifest.images_of(classes)
    image_ids = [r.image_id for r in records]

    sets = OrderedDict()
    for p in participants:
        meta = OrderedDict(method=method)
        if method == 'GFS':
            p_seq = seq or SequenceSpec(k=min_sequence_length(sequences, image_ids, [p]))
            meta.update(mask=str(mask), k=p_seq.k, sampling=p_seq.sampling)
        else:
            meta['grid'] = str(grid)
            if method == 'GFG':
                meta['mask'] = str(mask)
        grouped = OrderedDict()
        dropped = 0
        for r in records:
            features = sequences.get((r.image_id, p))
            if features is None:
                continue
            if method == 'GH':
                v = encode_gh(features, grid)
            elif method == 'GFG':
                v = encode_gfg(features, grid, mask)
            else:
                if not len(features):
                    dropped += 1
                    continue
                v = encode_gfs(features, p_seq, mask)
            grouped.setdefault((r.class_label, p), []).append(v)
        if dropped:
            _logger.warning('=> Dropped %d empty gaze sequences of participant %s', dropped, p)
        sets.update(aggregate_per_class(grouped, classes, [p], source or method, meta))
    return sets


def combine_participants(sets: Sequence[EmbeddingSet], mode: str = 'avg') -> EmbeddingSet:
    """ Fuse per-participant embedding sets.

    avg: elementwise mean, dimension unchanged
    early: concatenation in the given participant order, dimension P * D
    """
    mode = mode.lower()
    assert len(sets), 'no embedding set to combine'
    first = sets[0]
    for s in sets[1:]:
        if s.classes != first.classes:
            raise EmbeddingError('participant embedding sets cover different classes')
    if mode == 'avg':
        if len(set(s.dim for s in sets)) != 1:
            raise EmbeddingError('AVG fusion needs equal dimensions, got %s' % [s.dim for s in sets])
        acc = np.zeros_like(first.vectors)
        for s in sets:
            acc = acc + s.vectors
        vectors = acc / len(sets)
    elif mode == 'early':
        vectors = np.concatenate([s.vectors for s in sets], axis=1)
    else:
        raise EmbeddingError('unknown participant fusion %r' % mode)
    meta = OrderedDict(first.meta)
    meta['participants'] = [p for s in sets for p in s.meta.get('participants', [])]
    meta['fusion'] = mode
    return first.replace(vectors=vectors, meta=meta)


def standardize(embeddings: EmbeddingSet) -> EmbeddingSet:
    """ Zero mean / unit variance per dimension across classes, then unit L2 norm per class.

    Constant dimensions become exactly 0.
    """
    if len(embeddings) < 2:
        raise EmbeddingError('standardization needs at least 2 classes')
    vectors = StandardScaler().fit_transform(embeddings.vectors)
    vectors[:, np.ptp(embeddings.vectors, axis=0) == 0] = 0.
    vectors = normalize(vectors, norm='l2')
    meta = OrderedDict(embeddings.meta)
    meta['standardized'] = True
    return embeddings.replace(vectors=vectors, meta=meta)


def grid_density(sequences: Sequence[np.ndarray], grid: GridSpec):
    """ (m, n) fixation density of a group of gaze sequences, sums to 1 unless empty """
    counts = np.zeros(grid.cells)
    for features in sequences:
        if len(features):
            counts += encode_gh(features, grid)
    total = counts.sum()
    if total > 0:
        counts /= total
    return counts.reshape(grid.m, grid.n)


def export_density_png(density, path, cell_px=32):
    """ Grayscale heatmap, darkest cell == highest density """
    density = np.asarray(density, dtype=np.float64)
    peak = density.max()
    scaled = density / peak if peak > 0 else density
    pixels = np.uint8(np.round(255 * (1. - scaled)))
    img = Image.fromarray(pixels, mode='L')
    img = img.resize((density.shape[1] * cell_px, density.shape[0] * cell_px), resample=Image.NEAREST)
    img.save(path)
    return img
