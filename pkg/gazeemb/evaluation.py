""" Zero-shot evaluation

Disjoint train / val / test class splits, per-class top-1 accuracy, (learning rate, epochs)
cross-validation, the end-to-end experiment runner for every class-embedding source and
participant fusion, the gaze-to-bubbles ablation ladder, the cumulative feature-mask study and
the fixation filter sweep scored with the one-vs-rest SVM probe.

Splits are evaluated in parallel, results are always reduced in split order.
"""
import dataclasses
import logging
from collections import OrderedDict
from contextlib import contextmanager
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from .embedding_factory import create_embeddings
from .embeddings import EmbeddingError, EmbeddingSet, GridSpec, SequenceSpec, combine_participants, encode_gfs, \
    standardize
from .fixation import Fixation, FilterParams
from .gaze_features import FeatureMask, GazeSequences, fixation_features, stream_features
from .helpers import parallel_map
from .ingest import AttributeMatrix, BubbleTrack, CorpusDocument, DatasetManifest, FeatureMatrix, GazeStream
from .linear_svm import train_ovr_svm
from .sje import ImageFeatureScaler, TrainConfig, predict_late, train_sje

__all__ = [
    'SplitSpec', 'SplitError', 'StageError', 'ResultRecord', 'ExperimentData', 'ExperimentSpec',
    'CrossValidationResult', 'SweepResult', 'GAZE_SOURCES', 'PARTICIPANT_SOURCES', 'EMBEDDING_CHOICES',
    'FUSION_MODES', 'ABLATION_MODES', 'CUMULATIVE_MASKS',
    'make_splits', 'per_class_accuracy', 'cross_validate', 'build_class_embeddings', 'run_experiment',
    'run_each_participant', 'mask_study', 'bubble_members', 'ablation_sequences', 'ablate_bubbles',
    'probe_accuracy', 'sweep_fixation_params', 'default_grid']

_logger = logging.getLogger(__name__)

GAZE_SOURCES = ('GH', 'GFG', 'GFS')
PARTICIPANT_SOURCES = GAZE_SOURCES + ('random', 'central')
EMBEDDING_CHOICES = PARTICIPANT_SOURCES + ('attributes', 'bow', 'saliency', 'bubbles', 'fused')
FUSION_MODES = ('avg', 'early', 'late', 'each')
ABLATION_MODES = (
    'full', 'same_images', 'same_locations_concat', 'same_locations_avg', 'same_locations_rand', 'bubbles')
CUMULATIVE_MASKS = ('xy', 'xy,d', 'xy,d,ang', 'xy,d,ang,pupil')


class SplitError(ValueError):
    pass


class StageError(RuntimeError):
    """ Component failure tagged with the pipeline stage it happened in """

    def __init__(self, stage, msg):
        super(StageError, self).__init__('[%s] %s' % (stage, msg))
        self.stage = stage
        self.msg = msg

    def __reduce__(self):
        return StageError, (self.stage, self.msg)


@contextmanager
def stage(name):
    try:
        yield
    except StageError:
        raise
    except (ValueError, KeyError, IndexError, OSError) as e:
        raise StageError(name, e.args[0] if isinstance(e, KeyError) and e.args else str(e)) from e


@dataclass(frozen=True)
class SplitSpec:
    train: Tuple[str, ...]
    val: Tuple[str, ...]
    test: Tuple[str, ...]
    seed: int = 0

    def to_dict(self):
        return dict(train=list(self.train), val=list(self.val), test=list(self.test), seed=self.seed)


def make_splits(classes: Sequence[str], n_splits=10, seed=0) -> List[SplitSpec]:
    """ floor(C/4) test and val classes, the rest train. Class lists keep the input order.

    Repeated splits are redrawn while distinct ones remain likely.
    """
    classes = list(classes)
    num = len(classes)
    if num < 4:
        raise SplitError('zero-shot splits need at least 4 classes, got %d' % num)
    if n_splits < 1:
        raise SplitError('n_splits must be >= 1')
    n_held = num // 4
    rng = np.random.default_rng(seed)
    splits, seen = [], set()
    attempts = 0
    while len(splits) < n_splits:
        perm = rng.permutation(num)
        test = sorted(perm[:n_held])
        val = sorted(perm[n_held:2 * n_held])
        train = sorted(perm[2 * n_held:])
        key = (tuple(test), tuple(val))
        attempts += 1
        if key in seen and attempts < 100 * n_splits:
            continue
        seen.add(key)
        splits.append(SplitSpec(
            train=tuple(classes[i] for i in train),
            val=tuple(classes[i] for i in val),
            test=tuple(classes[i] for i in test),
            seed=seed))
    return splits


def per_class_accuracy(predictions: Sequence[str], truths: Sequence[str], classes: Optional[Sequence[str]] = None):
    """ Mean over classes of the within-class top-1 accuracy. Classes absent from `truths` are skipped. """
    if not len(truths):
        raise ValueError('per-class accuracy of an empty prediction set')
    if len(predictions) != len(truths):
        raise ValueError('%d predictions for %d truths' % (len(predictions), len(truths)))
    if classes is None:
        classes = sorted(set(truths))
    else:
        unknown = set(truths) - set(classes)
        if unknown:
            raise ValueError('truth labels outside the class list: %s' % ', '.join(sorted(map(str, unknown))))
    correct = OrderedDict((c, 0) for c in classes)
    total = OrderedDict((c, 0) for c in classes)
    for p, t in zip(predictions, truths):
        total[t] += 1
        correct[t] += int(p == t)
    return float(np.mean([correct[c] / total[c] for c in classes if total[c]]))


def default_grid(learning_rates=(0.001, 0.01, 0.1), epochs=(5, 10, 20), seed=0) -> List[TrainConfig]:
    return [TrainConfig(learning_rate=lr, epochs=e, seed=seed) for lr in learning_rates for e in epochs]


class CrossValidationResult(NamedTuple):
    best: TrainConfig
    val_accuracy: float
    model: object
    scores: List[float]


def cross_validate(
        grid: Sequence[TrainConfig],
        fit: Callable[[TrainConfig], object],
        validate: Callable[[object], float]) -> CrossValidationResult:
    """ Pick the config with the best validation accuracy, ties to smaller learning rate then fewer epochs """
    if not len(grid):
        raise ValueError('empty hyper-parameter grid')
    best, scores = None, []
    for i, cfg in enumerate(grid):
        model = fit(cfg)
        acc = validate(model)
        scores.append(acc)
        key = (-acc, cfg.learning_rate, cfg.epochs, i)
        if best is None or key < best[0]:
            best = (key, cfg, acc, model)
    return CrossValidationResult(best[1], best[2], best[3], scores)


@dataclass
class ResultRecord:
    config: Dict
    accuracies: List[float]
    val_accuracies: List[float] = field(default_factory=list)
    selected: List[Dict] = field(default_factory=list)

    @property
    def mean(self):
        return float(np.mean(self.accuracies))

    @property
    def std(self):
        # population std over splits
        return float(np.std(self.accuracies))

    def to_dict(self):
        return OrderedDict(
            config=self.config, mean=self.mean, std=self.std, accuracies=self.accuracies,
            val_accuracies=self.val_accuracies, selected=self.selected)


@dataclass
class ExperimentData:
    """ Everything a run may draw on, only `manifest` and `features` are always required """
    manifest: DatasetManifest
    features: FeatureMatrix
    sequences: Optional[GazeSequences] = None
    attributes: Optional[AttributeMatrix] = None
    tracks: Optional[Dict[str, BubbleTrack]] = None
    corpus: Optional[List[CorpusDocument]] = None
    saliency: Optional[Dict[str, np.ndarray]] = None

    def require(self, name):
        value = getattr(self, name)
        if value is None:
            raise ValueError('experiment needs %s but none were loaded' % name)
        return value

    def replace(self, **kwargs):
        return dataclasses.replace(self, **kwargs)


@dataclass(frozen=True)
class ExperimentSpec:
    source: str = 'GFS'
    fusion: str = 'early'
    grid: GridSpec = GridSpec()
    seq: Optional[SequenceSpec] = None  # None == k from the training classes
    sampling: str = 'even'
    mask: FeatureMask = FeatureMask()
    participants: Optional[Tuple[str, ...]] = None
    scaling: str = 'none'
    refit_trainval: bool = False
    vocab_size: int = 1000
    baseline_method: str = 'GH'  # gaze encoder behind the random / central baselines
    random_count: Optional[int] = None
    fuse_gaze: str = 'GFS'  # gaze half of attributes + gaze
    seed: int = 0

    def __post_init__(self):
        if self.source not in EMBEDDING_CHOICES:
            raise ValueError('unknown embedding source %r' % self.source)
        if self.fusion not in FUSION_MODES:
            raise ValueError('unknown fusion %r' % self.fusion)

    def replace(self, **kwargs):
        return dataclasses.replace(self, **kwargs)

    def snapshot(self):
        return OrderedDict(
            source=self.source, fusion=self.fusion, grid=str(self.grid),
            k=self.seq.k if self.seq else None, sampling=self.seq.sampling if self.seq else self.sampling,
            mask=str(self.mask), participants=list(self.participants) if self.participants else None,
            scaling=self.scaling, refit_trainval=self.refit_trainval, vocab_size=self.vocab_size,
            baseline_method=self.baseline_method, random_count=self.random_count, fuse_gaze=self.fuse_gaze,
            seed=self.seed)


def build_class_embeddings(data: ExperimentData, spec: ExperimentSpec, train_classes) -> List[EmbeddingSet]:
    """ Standardized class embeddings over every manifest class, one set per model to train.

    LATE gives one set per participant, every other setting a single set.
    """
    embeddings = create_embeddings(spec.source, data, spec, train_classes)
    if spec.source in PARTICIPANT_SOURCES:
        if spec.fusion == 'late':
            return [standardize(s) for s in embeddings]
        return [standardize(combine_participants(embeddings, 'avg' if spec.fusion == 'avg' else 'early'))]
    if spec.source == 'fused':
        # both halves are standardized by the fusion
        return [embeddings]
    return [standardize(embeddings)]


def _split_images(data: ExperimentData, classes):
    records = data.manifest.images_of(classes)
    return data.features.for_images(records), [r.class_label for r in records]


def _evaluate_split(data: ExperimentData, spec: ExperimentSpec, grid: Sequence[TrainConfig], split: SplitSpec):
    with stage('embed'):
        sets = build_class_embeddings(data, spec, split.train)

    x_train, y_train = _split_images(data, split.train)
    x_val, y_val = _split_images(data, split.val)
    x_test, y_test = _split_images(data, split.test)

    def _fit(cfg, x, y, classes):
        return [train_sje(x, y, s.select(classes), cfg) for s in sets]

    def _accuracy(models, x, y, classes):
        preds = predict_late(models, x, [s.select(classes) for s in sets])
        return per_class_accuracy(preds, y, classes)

    with stage('train'):
        scaler = ImageFeatureScaler(spec.scaling).fit(x_train)
        x_train, x_val, x_test = scaler.transform(x_train), scaler.transform(x_val), scaler.transform(x_test)
        cv = cross_validate(
            grid,
            lambda cfg: _fit(cfg, x_train, y_train, split.train),
            lambda models: _accuracy(models, x_val, y_val, split.val))
        models = cv.model
        if spec.refit_trainval:
            models = _fit(cv.best, np.concatenate([x_train, x_val]), y_train + y_val, split.train + split.val)

    with stage('eval'):
        accuracy = _accuracy(models, x_test, y_test, split.test)
    return accuracy, cv.val_accuracy, cv.best


def run_experiment(
        data: ExperimentData,
        spec: ExperimentSpec,
        splits: Sequence[SplitSpec],
        grid: Optional[Sequence[TrainConfig]] = None) -> ResultRecord:
    """ Cross-validate and test one embedding source / fusion over every split.

    AVG and EARLY train one model per split, LATE one model per participant per split.
    """
    if spec.fusion == 'each':
        raise ValueError("fusion 'each' yields one record per participant, use run_each_participant")
    grid = list(grid or default_grid(seed=spec.seed))
    outcomes = parallel_map(partial(_evaluate_split, data, spec, grid), splits, desc='splits')
    record = ResultRecord(
        config=spec.snapshot(),
        accuracies=[o[0] for o in outcomes],
        val_accuracies=[o[1] for o in outcomes],
        selected=[dict(learning_rate=o[2].learning_rate, epochs=o[2].epochs) for o in outcomes])
    _logger.info('=> %s %s: %.1f +- %.1f %% over %d splits', spec.source, spec.fusion,
                 100 * record.mean, 100 * record.std, len(splits))
    return record


def run_each_participant(data: ExperimentData, spec: ExperimentSpec, splits, grid=None) -> List[ResultRecord]:
    """ One record per participant, each trained on that participant's gaze only """
    records = []
    for p in spec.participants or data.manifest.participants:
        record = run_experiment(data, spec.replace(participants=(p,), fusion='early'), splits, grid)
        record.config['fusion'] = 'each'
        records.append(record)
    return records


def mask_study(data: ExperimentData, spec: ExperimentSpec, splits, grid=None, masks=CUMULATIVE_MASKS):
    """ One record per feature mask, e.g. location, + duration, + angles, + pupil """
    return [run_experiment(data, spec.replace(mask=FeatureMask.parse(m)), splits, grid) for m in masks]


def bubble_members(features, bubbles):
    """ Fixations inside any bubble, closed ball in normalized coordinates """
    features = np.asarray(features, dtype=np.float64)
    bubbles = np.asarray(bubbles, dtype=np.float64).reshape(-1, 3)
    if not len(features) or not len(bubbles):
        return np.zeros(len(features), dtype=bool)
    dist = cdist(features[:, :2], bubbles[:, :2])
    return (dist <= bubbles[None, :, 2]).any(axis=1)


def _single_fixation(x, y, duration, pupil):
    return fixation_features([Fixation(x=float(x), y=float(y), duration=float(duration), pupil=float(pupil), onset=0.)])


def ablation_sequences(mode, sequences: GazeSequences, tracks: Dict[str, BubbleTrack], seed=0) -> GazeSequences:
    """ Gaze restricted towards the bubble annotation.

    same_images: sequences of bubble-annotated images only
    same_locations_concat: their fixations inside a bubble, in temporal order
    same_locations_avg: the mean of those fixations as a single point
    same_locations_rand: one seeded random fixation among them
    """
    annotated = OrderedDict((k, f) for k, f in sequences.items() if k[0] in tracks)
    if mode == 'same_images':
        return annotated
    if mode not in ('same_locations_concat', 'same_locations_avg', 'same_locations_rand'):
        raise ValueError('unknown ablation mode %r' % mode)
    rng = np.random.default_rng(seed)
    out = {}
    for key in sorted(annotated):
        features = annotated[key]
        kept = features[bubble_members(features, tracks[key[0]].bubbles)]
        if mode == 'same_locations_concat' or not len(kept):
            out[key] = kept
        elif mode == 'same_locations_avg':
            mean = kept.mean(axis=0)
            out[key] = _single_fixation(mean[0], mean[1], mean[2], mean[5])
        else:
            row = kept[int(rng.integers(len(kept)))]
            out[key] = _single_fixation(row[0], row[1], row[2], row[5])
    return OrderedDict((k, out[k]) for k in annotated)


def _check_ablation_coverage(mode, sequences: GazeSequences, manifest: DatasetManifest, participants):
    for p in participants:
        for c in manifest.classes:
            if not any(len(sequences.get((r.image_id, p), ())) for r in manifest.images_of(c)):
                raise EmbeddingError('ablation %s leaves class %r without gaze for participant %r' % (mode, c, p))


def ablate_bubbles(mode, data: ExperimentData, spec: ExperimentSpec, splits, grid=None) -> ResultRecord:
    """ One rung of the gaze -> bubbles ladder: full, same_images, same_locations_*, bubbles """
    if mode not in ABLATION_MODES:
        raise ValueError('unknown ablation mode %r' % mode)
    if mode == 'full':
        record = run_experiment(data, spec, splits, grid)
    elif mode == 'bubbles':
        record = run_experiment(data, spec.replace(source='bubbles'), splits, grid)
    else:
        with stage('embed'):
            sequences = ablation_sequences(mode, data.require('sequences'), data.require('tracks'), spec.seed)
            _check_ablation_coverage(mode, sequences, data.manifest, spec.participants or data.manifest.participants)
        record = run_experiment(data.replace(sequences=sequences), spec, splits, grid)
    record.config['ablation'] = mode
    return record


class SweepResult(NamedTuple):
    ws: List[float]
    ts: List[float]
    accuracy: np.ndarray  # (len(ws), len(ts))


def _half_split(manifest: DatasetManifest, seed):
    """ Per class, a seeded half of the images for training, the rest for testing """
    rng = np.random.default_rng(seed)
    train = set()
    for c in manifest.classes:
        ids = [r.image_id for r in manifest.images_of(c)]
        order = rng.permutation(len(ids))
        n_train = max(1, len(ids) // 2) if len(ids) > 1 else len(ids)
        train.update(ids[i] for i in order[:n_train])
    return train


def probe_accuracy(
        streams: Dict[Tuple[str, str], GazeStream],
        manifest: DatasetManifest,
        params: FilterParams,
        mask: FeatureMask = FeatureMask.parse('xy,d,ang'),
        k: Optional[int] = None,
        seed=0):
    """ SVM accuracy on stacked raw gaze features of held-out images, for one fixation filter setting """
    sequences = OrderedDict((key, stream_features(s, params)) for key, s in streams.items())
    sequences = OrderedDict((key, f) for key, f in sequences.items() if len(f))
    if not sequences:
        _logger.warning('=> No fixations at ws=%g ts=%g', params.ws, params.ts)
        return float('nan')
    seq = SequenceSpec(k or min(len(f) for f in sequences.values()))
    train_ids = _half_split(manifest, seed)
    x_train, y_train, x_test, y_test = [], [], [], []
    for (image_id, _), f in sequences.items():
        v = encode_gfs(f, seq, mask)
        label = manifest.class_of(image_id)
        if image_id in train_ids:
            x_train.append(v)
            y_train.append(label)
        else:
            x_test.append(v)
            y_test.append(label)
    if len(set(y_train)) < 2 or not y_test:
        _logger.warning('=> Too few sequences left at ws=%g ts=%g', params.ws, params.ts)
        return float('nan')
    svm = train_ovr_svm(np.stack(x_train), y_train, seed=seed)
    return per_class_accuracy(svm.predict(np.stack(x_test)), y_test)


def _probe_point(streams, manifest, mask, k, seed, point):
    return probe_accuracy(streams, manifest, FilterParams(ws=point[0], ts=point[1]), mask, k, seed)


def sweep_fixation_params(
        streams: Dict[Tuple[str, str], GazeStream],
        manifest: DatasetManifest,
        ws_values: Sequence[float],
        ts_values: Sequence[float],
        mask: FeatureMask = FeatureMask.parse('xy,d,ang'),
        k: Optional[int] = None,
        seed=0) -> SweepResult:
    """ Probe accuracy on the (ws, ts) grid """
    points = [(float(w), float(t)) for w in ws_values for t in ts_values]
    with stage('fixation'):
        accs = parallel_map(partial(_probe_point, streams, manifest, mask, k, seed), points, desc='sweep')
    return SweepResult(
        [float(w) for w in ws_values], [float(t) for t in ts_values],
        np.array(accs, dtype=np.float64).reshape(len(ws_values), len(ts_values)))
