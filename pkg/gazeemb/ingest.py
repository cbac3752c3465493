""" Ingest

Parsers and writers for every on-disk artifact the pipeline consumes: raw binocular gaze logs,
the dataset manifest, the image feature matrix and the auxiliary side-information files
(attributes, bubble tracks, text corpus, saliency grids). All returned structures are
immutable after construction so parsing of distinct files can run in parallel.

File formats are documented in README.md.
"""
import json
import logging
import os
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

__all__ = [
    'GAZE_LOG_COLUMNS', 'RawGazeSample', 'GazeStream', 'ImageRecord', 'DatasetManifest', 'FeatureMatrix',
    'AttributeMatrix', 'BubbleTrack', 'CorpusDocument',
    'IngestError', 'GazeLogError', 'EmptyStreamError', 'ManifestError', 'FeatureMatrixError',
    'filter_valid', 'clamp_sample', 'parse_gaze_log', 'write_gaze_log',
    'load_manifest', 'write_manifest', 'validate_manifest', 'load_feature_matrix', 'write_feature_matrix',
    'load_attributes', 'write_attributes', 'load_bubble_tracks', 'write_bubble_tracks',
    'load_corpus', 'write_corpus', 'load_saliency_maps', 'write_saliency_map',
]

_logger = logging.getLogger(__name__)

GAZE_LOG_COLUMNS = (
    'timestamp_ms', 'left_x', 'left_y', 'right_x', 'right_y', 'left_pupil', 'right_pupil', 'left_valid', 'right_valid')
BUBBLE_COLUMNS = ('image_id', 'x', 'y', 'radius')

# tracker validity code for the best confidence, anything else is dropped
VALID_CODE = 0


class IngestError(ValueError):

    def __init__(self, msg, path=None, line=None):
        self.path = path
        self.line = line
        where = ''
        if path is not None:
            where = str(path) + (':%d' % line if line is not None else '') + ': '
        super(IngestError, self).__init__(where + msg)


class GazeLogError(IngestError):
    pass


class EmptyStreamError(IngestError):
    pass


class ManifestError(IngestError):
    pass


class FeatureMatrixError(IngestError):
    pass


class RawGazeSample(NamedTuple):
    timestamp: float
    left_x: float
    left_y: float
    right_x: float
    right_y: float
    left_pupil: float
    right_pupil: float
    left_valid: int
    right_valid: int

    @property
    def is_valid(self):
        return self.left_valid == VALID_CODE and self.right_valid == VALID_CODE

    @property
    def point(self):
        return (self.left_x + self.right_x) / 2., (self.left_y + self.right_y) / 2.

    @property
    def pupil(self):
        return (self.left_pupil + self.right_pupil) / 2.


@dataclass(frozen=True)
class GazeStream:
    """ Binocular-valid samples of one participant viewing one image.

    Per-eye coordinates are in image pixels and already clamped to [0, width] x [0, height].
    """
    image_id: str
    participant_id: str
    samples: Tuple[RawGazeSample, ...]
    image_width: float
    image_height: float

    def __post_init__(self):
        assert self.image_width > 0 and self.image_height > 0
        object.__setattr__(self, 'samples', tuple(self.samples))

    def __len__(self):
        return len(self.samples)

    @cached_property
    def timestamps(self):
        return np.array([s.timestamp for s in self.samples], dtype=np.float64)

    @cached_property
    def points(self):
        """ (N, 2) binocular mean gaze points in pixels """
        return np.array([s.point for s in self.samples], dtype=np.float64).reshape(-1, 2)

    @cached_property
    def pupil(self):
        return np.array([s.pupil for s in self.samples], dtype=np.float64)

    @property
    def duration(self):
        if not self.samples:
            return 0.
        return self.samples[-1].timestamp - self.samples[0].timestamp


def filter_valid(samples: Sequence[RawGazeSample]) -> List[RawGazeSample]:
    """ Keep samples valid for both eyes. Idempotent. """
    return [s for s in samples if s.is_valid]


def clamp_sample(sample: RawGazeSample, width, height) -> RawGazeSample:
    return sample._replace(
        left_x=min(max(sample.left_x, 0.), width),
        left_y=min(max(sample.left_y, 0.), height),
        right_x=min(max(sample.right_x, 0.), width),
        right_y=min(max(sample.right_y, 0.), height))


def _is_number(text):
    try:
        float(text)
    except (TypeError, ValueError):
        return False
    return True


def _column_as_float(df, name, path, error_cls=GazeLogError):
    values = df[name].str.strip()
    try:
        return values.astype(np.float64).to_numpy()
    except ValueError:
        bad = np.flatnonzero(~values.map(_is_number).to_numpy())
        row = int(bad[0])
        # +2: header line plus 1-based numbering
        raise error_cls('non-numeric %s value %r' % (name, values.iloc[row]), path, line=row + 2)


def _read_columns(path, columns, error_cls):
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        raise error_cls('missing header line', path, line=1)
    except pd.errors.ParserError as e:
        # pandas reports 1-based file lines, header included
        m = re.search(r'in line (\d+)', str(e))
        raise error_cls('malformed row (%s)' % str(e).strip(), path, line=int(m.group(1)) if m else None)
    header = tuple(c.strip() for c in df.columns)
    if header != tuple(columns):
        raise error_cls('expected header %s, got %s' % (','.join(columns), ','.join(header)), path, line=1)
    df.columns = list(columns)
    return df


def parse_gaze_log(path, image_dims, image_id=None, participant_id=None) -> GazeStream:
    """ Parse a raw tracker log into a validated GazeStream.

    Args:
        path: log file, header + `timestamp_ms,left_x,left_y,right_x,right_y,left_pupil,right_pupil,left_valid,right_valid`
        image_dims: (width, height) of the stimulus in pixels
        image_id: defaults to the file stem
        participant_id: defaults to the name of the containing folder
    Returns:
        GazeStream holding only samples valid for both eyes, per-eye coordinates clamped to the image
    Raises:
        GazeLogError: malformed row (with line number)
        EmptyStreamError: no sample survives the validity filter
    """
    width, height = image_dims
    if image_id is None:
        image_id = os.path.splitext(os.path.basename(path))[0]
    if participant_id is None:
        participant_id = os.path.basename(os.path.dirname(os.path.abspath(path)))

    df = _read_columns(path, GAZE_LOG_COLUMNS, GazeLogError)
    cols = {name: _column_as_float(df, name, path) for name in GAZE_LOG_COLUMNS}
    for name in ('left_valid', 'right_valid'):
        frac = np.flatnonzero(cols[name] != np.round(cols[name]))
        if len(frac):
            raise GazeLogError('validity code must be an integer', path, line=int(frac[0]) + 2)
    # rows rejected by the validity filter may carry NaN coordinates
    both_valid = (cols['left_valid'] == VALID_CODE) & (cols['right_valid'] == VALID_CODE)
    for name in GAZE_LOG_COLUMNS:
        checked = np.isfinite(cols[name])
        if name not in ('timestamp_ms', 'left_valid', 'right_valid'):
            checked |= ~both_valid
        bad = np.flatnonzero(~checked)
        if len(bad):
            raise GazeLogError('non-finite %s' % name, path, line=int(bad[0]) + 2)
    backwards = np.flatnonzero(np.diff(cols['timestamp_ms']) < 0)
    if len(backwards):
        raise GazeLogError('timestamp decreases', path, line=int(backwards[0]) + 3)

    samples = []
    for i in range(len(df)):
        s = RawGazeSample(
            timestamp=float(cols['timestamp_ms'][i]),
            left_x=float(cols['left_x'][i]), left_y=float(cols['left_y'][i]),
            right_x=float(cols['right_x'][i]), right_y=float(cols['right_y'][i]),
            left_pupil=float(cols['left_pupil'][i]), right_pupil=float(cols['right_pupil'][i]),
            left_valid=int(cols['left_valid'][i]), right_valid=int(cols['right_valid'][i]))
        if (s.left_valid == VALID_CODE and s.left_pupil <= 0) or (s.right_valid == VALID_CODE and s.right_pupil <= 0):
            raise GazeLogError('non-positive pupil diameter on a valid eye', path, line=i + 2)
        samples.append(s)

    samples = [clamp_sample(s, width, height) for s in filter_valid(samples)]
    if not samples:
        raise EmptyStreamError('no sample valid for both eyes', path)
    return GazeStream(image_id, participant_id, tuple(samples), width, height)


def write_gaze_log(stream: GazeStream, path):
    """ Write a stream in the canonical log format. repr() floats make parse(write(s)) == s exact. """
    lines = [','.join(GAZE_LOG_COLUMNS)]
    for s in stream.samples:
        lines.append(','.join(
            [repr(float(v)) for v in s[:7]] + [str(int(s.left_valid)), str(int(s.right_valid))]))
    with open(path, 'w') as f:
        f.write('\n'.join(lines) + '\n')


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    class_label: str
    feature_row_index: int
    width: float = 1.
    height: float = 1.


@dataclass(frozen=True)
class DatasetManifest:
    images: Tuple[ImageRecord, ...]
    classes: Tuple[str, ...]
    participants: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'images', tuple(self.images))
        object.__setattr__(self, 'classes', tuple(self.classes))
        object.__setattr__(self, 'participants', tuple(self.participants))

    @cached_property
    def _by_id(self):
        return {r.image_id: r for r in self.images}

    def __len__(self):
        return len(self.images)

    @property
    def image_ids(self):
        return [r.image_id for r in self.images]

    def __getitem__(self, image_id) -> ImageRecord:
        return self._by_id[image_id]

    def __contains__(self, image_id):
        return image_id in self._by_id

    def class_of(self, image_id):
        return self._by_id[image_id].class_label

    def images_of(self, class_labels):
        """ Image records of the given classes, in manifest order. """
        wanted = set([class_labels] if isinstance(class_labels, str) else class_labels)
        return [r for r in self.images if r.class_label in wanted]

    def class_index(self):
        return {c: i for i, c in enumerate(self.classes)}


def validate_manifest(manifest: DatasetManifest, path=None):
    if not manifest.classes:
        raise ManifestError('class list is empty', path)
    if len(set(manifest.classes)) != len(manifest.classes):
        dup = [c for c in manifest.classes if manifest.classes.count(c) > 1][0]
        raise ManifestError('duplicate class %r' % dup, path)
    if len(set(manifest.participants)) != len(manifest.participants):
        raise ManifestError('duplicate participant id', path)
    known = set(manifest.classes)
    seen_ids = set()
    seen_rows = set()
    n = len(manifest.images)
    for r in manifest.images:
        if r.image_id in seen_ids:
            raise ManifestError('duplicate image_id %r' % r.image_id, path)
        seen_ids.add(r.image_id)
        if r.class_label not in known:
            raise ManifestError('image %r references unknown class %r' % (r.image_id, r.class_label), path)
        if not 0 <= r.feature_row_index < n:
            raise ManifestError('feature_row_index %d of %r out of range [0, %d)' % (
                r.feature_row_index, r.image_id, n), path)
        if r.feature_row_index in seen_rows:
            raise ManifestError('feature_row_index %d used twice' % r.feature_row_index, path)
        seen_rows.add(r.feature_row_index)
        if not (r.width > 0 and r.height > 0):
            raise ManifestError('image %r has non-positive dimensions' % r.image_id, path)
    empty = [c for c in manifest.classes if not manifest.images_of(c)]
    if empty:
        _logger.warning('=> Manifest classes without images: %s', ', '.join(empty))
    return manifest


def load_manifest(path) -> DatasetManifest:
    try:
        with open(path, 'r') as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise ManifestError('invalid JSON (%s)' % e.msg, path, line=e.lineno)
    if not isinstance(doc, dict) or 'images' not in doc or 'classes' not in doc:
        raise ManifestError('manifest needs "images" and "classes"', path)
    images = []
    for i, entry in enumerate(doc['images']):
        try:
            images.append(ImageRecord(
                image_id=str(entry['image_id']),
                class_label=str(entry['class_label']),
                feature_row_index=int(entry['feature_row_index']),
                width=float(entry.get('width', 1.)),
                height=float(entry.get('height', 1.))))
        except (KeyError, TypeError, ValueError) as e:
            raise ManifestError('bad image entry #%d (%s)' % (i, e), path)
    manifest = DatasetManifest(
        images=tuple(images),
        classes=tuple(str(c) for c in doc['classes']),
        participants=tuple(str(p) for p in doc.get('participants', ())))
    validate_manifest(manifest, path)
    _logger.info('=> Loaded manifest %s: %d images / %d classes / %d participants',
                 path, len(manifest.images), len(manifest.classes), len(manifest.participants))
    return manifest


def write_manifest(manifest: DatasetManifest, path):
    doc = dict(
        classes=list(manifest.classes),
        participants=list(manifest.participants),
        images=[dict(image_id=r.image_id, class_label=r.class_label, feature_row_index=r.feature_row_index,
                     width=r.width, height=r.height) for r in manifest.images])
    with open(path, 'w') as f:
        json.dump(doc, f, indent=1)
        f.write('\n')


@dataclass(frozen=True)
class FeatureMatrix:
    """ N x D image embeddings, row i belongs to the image whose feature_row_index == i """
    rows: np.ndarray

    @property
    def dim(self):
        return self.rows.shape[1]

    def __len__(self):
        return self.rows.shape[0]

    def for_images(self, records: Sequence[ImageRecord]):
        return self.rows[[r.feature_row_index for r in records]]


def load_feature_matrix(path, manifest: DatasetManifest) -> FeatureMatrix:
    try:
        rows = np.loadtxt(path, dtype=np.float64, ndmin=2)
    except ValueError as e:
        raise FeatureMatrixError('non-numeric or ragged entry (%s)' % e, path)
    if rows.shape[0] != len(manifest.images):
        raise FeatureMatrixError('%d feature rows but manifest lists %d images' % (
            rows.shape[0], len(manifest.images)), path)
    bad = np.flatnonzero(~np.isfinite(rows).all(axis=1))
    if len(bad):
        raise FeatureMatrixError('NaN/Inf entry', path, line=int(bad[0]) + 1)
    rows.setflags(write=False)
    _logger.info('=> Loaded feature matrix %s: %d x %d', path, rows.shape[0], rows.shape[1])
    return FeatureMatrix(rows)


def write_feature_matrix(rows, path):
    np.savetxt(path, np.asarray(rows, dtype=np.float64), fmt='%.17g')


@dataclass(frozen=True)
class AttributeMatrix:
    classes: Tuple[str, ...]
    values: np.ndarray

    @property
    def dim(self):
        return self.values.shape[1]


def load_attributes(path, classes: Optional[Sequence[str]] = None) -> AttributeMatrix:
    """ One class per row: `label,v1,...,vA`, no header. Rows reordered to `classes` when given. """
    df = pd.read_csv(path, header=None, dtype={0: str}, float_precision='round_trip')
    labels = [str(v).strip() for v in df.iloc[:, 0]]
    try:
        values = df.iloc[:, 1:].to_numpy(dtype=np.float64)
    except ValueError as e:
        raise IngestError('non-numeric attribute (%s)' % e, path)
    if len(set(labels)) != len(labels):
        raise IngestError('duplicate class row', path)
    if not np.isfinite(values).all():
        raise IngestError('non-finite attribute value', path)
    if classes is not None:
        index = {c: i for i, c in enumerate(labels)}
        missing = [c for c in classes if c not in index]
        if missing:
            raise IngestError('no attribute row for classes %s' % ', '.join(missing), path)
        values = values[[index[c] for c in classes]]
        labels = list(classes)
    return AttributeMatrix(tuple(labels), values)


def write_attributes(attributes: AttributeMatrix, path):
    with open(path, 'w') as f:
        for label, row in zip(attributes.classes, attributes.values):
            f.write(','.join([label] + [repr(float(v)) for v in row]) + '\n')


@dataclass(frozen=True)
class BubbleTrack:
    """ Mouse-click bubbles of one image in recorded order, rows are (x, y, radius) normalized """
    image_id: str
    bubbles: np.ndarray


def load_bubble_tracks(path) -> Dict[str, BubbleTrack]:
    df = _read_columns(path, BUBBLE_COLUMNS, IngestError)
    values = np.stack([_column_as_float(df, c, path, IngestError) for c in BUBBLE_COLUMNS[1:]], axis=1)
    bad = np.flatnonzero(((values < 0) | (values > 1) | ~np.isfinite(values)).any(axis=1))
    if len(bad):
        raise IngestError('bubble values must lie in [0, 1]', path, line=int(bad[0]) + 2)
    ids = df['image_id'].str.strip().to_numpy()
    tracks = {}
    for image_id in dict.fromkeys(ids):
        tracks[image_id] = BubbleTrack(image_id, values[ids == image_id])
    return tracks


def write_bubble_tracks(tracks: Dict[str, BubbleTrack], path):
    lines = [','.join(BUBBLE_COLUMNS)]
    for image_id, track in tracks.items():
        for x, y, r in track.bubbles:
            lines.append('%s,%r,%r,%r' % (image_id, float(x), float(y), float(r)))
    with open(path, 'w') as f:
        f.write('\n'.join(lines) + '\n')


@dataclass(frozen=True)
class CorpusDocument:
    class_label: str
    text: str


def load_corpus(folder, classes: Sequence[str]) -> List[CorpusDocument]:
    """ One UTF-8 text file per class, named `<class_label>.txt`. """
    docs = []
    for label in classes:
        path = os.path.join(folder, label + '.txt')
        if not os.path.isfile(path):
            raise IngestError('no corpus document for class %r' % label, path)
        with open(path, 'r', encoding='utf-8') as f:
            text = f.read()
        if not text.strip():
            raise IngestError('empty corpus document', path)
        docs.append(CorpusDocument(label, text))
    return docs


def write_corpus(docs: Sequence[CorpusDocument], folder):
    os.makedirs(folder, exist_ok=True)
    for doc in docs:
        with open(os.path.join(folder, doc.class_label + '.txt'), 'w', encoding='utf-8') as f:
            f.write(doc.text)


def load_saliency_maps(folder, image_ids: Sequence[str]) -> Dict[str, np.ndarray]:
    """ Per-image saliency grids `<image_id>.txt` (whitespace separated rows). Absent files are skipped. """
    maps = {}
    for image_id in image_ids:
        path = os.path.join(folder, image_id + '.txt')
        if not os.path.isfile(path):
            continue
        try:
            grid = np.loadtxt(path, dtype=np.float64, ndmin=2)
        except ValueError as e:
            raise IngestError('non-numeric saliency value (%s)' % e, path)
        if not np.isfinite(grid).all() or (grid < 0).any():
            raise IngestError('saliency must be finite and nonnegative', path)
        maps[image_id] = grid
    return maps


def write_saliency_map(grid, path):
    np.savetxt(path, np.asarray(grid, dtype=np.float64), fmt='%.17g')
