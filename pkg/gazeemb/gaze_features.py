""" Gaze features

Per-fixation 6-dim tuples [x, y, d, a1, a2, R]: normalized location, duration (ms), angle to
the previous and to the next fixation (radians, image coordinates with y pointing down) and
mean pupil diameter (mm). The first a1 and the last a2 of a sequence are 0.
"""
import math
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from .fixation import Fixation, FilterParams, detect_fixations
from .ingest import GazeStream

__all__ = ['FEATURE_NAMES', 'FeatureMask', 'FeatureMaskError', 'GazeSequences', 'fixation_features',
           'project_features', 'stream_features']

FEATURE_NAMES = ('x', 'y', 'd', 'a1', 'a2', 'R')

# (image_id, participant_id) -> (N, 6) gaze features
GazeSequences = Dict[Tuple[str, str], np.ndarray]

# CLI shorthands, see FeatureMask.parse
_MASK_TOKENS = {
    'xy': ('x', 'y'),
    'x': ('x',),
    'y': ('y',),
    'd': ('d',),
    'ang': ('a1', 'a2'),
    'a1': ('a1',),
    'a2': ('a2',),
    'pupil': ('R',),
    'r': ('R',),
    'all': FEATURE_NAMES,
}


class FeatureMaskError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureMask:
    names: Tuple[str, ...] = FEATURE_NAMES

    def __post_init__(self):
        unknown = [n for n in self.names if n not in FEATURE_NAMES]
        if unknown:
            raise FeatureMaskError('unknown gaze feature(s) %s' % ', '.join(unknown))
        if 'x' not in self.names or 'y' not in self.names:
            raise FeatureMaskError('feature mask must include the location x,y, got %s' % ','.join(self.names))
        # canonical order, no duplicates
        object.__setattr__(self, 'names', tuple(n for n in FEATURE_NAMES if n in self.names))

    @classmethod
    def parse(cls, mask_str):
        """ Decode a mask string, e.g. `xy,d,ang` or `xy,d,ang,pupil` or `x,y,d,a1`.

        Tokens can appear in any order, output order is always x, y, d, a1, a2, R.
        """
        names = []
        for token in mask_str.replace(' ', '').split(','):
            if not token:
                continue
            key = token.lower() if token != 'R' else 'r'
            if key not in _MASK_TOKENS:
                raise FeatureMaskError('unknown feature mask token %r in %r' % (token, mask_str))
            names.extend(_MASK_TOKENS[key])
        if not names:
            raise FeatureMaskError('empty feature mask')
        return cls(tuple(names))

    @property
    def indices(self):
        return [FEATURE_NAMES.index(n) for n in self.names]

    def __len__(self):
        return len(self.names)

    def __str__(self):
        return ','.join(self.names)


def fixation_features(fixations: Sequence[Fixation]):
    """ (N, 6) gaze features of an onset-ordered fixation sequence, empty input -> (0, 6) """
    n = len(fixations)
    feats = np.zeros((n, len(FEATURE_NAMES)), dtype=np.float64)
    for i, f in enumerate(fixations):
        feats[i, 0] = f.x
        feats[i, 1] = f.y
        feats[i, 2] = f.duration
        feats[i, 5] = f.pupil
    for i in range(1, n):
        angle = math.atan2(feats[i, 1] - feats[i - 1, 1], feats[i, 0] - feats[i - 1, 0])
        feats[i, 3] = angle  # a1 of i
        feats[i - 1, 4] = angle  # a2 of i - 1
    return feats


def project_features(features, mask: FeatureMask):
    """ Keep the masked columns in canonical order. """
    return np.asarray(features)[:, mask.indices]


def stream_features(stream: GazeStream, params: FilterParams = FilterParams()):
    """ Raw gaze stream -> (N, 6) gaze features of its fixations """
    return fixation_features(detect_fixations(stream, params))
