import math

import numpy as np
import pytest

from conftest import make_stream
from gazeemb.fixation import Fixation, FilterParams
from gazeemb.gaze_features import FEATURE_NAMES, FeatureMask, FeatureMaskError, fixation_features, \
    project_features, stream_features


def _fix(x, y, d=100., pupil=3., onset=0.):
    return Fixation(x=x, y=y, duration=d, pupil=pupil, onset=onset)


def test_angles_to_neighbours():
    feats = fixation_features([_fix(0., 0.), _fix(1., 0., onset=1.), _fix(1., 1., onset=2.)])
    assert feats.shape == (3, 6)
    np.testing.assert_allclose(feats[:, 3], [0., 0., math.pi / 2])
    np.testing.assert_allclose(feats[:, 4], [0., math.pi / 2, 0.])


def test_single_and_empty():
    feats = fixation_features([_fix(0.2, 0.3, d=50., pupil=2.5)])
    np.testing.assert_array_equal(feats, [[0.2, 0.3, 50., 0., 0., 2.5]])
    assert fixation_features([]).shape == (0, 6)


def test_project_keeps_canonical_order(rng):
    feats = rng.random((5, 6))
    mask = FeatureMask.parse('ang,xy')
    assert mask.names == ('x', 'y', 'a1', 'a2')
    np.testing.assert_array_equal(project_features(feats, mask), feats[:, [0, 1, 3, 4]])


@pytest.mark.parametrize('text,names', [
    ('xy', ('x', 'y')),
    ('xy,d', ('x', 'y', 'd')),
    ('xy,d,ang', ('x', 'y', 'd', 'a1', 'a2')),
    ('xy,d,ang,pupil', FEATURE_NAMES),
    ('x,y,R', ('x', 'y', 'R')),
    ('pupil, d ,xy', ('x', 'y', 'd', 'R')),
])
def test_mask_parse(text, names):
    mask = FeatureMask.parse(text)
    assert mask.names == names
    assert len(mask) == len(names)


@pytest.mark.parametrize('text', ['d,ang', 'xy,speed', '', 'x'])
def test_mask_parse_rejects(text):
    with pytest.raises(FeatureMaskError):
        FeatureMask.parse(text)


def test_stream_features():
    stream = make_stream(np.repeat([[100., 100.], [400., 100.]], 30, axis=0), size=(500., 500.))
    feats = stream_features(stream, FilterParams(ws=10., ts=10.))
    np.testing.assert_allclose(feats[:, :2], [[0.2, 0.2], [0.8, 0.2]])
    np.testing.assert_allclose(feats[:, 3:5], [[0., 0.], [0., 0.]])
