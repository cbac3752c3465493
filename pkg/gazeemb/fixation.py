""" Dispersion-threshold fixation detection (I-DT)

A window spanning at least `ts` milliseconds is grown from the current sample. If its
dispersion (max_x - min_x) + (max_y - min_y) stays within `ws` it is extended sample by sample
until the next sample would exceed `ws`; the window then becomes one fixation at the centroid
of its points and detection restarts after it. Otherwise the window start slides by one sample.
A trailing window shorter than `ts` is discarded.

`ws` is a threshold in the input coordinate unit (image pixels). Use `degrees_to_pixels` with a
ScreenGeometry when a visual-angle threshold is wanted.
"""
import math
from dataclasses import dataclass
from typing import List, NamedTuple

import numpy as np

from .ingest import GazeStream

__all__ = ['FilterParams', 'Fixation', 'ScreenGeometry', 'degrees_to_pixels', 'detect_fixations',
           'fixations_to_array', 'FIXATION_FIELDS']

# onset, x, y, duration, pupil
FIXATION_FIELDS = ('onset', 'x', 'y', 'duration', 'pupil')


@dataclass(frozen=True)
class FilterParams:
    ws: float = 25.
    ts: float = 10.

    def __post_init__(self):
        if not (self.ws > 0 and self.ts > 0):
            raise ValueError('dispersion threshold ws and duration window ts must be > 0, got ws=%r ts=%r' % (
                self.ws, self.ts))


class Fixation(NamedTuple):
    x: float
    y: float
    duration: float
    pupil: float
    onset: float


@dataclass(frozen=True)
class ScreenGeometry:
    """ Viewing geometry, defaults match a 15 cm wide stimulus seen from 67 cm """
    distance_cm: float = 67.
    stimulus_cm: float = 15.
    stimulus_px: float = 500.


def degrees_to_pixels(degrees, geometry: ScreenGeometry = ScreenGeometry()):
    """ Visual angle to on-stimulus pixels. """
    size_cm = 2. * geometry.distance_cm * math.tan(math.radians(degrees) / 2.)
    return size_cm * geometry.stimulus_px / geometry.stimulus_cm


def _dispersion(points):
    return float(np.ptp(points[:, 0]) + np.ptp(points[:, 1]))


def detect_fixations(stream: GazeStream, params: FilterParams = FilterParams()) -> List[Fixation]:
    """ Reduce a gaze stream to fixations ordered by onset.

    Centroids are returned in normalized image coordinates [0, 1], durations and onsets in ms,
    pupil as the mean diameter of the member samples.
    """
    t = stream.timestamps
    pts = stream.points
    pupil = stream.pupil
    n = len(t)
    fixations = []
    i = 0
    while i < n:
        # first sample closing a window of duration >= ts
        j = i + int(np.searchsorted(t[i:] - t[i], params.ts, side='left'))
        if j >= n:
            break
        if _dispersion(pts[i:j + 1]) <= params.ws:
            lo = pts[i:j + 1].min(axis=0)
            hi = pts[i:j + 1].max(axis=0)
            while j + 1 < n:
                nlo = np.minimum(lo, pts[j + 1])
                nhi = np.maximum(hi, pts[j + 1])
                if (nhi - nlo).sum() > params.ws:
                    break
                lo, hi = nlo, nhi
                j += 1
            cx, cy = pts[i:j + 1].mean(axis=0)
            fixations.append(Fixation(
                x=float(cx) / stream.image_width,
                y=float(cy) / stream.image_height,
                duration=float(t[j] - t[i]),
                pupil=float(pupil[i:j + 1].mean()),
                onset=float(t[i])))
            i = j + 1
        else:
            i += 1
    return fixations


def fixations_to_array(fixations: List[Fixation]):
    """ (N, 5) array in FIXATION_FIELDS order """
    return np.array([[f.onset, f.x, f.y, f.duration, f.pupil] for f in fixations], dtype=np.float64).reshape(-1, 5)
