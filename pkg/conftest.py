import numpy as np
import pytest

from gazeemb.config import set_num_workers
from gazeemb.ingest import GazeStream, RawGazeSample, VALID_CODE
from gazeemb.synth import SynthSpec, generate


@pytest.fixture(autouse=True)
def single_worker():
    with set_num_workers(1):
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_stream(points, timestamps=None, pupil=3., size=(500., 500.), image_id='img', participant_id='p1'):
    """ GazeStream with both eyes on `points` (pixels), 300 Hz unless timestamps are given """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if timestamps is None:
        timestamps = np.arange(len(points)) * 1000. / 300.
    pupil = np.broadcast_to(np.asarray(pupil, dtype=np.float64), (len(points),))
    samples = [RawGazeSample(float(t), float(x), float(y), float(x), float(y), float(p), float(p),
                             VALID_CODE, VALID_CODE)
               for t, (x, y), p in zip(timestamps, points, pupil)]
    return GazeStream(image_id, participant_id, tuple(samples), size[0], size[1])


@pytest.fixture(scope='session')
def small_synth():
    return generate(SynthSpec(n_classes=8, images_per_class=4, participants=2, samples_per_stream=60, seed=3))


@pytest.fixture(scope='session')
def synth_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp('synth')
    generate(SynthSpec(n_classes=8, images_per_class=4, participants=2, samples_per_stream=60, seed=3), str(root))
    return root
