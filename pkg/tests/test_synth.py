import os

import numpy as np
import pytest

from data import GazeDataset, create_loader
from gazeemb.synth import SAMPLE_RATE_HZ, SynthSpec, class_anchors, generate, separable_instance
from utils import tree_digests


def test_shapes(small_synth):
    ds = small_synth
    assert len(ds.manifest) == 8 * 4
    assert ds.manifest.participants == ('p1', 'p2')
    assert ds.features.rows.shape == (32, 32)
    assert len(ds.streams) == 32 * 2
    assert ds.attributes.classes == ds.manifest.classes
    assert [d.class_label for d in ds.corpus] == list(ds.manifest.classes)
    assert set(ds.saliency) == set(ds.manifest.image_ids)
    assert set(ds.tracks) <= set(ds.manifest.image_ids)
    for track in ds.tracks.values():
        assert len(track.bubbles) >= 1
        assert np.all((track.bubbles >= 0.) & (track.bubbles <= 1.))


def test_clean_stream_timing():
    spec = SynthSpec(n_classes=1, images_per_class=1, participants=1, samples_per_stream=150, invalid_rate=0.)
    (stream,) = generate(spec).streams.values()
    assert len(stream) == 150
    assert np.all(np.diff(stream.timestamps) > 0)
    assert stream.duration == pytest.approx(149 * 1000. / SAMPLE_RATE_HZ)


def test_anchors_are_distinct_and_inside():
    anchors, _ = class_anchors(8)
    assert np.all((anchors > 0.) & (anchors < 1.))
    dists = np.linalg.norm(anchors[:, None] - anchors[None], axis=2)
    assert dists[~np.eye(8, dtype=bool)].min() > 0.2


def test_full_signal_dwells_on_class_anchor(small_synth):
    ds = small_synth
    for (image_id, _), stream in ds.streams.items():
        anchor = np.array(ds.anchors[ds.manifest.class_of(image_id)])
        np.testing.assert_allclose(stream.points / 500., np.broadcast_to(anchor, stream.points.shape), atol=1e-12)


def test_full_signal_features_follow_class(small_synth):
    ds = small_synth
    for c in ds.manifest.classes:
        rows = ds.features.for_images(ds.manifest.images_of(c))
        np.testing.assert_allclose(rows, np.broadcast_to(rows[0], rows.shape), atol=1e-12)


def test_no_signal_ignores_classes():
    ds = generate(SynthSpec(n_classes=4, images_per_class=6, participants=1, samples_per_stream=30, signal=0.))
    anchors = np.array(list(ds.anchors.values()))
    for (image_id, _), stream in ds.streams.items():
        # dwell points are not pulled towards the class anchor
        assert not np.allclose(stream.points.mean(axis=0) / 500., anchors[ds.manifest.classes.index(
            ds.manifest.class_of(image_id))], atol=1e-6)


def test_written_dataset_loads_back(synth_dir, small_synth):
    dataset = GazeDataset(str(synth_dir))
    assert len(dataset) == len(small_synth.streams)
    data = create_loader(dataset)
    assert data.manifest == small_synth.manifest
    np.testing.assert_array_equal(data.features.rows, small_synth.features.rows)
    assert set(data.sequences) == set(small_synth.streams)
    assert data.attributes is not None and data.tracks is not None
    assert data.corpus is not None and data.saliency is not None
    assert os.path.isfile(os.path.join(str(synth_dir), 'gaze', 'p1', 'img_0000.csv'))


def test_same_seed_same_bytes(tmp_path):
    spec = SynthSpec(n_classes=4, images_per_class=2, participants=2, samples_per_stream=30, signal=0.7, seed=11)
    generate(spec, str(tmp_path / 'a'))
    generate(spec, str(tmp_path / 'b'))
    generate(SynthSpec(n_classes=4, images_per_class=2, participants=2, samples_per_stream=30, signal=0.7, seed=12),
             str(tmp_path / 'c'))
    assert tree_digests(str(tmp_path / 'a')) == tree_digests(str(tmp_path / 'b'))
    assert tree_digests(str(tmp_path / 'a')) != tree_digests(str(tmp_path / 'c'))


def test_spec_validation():
    with pytest.raises(ValueError):
        SynthSpec(n_classes=0)
    with pytest.raises(ValueError):
        SynthSpec(signal=1.5)


def test_separable_instance():
    thetas, labels, emb = separable_instance(n_per_class=4, n_classes=3)
    assert thetas.shape == (12, 3)
    assert labels[:4] == ['c0'] * 4
    np.testing.assert_array_equal(emb.vectors, np.eye(3))
