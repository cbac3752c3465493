import json

import numpy as np
import pytest

from gazeemb.ingest import DatasetManifest, EmptyStreamError, FeatureMatrixError, GazeLogError, GAZE_LOG_COLUMNS, \
    ImageRecord, ManifestError, RawGazeSample, filter_valid, load_attributes, load_bubble_tracks, load_corpus, \
    load_feature_matrix, load_manifest, load_saliency_maps, parse_gaze_log, write_gaze_log, write_manifest
from gazeemb.synth import SynthSpec, generate

HEADER = ','.join(GAZE_LOG_COLUMNS)


def _write(path, rows, header=HEADER):
    path.write_text('\n'.join([header] + rows) + '\n')
    return str(path)


def test_parse_keeps_binocular_valid_only(tmp_path):
    path = _write(tmp_path / 'a.csv', [
        '0,10,10,12,10,3,3,0,0',
        '3.3,10,10,12,10,3,3,0,4',
        '6.6,11,10,13,10,3.2,3.4,0,0',
    ])
    stream = parse_gaze_log(path, (100, 100), 'a', 'p1')
    assert len(stream) == 2
    np.testing.assert_allclose(stream.points, [[11., 10.], [12., 10.]])
    np.testing.assert_allclose(stream.pupil, [3., 3.3])
    assert list(stream.timestamps) == [0., 6.6]


def test_parse_clamps_each_eye(tmp_path):
    path = _write(tmp_path / 'a.csv', ['0,-10,50,20,150,3,3,0,0'])
    stream = parse_gaze_log(path, (100, 100))
    s = stream.samples[0]
    assert (s.left_x, s.left_y, s.right_x, s.right_y) == (0., 50., 20., 100.)
    np.testing.assert_allclose(stream.points, [[10., 75.]])


def test_parse_defaults_ids_from_path(tmp_path):
    folder = tmp_path / 'p7'
    folder.mkdir()
    stream = parse_gaze_log(_write(folder / 'img_3.csv', ['0,1,1,1,1,3,3,0,0']), (10, 10))
    assert stream.image_id == 'img_3'
    assert stream.participant_id == 'p7'


def test_all_invalid_is_empty_stream(tmp_path):
    path = _write(tmp_path / 'a.csv', ['0,1,1,1,1,3,3,1,0', '1,1,1,1,1,3,3,0,2'])
    with pytest.raises(EmptyStreamError):
        parse_gaze_log(path, (10, 10))


def test_header_only_is_empty_stream(tmp_path):
    with pytest.raises(EmptyStreamError):
        parse_gaze_log(_write(tmp_path / 'a.csv', []), (10, 10))


@pytest.mark.parametrize('rows,line', [
    (['0,1,1,1,1,3,3,0,0', '1,1,x,1,1,3,3,0,0'], 3),
    (['0,1,1,1,1,3,3,0,0', '1,1,1,1,1,3,3,0,0', '0.5,1,1,1,1,3,3,0,0'], 4),
    (['0,1,1,1,1,-3,3,0,0'], 2),
    (['0,1,1,1,1,3,3,0.5,0'], 2),
    (['0,1,1,1,1,3,3,0,0', '1,1,1,1,1,3,3,0,0,7'], 3),
    (['0,1,1,1,1,3,3,0,0', '1,nan,1,1,1,3,3,0,0'], 3),
])
def test_malformed_rows_report_line(tmp_path, rows, line):
    with pytest.raises(GazeLogError) as e:
        parse_gaze_log(_write(tmp_path / 'a.csv', rows), (10, 10))
    assert e.value.line == line
    assert (':%d:' % line) in str(e.value)


def test_invalid_rows_may_hold_nan(tmp_path):
    path = _write(tmp_path / 'a.csv', [
        '0,1,1,1,1,3,3,0,0',
        '1,nan,nan,nan,nan,0,0,4,4',
        '2,nan,nan,1,1,nan,3,4,0',
        '3,2,2,2,2,3,3,0,0',
    ])
    stream = parse_gaze_log(path, (10, 10))
    assert list(stream.timestamps) == [0., 3.]
    np.testing.assert_allclose(stream.points, [[1., 1.], [2., 2.]])


def test_wrong_header(tmp_path):
    with pytest.raises(GazeLogError):
        parse_gaze_log(_write(tmp_path / 'a.csv', ['0,1,1'], header='t,x,y'), (10, 10))


def test_filter_valid_idempotent():
    samples = [RawGazeSample(i, 1, 1, 1, 1, 3, 3, i % 2, 0) for i in range(6)]
    once = filter_valid(samples)
    assert len(once) == 3
    assert filter_valid(once) == once


def test_write_parse_is_exact(tmp_path, rng):
    spec = SynthSpec(n_classes=1, images_per_class=1, participants=1, samples_per_stream=150, invalid_rate=0.)
    stream = next(iter(generate(spec).streams.values()))
    assert len(stream) == 150
    assert np.all(np.diff(stream.timestamps) > 0)
    path = str(tmp_path / 'log.csv')
    write_gaze_log(stream, path)
    again = parse_gaze_log(path, (stream.image_width, stream.image_height), stream.image_id, stream.participant_id)
    assert again == stream


def _manifest_doc(n_images=4, classes=('a', 'b')):
    return dict(
        classes=list(classes),
        participants=['p1'],
        images=[dict(image_id='i%d' % i, class_label=classes[i % len(classes)], feature_row_index=i)
                for i in range(n_images)])


def test_manifest_roundtrip(tmp_path):
    path = tmp_path / 'manifest.json'
    path.write_text(json.dumps(_manifest_doc()))
    manifest = load_manifest(str(path))
    assert manifest.classes == ('a', 'b')
    assert [r.image_id for r in manifest.images_of('b')] == ['i1', 'i3']
    assert manifest.class_of('i2') == 'a'
    out = str(tmp_path / 'again.json')
    write_manifest(manifest, out)
    assert load_manifest(out) == manifest


def test_manifest_at_dataset_scale(tmp_path):
    classes = ['c%02d' % c for c in range(14)]
    doc = _manifest_doc(464, classes)
    doc['participants'] = ['p%d' % p for p in range(5)]
    path = tmp_path / 'manifest.json'
    path.write_text(json.dumps(doc))
    manifest = load_manifest(str(path))
    assert (len(manifest), len(manifest.classes), len(manifest.participants)) == (464, 14, 5)


@pytest.mark.parametrize('edit', [
    lambda d: d['images'][1].update(class_label='zebra'),
    lambda d: d['images'][1].update(feature_row_index=0),
    lambda d: d['images'][1].update(feature_row_index=99),
    lambda d: d['images'][1].update(image_id='i0'),
    lambda d: d.update(classes=['a', 'a', 'b']),
])
def test_manifest_rejects(tmp_path, edit):
    doc = _manifest_doc()
    edit(doc)
    path = tmp_path / 'manifest.json'
    path.write_text(json.dumps(doc))
    with pytest.raises(ManifestError):
        load_manifest(str(path))


def _manifest(n=3):
    return DatasetManifest(tuple(ImageRecord('i%d' % i, 'a', i) for i in range(n)), ('a',))


def test_feature_matrix(tmp_path):
    path = tmp_path / 'f.txt'
    path.write_text('1 2\n3 4\n5 6\n')
    fm = load_feature_matrix(str(path), _manifest())
    assert fm.dim == 2
    np.testing.assert_array_equal(fm.for_images(_manifest().images[::-1]), [[5, 6], [3, 4], [1, 2]])


@pytest.mark.parametrize('text', ['1 2\n3 4\n', '1 2\n3 nan\n5 6\n', '1 2\n3\n5 6\n'])
def test_feature_matrix_rejects(tmp_path, text):
    path = tmp_path / 'f.txt'
    path.write_text(text)
    with pytest.raises(FeatureMatrixError):
        load_feature_matrix(str(path), _manifest())


def test_side_files(tmp_path):
    (tmp_path / 'attributes.csv').write_text('b,0.5,1\na,1.5,2\n')
    attributes = load_attributes(str(tmp_path / 'attributes.csv'), ['a', 'b'])
    assert attributes.classes == ('a', 'b')
    np.testing.assert_array_equal(attributes.values, [[1.5, 2.], [0.5, 1.]])

    (tmp_path / 'bubbles.csv').write_text('image_id,x,y,radius\ni1,0.1,0.2,0.05\ni0,0.5,0.5,0.1\ni1,0.3,0.4,0.05\n')
    tracks = load_bubble_tracks(str(tmp_path / 'bubbles.csv'))
    assert list(tracks) == ['i1', 'i0']
    np.testing.assert_array_equal(tracks['i1'].bubbles, [[0.1, 0.2, 0.05], [0.3, 0.4, 0.05]])

    corpus = tmp_path / 'corpus'
    corpus.mkdir()
    (corpus / 'a.txt').write_text('red birds')
    (corpus / 'b.txt').write_text('blue birds')
    docs = load_corpus(str(corpus), ['b', 'a'])
    assert [d.class_label for d in docs] == ['b', 'a']

    saliency = tmp_path / 'saliency'
    saliency.mkdir()
    (saliency / 'i0.txt').write_text('0 1\n2 3\n')
    maps = load_saliency_maps(str(saliency), ['i0', 'i1'])
    assert list(maps) == ['i0']
    assert maps['i0'].shape == (2, 2)
