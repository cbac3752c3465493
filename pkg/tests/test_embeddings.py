from collections import OrderedDict

import numpy as np
import pytest
from PIL import Image

from gazeemb.embeddings import EmbeddingError, EmbeddingSet, GridSpec, SequenceSpec, aggregate_per_class, \
    combine_participants, encode_gfg, encode_gfs, encode_gh, encode_sequences, export_density_png, grid_cells, \
    grid_density, min_sequence_length, sample_indices, standardize
from gazeemb.gaze_features import FeatureMask
from gazeemb.helpers import load_embeddings, save_embeddings
from gazeemb.ingest import DatasetManifest, ImageRecord


def _features(rng, n):
    feats = rng.random((n, 6))
    feats[:, 2] *= 300.
    return feats


def _oracle_cell(x, y, grid):
    """ first cell whose closed upper edge holds the point """
    col = next(c for c in range(grid.n) if x <= (c + 1) / grid.n)
    row = next(r for r in range(grid.m) if y <= (r + 1) / grid.m)
    return row * grid.n + col


def test_grid_cells_boundaries():
    grid = GridSpec(2, 2)
    assert list(grid_cells([[0., 0.], [0.5, 0.5], [0.51, 0.5], [1., 1.], [0.2, 0.9]], grid)) == [0, 0, 1, 3, 2]


def test_gh_counts_match_binning_oracle(rng):
    grid = GridSpec(3, 4)
    feats = _features(rng, 100)
    gh = encode_gh(feats, grid)
    oracle = np.zeros(grid.cells)
    for x, y in feats[:, :2]:
        oracle[_oracle_cell(x, y, grid)] += 1
    np.testing.assert_array_equal(gh, oracle)
    assert gh.sum() == 100


def test_gh_uniform_mass(rng):
    feats = np.zeros((9000, 6))
    feats[:, :2] = rng.random((9000, 2))
    gh = encode_gh(feats, GridSpec(3, 3))
    assert np.all(np.abs(gh - 1000) <= 50)


def test_gh_empty():
    np.testing.assert_array_equal(encode_gh(np.zeros((0, 6)), GridSpec(2, 3)), np.zeros(6))


def test_gfg_matches_cell_average_oracle(rng):
    grid = GridSpec(2, 3)
    mask = FeatureMask.parse('xy,d,pupil')
    feats = _features(rng, 40)
    got = encode_gfg(feats, grid, mask).reshape(grid.cells, len(mask))
    for c in range(grid.cells):
        members = [f[mask.indices] for f in feats if _oracle_cell(f[0], f[1], grid) == c]
        want = np.mean(members, axis=0) if members else np.zeros(len(mask))
        np.testing.assert_allclose(got[c], want)


def test_gfg_empty_cells_are_zero():
    feats = np.array([[0.1, 0.1, 200., 0., 0., 3.]])
    v = encode_gfg(feats, GridSpec(2, 2), FeatureMask.parse('xy,d'))
    np.testing.assert_allclose(v, [0.1, 0.1, 200.] + [0.] * 9)


@pytest.mark.parametrize('length,k,expected', [
    (20, 5, [0, 5, 10, 14, 19]),
    (5, 1, [2]),
    (4, 1, [2]),
    (1, 3, [0, 0, 0]),
    (3, 5, [0, 1, 1, 2, 2]),
])
def test_sample_indices_even(length, k, expected):
    assert list(sample_indices(length, k)) == expected


def test_sample_indices_match_oracle():
    for length in range(1, 30):
        for k in range(2, 12):
            oracle = [int(np.floor(i * (length - 1) / (k - 1) + 0.5)) for i in range(k)]
            assert list(sample_indices(length, k)) == oracle


def test_sample_indices_first():
    assert list(sample_indices(10, 3, 'first')) == [0, 1, 2]
    assert list(sample_indices(2, 4, 'first')) == [0, 1, 1, 1]


def test_gfs(rng):
    feats = _features(rng, 20)
    mask = FeatureMask.parse('xy,d')
    v = encode_gfs(feats, SequenceSpec(5), mask)
    np.testing.assert_array_equal(v, feats[[0, 5, 10, 14, 19]][:, [0, 1, 2]].ravel())
    with pytest.raises(EmbeddingError):
        encode_gfs(np.zeros((0, 6)), SequenceSpec(2), mask)


def test_specs_validate():
    with pytest.raises(EmbeddingError):
        GridSpec(0, 3)
    with pytest.raises(EmbeddingError):
        SequenceSpec(0)


def test_aggregate_matches_oracle_mean(rng):
    vectors = OrderedDict()
    for c in ('a', 'b'):
        for p in ('p1', 'p2'):
            vectors[(c, p)] = [rng.random(4) for _ in range(int(rng.integers(1, 6)))]
    sets = aggregate_per_class(vectors, ['a', 'b'], ['p1', 'p2'], 'GH')
    assert list(sets) == ['p1', 'p2']
    for p, s in sets.items():
        for c in ('a', 'b'):
            total = np.zeros(4)
            for v in vectors[(c, p)]:
                total += v
            np.testing.assert_allclose(s[c].vector, total / len(vectors[(c, p)]))
        assert s.meta['participants'] == [p]


def test_aggregate_missing_class():
    with pytest.raises(EmbeddingError):
        aggregate_per_class({('a', 'p1'): [np.ones(2)]}, ['a', 'b'], ['p1'], 'GH')


def _set(rng, classes=('a', 'b', 'c'), dim=4, p='p1'):
    return EmbeddingSet(classes, rng.random((len(classes), dim)), 'GH', OrderedDict(participants=[p]))


def test_combine_avg_and_early(rng):
    sets = [_set(rng, p='p%d' % i) for i in range(3)]
    avg = combine_participants(sets, 'avg')
    np.testing.assert_allclose(avg.vectors, (sets[0].vectors + sets[1].vectors + sets[2].vectors) / 3)
    assert avg.dim == 4
    early = combine_participants(sets, 'early')
    assert early.dim == 12
    np.testing.assert_array_equal(early.vectors[:, 4:8], sets[1].vectors)
    assert early.meta['participants'] == ['p0', 'p1', 'p2']


def test_combine_single_participant_is_identity(rng):
    s = _set(rng)
    np.testing.assert_array_equal(combine_participants([s], 'avg').vectors, s.vectors)
    np.testing.assert_array_equal(combine_participants([s], 'early').vectors, s.vectors)


def test_combine_avg_needs_equal_dims(rng):
    with pytest.raises(EmbeddingError):
        combine_participants([_set(rng, dim=3), _set(rng, dim=4)], 'avg')


def test_standardize(rng):
    vectors = rng.random((5, 4))
    vectors[:, 2] = 7.
    s = standardize(EmbeddingSet(list('abcde'), vectors, 'attributes'))
    np.testing.assert_allclose(np.linalg.norm(s.vectors, axis=1), 1.)
    assert np.all(s.vectors[:, 2] == 0.)
    # per-dimension centering survives the row normalization in sign only, check before it
    centered = (vectors - vectors.mean(axis=0)) / np.where(vectors.std(axis=0) > 0, vectors.std(axis=0), 1.)
    centered[:, 2] = 0.
    np.testing.assert_allclose(s.vectors, centered / np.linalg.norm(centered, axis=1, keepdims=True))
    with pytest.raises(EmbeddingError):
        standardize(EmbeddingSet(['a'], vectors[:1], 'attributes'))


def test_embedding_set_is_read_only(rng):
    s = _set(rng)
    with pytest.raises(ValueError):
        s.vectors[0, 0] = 1.
    assert s.select(['c', 'a']).classes == ('c', 'a')
    with pytest.raises(EmbeddingError):
        s.select(['zebra'])


def _manifest():
    images = [ImageRecord('i%d' % i, 'ab'[i % 2], i) for i in range(6)]
    return DatasetManifest(tuple(images), ('a', 'b'), ('p1', 'p2'))


def _sequences(rng, lengths):
    seqs = OrderedDict()
    for n, key in enumerate([('i%d' % i, p) for p in ('p1', 'p2') for i in range(6)]):
        seqs[key] = _features(rng, lengths[n % len(lengths)])
    return seqs


def test_encode_sequences_gfs_default_k(rng):
    seqs = _sequences(rng, [7, 4, 9])
    sets = encode_sequences(seqs, _manifest(), 'GFS', mask=FeatureMask.parse('xy'))
    for p, s in sets.items():
        k = min_sequence_length(seqs, ['i%d' % i for i in range(6)], [p])
        assert s.dim == 2 * k
        assert s.meta['k'] == k


def test_encode_sequences_drops_empty_gfs(rng):
    seqs = _sequences(rng, [5])
    seqs[('i0', 'p1')] = np.zeros((0, 6))
    sets = encode_sequences(seqs, _manifest(), 'GFS', seq=SequenceSpec(2), mask=FeatureMask.parse('xy'))
    want = np.mean([encode_gfs(seqs[(i, 'p1')], SequenceSpec(2), FeatureMask.parse('xy')) for i in ('i2', 'i4')],
                   axis=0)
    np.testing.assert_allclose(sets['p1']['a'].vector, want)


def test_encoders_deterministic(rng):
    seqs = _sequences(rng, [6, 3])
    for method in ('GH', 'GFG', 'GFS'):
        a = encode_sequences(seqs, _manifest(), method)
        b = encode_sequences(OrderedDict(seqs), _manifest(), method)
        for p in a:
            np.testing.assert_array_equal(a[p].vectors, b[p].vectors)


def test_save_load_embeddings(tmp_path, rng):
    s = EmbeddingSet(['a b', 'c'], rng.normal(size=(2, 3)), 'GFS', OrderedDict(k=3, mask='x,y'))
    path = str(tmp_path / 'emb.txt')
    save_embeddings(s, path)
    again = load_embeddings(path)
    assert again.classes == s.classes
    assert again.source == 'GFS'
    assert again.meta['k'] == 3
    np.testing.assert_array_equal(again.vectors, s.vectors)


def test_density_png(tmp_path, rng):
    density = grid_density([_features(rng, 10), np.zeros((0, 6))], GridSpec(2, 3))
    assert density.shape == (2, 3)
    assert density.sum() == pytest.approx(1.)
    path = str(tmp_path / 'd.png')
    export_density_png(density, path, cell_px=4)
    with Image.open(path) as img:
        assert img.size == (12, 8)
