from collections import OrderedDict

import numpy as np
import pytest

from gazeemb.baselines import attribute_embeddings, bow_analyzer, build_bow_embeddings, central_point_sequences, \
    embed_central_point, embed_random_points, embed_saliency_histogram, encode_bubbles_bfs, fuse_embeddings, \
    random_point_sequences, saliency_cells
from gazeemb.embeddings import EmbeddingError, EmbeddingSet, GridSpec, SequenceSpec, encode_gh
from gazeemb.ingest import AttributeMatrix, BubbleTrack, CorpusDocument, DatasetManifest, ImageRecord


def _manifest():
    images = [ImageRecord('i%d' % i, 'ab'[i // 2], i) for i in range(4)]
    return DatasetManifest(tuple(images), ('a', 'b'), ('p1',))


def _sequences(lengths=(3, 5, 2, 4)):
    return OrderedDict((('i%d' % i, 'p1'), np.full((n, 6), 0.1)) for i, n in enumerate(lengths))


def test_random_points_seeded():
    a = random_point_sequences(_sequences(), seed=4)
    b = random_point_sequences(_sequences(), seed=4)
    c = random_point_sequences(_sequences(), seed=5)
    assert [len(v) for v in a.values()] == [3, 5, 2, 4]
    for k in a:
        np.testing.assert_array_equal(a[k], b[k])
    assert not np.array_equal(a[('i0', 'p1')], c[('i0', 'p1')])
    assert all(len(v) == 7 for v in random_point_sequences(_sequences(), count=7).values())


def test_random_points_uniform_mass():
    seqs = OrderedDict((('i%d' % i, 'p1'), np.zeros((0, 6))) for i in range(9))
    points = random_point_sequences(seqs, seed=0, count=1000)
    gh = sum(encode_gh(v, GridSpec(3, 3)) for v in points.values())
    assert np.all(np.abs(gh - 1000) <= 50)


def test_random_points_embedding():
    sets = embed_random_points(_sequences(), _manifest(), 'GH', GridSpec(2, 2), seed=1)
    assert sets['p1'].source == 'random'
    np.testing.assert_allclose(sets['p1'].vectors.sum(axis=1), [4., 3.])


def test_central_point():
    seqs = central_point_sequences(_sequences())
    for v in seqs.values():
        np.testing.assert_array_equal(v[:, :2], [[0.5, 0.5]])
    sets = embed_central_point(_sequences(), _manifest(), 'GH', GridSpec(3, 3))
    np.testing.assert_array_equal(sets['p1'].vectors, [[0, 0, 0, 0, 1, 0, 0, 0, 0]] * 2)
    assert sets['p1'].source == 'central'


def test_saliency_cells():
    saliency = np.arange(16, dtype=float).reshape(4, 4)
    cells = saliency_cells(saliency, GridSpec(2, 2))
    np.testing.assert_allclose(cells, [np.mean([0, 1, 4, 5]), np.mean([2, 3, 6, 7]),
                                       np.mean([8, 9, 12, 13]), np.mean([10, 11, 14, 15])])


def test_saliency_histogram():
    maps = {'i%d' % i: np.full((4, 4), float(i)) for i in range(4)}
    s = embed_saliency_histogram(maps, _manifest(), GridSpec(2, 2))
    np.testing.assert_allclose(s.vectors, [[0.5] * 4, [2.5] * 4])
    del maps['i3']
    with pytest.raises(EmbeddingError):
        embed_saliency_histogram(maps, _manifest(), GridSpec(2, 2))


def test_bubbles_bfs():
    tracks = {
        'i0': BubbleTrack('i0', np.array([[0.1, 0.1, 0.1], [0.2, 0.2, 0.1], [0.3, 0.3, 0.1]])),
        'i1': BubbleTrack('i1', np.array([[0.5, 0.5, 0.2], [0.7, 0.7, 0.2]])),
        'i2': BubbleTrack('i2', np.array([[0.9, 0.9, 0.05], [0.8, 0.8, 0.05]])),
    }
    s = encode_bubbles_bfs(tracks, _manifest())
    assert s.meta['k'] == 2
    np.testing.assert_allclose(s['a'].vector, np.mean([[0.1, 0.1, 0.1, 0.3, 0.3, 0.1],
                                                       [0.5, 0.5, 0.2, 0.7, 0.7, 0.2]], axis=0))
    np.testing.assert_allclose(s['b'].vector, [0.9, 0.9, 0.05, 0.8, 0.8, 0.05])
    assert encode_bubbles_bfs(tracks, _manifest(), SequenceSpec(1)).dim == 3
    with pytest.raises(EmbeddingError):
        encode_bubbles_bfs({'i0': tracks['i0']}, _manifest())


def test_bow_analyzer():
    assert bow_analyzer()('The Birds were singing, and a bird sings!') == ['bird', 'sing', 'bird', 'sing']


def test_bow_embeddings():
    docs = [CorpusDocument('a', 'red birds and red wings'), CorpusDocument('b', 'blue wings, blue beak')]
    s = build_bow_embeddings(docs, vocab_size=3)
    # totals: wing 2, red 2, blue 2, bird 1, beak 1 -> ties broken by stem
    assert s.meta['vocabulary'] == ['blue', 'red', 'wing']
    np.testing.assert_array_equal(s.vectors, [[0, 2, 1], [2, 0, 1]])


def test_bow_stop_word_only_document(caplog):
    docs = [CorpusDocument('a', 'the and of'), CorpusDocument('b', 'sparrow')]
    s = build_bow_embeddings(docs)
    np.testing.assert_array_equal(s['a'].vector, [0.])
    assert 'zero BoW vector' in caplog.text
    with pytest.raises(EmbeddingError):
        build_bow_embeddings([CorpusDocument('a', 'the and of')])


def test_attribute_embeddings():
    attrs = AttributeMatrix(('a', 'b'), np.array([[1., 2.], [3., 4.]]))
    assert attribute_embeddings(attrs, ['b', 'a']).vectors.tolist() == [[3., 4.], [1., 2.]]


def test_fuse_embeddings(rng):
    a = EmbeddingSet(['x', 'y', 'z'], rng.random((3, 2)), 'attributes')
    b = EmbeddingSet(['z', 'x', 'y'], rng.random((3, 5)), 'GFS')
    fused = fuse_embeddings(a, b)
    assert fused.dim == 7
    assert fused.classes == ('x', 'y', 'z')
    np.testing.assert_allclose(np.linalg.norm(fused.vectors[:, :2], axis=1), 1.)
    np.testing.assert_allclose(np.linalg.norm(fused.vectors[:, 2:], axis=1), 1.)
    with pytest.raises(EmbeddingError):
        fuse_embeddings(a, EmbeddingSet(['x', 'y'], rng.random((2, 5)), 'GFS'))
