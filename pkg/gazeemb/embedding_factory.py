""" Class embedding factory

Builders are looked up by source name. Gaze-derived sources (GH, GFG, GFS, random, central)
return one EmbeddingSet per participant, every other source a single set. All builders cover
every manifest class; lengths that default from data (GFS k, bubble k) are taken from
`train_classes` only.
"""
from typing import List, Sequence, Union

from .baselines import attribute_embeddings, build_bow_embeddings, central_point_sequences, \
    embed_saliency_histogram, encode_bubbles_bfs, fuse_embeddings, random_point_sequences
from .embeddings import EmbeddingError, EmbeddingSet, SequenceSpec, combine_participants, encode_sequences, \
    min_sequence_length

__all__ = ['create_embeddings', 'list_embeddings']

_GAZE_BUILDERS = ('GH', 'GFG', 'GFS', 'random', 'central')
_SET_BUILDERS = ('attributes', 'bow', 'saliency', 'bubbles', 'fused')


def _encode_participants(sequences, data, spec, method, source, train_classes) -> List[EmbeddingSet]:
    manifest = data.manifest
    participants = list(spec.participants or manifest.participants)
    lengths = {}
    if method == 'GFS' and spec.seq is None:
        train_ids = [r.image_id for r in manifest.images_of(train_classes)]
        lengths = {p: min_sequence_length(sequences, train_ids, [p]) for p in participants}
        if spec.fusion == 'avg':
            # AVG needs one dimension for everybody
            shortest = min(lengths.values())
            lengths = {p: shortest for p in participants}
    sets = []
    for p in participants:
        seq = spec.seq if spec.seq is not None or method != 'GFS' else SequenceSpec(lengths[p], spec.sampling)
        sets.extend(encode_sequences(
            sequences, manifest, method, spec.grid, seq, spec.mask,
            classes=manifest.classes, participants=[p], source=source).values())
    return sets


def GH(data, spec, train_classes):
    return _encode_participants(data.require('sequences'), data, spec, 'GH', 'GH', train_classes)


def GFG(data, spec, train_classes):
    return _encode_participants(data.require('sequences'), data, spec, 'GFG', 'GFG', train_classes)


def GFS(data, spec, train_classes):
    return _encode_participants(data.require('sequences'), data, spec, 'GFS', 'GFS', train_classes)


def random(data, spec, train_classes):
    sequences = random_point_sequences(data.require('sequences'), spec.seed, spec.random_count)
    return _encode_participants(sequences, data, spec, spec.baseline_method, 'random', train_classes)


def central(data, spec, train_classes):
    sequences = central_point_sequences(data.require('sequences'))
    return _encode_participants(sequences, data, spec, spec.baseline_method, 'central', train_classes)


def attributes(data, spec, train_classes):
    return attribute_embeddings(data.require('attributes'), data.manifest.classes)


def bow(data, spec, train_classes):
    return build_bow_embeddings(data.require('corpus'), spec.vocab_size).select(data.manifest.classes)


def saliency(data, spec, train_classes):
    return embed_saliency_histogram(data.require('saliency'), data.manifest, spec.grid, data.manifest.classes)


def bubbles(data, spec, train_classes):
    tracks = data.require('tracks')
    seq = spec.seq
    if seq is None:
        lengths = [len(tracks[r.image_id].bubbles) for r in data.manifest.images_of(train_classes)
                   if r.image_id in tracks and len(tracks[r.image_id].bubbles)]
        if not lengths:
            raise EmbeddingError('no bubble tracks for the training classes')
        seq = SequenceSpec(min(lengths), spec.sampling)
    return encode_bubbles_bfs(tracks, data.manifest, seq, data.manifest.classes)


def fused(data, spec, train_classes):
    """ attributes + EARLY fused gaze of `spec.fuse_gaze` """
    gaze = combine_participants(create_embeddings(spec.fuse_gaze, data, spec, train_classes), 'early')
    return fuse_embeddings(attributes(data, spec, train_classes), gaze)


def list_embeddings():
    return list(_GAZE_BUILDERS + _SET_BUILDERS)


def create_embeddings(
        source: str,
        data,
        spec,
        train_classes: Sequence[str]) -> Union[EmbeddingSet, List[EmbeddingSet]]:
    if source in list_embeddings() and source in globals():
        create_fn = globals()[source]
        return create_fn(data, spec, train_classes)
    raise RuntimeError('Unknown embedding source (%s)' % source)
