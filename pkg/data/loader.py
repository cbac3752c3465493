""" Gaze loading

Parses gaze logs and reduces them to gaze feature sequences in parallel, then bundles the
manifest, image features and whatever side information the dataset folder holds.
"""
import logging
import os
from collections import OrderedDict
from functools import partial

from gazeemb.evaluation import ExperimentData
from gazeemb.fixation import FilterParams
from gazeemb.gaze_features import stream_features
from gazeemb.helpers import parallel_map
from gazeemb.ingest import EmptyStreamError, load_attributes, load_bubble_tracks, load_corpus, \
    load_feature_matrix, load_saliency_maps, parse_gaze_log

from .dataset import GazeDataset

_logger = logging.getLogger(__name__)


def _parse(manifest, log):
    path, image_id, participant = log
    record = manifest[image_id]
    try:
        return parse_gaze_log(path, (record.width, record.height), image_id, participant)
    except EmptyStreamError:
        return None


def load_streams(dataset: GazeDataset):
    """ (image_id, participant_id) -> GazeStream in dataset order, logs without a valid sample are skipped """
    streams = parallel_map(partial(_parse, dataset.manifest), dataset.logs, desc='parse')
    out = OrderedDict()
    for log, stream in zip(dataset.logs, streams):
        if stream is None:
            _logger.warning('=> No valid gaze sample in %s, skipped', log[0])
            continue
        out[(log[1], log[2])] = stream
    return out


def streams_to_sequences(streams, params: FilterParams = FilterParams()):
    features = parallel_map(partial(stream_features, params=params), streams.values(), desc='fixations')
    return OrderedDict(zip(streams.keys(), features))


def create_loader(
        dataset: GazeDataset,
        params: FilterParams = FilterParams(),
        attributes='attributes.csv',
        bubbles='bubbles.csv',
        corpus='corpus',
        saliency='saliency',
        streams=None) -> ExperimentData:
    """ Everything a run needs from one dataset folder. Missing optional files stay None. """
    manifest = dataset.manifest
    features = load_feature_matrix(dataset.features_path, manifest)
    if streams is None:
        streams = load_streams(dataset)
    sequences = streams_to_sequences(streams, params)
    n_fix = sum(len(f) for f in sequences.values())
    _logger.info('=> Loaded %d gaze streams, %d fixations (ws=%g, ts=%g)', len(sequences), n_fix, params.ws, params.ts)

    data = ExperimentData(manifest, features, sequences)
    path = dataset.optional_path(attributes)
    if path:
        data.attributes = load_attributes(path, manifest.classes)
    path = dataset.optional_path(bubbles)
    if path:
        data.tracks = load_bubble_tracks(path)
    path = dataset.optional_path(corpus)
    if path and os.path.isdir(path):
        data.corpus = load_corpus(path, manifest.classes)
    path = dataset.optional_path(saliency)
    if path and os.path.isdir(path):
        data.saliency = load_saliency_maps(path, manifest.image_ids)
    return data
