""" Checkpoint / embedding-set save + load helpers, parallel map
"""
import json
import logging
import os
from collections import OrderedDict

import numpy as np
import torch
from joblib import Parallel, delayed
from tqdm import tqdm

from .config import get_num_workers
from .embeddings import EmbeddingSet

__all__ = ['AverageMeter', 'parallel_map', 'save_embeddings', 'load_embeddings', 'save_checkpoint',
           'load_checkpoint', 'FORMAT_VERSION']

_logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
_EMBEDDING_MAGIC = '# gazeemb-embeddings v%d' % FORMAT_VERSION
_MODEL_MAGIC = '# gazeemb-model v%d' % FORMAT_VERSION


class AverageMeter:
    """Computes and stores the average and current value"""
    def __init__(self):
        self.reset()

    def reset(self):
        self.val = 0
        self.avg = 0
        self.sum = 0
        self.count = 0

    def update(self, val, n=1):
        self.val = val
        self.sum += val * n
        self.count += n
        self.avg = self.sum / self.count


def parallel_map(fn, items, desc=None):
    """ Ordered map over `items`, fanned out with joblib when more than one worker is configured """
    items = list(items)
    num_workers = min(get_num_workers(), len(items))
    if num_workers <= 1:
        return [fn(item) for item in tqdm(items, desc=desc, disable=desc is None, leave=False)]
    return Parallel(n_jobs=num_workers)(delayed(fn)(item) for item in items)


def _format_row(values):
    return ' '.join(repr(float(v)) for v in values)


def _read_header(f, magic, path):
    first = f.readline().rstrip('\n')
    if first != magic:
        raise ValueError("'{}' is not a {} file (found '{}')".format(path, magic[2:], first))
    return json.loads(f.readline()[1:])


def save_embeddings(embeddings: EmbeddingSet, path):
    """ Labeled matrix, one class per row: `label<TAB>v1 v2 ...` below a two-line header """
    header = OrderedDict(source=embeddings.source, dim=embeddings.dim, meta=embeddings.meta)
    with open(path, 'w') as f:
        f.write(_EMBEDDING_MAGIC + '\n')
        f.write('#' + json.dumps(header) + '\n')
        for c, v in zip(embeddings.classes, embeddings.vectors):
            f.write('%s\t%s\n' % (c, _format_row(v)))


def load_embeddings(path) -> EmbeddingSet:
    with open(path, 'r') as f:
        header = _read_header(f, _EMBEDDING_MAGIC, path)
        classes, rows = [], []
        for line in f:
            if not line.strip():
                continue
            label, values = line.rstrip('\n').split('\t')
            classes.append(label)
            rows.append([float(v) for v in values.split()])
    vectors = np.array(rows, dtype=np.float64).reshape(len(rows), header['dim'])
    return EmbeddingSet(classes, vectors, header['source'], OrderedDict(header['meta']))


def save_checkpoint(model, path):
    """ Header (D, E, class order, train config, seed) then the rows of W """
    weight = model.weight.detach().cpu().numpy()
    header = OrderedDict(
        D=weight.shape[0],
        E=weight.shape[1],
        classes=list(model.classes),
        config=model.config.to_dict() if model.config is not None else None,
        seed=model.config.seed if model.config is not None else None)
    with open(path, 'w') as f:
        f.write(_MODEL_MAGIC + '\n')
        f.write('#' + json.dumps(header) + '\n')
        for row in weight:
            f.write(_format_row(row) + '\n')


def load_checkpoint(checkpoint_path):
    from .sje import CompatibilityModel, TrainConfig
    if not (checkpoint_path and os.path.isfile(checkpoint_path)):
        _logger.error("=> Error: No checkpoint found at '%s'", checkpoint_path)
        raise FileNotFoundError(checkpoint_path)
    with open(checkpoint_path, 'r') as f:
        header = _read_header(f, _MODEL_MAGIC, checkpoint_path)
        rows = [[float(v) for v in line.split()] for line in f if line.strip()]
    weight = np.array(rows, dtype=np.float64).reshape(header['D'], header['E'])
    config = TrainConfig(**header['config']) if header['config'] is not None else None
    model = CompatibilityModel(header['D'], header['E'], classes=header['classes'], config=config)
    with torch.no_grad():
        model.weight.copy_(torch.from_numpy(weight))
    _logger.info("=> Loaded checkpoint '%s'", checkpoint_path)
    return model
