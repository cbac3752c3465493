""" Run configuration

A run is described by one JSON document whose sections map onto the dataclasses below.
Values resolve in order: dataclass defaults < config file < command line flags. Unknown keys
and badly typed values are rejected with their dotted path, e.g. `model.epochs[1]`.
"""
import json
import typing
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from typing import List, Optional

import numpy as np

from gazeemb.embeddings import GridSpec, SequenceSpec
from gazeemb.evaluation import ABLATION_MODES, EMBEDDING_CHOICES, FUSION_MODES, ExperimentSpec, default_grid
from gazeemb.fixation import FilterParams, ScreenGeometry, degrees_to_pixels
from gazeemb.gaze_features import FeatureMask, FeatureMaskError

__all__ = ['ConfigError', 'RunConfig', 'load_run_config', 'resolve_run_config', 'parse_range', 'CLI_OVERRIDES']


class ConfigError(ValueError):
    def __init__(self, path, msg):
        super(ConfigError, self).__init__('%s: %s' % (path or '<root>', msg))
        self.path = path


@dataclass
class DataConfig:
    root: str = ''
    participants: Optional[List[str]] = None


@dataclass
class FixationConfig:
    ws: float = 25.
    ts: float = 10.
    unit: str = 'px'  # ws in 'px' or visual 'deg'
    distance_cm: float = 67.
    stimulus_cm: float = 15.
    stimulus_px: float = 500.


@dataclass
class EmbedConfig:
    source: str = 'GFS'
    fusion: str = 'early'
    grid_m: int = 3
    grid_n: int = 3
    k: Optional[int] = None
    sampling: str = 'even'
    mask: str = 'xy,d,ang'
    vocab_size: int = 1000
    baseline_method: str = 'GH'
    random_count: Optional[int] = None
    fuse_gaze: str = 'GFS'


@dataclass
class ModelConfig:
    learning_rates: List[float] = field(default_factory=lambda: [0.001, 0.01, 0.1])
    epochs: List[int] = field(default_factory=lambda: [5, 10, 20])
    seed: int = 0
    scaling: str = 'none'
    refit_trainval: bool = False


@dataclass
class EvalConfig:
    n_splits: int = 10
    split_seed: int = 0
    ablation: List[str] = field(default_factory=lambda: list(ABLATION_MODES))
    masks: List[str] = field(default_factory=lambda: ['xy', 'xy,d', 'xy,d,ang', 'xy,d,ang,pupil'])
    top_n: int = 5


@dataclass
class SweepConfig:
    ws: str = '5..50:5'
    ts: str = '10..100:10'
    k: Optional[int] = None
    mask: str = 'xy,d,ang'
    seed: int = 0


@dataclass
class SynthConfig:
    n_classes: int = 8
    images_per_class: int = 20
    participants: int = 3
    samples_per_stream: int = 150
    signal: float = 1.
    seed: int = 0


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    fixation: FixationConfig = field(default_factory=FixationConfig)
    embed: EmbedConfig = field(default_factory=EmbedConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    def to_dict(self):
        return asdict(self)

    def filter_params(self) -> FilterParams:
        f = self.fixation
        ws = f.ws
        if f.unit == 'deg':
            ws = degrees_to_pixels(f.ws, ScreenGeometry(f.distance_cm, f.stimulus_cm, f.stimulus_px))
        return FilterParams(ws=ws, ts=f.ts)

    def experiment_spec(self) -> ExperimentSpec:
        e = self.embed
        return ExperimentSpec(
            source=e.source, fusion=e.fusion, grid=GridSpec(e.grid_m, e.grid_n),
            seq=SequenceSpec(e.k, e.sampling) if e.k is not None else None, sampling=e.sampling,
            mask=FeatureMask.parse(e.mask),
            participants=tuple(self.data.participants) if self.data.participants else None,
            scaling=self.model.scaling, refit_trainval=self.model.refit_trainval, vocab_size=e.vocab_size,
            baseline_method=e.baseline_method, random_count=e.random_count, fuse_gaze=e.fuse_gaze,
            seed=self.model.seed)

    def train_grid(self):
        return default_grid(tuple(self.model.learning_rates), tuple(self.model.epochs), self.model.seed)


def _coerce(value, tp, path):
    origin = typing.get_origin(tp)
    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        return None if value is None else _coerce(value, args[0], path)
    if origin in (list, List):
        if not isinstance(value, list):
            raise ConfigError(path, 'expected a list, got %r' % (value,))
        (item_tp,) = typing.get_args(tp)
        return [_coerce(v, item_tp, '%s[%d]' % (path, i)) for i, v in enumerate(value)]
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, 'expected true/false, got %r' % (value,))
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, 'expected an integer, got %r' % (value,))
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, 'expected a number, got %r' % (value,))
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(path, 'expected a string, got %r' % (value,))
        return value
    raise ConfigError(path, 'unsupported type %r' % tp)


def _from_dict(cls, doc, path=''):
    if not isinstance(doc, dict):
        raise ConfigError(path, 'expected an object, got %r' % (doc,))
    hints = typing.get_type_hints(cls)
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in doc.items():
        sub = '%s.%s' % (path, key) if path else key
        if key not in known:
            raise ConfigError(sub, 'unknown key')
        tp = hints[key]
        kwargs[key] = _from_dict(tp, value, sub) if is_dataclass(tp) else _coerce(value, tp, sub)
    return cls(**kwargs)


def _merge(base: dict, override: dict):
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _check(ok, path, msg):
    if not ok:
        raise ConfigError(path, msg)


def validate_run_config(cfg: RunConfig):
    _check(cfg.fixation.ws > 0, 'fixation.ws', 'must be > 0')
    _check(cfg.fixation.ts > 0, 'fixation.ts', 'must be > 0')
    _check(cfg.fixation.unit in ('px', 'deg'), 'fixation.unit', "must be 'px' or 'deg'")
    _check(cfg.embed.source in EMBEDDING_CHOICES, 'embed.source', 'must be one of %s' % ', '.join(EMBEDDING_CHOICES))
    _check(cfg.embed.fusion in FUSION_MODES, 'embed.fusion', 'must be one of %s' % ', '.join(FUSION_MODES))
    _check(cfg.embed.fuse_gaze in ('GH', 'GFG', 'GFS'), 'embed.fuse_gaze', 'must be GH, GFG or GFS')
    _check(cfg.embed.baseline_method in ('GH', 'GFG', 'GFS'), 'embed.baseline_method', 'must be GH, GFG or GFS')
    _check(cfg.embed.grid_m >= 1 and cfg.embed.grid_n >= 1, 'embed.grid_m', 'grid needs m, n >= 1')
    _check(cfg.embed.k is None or cfg.embed.k >= 1, 'embed.k', 'must be >= 1')
    _check(cfg.embed.sampling in ('even', 'first'), 'embed.sampling', "must be 'even' or 'first'")
    _check(cfg.embed.vocab_size >= 1, 'embed.vocab_size', 'must be >= 1')
    for name, mask in [('embed.mask', cfg.embed.mask), ('sweep.mask', cfg.sweep.mask)] + [
            ('eval.masks[%d]' % i, m) for i, m in enumerate(cfg.eval.masks)]:
        try:
            FeatureMask.parse(mask)
        except FeatureMaskError as e:
            raise ConfigError(name, str(e))
    _check(len(cfg.model.learning_rates) > 0, 'model.learning_rates', 'empty grid')
    _check(len(cfg.model.epochs) > 0, 'model.epochs', 'empty grid')
    for i, lr in enumerate(cfg.model.learning_rates):
        _check(lr > 0, 'model.learning_rates[%d]' % i, 'must be > 0')
    for i, e in enumerate(cfg.model.epochs):
        _check(e >= 1, 'model.epochs[%d]' % i, 'must be >= 1')
    _check(cfg.model.scaling in ('none', 'std', 'l2'), 'model.scaling', "must be 'none', 'std' or 'l2'")
    _check(cfg.eval.n_splits >= 1, 'eval.n_splits', 'must be >= 1')
    for i, m in enumerate(cfg.eval.ablation):
        _check(m in ABLATION_MODES, 'eval.ablation[%d]' % i, 'must be one of %s' % ', '.join(ABLATION_MODES))
    for name in ('ws', 'ts'):
        try:
            parse_range(getattr(cfg.sweep, name))
        except ValueError as e:
            raise ConfigError('sweep.' + name, str(e))
    s = cfg.synth
    _check(min(s.n_classes, s.images_per_class, s.participants, s.samples_per_stream) >= 1, 'synth',
           'counts must be >= 1')
    _check(0. <= s.signal <= 1., 'synth.signal', 'must lie in [0, 1]')
    return cfg


def load_run_config(path) -> dict:
    try:
        with open(path, 'r') as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError('', '%s is not valid JSON (%s, line %d)' % (path, e.msg, e.lineno))


# CLI flag -> (section, key)
CLI_OVERRIDES = {
    'data': ('data', 'root'),
    'participants': ('data', 'participants'),
    'ws': ('fixation', 'ws'),
    'ts': ('fixation', 'ts'),
    'ws_unit': ('fixation', 'unit'),
    'source': ('embed', 'source'),
    'fusion': ('embed', 'fusion'),
    'grid': ('embed', 'grid'),
    'k': ('embed', 'k'),
    'sampling': ('embed', 'sampling'),
    'mask': ('embed', 'mask'),
    'vocab_size': ('embed', 'vocab_size'),
    'lr': ('model', 'learning_rates'),
    'epochs': ('model', 'epochs'),
    'seed': ('model', 'seed'),
    'scaling': ('model', 'scaling'),
    'refit_trainval': ('model', 'refit_trainval'),
    'splits': ('eval', 'n_splits'),
    'split_seed': ('eval', 'split_seed'),
    'ablation': ('eval', 'ablation'),
    'sweep_ws': ('sweep', 'ws'),
    'sweep_ts': ('sweep', 'ts'),
    'n_classes': ('synth', 'n_classes'),
    'images_per_class': ('synth', 'images_per_class'),
    'n_participants': ('synth', 'participants'),
    'signal': ('synth', 'signal'),
    'synth_seed': ('synth', 'seed'),
}


def resolve_run_config(args, default_cfg=None, verbose=False) -> RunConfig:
    """ Layer CLI flags (non-None attributes of `args`) over a config document over the defaults """
    doc = RunConfig().to_dict()
    if default_cfg:
        _from_dict(RunConfig, default_cfg)  # reports unknown keys with their path
        doc = _merge(doc, default_cfg)
    for flag, (section, key) in CLI_OVERRIDES.items():
        value = getattr(args, flag, None)
        if value is None:
            continue
        if key == 'grid':
            m, _, n = str(value).partition('x')
            try:
                doc[section]['grid_m'], doc[section]['grid_n'] = int(m), int(n)
            except ValueError:
                raise ConfigError('embed.grid', 'expected MxN, got %r' % value)
            continue
        if flag in ('ws', 'ts'):
            if getattr(args, 'command', None) == 'sweep':
                # sweep takes --ws / --ts as ranges
                doc['sweep'][key] = str(value)
                continue
            try:
                value = float(value)
            except ValueError:
                raise ConfigError('fixation.' + key, 'expected a number, got %r' % value)
        doc[section][key] = value
    cfg = validate_run_config(_from_dict(RunConfig, doc))
    if verbose:
        print('Run configuration:')
        for section, values in cfg.to_dict().items():
            print('\t%s: %s' % (section, values))
    return cfg


def parse_range(text):
    """ `a..b[:step]` inclusive range or a comma list. Without step, 10 evenly spaced values. """
    text = str(text).strip()
    if '..' not in text:
        values = [float(v) for v in text.split(',') if v.strip()]
    else:
        lo, _, rest = text.partition('..')
        hi, _, step = rest.partition(':')
        lo, hi = float(lo), float(hi)
        if hi < lo:
            raise ValueError('empty range %r' % text)
        if step:
            step = float(step)
            if step <= 0:
                raise ValueError('range step must be > 0 in %r' % text)
            values = list(np.arange(lo, hi + step / 2., step))
        else:
            values = list(np.linspace(lo, hi, 10))
    if not values or min(values) <= 0:
        raise ValueError('range %r must hold positive values' % text)
    return [float(v) for v in values]
