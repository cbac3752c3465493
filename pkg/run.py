#!/usr/bin/env python
""" Gaze embedding zero-shot experiments

    python run.py synth --data ./synthetic
    python run.py eval --data ./synthetic --source GFS --fusion early --features xy,d,ang
    python run.py sweep --data ./synthetic --ws 5..50:5 --ts 10..100:10
    python run.py report output/eval output/ablate

Every command writes into <output>/<name>/ (output defaults to $GAZEEMB_OUTPUT or ./output):
config.json with the resolved configuration, inputs.json with digests of the dataset files and
the command's artifacts. Reruns with the same configuration reproduce the same files.
"""
import argparse
import logging
import os
import sys
from collections import OrderedDict

import numpy as np

import gazeemb
from data import ConfigError, GazeDataset, create_loader, load_run_config, parse_range, resolve_run_config
from data.loader import load_streams
from gazeemb.embeddings import export_density_png, grid_density
from gazeemb.evaluation import StageError, stage
from gazeemb.fixation import FIXATION_FIELDS, detect_fixations, fixations_to_array
from gazeemb.gaze_features import FeatureMask
from gazeemb.synth import SynthSpec
from utils import format_table, get_outdir, read_jsonl, tree_digests, write_json, write_jsonl, write_series

_logger = logging.getLogger('run')

COMMANDS = ('preprocess', 'embed', 'train', 'eval', 'ablate', 'sweep', 'synth', 'report')


def _csv(type_):
    return lambda text: [type_(v) for v in text.split(',') if v.strip()]


parser = argparse.ArgumentParser(description='Gaze embeddings for zero-shot image classification')
parser.add_argument('command', choices=COMMANDS, help='pipeline stage to run')
parser.add_argument('runs', nargs='*', metavar='RUN_DIR', help='run directories to summarize (report only)')
parser.add_argument('--config', default='', type=str, metavar='PATH', help='JSON run configuration')
parser.add_argument('--data', default=None, type=str, metavar='DIR', help='dataset folder')
parser.add_argument('--output', default=None, type=str, metavar='DIR',
                    help='run directory root (default: $GAZEEMB_OUTPUT or ./output)')
parser.add_argument('--name', default='', type=str, help='run directory name (default: command)')
parser.add_argument('-j', '--workers', default=None, type=int, metavar='N',
                    help='parallel workers (default: all cores)')
parser.add_argument('--log-level', default='INFO', type=str, help='logging level')
parser.add_argument('--participants', default=None, type=_csv(str), help='comma separated participant ids')
# fixation
parser.add_argument('--ws', default=None, type=str,
                    help='I-DT dispersion threshold (sweep: a..b[:step] or comma list)')
parser.add_argument('--ts', default=None, type=str,
                    help='I-DT duration window in ms (sweep: a..b[:step] or comma list)')
parser.add_argument('--ws-unit', default=None, choices=('px', 'deg'), help='unit of --ws')
# embeddings
parser.add_argument('--source', default=None, type=str, help='class embedding source')
parser.add_argument('--fusion', default=None, type=str, help='participant fusion: avg, early, late or each')
parser.add_argument('--grid', default=None, type=str, metavar='MxN', help='grid for GH / GFG / saliency')
parser.add_argument('--k', default=None, type=int, help='GFS / BFS sequence length (default: from data)')
parser.add_argument('--sampling', default=None, choices=('even', 'first'), help='GFS index rule')
parser.add_argument('--features', '--mask', dest='mask', default=None, type=str,
                    help='gaze feature mask, e.g. xy,d,ang,pupil')
parser.add_argument('--vocab-size', default=None, type=int, help='bag-of-words vocabulary size')
# model
parser.add_argument('--lr', default=None, type=_csv(float), help='learning rate grid')
parser.add_argument('--epochs', default=None, type=_csv(int), help='epoch grid')
parser.add_argument('--seed', default=None, type=int, help='training seed')
parser.add_argument('--scaling', default=None, choices=('none', 'std', 'l2'), help='image feature scaling')
parser.add_argument('--refit-trainval', default=None, action='store_true',
                    help='retrain the selected config on train + val classes')
# eval
parser.add_argument('--splits', default=None, type=int, help='number of zero-shot splits')
parser.add_argument('--split-seed', default=None, type=int, help='split seed')
parser.add_argument('--ablation', default=None, type=_csv(str), help='ablation modes, comma separated')
parser.add_argument('--study', default='none', choices=('none', 'fusion', 'masks'),
                    help='eval: compare participants / fusions or cumulative feature masks')
# sweep
parser.add_argument('--sweep-ws', default=None, type=str, help='ws values, a..b[:step] or comma list')
parser.add_argument('--sweep-ts', default=None, type=str, help='ts values, a..b[:step] or comma list')
# synth
parser.add_argument('--n-classes', default=None, type=int)
parser.add_argument('--images-per-class', default=None, type=int)
parser.add_argument('--n-participants', default=None, type=int)
parser.add_argument('--signal', default=None, type=float, help='class signal strength in [0, 1]')
parser.add_argument('--synth-seed', default=None, type=int)


def _load(cfg, streams_only=False):
    if not cfg.data.root:
        raise ConfigError('data.root', 'no dataset folder given')
    with stage('ingest'):
        dataset = GazeDataset(cfg.data.root)
        streams = load_streams(dataset)
    if streams_only:
        return dataset, streams, None
    with stage('fixation'):
        data = create_loader(dataset, cfg.filter_params(), streams=streams)
    return dataset, streams, data


def _splits(cfg, data):
    with stage('eval'):
        return gazeemb.make_splits(data.manifest.classes, cfg.eval.n_splits, cfg.eval.split_seed)


def _summarize(records, title):
    header = ['source', 'fusion', 'mask', 'extra', 'mean %', 'std %']
    rows = []
    for r in records:
        c = r['config']
        extra = c.get('ablation') or ','.join(c.get('participants') or [])
        rows.append([c['source'], c['fusion'], c['mask'], extra or '-',
                     '%.1f' % (100 * r['mean']), '%.1f' % (100 * r['std'])])
    return title + '\n' + format_table(header, rows)


def _write_records(outdir, records, title):
    dicts = [r.to_dict() for r in records]
    write_jsonl(dicts, os.path.join(outdir, 'results.jsonl'))
    summary = _summarize(dicts, title)
    with open(os.path.join(outdir, 'summary.txt'), 'w') as f:
        f.write(summary)
    print(summary)
    return dicts


def cmd_synth(cfg, args, outdir):
    s = cfg.synth
    target = cfg.data.root or os.path.join(outdir, 'dataset')
    gazeemb.generate(SynthSpec(s.n_classes, s.images_per_class, s.participants, s.samples_per_stream,
                               s.signal, s.seed), target)
    print('=> Synthetic dataset written to %s' % target)


def cmd_preprocess(cfg, args, outdir):
    _, streams, _ = _load(cfg, streams_only=True)
    params = cfg.filter_params()
    rows = []
    for (image_id, participant), stream in streams.items():
        folder = get_outdir(outdir, 'fixations', participant)
        fixations = fixations_to_array(detect_fixations(stream, params))
        np.savetxt(os.path.join(folder, image_id + '.tsv'), fixations, fmt='%.17g', delimiter='\t',
                   header='\t'.join(FIXATION_FIELDS), comments='')
        rows.append([image_id, participant, len(stream), len(fixations)])
    write_series(os.path.join(outdir, 'fixation_counts.tsv'), ['image_id', 'participant', 'samples', 'fixations'], rows)
    print('=> %d streams, %d fixations' % (len(rows), sum(r[3] for r in rows)))


def cmd_embed(cfg, args, outdir):
    _, _, data = _load(cfg)
    spec = cfg.experiment_spec()
    folder = get_outdir(outdir, 'embeddings')
    with stage('embed'):
        built = gazeemb.create_embeddings(spec.source, data, spec, data.manifest.classes)
        sets = built if isinstance(built, list) else [built]
        for s in sets:
            suffix = '_' + '+'.join(s.meta['participants']) if 'participants' in s.meta else ''
            gazeemb.save_embeddings(s, os.path.join(folder, spec.source + suffix + '.txt'))
        standardized = gazeemb.build_class_embeddings(data, spec, data.manifest.classes)
        for i, s in enumerate(standardized):
            suffix = '_%d' % i if len(standardized) > 1 else ''
            gazeemb.save_embeddings(
                s, os.path.join(folder, '%s_%s_standardized%s.txt' % (spec.source, spec.fusion, suffix)))
    if spec.source in gazeemb.GAZE_SOURCES:
        density_dir = get_outdir(outdir, 'density')
        for c in data.manifest.classes:
            ids = set(r.image_id for r in data.manifest.images_of(c))
            density = grid_density([f for (i, _), f in data.sequences.items() if i in ids], spec.grid)
            export_density_png(density, os.path.join(density_dir, c + '.png'))
    print('=> Wrote %d %s embedding sets to %s' % (len(sets), spec.source, folder))


def cmd_train(cfg, args, outdir):
    _, _, data = _load(cfg)
    spec = cfg.experiment_spec()
    if spec.fusion == 'each':
        raise ConfigError('embed.fusion', "train needs a single model setting, not 'each'")
    split = _splits(cfg, data)[0]
    with stage('embed'):
        sets = gazeemb.build_class_embeddings(data, spec, split.train)

    def _images(classes):
        records = data.manifest.images_of(classes)
        return data.features.for_images(records), [r.class_label for r in records], [r.image_id for r in records]

    x_train, y_train, _ = _images(split.train)
    x_val, y_val, _ = _images(split.val)
    x_test, _, test_ids = _images(split.test)
    with stage('train'):
        scaler = gazeemb.ImageFeatureScaler(spec.scaling).fit(x_train)
        x_train, x_val, x_test = scaler.transform(x_train), scaler.transform(x_val), scaler.transform(x_test)
        cv = gazeemb.cross_validate(
            cfg.train_grid(),
            lambda c: [gazeemb.train_sje(x_train, y_train, s.select(split.train), c) for s in sets],
            lambda models: gazeemb.per_class_accuracy(
                gazeemb.predict_late(models, x_val, [s.select(split.val) for s in sets]), y_val, split.val))
        models = cv.model
        if spec.refit_trainval:
            models = [gazeemb.train_sje(np.concatenate([x_train, x_val]), y_train + y_val,
                                        s.select(split.train + split.val), cv.best) for s in sets]
    ranking = OrderedDict()
    for i, (m, s) in enumerate(zip(models, sets)):
        gazeemb.save_checkpoint(m, os.path.join(outdir, 'model_%d.txt' % i))
        write_series(os.path.join(outdir, 'loss_%d.tsv' % i), ['epoch', 'loss'],
                     [[e + 1, l] for e, l in enumerate(m.loss_history)])
        ranking['model_%d' % i] = gazeemb.rank_images(m, x_test, test_ids, s.select(split.test), cfg.eval.top_n)
    write_json(OrderedDict(split=split.to_dict(), config=cv.best.to_dict(), val_accuracy=cv.val_accuracy,
                           ranking=ranking), os.path.join(outdir, 'ranking.json'))
    print('=> Trained %d model(s), lr=%g epochs=%d, val accuracy %.1f %%' % (
        len(models), cv.best.learning_rate, cv.best.epochs, 100 * cv.val_accuracy))


def cmd_eval(cfg, args, outdir):
    _, _, data = _load(cfg)
    spec = cfg.experiment_spec()
    splits = _splits(cfg, data)
    grid = cfg.train_grid()
    write_jsonl([s.to_dict() for s in splits], os.path.join(outdir, 'splits.jsonl'))
    if args.study == 'masks':
        records = gazeemb.mask_study(data, spec, splits, grid, cfg.eval.masks)
        write_series(os.path.join(outdir, 'masks.tsv'), ['mask', 'mean', 'std'],
                     [[r.config['mask'], r.mean, r.std] for r in records])
    elif args.study == 'fusion':
        records = gazeemb.run_each_participant(data, spec, splits, grid)
        records += [gazeemb.run_experiment(data, spec.replace(fusion=f), splits, grid)
                    for f in ('avg', 'early', 'late')]
        write_series(os.path.join(outdir, 'fusion.tsv'), ['setting', 'mean', 'std'],
                     [[r.config['participants'][0] if r.config['fusion'] == 'each' else r.config['fusion'].upper(),
                       r.mean, r.std] for r in records])
    elif spec.fusion == 'each':
        records = gazeemb.run_each_participant(data, spec, splits, grid)
    else:
        records = [gazeemb.run_experiment(data, spec, splits, grid)]
    _write_records(outdir, records, 'Zero-shot per-class top-1 accuracy (%d splits)' % len(splits))


def cmd_ablate(cfg, args, outdir):
    _, _, data = _load(cfg)
    spec = cfg.experiment_spec()
    splits = _splits(cfg, data)
    grid = cfg.train_grid()
    records = [gazeemb.ablate_bubbles(m, data, spec, splits, grid) for m in cfg.eval.ablation]
    write_series(os.path.join(outdir, 'ablation.tsv'), ['mode', 'mean', 'std'],
                 [[r.config['ablation'], r.mean, r.std] for r in records])
    _write_records(outdir, records, 'Gaze to bubbles ablation (%d splits)' % len(splits))


def cmd_sweep(cfg, args, outdir):
    dataset, streams, _ = _load(cfg, streams_only=True)
    ws_values = parse_range(cfg.sweep.ws)
    ts_values = parse_range(cfg.sweep.ts)
    result = gazeemb.sweep_fixation_params(
        streams, dataset.manifest, ws_values, ts_values, FeatureMask.parse(cfg.sweep.mask), cfg.sweep.k, cfg.sweep.seed)
    write_series(os.path.join(outdir, 'sweep.tsv'), ['ws', 'ts', 'accuracy'],
                 [[w, t, result.accuracy[i, j]] for i, w in enumerate(result.ws) for j, t in enumerate(result.ts)])
    table = format_table(['ws \\ ts'] + ['%g' % t for t in result.ts],
                         [['%g' % w] + ['%.1f' % (100 * a) for a in result.accuracy[i]] for i, w in enumerate(result.ws)])
    with open(os.path.join(outdir, 'summary.txt'), 'w') as f:
        f.write('SVM probe accuracy % over the fixation filter grid\n' + table)
    print(table)


def cmd_report(cfg, args, outdir):
    if not args.runs:
        raise ConfigError('runs', 'report needs at least one run directory')
    columns = []
    cells = OrderedDict()
    for run_dir in args.runs:
        path = os.path.join(run_dir, 'results.jsonl')
        if not os.path.isfile(path):
            raise ConfigError('runs', 'no results.jsonl in %s' % run_dir)
        run_cfg = load_run_config(os.path.join(run_dir, 'config.json'))
        column = os.path.basename(os.path.normpath(run_cfg['data']['root'])) or run_dir
        if column not in columns:
            columns.append(column)
        for r in read_jsonl(path):
            c = r['config']
            method = c['source'] + ('' if c['source'] not in gazeemb.PARTICIPANT_SOURCES else
                                    ' %s [%s]' % (c['fusion'].upper(), c['mask']))
            if c.get('ablation'):
                method += ' / ' + c['ablation']
            cells.setdefault(method, {})[column] = '%.1f +- %.1f' % (100 * r['mean'], 100 * r['std'])
    table = format_table(['method'] + columns, [[m] + [v.get(c, '-') for c in columns] for m, v in cells.items()])
    with open(os.path.join(outdir, 'report.txt'), 'w') as f:
        f.write(table)
    print(table)


def main(argv=None):
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper(), logging.INFO), format='%(message)s')
    try:
        cfg = resolve_run_config(args, load_run_config(args.config) if args.config else None)
        output = args.output or os.environ.get('GAZEEMB_OUTPUT', '') or './output'
        outdir = get_outdir(output, args.name or args.command)
        write_json(cfg.to_dict(), os.path.join(outdir, 'config.json'))
        if cfg.data.root and os.path.isdir(cfg.data.root) and args.command not in ('synth', 'report'):
            write_json(OrderedDict(version=gazeemb.__version__, files=tree_digests(cfg.data.root)),
                       os.path.join(outdir, 'inputs.json'))
        with gazeemb.set_num_workers(args.workers):
            globals()['cmd_' + args.command](cfg, args, outdir)
    except ConfigError as e:
        _logger.error('=> Config error: %s', e)
        return 2
    except StageError as e:
        _logger.error('=> Stage %s failed: %s', e.stage, e.msg)
        return 3
    return 0


if __name__ == '__main__':
    sys.exit(main())
