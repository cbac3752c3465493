import hashlib
import json
import os

import numpy as np


def get_outdir(path, *paths):
    outdir = os.path.join(path, *paths)
    os.makedirs(outdir, exist_ok=True)
    return outdir


def file_digest(path, chunk=1 << 20):
    h = hashlib.sha256()
    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(chunk), b''):
            h.update(block)
    return h.hexdigest()


def tree_digests(root):
    """ relative path -> sha256 of every file below `root`, sorted """
    digests = {}
    for base, _, files in os.walk(root):
        for f in files:
            path = os.path.join(base, f)
            digests[os.path.relpath(path, root).replace(os.sep, '/')] = file_digest(path)
    return dict(sorted(digests.items()))


def write_json(obj, path):
    with open(path, 'w') as f:
        json.dump(obj, f, indent=2, sort_keys=False)
        f.write('\n')


def write_jsonl(records, path):
    with open(path, 'w') as f:
        for r in records:
            f.write(json.dumps(r) + '\n')


def read_jsonl(path):
    with open(path, 'r') as f:
        return [json.loads(line) for line in f if line.strip()]


def format_table(header, rows):
    """ Plain text table, columns padded to their widest cell """
    cells = [[str(h) for h in header]] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ['  '.join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, '  '.join('-' * w for w in widths))
    return '\n'.join(lines) + '\n'


def write_series(path, header, rows):
    """ Tab separated plot-ready series """
    with open(path, 'w') as f:
        f.write('\t'.join(header) + '\n')
        for r in rows:
            f.write('\t'.join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v) for v in r) + '\n')
