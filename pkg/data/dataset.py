""" Quick n simple gaze dataset folder

    <root>/manifest.json
    <root>/features.txt
    <root>/gaze/<participant_id>/<image_id>.csv
    <root>/attributes.csv, bubbles.csv, corpus/, saliency/   (optional)
"""
import os
import re

from gazeemb.ingest import IngestError, load_manifest

GAZE_EXTENSIONS = ['.csv', '.tsv']


def natural_key(string_):
    """See http://www.codinghorror.com/blog/archives/001018.html"""
    return [int(s) if s.isdigit() else s for s in re.split(r'(\d+)', string_.lower())]


def find_gaze_logs(folder):
    """ (path, image_id, participant_id) for every log below `folder` in natural path order,
    participant = leaf folder name """
    logs = []
    for root, subdirs, files in os.walk(folder, topdown=False):
        participant = os.path.basename(os.path.relpath(root, folder)) if root != folder else ''
        for f in files:
            base, ext = os.path.splitext(f)
            if ext.lower() in GAZE_EXTENSIONS:
                logs.append((os.path.join(root, f), base, participant))
    return sorted(logs, key=lambda k: natural_key(k[0]))


class GazeDataset:

    def __init__(
            self,
            root,
            manifest='manifest.json',
            features='features.txt',
            gaze='gaze'):
        self.root = root
        self.manifest_path = os.path.join(root, manifest)
        self.features_path = os.path.join(root, features)
        self.manifest = load_manifest(self.manifest_path)
        logs = find_gaze_logs(os.path.join(root, gaze))
        if len(logs) == 0:
            raise IngestError('Found 0 gaze logs in subfolders of: ' + os.path.join(root, gaze) + '\n'
                              'Supported extensions are: ' + ','.join(GAZE_EXTENSIONS))
        known = set(self.manifest.participants)
        self.logs = [l for l in logs if l[1] in self.manifest and (not known or l[2] in known)]
        if len(self.logs) < len(logs):
            skipped = [l[0] for l in logs if l not in self.logs]
            raise IngestError('gaze logs for images or participants not in the manifest: %s' % ', '.join(skipped[:5]))

    def __getitem__(self, index):
        return self.logs[index]

    def __len__(self):
        return len(self.logs)

    def optional_path(self, name):
        path = os.path.join(self.root, name)
        return path if os.path.exists(path) else None
