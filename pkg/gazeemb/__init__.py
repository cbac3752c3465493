from .ingest import *
from .fixation import *
from .gaze_features import *
from .embeddings import *
from .baselines import *
from .sje import *
from .linear_svm import *
from .evaluation import *
from .synth import *
from .embedding_factory import create_embeddings, list_embeddings
from .helpers import load_checkpoint, save_checkpoint, load_embeddings, save_embeddings
from .config import get_num_workers, set_num_workers
from .version import __version__
