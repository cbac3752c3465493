from .dataset import GazeDataset, find_gaze_logs, natural_key
from .loader import create_loader, load_streams, streams_to_sequences
from .config import ConfigError, RunConfig, load_run_config, resolve_run_config, parse_range
