""" Global runtime config state
"""
import os
from typing import Any, Optional

__all__ = ['get_num_workers', 'set_num_workers']

# Parallel degree for joblib fan-out (streams, grid points, splits). None == all available cores.
# Reductions are always done in a fixed order so results never depend on this value.
_NUM_WORKERS = None


def get_num_workers():
    if _NUM_WORKERS is None:
        return os.cpu_count() or 1
    return _NUM_WORKERS


class set_num_workers:
    def __init__(self, num_workers: Optional[int]) -> None:
        global _NUM_WORKERS
        assert num_workers is None or num_workers >= 1
        self.prev = _NUM_WORKERS
        _NUM_WORKERS = num_workers

    def __enter__(self) -> None:
        pass

    def __exit__(self, *args: Any) -> bool:
        global _NUM_WORKERS
        _NUM_WORKERS = self.prev
        return False
