import os
import platform
import sys
from typing import Dict

_BLAS_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def pin_blas_threads(threads: int = 1):
    """
    Environment Patch: Single-threaded BLAS
    Must run before numpy is first imported, otherwise the BLAS pool is
    already sized. Values the user exported are left alone.
    """
    for var in _BLAS_THREAD_VARS:
        os.environ.setdefault(var, str(threads))


def environment_summary() -> Dict[str, str]:
    """Versions recorded in run reports so timings can be compared across machines."""
    import numpy
    import scipy

    return {
        "python": sys.version.split()[0],
        "platform": platform.platform(),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "blas_threads": os.environ.get("OMP_NUM_THREADS", "unset"),
    }
