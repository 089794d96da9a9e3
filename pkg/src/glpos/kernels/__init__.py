"""Hot numeric kernels with two interchangeable backends.

The numba backend is used when numba imports cleanly and the environment
variable ``GLPOS_NUMBA`` is not set to ``0``. The pure numpy backend is the
fallback and the reference the tests compare against.
"""
import os

import numpy as np

from . import _numpy as numpy_backend

numba_backend = None
if os.environ.get("GLPOS_NUMBA", "1").lower() not in ("0", "false", "no", "off"):
    try:
        from . import _numba as numba_backend
    except ImportError:  # pragma: no cover - numba missing
        numba_backend = None

_impl = numba_backend if numba_backend is not None else numpy_backend
BACKEND = "numba" if numba_backend is not None else "numpy"


def path_centralities(indptr, indices):
    return _impl.path_centralities(np.asarray(indptr, dtype=np.int64),
                                   np.asarray(indices, dtype=np.int64))


def ibm1_expectation(t, flat_ids, seg, tok_norm, n_tok):
    return _impl.ibm1_expectation(t, flat_ids, seg, tok_norm, n_tok)


def segment_sum(values, seg, n):
    return _impl.segment_sum(values, seg, n)


def segment_max(values, seg, n):
    return _impl.segment_max(values, seg, n)
