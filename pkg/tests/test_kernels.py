"""The numba and numpy backends must agree on every kernel."""
import numpy as np
import pytest

from glpos import kernels
from glpos.kernels import _numpy
from glpos.graph_features import _csr

from conftest import random_graph

# compare the two implementations directly, whatever GLPOS_NUMBA selects
_numba = pytest.importorskip("glpos.kernels._numba")


def test_path_centralities_agree():
    rng = np.random.default_rng(0)
    for _ in range(60):
        n = int(rng.integers(1, 15))
        indptr, indices = _csr(n, random_graph(rng, n, rng.uniform(0.05, 0.6)))
        a = _numpy.path_centralities(indptr, indices)
        b = _numba.path_centralities(indptr, indices)
        for x, y in zip(a, b):
            np.testing.assert_allclose(x, y, atol=1e-12)


def test_ibm1_expectation_agrees():
    rng = np.random.default_rng(1)
    n_tok, n_pairs = 30, 12
    lens = rng.integers(1, 5, size=n_tok)
    seg = np.repeat(np.arange(n_tok), lens)
    flat = rng.integers(0, n_pairs, size=len(seg))
    t = rng.uniform(0.1, 1.0, size=n_pairs)
    norm = lens.astype(float)
    ca, la = _numpy.ibm1_expectation(t, flat, seg, norm, n_tok)
    cb, lb = _numba.ibm1_expectation(t, flat, seg, norm, n_tok)
    np.testing.assert_allclose(ca, cb, rtol=1e-12)
    assert la == pytest.approx(lb, rel=1e-12)


@pytest.mark.parametrize("shape", [(40,), (40, 3), (40, 2, 5)])
def test_segment_ops_agree(shape):
    rng = np.random.default_rng(2)
    v = rng.normal(size=shape)
    seg = rng.integers(0, 7, size=shape[0])
    for op in ("segment_sum", "segment_max"):
        a = getattr(_numpy, op)(v, seg, 9)
        b = getattr(_numba, op)(v, seg, 9)
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_segment_sum_matches_add_at():
    rng = np.random.default_rng(3)
    v = rng.normal(size=(25, 4))
    seg = rng.integers(0, 5, size=25)
    ref = np.zeros((6, 4))
    np.add.at(ref, seg, v)
    np.testing.assert_allclose(kernels.segment_sum(v, seg, 6), ref, atol=1e-12)
