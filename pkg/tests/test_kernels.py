import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xqgram import _backend
from xqgram.quantile import prefix_quantiles
from xqgram.selfnorm import stream_order

py = _backend.python_kernels
cy = _backend.compiled_kernels
needs_cython = pytest.mark.skipif(cy is None, reason="compiled kernels not built")


def brute_counts(vals, quants, offsets, s0):
    m, T = vals.shape
    w0 = int(max(offsets))
    n, c1, c2 = [], [], []
    for s in range(s0, T + 1):
        ind = np.zeros((m, max(s - w0, 0)), dtype=bool)
        for j in range(m):
            for i, t in enumerate(range(w0, s)):
                ind[j, i] = vals[j, t - offsets[j]] < quants[j, s - 1]
        n.append(ind.shape[1])
        c1.append(ind.sum(axis=1))
        c2.append(ind.astype(int) @ ind.T.astype(int))
    return np.array(n), np.array(c1), np.array(c2)


def streams(rng, m, T, ties):
    vals = rng.integers(-4, 5, (m, T)).astype(float) if ties else rng.standard_normal((m, T))
    levels = rng.uniform(0.05, 0.95, m)
    quants = np.stack([prefix_quantiles(v, a) for v, a in zip(vals, levels)])
    offsets = np.zeros(m, dtype=np.int64)
    offsets[1:] = rng.integers(0, 4, m - 1)
    return vals, quants, offsets


@pytest.mark.parametrize("ties", [False, True])
def test_python_kernel_matches_brute_force(rng, ties):
    for _ in range(10):
        vals, quants, offsets = streams(rng, 3, 30, ties)
        got = py.recursive_counts(vals, quants, offsets, 6)
        for g, e in zip(got, brute_counts(vals, quants, offsets, 6)):
            np.testing.assert_array_equal(g, e)


@needs_cython
@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 4), st.integers(10, 80), st.booleans())
def test_backends_agree_on_recursive_counts(seed, m, T, ties):
    rng = np.random.default_rng(seed)
    vals, quants, offsets = streams(rng, m, T, ties)
    s0 = int(rng.integers(int(offsets.max()) + 1, T))
    order, srt = stream_order(vals)
    a = py.recursive_counts(vals, quants, offsets, s0)
    b = cy.recursive_counts(vals, quants, offsets, s0, order, srt)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


@needs_cython
def test_backends_agree_on_sb_fill(rng):
    for _ in range(50):
        n = int(rng.integers(1, 300))
        lengths = rng.geometric(0.2, size=n)
        starts = rng.integers(0, n, size=lengths.size)
        np.testing.assert_array_equal(py.sb_fill_indices(starts, lengths, n),
                                      cy.sb_fill_indices(starts, lengths, n))


def test_sb_fill_is_circular():
    out = py.sb_fill_indices(np.array([3, 0]), np.array([3, 5]), 5)
    assert out.tolist() == [3, 4, 0, 0, 1]


def test_env_var_forces_fallback():
    code = "import xqgram._backend as b; print(b.BACKEND)"
    env = dict(os.environ, XQGRAM_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_get_kernels():
    assert _backend.get_kernels("python") is py
    assert _backend.get_kernels() is _backend.kernels
    with pytest.raises(ValueError):
        _backend.get_kernels("fortran")
