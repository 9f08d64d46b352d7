"""Pure numpy implementations of the hot loops.

Used when the compiled ``_kernels`` extension is unavailable or when
``XQGRAM_PURE_PYTHON`` is set.  The recursive pass here recomputes every
subsample's indicators from scratch in vectorised blocks, a different
algorithm from the incremental compiled version, which makes the pair a
useful cross-check.
"""

import numpy as np

_BLOCK_CELLS = 1 << 21


def recursive_counts(vals, quants, offsets, s0, order=None, sorted_vals=None):
    """Hit counts of aligned indicator streams for every subsample ``s = s0..T``.

    Parameters
    ----------
    vals : (m, T) float array
        Underlying series of each stream.
    quants : (m, T) float array
        ``quants[j, s-1]`` is the quantile of ``vals[j, :s]`` at stream j's level.
    offsets : (m,) int array
        Stream j contributes ``vals[j, t - offsets[j]]`` at (0-based) time t.
    s0 : int
        First subsample size reported.
    order, sorted_vals
        Ignored; accepted for signature compatibility with the compiled kernel.

    Returns
    -------
    n : (S,) int64
        Window length ``s - max(offsets)`` (floored at 0) for ``s = s0..T``.
    c1 : (S, m) int64
        ``c1[i, j]`` counts hits of stream j in window ``s``.
    c2 : (S, m, m) int64
        Joint hit counts of stream pairs.
    """
    vals = np.ascontiguousarray(vals, dtype=np.float64)
    quants = np.ascontiguousarray(quants, dtype=np.float64)
    offsets = np.asarray(offsets, dtype=np.int64)
    m, T = vals.shape
    w0 = int(offsets.max())
    S = T - s0 + 1
    n = np.maximum(np.arange(s0, T + 1) - w0, 0).astype(np.int64)
    c1 = np.zeros((S, m), dtype=np.int64)
    c2 = np.zeros((S, m, m), dtype=np.int64)
    L = T - w0  # number of window times t = w0..T-1
    if L <= 0:
        return n, c1, c2
    # stream j value at window time t = w0 + i
    windowed = np.stack([vals[j, w0 - offsets[j]:T - offsets[j]] for j in range(m)])
    tpos = np.arange(L)
    step = max(1, _BLOCK_CELLS // max(L, 1))
    for lo in range(0, S, step):
        hi = min(S, lo + step)
        s = np.arange(s0 + lo, s0 + hi)
        inside = tpos[None, :] < (s - w0)[:, None]
        ind = [(windowed[j][None, :] < quants[j, s - 1][:, None]) & inside for j in range(m)]
        for j in range(m):
            c1[lo:hi, j] = np.count_nonzero(ind[j], axis=1)
            c2[lo:hi, j, j] = c1[lo:hi, j]
            for i in range(j):
                c = np.count_nonzero(ind[i] & ind[j], axis=1)
                c2[lo:hi, i, j] = c
                c2[lo:hi, j, i] = c
    return n, c1, c2


def sb_fill_indices(starts, lengths, n_rows):
    """Concatenate circular blocks ``start, start+1, ...`` (mod ``n_rows``), truncated to ``n_rows``."""
    starts = np.asarray(starts, dtype=np.int64)
    lengths = np.asarray(lengths, dtype=np.int64)
    block_of = np.repeat(np.arange(starts.size), lengths)[:n_rows]
    first = np.concatenate(([0], np.cumsum(lengths)[:-1]))
    within = np.arange(block_of.size) - first[block_of]
    return (starts[block_of] + within) % n_rows
