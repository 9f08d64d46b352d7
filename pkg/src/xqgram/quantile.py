"""Unconditional sample quantiles via the check-loss program."""

import heapq
import math

import numpy as np

from .errors import ConfigError, DataError

# Relative slack when turning n*a into an integer rank; 10 * 0.7 evaluates to
# 7.000000000000001 in binary floating point and must still give rank 7.
_RANK_RTOL = 1e-12


def fuzzy_ceil(x):
    """``ceil(x)`` that treats values within a relative 1e-12 of an integer as that integer."""
    return math.ceil(x * (1.0 - _RANK_RTOL)) if x > 0 else math.ceil(x)


def quantile_rank(n, a):
    """1-based order-statistic index of the ``a`` quantile in a sample of size ``n``."""
    return max(1, fuzzy_ceil(n * a))


def check_level(a, name="a"):
    a = float(a)
    if not 0.0 < a < 1.0:
        raise ConfigError(f"{name} must lie in (0, 1), got {a}")
    return a


def as_series(x, name="x", min_length=2):
    """Validate and return ``x`` as a 1-d float64 array of finite values."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DataError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise DataError(f"{name} is empty")
    if arr.size < min_length:
        raise DataError(f"{name} needs at least {min_length} observations, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise DataError(f"{name} has a non-finite value at position {bad}")
    return arr


def check_loss(u, a):
    """Koenker-Bassett check function ``u * (a - 1[u < 0])``."""
    u = np.asarray(u, dtype=np.float64)
    out = u * (a - (u < 0))
    return float(out) if out.ndim == 0 else out


def psi(u, a):
    """Quantile hit ``1[u < 0] - a``; the inequality is strict so ``psi(0, a) == -a``."""
    u = np.asarray(u, dtype=np.float64)
    out = (u < 0) - a
    return float(out) if out.ndim == 0 else out


def empirical_quantile(x, a):
    """Smallest minimiser of ``sum(check_loss(x - v, a))``.

    This is the order statistic ``x_(m)`` with ``m = ceil(T * a)``, the left
    end of the minimiser interval when ``T * a`` is an integer.
    """
    a = check_level(a)
    x = as_series(x, min_length=1)
    m = quantile_rank(x.size, a)
    return float(np.partition(x, m - 1)[m - 1])


def prefix_quantiles(x, a):
    """Quantiles of every prefix ``x[:s]`` for ``s = 1..T``.

    Two heaps hold the lower ``m_s`` and upper ``s - m_s`` elements; ``m_s``
    grows by at most one per step, so each update costs O(log T).
    """
    a = check_level(a)
    x = as_series(x, min_length=1)
    lower = []  # max-heap via negation, holds the m_s smallest values
    upper = []
    out = np.empty(x.size)
    for i, v in enumerate(x.tolist()):
        s = i + 1
        if lower and v < -lower[0]:
            heapq.heappush(lower, -v)
        else:
            heapq.heappush(upper, v)
        m = quantile_rank(s, a)
        while len(lower) > m:
            heapq.heappush(upper, -heapq.heappop(lower))
        while len(lower) < m:
            heapq.heappush(lower, -heapq.heappop(upper))
        out[i] = -lower[0]
    return out


def subsample_start(T, omega):
    """First subsample size ``ceil(T * omega)`` used by the recursive estimates."""
    omega = float(omega)
    if not 0.0 < omega < 1.0:
        raise ConfigError(f"omega must lie in (0, 1), got {omega}")
    return max(1, fuzzy_ceil(T * omega))


def recursive_quantiles(x, a, omega):
    """Prefix quantiles for ``s = ceil(T*omega) .. T``; the last entry is the full-sample quantile."""
    x = as_series(x)
    s0 = subsample_start(x.size, omega)
    if s0 < 2:
        raise ConfigError(f"ceil(T*omega) = {s0} must be at least 2")
    return prefix_quantiles(x, a)[s0 - 1:]
