"""Sample cross-quantilogram and its portmanteau statistics.

All quantilogram values are computed from integer hit counts.  With
``I1_t = 1[x1_t < q1]`` and ``I2_t = 1[x2_{t-k} < q2]`` over the window
``t = k+1..T`` the hit products expand to

    sum psi1*psi2 = C12 - a2*C1 - a1*C2 + n*a1*a2
    sum psi1**2   = C1*(1 - 2*a1) + n*a1**2

so every code path (full sample, recursive subsamples, bootstrap replicates,
compiled or pure Python) funnels through :func:`rho_from_counts` and agrees
bit-for-bit once the counts agree.
"""

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError, ZeroDenominator
from .quantile import as_series, check_level, empirical_quantile


@dataclass(frozen=True)
class QuantilePair:
    a1: float  # level for the predicted series x1
    a2: float  # level for the predicting series x2

    def __post_init__(self):
        object.__setattr__(self, "a1", check_level(self.a1, "a1"))
        object.__setattr__(self, "a2", check_level(self.a2, "a2"))

    def __str__(self):
        return f"({self.a1:g}, {self.a2:g})"


@dataclass(frozen=True)
class QuantileGrid:
    pairs: tuple

    def __post_init__(self):
        pairs = tuple(p if isinstance(p, QuantilePair) else QuantilePair(*p) for p in self.pairs)
        if not pairs:
            raise ConfigError("quantile grid is empty")
        if len(set(pairs)) != len(pairs):
            raise ConfigError("quantile grid has duplicate pairs")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def product(cls, a1s: Sequence[float], a2s: Sequence[float]):
        return cls(tuple(QuantilePair(a1, a2) for a2 in a2s for a1 in a1s))

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self):
        return len(self.pairs)


def default_grid(a2=0.5):
    """``a1`` in 0.05, 0.10, ..., 0.95 against a fixed ``a2``."""
    return QuantileGrid.product([round(0.05 * i, 2) for i in range(1, 20)], [a2])


@dataclass
class CQResult:
    rho: np.ndarray  # rho[k-1] for k = 1..p
    pair: QuantilePair
    T: int
    n: np.ndarray = field(repr=False)  # window length per lag
    hits1: np.ndarray = field(repr=False)  # #{t : x1_t < q1} per lag window
    hits2: np.ndarray = field(repr=False)  # #{t : x2_{t-k} < q2} per lag window
    joint: np.ndarray = field(repr=False)  # joint hits per lag window

    @property
    def p(self):
        return int(self.rho.size)

    @property
    def lags(self):
        return np.arange(1, self.p + 1)

    def truncate(self, p):
        if not 1 <= p <= self.p:
            raise ConfigError(f"cannot truncate a {self.p}-lag result to p={p}")
        return CQResult(self.rho[:p].copy(), self.pair, self.T,
                        self.n[:p], self.hits1[:p], self.hits2[:p], self.joint[:p])


def rho_from_counts(n, c1, c2, c12, a1, a2):
    """Quantilogram from hit counts; NaN where the window is empty.

    Arguments broadcast, so this serves scalars, per-lag vectors and
    replicate-by-lag matrices alike.
    """
    n = np.asarray(n, dtype=np.float64)
    c1 = np.asarray(c1, dtype=np.float64)
    c2 = np.asarray(c2, dtype=np.float64)
    c12 = np.asarray(c12, dtype=np.float64)
    # Same operation order in all three sums, so identical hit sequences give
    # num == d1 == d2 exactly and rho == 1.
    num = c12 - a2 * c1 - a1 * c2 + n * (a1 * a2)
    d1 = c1 - a1 * c1 - a1 * c1 + n * (a1 * a1)
    d2 = c2 - a2 * c2 - a2 * c2 + n * (a2 * a2)
    den = np.sqrt(d1 * d2)
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)
    # Cauchy-Schwarz holds exactly; rounding can push |rho| a ulp past 1.
    return np.clip(rho, -1.0, 1.0)


def lagged_counts(ind1, ind2, k):
    """Hit counts over ``t = k+1..T`` pairing ``ind1[t]`` with ``ind2[t-k]``."""
    T = ind1.size
    a = ind1[k:]
    b = ind2[:T - k]
    return (T - k, int(np.count_nonzero(a)), int(np.count_nonzero(b)),
            int(np.count_nonzero(a & b)))


def hit_indicators(x, a):
    """Boolean ``x_t < q(a)`` with ``q`` the full-sample empirical quantile."""
    return x < empirical_quantile(x, a)


def _check_pair_inputs(x1, x2):
    x1 = as_series(x1, "x1")
    x2 = as_series(x2, "x2")
    if x1.size != x2.size:
        raise DataError(f"x1 and x2 differ in length ({x1.size} vs {x2.size})")
    return x1, x2


def cross_quantilogram(x1, x2, k, pair):
    """Sample cross-quantilogram between ``x1_t`` and ``x2_{t-k}``."""
    x1, x2 = _check_pair_inputs(x1, x2)
    T = x1.size
    k = int(k)
    if not 0 <= k <= T - 2:
        raise ConfigError(f"lag k={k} outside 0..{T - 2}")
    ind1 = hit_indicators(x1, pair.a1)
    ind2 = hit_indicators(x2, pair.a2)
    rho = rho_from_counts(*lagged_counts(ind1, ind2, k), pair.a1, pair.a2)
    if np.isnan(rho):
        raise ZeroDenominator(lag=k, pair=pair)
    return float(rho)


def cq_vector(x1, x2, p, pair):
    """Quantilograms for lags ``1..p``."""
    x1, x2 = _check_pair_inputs(x1, x2)
    T = x1.size
    p = int(p)
    if not 1 <= p <= T - 2:
        raise ConfigError(f"max lag p={p} outside 1..{T - 2}")
    ind1 = hit_indicators(x1, pair.a1)
    ind2 = hit_indicators(x2, pair.a2)
    counts = np.array([lagged_counts(ind1, ind2, k) for k in range(1, p + 1)], dtype=np.int64)
    rho = rho_from_counts(counts[:, 0], counts[:, 1], counts[:, 2], counts[:, 3], pair.a1, pair.a2)
    bad = np.flatnonzero(np.isnan(rho))
    if bad.size:
        raise ZeroDenominator(lag=int(bad[0]) + 1, pair=pair)
    return CQResult(rho, pair, T, counts[:, 0], counts[:, 1], counts[:, 2], counts[:, 3])


def q_box_pierce(res):
    return float(res.T * np.sum(res.rho ** 2))


def q_box_ljung(res):
    T = res.T
    return float(T * (T + 2) * np.sum(res.rho ** 2 / (T - res.lags)))


def portmanteau(res, variant="LB"):
    if variant == "LB":
        return q_box_ljung(res)
    if variant == "BP":
        return q_box_pierce(res)
    raise ConfigError(f"unknown portmanteau variant {variant!r}")


def sup_q(x1, x2, p, grid, variant="LB"):
    """Largest portmanteau statistic over a quantile grid.

    Returns ``(value, pair)``; ties go to the earliest pair in grid order.
    Pairs whose quantilogram is undefined are skipped with a warning.
    """
    best = None
    excluded = []
    for pair in grid:
        try:
            q = portmanteau(cq_vector(x1, x2, p, pair), variant)
        except ZeroDenominator as exc:
            excluded.append((pair, exc))
            continue
        if best is None or q > best[0]:
            best = (q, pair)
    for pair, exc in excluded:
        warnings.warn(f"excluded quantile pair {pair} from sup-Q: {exc}", RuntimeWarning, stacklevel=2)
    if best is None:
        raise ZeroDenominator(detail="every pair in the grid is degenerate")
    return best
