"""Stationary bootstrap for the cross-quantilogram.

Resampling works on rows of an aligned panel ``(x1_t, x2_{t-1}, ..., x2_{t-p})``
so one resample serves every lag coherently.  Replicate ``b`` draws from the
random stream seeded by ``SeedSequence(seed, spawn_key=(b, retry))`` and is
therefore reproducible independently of how replicates are scheduled.
"""

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .cqgram import CQResult, _check_pair_inputs, cq_vector, portmanteau, rho_from_counts
from .errors import ConfigError, NumericalError
from .quantile import as_series, fuzzy_ceil, quantile_rank
from .report import TestReport

MAX_RETRIES = 10


@dataclass
class SBConfig:
    gamma: float | None = None  # None: choose_gamma on the data
    B: int = 250
    seed: int = 0
    tau: float = 0.05

    def __post_init__(self):
        if self.gamma is not None and not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"gamma must lie in (0, 1), got {self.gamma}")
        if int(self.B) < 1:
            raise ConfigError(f"B must be positive, got {self.B}")
        self.B = int(self.B)
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        self.seed = int(self.seed)
        if not 0.0 < self.tau < 1.0:
            raise ConfigError(f"tau must lie in (0, 1), got {self.tau}")


@dataclass
class AlignedPanel:
    rows: np.ndarray  # (T - p, ncol)

    @property
    def row_count(self):
        return self.rows.shape[0]


def aligned_panel(x1, x2, p, z=None):
    """Rows ``(x1_t, x2_{t-1}, ..., x2_{t-p}, z_t...)`` for ``t = p+1..T``."""
    x1, x2 = _check_pair_inputs(x1, x2)
    T = x1.size
    if not 1 <= p <= T - 2:
        raise ConfigError(f"p={p} outside 1..{T - 2}")
    cols = [x1[p:]] + [x2[p - k:T - k] for k in range(1, p + 1)]
    if z is not None:
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        cols += [zi[p:] for zi in z]
    return AlignedPanel(np.column_stack(cols))


def replicate_rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def sb_block_lengths(rng, needed_total, gamma):
    """Geometric(gamma) block lengths on {1, 2, ...} until their sum reaches ``needed_total``."""
    if not 0.0 < gamma < 1.0:
        raise ConfigError(f"gamma must lie in (0, 1), got {gamma}")
    chunk = max(8, int(needed_total * gamma * 1.5) + 8)
    out = []
    total = 0
    while total < needed_total:
        draws = rng.geometric(gamma, size=chunk)
        csum = total + np.cumsum(draws)
        stop = np.searchsorted(csum, needed_total)
        if stop < draws.size:
            out.append(draws[:stop + 1])
            total = int(csum[stop])
        else:
            out.append(draws)
            total = int(csum[-1])
    return np.concatenate(out).astype(np.int64)


def sb_indices(n_rows, gamma, rng):
    lengths = sb_block_lengths(rng, n_rows, gamma)
    starts = rng.integers(0, n_rows, size=lengths.size)
    return kernels.sb_fill_indices(starts, lengths, n_rows)


def sb_resample(panel, gamma, rng):
    """Stationary-bootstrap resample of panel rows, read circularly."""
    if panel.row_count == 0:
        raise ConfigError("cannot resample an empty panel")
    return AlignedPanel(panel.rows[sb_indices(panel.row_count, gamma, rng)])


# -- automatic block length -------------------------------------------------

def _flat_top(x):
    x = np.abs(x)
    return np.where(x <= 0.5, 1.0, np.where(x <= 1.0, 2.0 * (1.0 - x), 0.0))


def optimal_block_length(x):
    """Expected stationary-bootstrap block length by the flat-top lag-window rule.

    Politis and White (2004) with the Patton, Politis and White (2009)
    correction.  Returns NaN when the spectral estimate degenerates.
    """
    x = as_series(x)
    n = x.size
    eps = x - x.mean()
    kn = max(5, math.ceil(math.sqrt(math.log10(n))))
    m_max = math.ceil(math.sqrt(n)) + kn
    m_max = min(m_max, n - 1)
    b_max = math.ceil(min(3.0 * math.sqrt(n), n / 3.0))
    acv = np.array([eps[k:] @ eps[:n - k] for k in range(m_max + 1)]) / n
    if acv[0] <= 0:
        return float("nan")
    acorr = acv[1:] / acv[0]  # lags 1..m_max
    band = 2.0 * math.sqrt(math.log10(n) / n)
    insignificant = np.abs(acorr) < band
    m_hat = None
    for m in range(1, m_max - kn + 1):
        # lags m+1 .. m+kn all inside the band
        if insignificant[m:m + kn].all():
            m_hat = m
            break
    if m_hat is None:
        significant = np.flatnonzero(~insignificant)
        m_hat = int(significant[-1]) + 1 if significant.size else 1
    M = min(2 * m_hat, m_max)
    k = np.arange(-M, M + 1)
    lam = _flat_top(k / M)
    r = acv[np.abs(k)]
    g = np.sum(lam * np.abs(k) * r)
    d_sb = 2.0 * np.sum(lam * r) ** 2
    if not d_sb > 0 or not np.isfinite(g):
        return float("nan")
    b = (2.0 * g * g / d_sb) ** (1.0 / 3.0) * n ** (1.0 / 3.0)
    return float(min(max(b, 1.0), b_max))


def choose_gamma(x1, x2):
    """Average of ``1 / b_i`` over the two series, clamped to ``[1/T, 0.5]``."""
    x1, x2 = _check_pair_inputs(x1, x2)
    T = x1.size
    if T < 20:
        raise ConfigError(f"choose_gamma needs T >= 20, got {T}")
    b = [optimal_block_length(x1), optimal_block_length(x2)]
    if not all(np.isfinite(bi) and bi > 0 for bi in b):
        fallback = 1.0 / math.ceil(T ** (1.0 / 3.0))
        warnings.warn(f"block-length rule degenerate; using gamma={fallback:.4g}", RuntimeWarning,
                      stacklevel=2)
        return fallback
    gamma = 0.5 * (1.0 / b[0] + 1.0 / b[1])
    return float(min(max(gamma, 1.0 / T), 0.5))


# -- bootstrap distribution -------------------------------------------------

@dataclass
class BootstrapDistribution:
    rho_star: np.ndarray  # (B, p)
    q_star: np.ndarray  # (B,)
    rho_hat: CQResult
    gamma: float
    B: int
    seed: int
    variant: str = "BP"
    retries: list = field(default_factory=list)  # (replicate, attempts) for redrawn replicates

    @property
    def T(self):
        return self.rho_hat.T

    def q_star_for(self, p, variant=None):
        """Portmanteau of the first ``p`` lags of each replicate, centred at the estimate."""
        variant = variant or self.variant
        return centred_portmanteau(self.rho_star[:, :p], self.rho_hat.rho[:p], self.T, variant)


def centred_portmanteau(rho_star, rho_hat, T, variant):
    d2 = (rho_star - rho_hat) ** 2
    if variant == "BP":
        return T * d2.sum(axis=1)
    if variant == "LB":
        lags = np.arange(1, rho_star.shape[1] + 1)
        return T * (T + 2) * (d2 / (T - lags)).sum(axis=1)
    raise ConfigError(f"unknown portmanteau variant {variant!r}")


def _column_quantiles(block, a):
    """Empirical ``a`` quantile of each row of ``block`` (replicates x observations)."""
    m = quantile_rank(block.shape[1], a)
    return np.partition(block, m - 1, axis=1)[:, m - 1]


def resample_rho(rows, idx, a1, a2):
    """Quantilograms of resampled panels.

    ``idx`` is (R, n) row indices; quantiles are re-estimated on each
    resample, separately for each lag column.  Returns (R, p).
    """
    x1 = rows[idx, 0]
    ind1 = x1 < _column_quantiles(x1, a1)[:, None]
    c1 = np.count_nonzero(ind1, axis=1)
    n = idx.shape[1]
    p = rows.shape[1] - 1
    out = np.empty((idx.shape[0], p))
    for k in range(1, p + 1):
        x2 = rows[idx, k]
        ind2 = x2 < _column_quantiles(x2, a2)[:, None]
        out[:, k - 1] = rho_from_counts(n, c1, np.count_nonzero(ind2, axis=1),
                                        np.count_nonzero(ind1 & ind2, axis=1), a1, a2)
    return out


def _run_replicates(n_rows, gamma, seed, B, evaluate, workers=1, chunk=64):
    """Evaluate replicates in index order chunks; degenerate replicates are redrawn.

    ``evaluate(idx)`` maps an (R, n_rows) index matrix to an (R, ...) array
    whose rows are NaN where the replicate is degenerate.
    """
    def run_chunk(lo):
        hi = min(B, lo + chunk)
        idx = np.stack([sb_indices(n_rows, gamma, replicate_rng(seed, b, 0)) for b in range(lo, hi)])
        vals = evaluate(idx)
        log = []
        for r in range(hi - lo):
            attempt = 0
            while not np.all(np.isfinite(vals[r])):
                attempt += 1
                if attempt > MAX_RETRIES:
                    raise NumericalError(
                        f"bootstrap replicate {lo + r} degenerate after {MAX_RETRIES} redraws")
                redo = sb_indices(n_rows, gamma, replicate_rng(seed, lo + r, attempt))
                vals[r] = evaluate(redo[None, :])[0]
            if attempt:
                log.append((lo + r, attempt))
        return vals, log

    starts = list(range(0, B, chunk))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_chunk, starts))
    else:
        parts = [run_chunk(lo) for lo in starts]
    vals = np.concatenate([v for v, _ in parts])
    log = [entry for _, lg in parts for entry in lg]
    return vals, log


def bootstrap_distribution(x1, x2, p, pair, cfg, variant="BP", workers=1):
    """``B`` stationary-bootstrap draws of the quantilogram vector and its centred portmanteau."""
    x1, x2 = _check_pair_inputs(x1, x2)
    rho_hat = cq_vector(x1, x2, p, pair)
    gamma = cfg.gamma if cfg.gamma is not None else choose_gamma(x1, x2)
    panel = aligned_panel(x1, x2, p)
    rho_star, log = _run_replicates(
        panel.row_count, gamma, cfg.seed, cfg.B,
        lambda idx: resample_rho(panel.rows, idx, pair.a1, pair.a2), workers=workers)
    q_star = centred_portmanteau(rho_star, rho_hat.rho, rho_hat.T, variant)
    return BootstrapDistribution(rho_star, q_star, rho_hat, gamma, cfg.B, cfg.seed, variant, log)


def order_statistic_quantile(draws, level):
    """``inf{c : F_B(c) >= level}``, the ``ceil(level * B)``-th order statistic."""
    draws = np.sort(np.asarray(draws, dtype=np.float64), axis=0)
    B = draws.shape[0]
    m = min(B, max(1, fuzzy_ceil(level * B)))
    return draws[m - 1]


def bootstrap_critical_value(draws, tau):
    draws = np.asarray(draws, dtype=np.float64)
    if not 0.0 < tau < 1.0:
        raise ConfigError(f"tau must lie in (0, 1), got {tau}")
    if draws.size * tau < 1.0 - 1e-9:
        raise ConfigError(f"need at least 1/tau = {1 / tau:g} draws, got {draws.size}")
    return float(order_statistic_quantile(draws, 1.0 - tau))


def percentile_interval(centred, estimate, T, tau):
    """``[est + c_lo/sqrt(T), est + c_hi/sqrt(T)]`` from draws of ``sqrt(T)*(est* - est)``."""
    c_lo = order_statistic_quantile(centred, tau / 2.0)
    c_hi = order_statistic_quantile(centred, 1.0 - tau / 2.0)
    root = math.sqrt(T)
    return estimate + c_lo / root, estimate + c_hi / root


def bootstrap_ci(dist, rho_hat, tau):
    """Equal-tailed percentile intervals, one ``(low, high)`` per lag."""
    if dist.B < 2.0 / tau:
        raise ConfigError(f"B={dist.B} too small for tau={tau}; need B >= {math.ceil(2 / tau)}")
    T = rho_hat.T
    centred = math.sqrt(T) * (dist.rho_star - rho_hat.rho[None, :dist.rho_star.shape[1]])
    lo, hi = percentile_interval(centred, rho_hat.rho, T, tau)
    return list(zip(lo.tolist(), hi.tolist()))


def sb_test(x1, x2, p, pair, cfg, variant="LB", workers=1):
    """Portmanteau test of no directional predictability with a bootstrap critical value."""
    dist = bootstrap_distribution(x1, x2, p, pair, cfg, variant=variant, workers=workers)
    stat = portmanteau(dist.rho_hat, variant)
    crit = bootstrap_critical_value(dist.q_star, cfg.tau)
    ci = bootstrap_ci(dist, dist.rho_hat, cfg.tau) if cfg.B >= 2.0 / cfg.tau else None
    return TestReport(
        statistic=stat, critical_value=crit, reject=bool(stat > crit), method="SB",
        config={"p": p, "a1": pair.a1, "a2": pair.a2, "gamma": dist.gamma, "B": cfg.B,
                "seed": cfg.seed, "tau": cfg.tau, "variant": variant},
        rho=dist.rho_hat.rho.copy(), ci=ci,
        extra={"retries": dist.retries})
