"""Partial cross-quantilogram: hit dependence after projecting out control hits."""

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .bootstrap import _run_replicates, choose_gamma, percentile_interval
from .cqgram import _check_pair_inputs
from .errors import ConfigError, DataError, DegenerateNormalizer, SingularHitMatrix
from .quantile import as_series, check_level, empirical_quantile, prefix_quantiles, quantile_rank, subsample_start
from .report import TestReport
from .selfnorm import COND_LIMIT, SNConfig, stream_order


@dataclass
class ControlPanel:
    z: np.ndarray  # (l, T)
    beta: tuple
    names: tuple = ()

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.float64)
        if z.ndim == 1:
            z = z[None, :]
        self.z = np.stack([as_series(zi, f"z{i + 1}") for i, zi in enumerate(z)])
        beta = np.atleast_1d(np.asarray(self.beta, dtype=np.float64))
        if beta.size == 1 and self.z.shape[0] > 1:
            beta = np.repeat(beta, self.z.shape[0])
        if beta.size != self.z.shape[0]:
            raise ConfigError(f"{beta.size} beta levels for {self.z.shape[0]} controls")
        self.beta = tuple(check_level(b, "beta") for b in beta)
        if not self.names:
            self.names = tuple(f"z{i + 1}" for i in range(self.z.shape[0]))

    @property
    def l(self):
        return self.z.shape[0]

    @property
    def T(self):
        return self.z.shape[1]


@dataclass
class HitMatrix:
    R: np.ndarray
    P: np.ndarray | None
    layout: tuple  # component names in hit-vector order


def _inputs(x1, x2, z):
    x1, x2 = _check_pair_inputs(x1, x2)
    if not isinstance(z, ControlPanel):
        raise ConfigError("controls must be given as a ControlPanel")
    if z.T != x1.size:
        raise DataError(f"controls have length {z.T}, series have {x1.size}")
    return x1, x2


def hit_vectors(x1, x2, z, k, pair):
    """Rows ``[psi(x1_t), psi(x2_{t-k}), psi(z_t)...]`` for ``t = k+1..T`` at full-sample quantiles."""
    x1, x2 = _inputs(x1, x2, z)
    T = x1.size
    if not 1 <= k <= T - 2:
        raise ConfigError(f"lag k={k} outside 1..{T - 2}")
    cols = [(x1[k:] < empirical_quantile(x1, pair.a1)) - pair.a1,
            (x2[:T - k] < empirical_quantile(x2, pair.a2)) - pair.a2]
    for zi, b in zip(z.z, z.beta):
        cols.append((zi[k:] < empirical_quantile(zi, b)) - b)
    return np.column_stack(cols).astype(np.float64)


def _invert(R, layout):
    if not np.all(np.isfinite(R)) or np.linalg.cond(R) > COND_LIMIT:
        raise SingularHitMatrix(
            f"hit correlation matrix is singular (components: {', '.join(layout)}); "
            "controls may be collinear with the series or have degenerate hits")
    return np.linalg.inv(R)


def hit_correlation(hits, T, layout=None):
    """``R = T^-1 sum_t h_t h_t'`` (divisor T, not the number of rows) and its inverse."""
    hits = np.asarray(hits, dtype=np.float64)
    if hits.ndim != 2 or hits.shape[0] == 0:
        raise ConfigError("hits must be a nonempty (rows, components) array")
    d = hits.shape[1]
    layout = tuple(layout) if layout else ("x1", "x2") + tuple(f"z{i + 1}" for i in range(d - 2))
    R = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            R[i, j] = R[j, i] = float(hits[:, i] @ hits[:, j]) / T
    return HitMatrix(R, _invert(R, layout), layout)


def partial_from_precision(P):
    """``-P12 / sqrt(P11 * P22)``; accepts stacked matrices."""
    P = np.asarray(P)
    return -P[..., 0, 1] / np.sqrt(P[..., 0, 0] * P[..., 1, 1])


def partial_cq(x1, x2, z, k, pair):
    hits = hit_vectors(x1, x2, z, k, pair)
    hm = hit_correlation(hits, len(x1), ("x1", "x2") + z.names)
    return float(np.clip(partial_from_precision(hm.P), -1.0, 1.0))


# -- stationary bootstrap ----------------------------------------------------

def _partial_rows(x1, x2, z, k):
    T = x1.size
    return np.column_stack([x1[k:], x2[:T - k]] + [zi[k:] for zi in z.z])


def resample_partial(rows, idx, levels):
    """Partial quantilograms of resampled rows with per-resample quantiles; NaN when singular."""
    R_count, n = idx.shape
    d = rows.shape[1]
    h = np.empty((R_count, n, d))
    m = [quantile_rank(n, a) for a in levels]
    for j, a in enumerate(levels):
        col = rows[idx, j]
        q = np.partition(col, m[j] - 1, axis=1)[:, m[j] - 1]
        h[:, :, j] = (col < q[:, None]) - a
    R = np.einsum("rti,rtj->rij", h, h) / n
    R = 0.5 * (R + np.swapaxes(R, 1, 2))
    out = np.full(R_count, np.nan)
    cond = np.linalg.cond(R)
    ok = np.isfinite(cond) & (cond <= COND_LIMIT)
    if ok.any():
        out[ok] = np.clip(partial_from_precision(np.linalg.inv(R[ok])), -1.0, 1.0)
    return out[:, None]


def partial_sb_test(x1, x2, z, k, pair, cfg, workers=1):
    """Two-sided bootstrap test of zero partial quantilogram at lag ``k``.

    Rejects when the equal-tailed percentile interval excludes zero.
    """
    x1, x2 = _inputs(x1, x2, z)
    T = x1.size
    est = partial_cq(x1, x2, z, k, pair)
    gamma = cfg.gamma if cfg.gamma is not None else choose_gamma(x1, x2)
    rows = _partial_rows(x1, x2, z, k)
    levels = (pair.a1, pair.a2) + z.beta
    draws, log = _run_replicates(rows.shape[0], gamma, cfg.seed, cfg.B,
                                 lambda idx: resample_partial(rows, idx, levels), workers=workers)
    draws = draws[:, 0]
    if cfg.B < 2.0 / cfg.tau:
        raise ConfigError(f"B={cfg.B} too small for tau={cfg.tau}")
    centred = math.sqrt(T) * (draws - est)
    lo, hi = percentile_interval(centred, est, T, cfg.tau)
    reject = bool(lo > 0.0 or hi < 0.0)
    return TestReport(
        statistic=est, critical_value=float("nan"), reject=reject, method="SB",
        config={"k": k, "a1": pair.a1, "a2": pair.a2, "beta": list(z.beta), "gamma": gamma,
                "B": cfg.B, "seed": cfg.seed, "tau": cfg.tau},
        rho=np.array([est]), ci=[(float(lo), float(hi))],
        extra={"retries": log, "draws": draws})


# -- self-normalised ---------------------------------------------------------

def recursive_partial(x1, x2, z, k, pair, omega):
    """Partial quantilograms of every prefix ``s = ceil(T*omega)..T`` with prefix quantiles
    for all components.  Returns ``(s0, values)``; singular subsamples are NaN."""
    x1, x2 = _inputs(x1, x2, z)
    T = x1.size
    s0 = subsample_start(T, omega)
    if s0 <= k + 2:
        raise ConfigError(f"ceil(T*omega) = {s0} must exceed k + 2 = {k + 2}")
    levels = np.array((pair.a1, pair.a2) + z.beta)
    vals = np.vstack([x1, x2, z.z])
    quants = np.stack([prefix_quantiles(v, a) for v, a in zip(vals, levels)])
    offsets = np.zeros(vals.shape[0], dtype=np.int64)
    offsets[1] = k
    order, srt = stream_order(vals)
    n, c1, c2 = kernels.recursive_counts(vals, quants, offsets, s0, order, srt)
    n = n.astype(np.float64)[:, None, None]
    c1 = c1.astype(np.float64)
    ai = levels[None, :, None]
    aj = levels[None, None, :]
    # sum_t psi_i psi_j from counts; the common divisor cancels in the partial
    R = c2 - aj * c1[:, :, None] - ai * c1[:, None, :] + n * (ai * aj)
    R = 0.5 * (R + np.swapaxes(R, 1, 2))
    out = np.full(R.shape[0], np.nan)
    with np.errstate(invalid="ignore"):
        cond = np.linalg.cond(R)
    ok = np.isfinite(cond) & (cond <= COND_LIMIT)
    if ok.any():
        out[ok] = np.clip(partial_from_precision(np.linalg.inv(R[ok])), -1.0, 1.0)
    return s0, out


def partial_sn_statistic(x1, x2, z, k, pair, omega, return_normalizer=False):
    """``sqrt(T) * rho_T / sqrt(A)`` with ``A = T^-2 sum_s s^2 (rho_s - rho_T)^2``.

    Returns ``(stat, rho_T, dropped)``, plus ``A`` when ``return_normalizer``."""
    T = len(x1)
    s0, vals = recursive_partial(x1, x2, z, k, pair, omega)
    if np.isnan(vals[-1]):
        raise SingularHitMatrix("full-sample hit correlation matrix is singular")
    full = vals[-1]
    keep = ~np.isnan(vals)
    s = np.arange(s0, T + 1)[keep].astype(np.float64)
    A = float(np.sum((s * (vals[keep] - full)) ** 2)) / float(T) ** 2
    if not A > 0.0:
        raise DegenerateNormalizer("recursive partial quantilograms are constant; normaliser is zero")
    stat = math.sqrt(T) * full / math.sqrt(A)
    dropped = int(np.count_nonzero(~keep))
    return (stat, full, dropped, A) if return_normalizer else (stat, full, dropped)


def partial_sn_test(x1, x2, z, k, pair, cfg=None):
    """Two-sided self-normalised test; the critical value is the square root of the
    one-lag portmanteau entry, since the statistic squared has that limit."""
    cfg = cfg or SNConfig()
    crit = math.sqrt(cfg.critical_value(1))
    stat, est, dropped = partial_sn_statistic(x1, x2, z, k, pair, cfg.omega)
    return TestReport(
        statistic=stat, critical_value=crit, reject=bool(abs(stat) > crit), method="SN",
        config={"k": k, "a1": pair.a1, "a2": pair.a2, "beta": list(z.beta),
                "omega": cfg.omega, "tau": cfg.tau},
        rho=np.array([est]), extra={"dropped_subsamples": dropped})
