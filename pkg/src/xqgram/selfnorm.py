"""Self-normalised portmanteau test built from recursive subsample quantilograms."""

import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import optimize, special

from ._backend import kernels
from .bootstrap import order_statistic_quantile
from .cqgram import CQResult, _check_pair_inputs, cq_vector, rho_from_counts
from .errors import (ConfigError, DataError, MissingTableEntry, SingularNormalizer,
                     ZeroDenominator)
from .quantile import prefix_quantiles, subsample_start
from .report import TestReport

TABLE_ENV = "XQGRAM_CRITVAL_TABLE"
TABLE_VERSION = 1
COND_LIMIT = 1e12
MIN_GRID = 500
MIN_REP = 10_000


@dataclass
class RecursiveCQ:
    rho_s: np.ndarray  # (S, p); row i is subsample s = s0 + i; NaN rows are degenerate
    s0: int
    T: int
    omega: float
    full: CQResult

    @property
    def s_values(self):
        return np.arange(self.s0, self.T + 1)

    @property
    def p(self):
        return self.rho_s.shape[1]

    @property
    def n_missing(self):
        return int(np.count_nonzero(np.isnan(self.rho_s).any(axis=1)))

    def truncate(self, p):
        return RecursiveCQ(self.rho_s[:, :p].copy(), self.s0, self.T, self.omega, self.full.truncate(p))


def stream_order(vals):
    order = np.argsort(vals, axis=1, kind="stable")
    return order, np.take_along_axis(vals, order, axis=1)


def recursive_cq(x1, x2, p, pair, omega=0.1):
    """Quantilograms of every prefix ``x[:s]``, ``s = ceil(T*omega)..T``, with prefix quantiles."""
    x1, x2 = _check_pair_inputs(x1, x2)
    T = x1.size
    s0 = subsample_start(T, omega)
    if s0 <= p + 2:
        raise ConfigError(f"ceil(T*omega) = {s0} must exceed p + 2 = {p + 2}")
    full = cq_vector(x1, x2, p, pair)
    vals = np.stack([x1, x2])
    quants = np.stack([prefix_quantiles(x1, pair.a1), prefix_quantiles(x2, pair.a2)])
    order, srt = stream_order(vals)
    rho_s = np.empty((T - s0 + 1, p))
    for k in range(1, p + 1):
        n, c1, c2 = kernels.recursive_counts(vals, quants, np.array([0, k]), s0, order, srt)
        rho_s[:, k - 1] = rho_from_counts(n, c1[:, 0], c1[:, 1], c2[:, 0, 1], pair.a1, pair.a2)
    if np.isnan(rho_s[-1]).any():
        raise ZeroDenominator(pair=pair, detail="full-sample row is degenerate")
    return RecursiveCQ(rho_s, s0, T, float(omega), full)


def a_hat(rec, T=None, omega=None):
    """``T^-2 * sum_s s^2 (rho_s - rho)(rho_s - rho)'``; degenerate rows are skipped."""
    T = rec.T if T is None else T
    if T != rec.T or (omega is not None and subsample_start(T, omega) != rec.s0):
        raise ConfigError("T/omega do not match the recursive estimates")
    dev = rec.rho_s - rec.full.rho[None, :]
    keep = ~np.isnan(dev).any(axis=1)
    s = rec.s_values[keep].astype(np.float64)
    w = dev[keep] * s[:, None]
    A = (w.T @ w) / float(T) ** 2
    return 0.5 * (A + A.T)


def s_statistic(rho, A):
    """``T * rho' A^-1 rho``."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    r = np.asarray(rho.rho, dtype=np.float64)
    if A.shape != (r.size, r.size):
        raise ConfigError(f"normaliser shape {A.shape} does not match p={r.size}")
    if not np.all(np.isfinite(A)) or np.linalg.cond(A) > COND_LIMIT:
        raise SingularNormalizer("self-normaliser is numerically singular; T too small or hits degenerate")
    return float(max(rho.T * r @ np.linalg.solve(A, r), 0.0))


# -- critical values --------------------------------------------------------

def _key(p, omega, tau):
    return int(p), round(float(omega), 10), round(float(tau), 10)


@dataclass
class CriticalValueTable:
    entries: dict = field(default_factory=dict)  # (p, omega, tau) -> value
    provenance: dict = field(default_factory=dict)  # (p, omega, tau) -> (n_grid, n_rep, seed)

    def add(self, p, omega, tau, value, n_grid, n_rep, seed):
        k = _key(p, omega, tau)
        self.entries[k] = float(value)
        self.provenance[k] = (int(n_grid), int(n_rep), int(seed))

    def merge(self, other):
        self.entries.update(other.entries)
        self.provenance.update(other.provenance)
        return self

    def lookup(self, p, omega, tau):
        try:
            return self.entries[_key(p, omega, tau)]
        except KeyError:
            raise MissingTableEntry(
                f"no critical value for p={p}, omega={omega}, tau={tau}; "
                "generate one with `xqgram critvals`") from None

    def max_p(self, omega, tau):
        ps = [k[0] for k in self.entries if k[1:] == _key(1, omega, tau)[1:]]
        return max(ps) if ps else 0

    def to_text(self):
        lines = [f"# xqgram critical values v{TABLE_VERSION}",
                 "# p omega tau value n_grid n_rep seed"]
        for k in sorted(self.entries):
            n_grid, n_rep, seed = self.provenance[k]
            lines.append(f"{k[0]} {k[1]!r} {k[2]!r} {self.entries[k]!r} {n_grid} {n_rep} {seed}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        table = cls()
        lines = text.splitlines()
        if not lines or not lines[0].startswith("# xqgram critical values v"):
            raise DataError("not an xqgram critical value table")
        version = int(lines[0].rsplit("v", 1)[1])
        if version != TABLE_VERSION:
            raise DataError(f"unsupported table version {version}")
        for ln in lines[1:]:
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            p, omega, tau, value, n_grid, n_rep, seed = ln.split()
            table.add(int(p), float(omega), float(tau), float(value), int(n_grid), int(n_rep), int(seed))
        return table

    def save(self, path):
        from .io import atomic_write_text
        atomic_write_text(path, self.to_text())

    @classmethod
    def load(cls, path):
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def default(cls):
        """Table from ``$XQGRAM_CRITVAL_TABLE`` or the one shipped with the package."""
        override = os.environ.get(TABLE_ENV)
        if override:
            return cls.load(override)
        return cls.from_text(resources.files("xqgram").joinpath("data/critvals.txt").read_text("utf-8"))


def _simulate(p, omegas, n_grid, n_rep, seed, chunk):
    ps = sorted({int(d) for d in np.atleast_1d(p)})
    omegas = [float(w) for w in np.atleast_1d(omegas)]
    if n_grid < MIN_GRID:
        raise ConfigError(f"n_grid must be at least {MIN_GRID}, got {n_grid}")
    if n_rep < MIN_REP:
        raise ConfigError(f"n_rep must be at least {MIN_REP}, got {n_rep}")
    if not ps or ps[0] < 1:
        raise ConfigError("p must be positive")
    for w in omegas:
        if not 0.0 < w < 1.0:
            raise ConfigError(f"omega must lie in (0, 1), got {w}")
    dim = ps[-1]
    chunk = chunk or max(1, 1_000_000 // (n_grid * dim))
    r = np.arange(1, n_grid + 1) / n_grid
    first = {w: subsample_start(n_grid, w) - 1 for w in omegas}
    out = {(d, w): np.empty(n_rep) for d in ps for w in omegas}
    a11 = {w: np.empty(n_rep) for w in omegas}
    for c, lo in enumerate(range(0, n_rep, chunk)):
        hi = min(n_rep, lo + chunk)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(c,)))
        W = np.cumsum(rng.standard_normal((hi - lo, n_grid, dim)), axis=1) / math.sqrt(n_grid)
        W1 = W[:, -1, :]
        bridge = W - r[None, :, None] * W1[:, None, :]
        for w in omegas:
            tail = bridge[:, first[w]:, :]
            A = np.einsum("cip,ciq->cpq", tail, tail) / n_grid
            a11[w][lo:hi] = A[:, 0, 0]
            for d in ps:
                if d == 1:
                    stat = W1[:, 0] ** 2 / A[:, 0, 0]
                else:
                    sol = np.linalg.solve(A[:, :d, :d], W1[:, :d, None])[..., 0]
                    stat = np.einsum("cp,cp->c", W1[:, :d], sol)
                out[(d, w)][lo:hi] = stat
    return out, a11


def simulate_limit(p, omegas, n_grid=1000, n_rep=50_000, seed=0, chunk=None):
    """Draws of ``W(1)' A^-1 W(1)`` with ``A = int_omega^1 (W(r) - rW(1))(W(r) - rW(1))' dr``.

    ``W`` is a ``max(p)``-dimensional Brownian motion on an ``n_grid`` point
    partition of [0, 1]; dimension ``d`` statistics use its first ``d``
    coordinates.  Returns ``{(d, omega): draws}``.  Chunk ``c`` uses the
    stream ``SeedSequence(seed, spawn_key=(c,))``.
    """
    return _simulate(p, omegas, n_grid, n_rep, seed, chunk)[0]


def conditional_quantile(a, tau):
    """``c`` solving ``mean(P(Z^2 > c * a_i)) = tau`` for standard normal ``Z``.

    The bridge ``W(r) - rW(1)`` is independent of ``W(1)``, so given the
    normaliser ``a`` the one-dimensional statistic is ``Z^2 / a`` and its tail
    probability is ``erfc(sqrt(c * a / 2))``.  Averaging that exact
    probability instead of indicator draws removes the ``Z`` noise.
    """
    a = np.asarray(a, dtype=np.float64)

    def excess(c):
        return float(np.mean(special.erfc(np.sqrt(0.5 * c * a)))) - tau

    lo = hi = float(np.median(1.0 / a))
    while excess(lo) < 0.0:
        lo *= 0.5
    while excess(hi) > 0.0:
        hi *= 2.0
    return optimize.brentq(excess, lo, hi, xtol=1e-12, rtol=1e-14)


def simulate_sn_critical_values(p, omega, tau_list, n_grid=1000, n_rep=50_000, seed=0):
    """Simulated ``(1 - tau)`` quantiles of the self-normalised limit.

    ``p`` and ``omega`` may be scalars or sequences; all combinations share
    the same Brownian paths.  One-lag entries integrate the numerator out
    exactly (:func:`conditional_quantile`); longer ones use the order
    statistic of the simulated draws.
    """
    taus = [float(t) for t in np.atleast_1d(tau_list)]
    for tau in taus:
        if not 0.0 < tau < 1.0:
            raise ConfigError(f"tau must lie in (0, 1), got {tau}")
    draws, a11 = _simulate(p, omega, n_grid, n_rep, seed, None)
    table = CriticalValueTable()
    for (d, w), stats in draws.items():
        for tau in taus:
            if d == 1:
                value = conditional_quantile(a11[w], tau)
            else:
                value = float(order_statistic_quantile(stats, 1.0 - tau))
            table.add(d, w, tau, value, n_grid, n_rep, seed)
    return table


# -- test -------------------------------------------------------------------

@dataclass
class SNConfig:
    omega: float = 0.1
    tau: float = 0.05
    table: CriticalValueTable | None = None

    def __post_init__(self):
        if not 0.0 < self.omega < 1.0:
            raise ConfigError(f"omega must lie in (0, 1), got {self.omega}")
        if not 0.0 < self.tau < 1.0:
            raise ConfigError(f"tau must lie in (0, 1), got {self.tau}")

    def critical_value(self, p):
        table = self.table if self.table is not None else _default_table()
        return table.lookup(p, self.omega, self.tau)


_DEFAULT_TABLE = None


def _default_table():
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None or os.environ.get(TABLE_ENV):
        _DEFAULT_TABLE = CriticalValueTable.default()
    return _DEFAULT_TABLE


def sn_statistic(rec):
    return s_statistic(rec.full, a_hat(rec))


def sn_test(x1, x2, p, pair, cfg=None):
    cfg = cfg or SNConfig()
    crit = cfg.critical_value(p)
    rec = recursive_cq(x1, x2, p, pair, cfg.omega)
    stat = sn_statistic(rec)
    return TestReport(
        statistic=stat, critical_value=crit, reject=bool(stat > crit), method="SN",
        config={"p": p, "a1": pair.a1, "a2": pair.a2, "omega": cfg.omega, "tau": cfg.tau},
        rho=rec.full.rho.copy(), extra={"dropped_subsamples": rec.n_missing})


def sn_intervals(rec, crit_p1):
    """Per-lag bands ``rho(k) +/- sqrt(c * A_kk / T)`` from the one-lag normaliser."""
    A = np.diag(a_hat(rec))
    half = np.sqrt(crit_p1 * A / rec.T)
    return list(zip((rec.full.rho - half).tolist(), (rec.full.rho + half).tolist()))
