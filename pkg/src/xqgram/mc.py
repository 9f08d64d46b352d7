"""Data-generating processes and the size/power experiment harness."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bootstrap import SBConfig, choose_gamma, sb_test
from .cqgram import QuantilePair
from .errors import ConfigError, XQGramError
from .selfnorm import CriticalValueTable, SNConfig, recursive_cq, sn_statistic

DGP2_SIGMA0 = 0.1 / (1.0 - 0.2)


def _rng(seed):
    return np.random.default_rng(seed)


def gen_dgp1(T, seed):
    """Two independent iid N(0, 1) series."""
    if T < 1:
        raise ConfigError(f"T must be positive, got {T}")
    e = _rng(seed).standard_normal((T, 2))
    return e[:, 0].copy(), e[:, 1].copy()


def gen_dgp2(T, burn_in=500, seed=0):
    """GARCH-X: ``x1_t = sigma_t e1_t`` with
    ``sigma_t^2 = 0.1 + 0.2 x1_{t-1}^2 + 0.2 sigma_{t-1}^2 + x2_{t-1}^2`` and iid N(0, 1) ``x2``."""
    if burn_in < 200:
        raise ConfigError(f"burn_in must be at least 200, got {burn_in}")
    if T < 1:
        raise ConfigError(f"T must be positive, got {T}")
    N = T + burn_in
    e = _rng(seed).standard_normal((N, 2))
    e1 = e[:, 0].tolist()
    x2 = e[:, 1]
    x2sq = (x2 * x2).tolist()
    x1 = [0.0] * N
    sig2 = DGP2_SIGMA0
    x1[0] = math.sqrt(sig2) * e1[0]
    for t in range(1, N):
        sig2 = 0.1 + 0.2 * x1[t - 1] ** 2 + 0.2 * sig2 + x2sq[t - 1]
        x1[t] = math.sqrt(sig2) * e1[t]
    return np.asarray(x1[burn_in:]), x2[burn_in:].copy()


def generate(dgp, T, seed, burn_in=500):
    if dgp == 1:
        return gen_dgp1(T, seed)
    if dgp == 2:
        return gen_dgp2(T, burn_in, seed)
    raise ConfigError(f"unknown DGP {dgp!r}; expected 1 or 2")


@dataclass
class ExperimentGrid:
    dgp: int
    method: str  # "SB" or "SN"
    T: list
    p: list
    alphas: list
    nrep: int = 300
    B: int = 250
    omega: float = 0.1
    tau: float = 0.05
    seed: int = 0
    gamma: float | None = None  # None: tuned per replication
    burn_in: int = 500
    table: CriticalValueTable | None = None
    workers: int = 1

    def __post_init__(self):
        self.method = self.method.upper()
        if self.method not in ("SB", "SN"):
            raise ConfigError(f"method must be SB or SN, got {self.method!r}")
        if self.dgp not in (1, 2):
            raise ConfigError(f"unknown DGP {self.dgp!r}; expected 1 or 2")
        self.T = [int(t) for t in np.atleast_1d(self.T)]
        self.p = sorted(int(q) for q in np.atleast_1d(self.p))
        self.alphas = [float(a) for a in np.atleast_1d(self.alphas)]
        if not (self.T and self.p and self.alphas):
            raise ConfigError("T, p and alpha lists must be nonempty")
        if min(self.T) < 50:
            raise ConfigError("T must be at least 50")
        if self.nrep < 1:
            raise ConfigError("nrep must be positive")


@dataclass
class Cell:
    dgp: int
    method: str
    T: int
    p: int
    alpha: float
    rejections: int = 0
    failures: int = 0
    nrep: int = 0
    B_or_table: str = ""
    seed: int = 0
    errors: list = field(default_factory=list, repr=False)

    @property
    def completed(self):
        return self.nrep - self.failures

    @property
    def reject_freq(self):
        return self.rejections / self.completed if self.completed else float("nan")

    @property
    def mc_se(self):
        f = self.reject_freq
        return math.sqrt(f * (1.0 - f) / self.completed) if self.completed else float("nan")

    @property
    def unreliable(self):
        return self.failures > 0.02 * self.nrep

    def record(self):
        return {"dgp": self.dgp, "method": self.method, "T": self.T, "p": self.p, "alpha": self.alpha,
                "reject_freq": self.reject_freq, "mc_se": self.mc_se, "nrep": self.nrep,
                "B_or_table": self.B_or_table, "seed": self.seed, "failures": self.failures,
                "unreliable": self.unreliable}


CSV_FIELDS = ["dgp", "method", "T", "p", "alpha", "reject_freq", "mc_se", "nrep", "B_or_table", "seed"]


def replication_seeds(seed, iT, r):
    """Data and bootstrap seeds of replication ``r`` at the ``iT``-th sample size."""
    ss = np.random.SeedSequence(seed, spawn_key=(iT, r))
    data_ss, boot_ss = ss.spawn(2)
    return data_ss, int(boot_ss.generate_state(1, np.uint64)[0])


def _one_replication(grid, iT, r, crit):
    """Reject flags keyed by (alpha, p), or an exception per key."""
    T = grid.T[iT]
    data_ss, boot_seed = replication_seeds(grid.seed, iT, r)
    x1, x2 = generate(grid.dgp, T, data_ss, grid.burn_in)
    out = {}
    if grid.method == "SB":
        gamma = grid.gamma if grid.gamma is not None else choose_gamma(x1, x2)
        cfg = SBConfig(gamma=gamma, B=grid.B, seed=boot_seed, tau=grid.tau)
        for a in grid.alphas:
            pair = QuantilePair(a, a)
            for p in grid.p:
                try:
                    out[(a, p)] = sb_test(x1, x2, p, pair, cfg, variant="LB").reject
                except XQGramError as exc:
                    out[(a, p)] = exc
    else:
        pmax = grid.p[-1]
        for a in grid.alphas:
            pair = QuantilePair(a, a)
            try:
                rec = recursive_cq(x1, x2, pmax, pair, grid.omega)
            except XQGramError as exc:
                for p in grid.p:
                    out[(a, p)] = exc
                continue
            for p in grid.p:
                try:
                    out[(a, p)] = sn_statistic(rec.truncate(p)) > crit[p]
                except XQGramError as exc:
                    out[(a, p)] = exc
    return out


def run_size_power(grid, progress=None):
    """Rejection frequencies for every (T, p, alpha) cell of the grid.

    Replication ``r`` at the ``iT``-th sample size draws its data from
    ``SeedSequence(seed, spawn_key=(iT, r))``; results are aggregated by
    index, so the table does not depend on ``workers``.
    """
    crit = {}
    if grid.method == "SN":
        table = grid.table if grid.table is not None else CriticalValueTable.default()
        cfg = SNConfig(grid.omega, grid.tau, table)
        crit = {p: cfg.critical_value(p) for p in grid.p}
        tag = f"table(omega={grid.omega:g})"
    else:
        tag = f"B={grid.B}"
    cells = {}
    for iT, T in enumerate(grid.T):
        for p in grid.p:
            for a in grid.alphas:
                cells[(T, p, a)] = Cell(grid.dgp, grid.method, T, p, a, nrep=grid.nrep,
                                        B_or_table=tag, seed=grid.seed)
        jobs = range(grid.nrep)
        if grid.workers > 1:
            with ThreadPoolExecutor(max_workers=grid.workers) as pool:
                results = list(pool.map(lambda r: _one_replication(grid, iT, r, crit), jobs))
        else:
            results = [_one_replication(grid, iT, r, crit) for r in jobs]
        for res in results:
            for (a, p), v in res.items():
                cell = cells[(T, p, a)]
                if isinstance(v, Exception):
                    cell.failures += 1
                    cell.errors.append(str(v))
                elif v:
                    cell.rejections += 1
        if progress:
            progress(T)
    return list(cells.values())


def format_table(cells):
    """Aligned text table: rows (T, p), columns alpha, entries ``freq (se)``."""
    alphas = sorted({c.alpha for c in cells})
    Ts = sorted({c.T for c in cells})
    ps = sorted({c.p for c in cells})
    by = {(c.T, c.p, c.alpha): c for c in cells}
    head = f"{'T':>6} {'p':>3} " + " ".join(f"{a:>15.2f}" for a in alphas)
    lines = [head, "-" * len(head)]
    for T in Ts:
        for p in ps:
            row = [f"{T:>6} {p:>3}"]
            for a in alphas:
                c = by.get((T, p, a))
                if c is None:
                    row.append(f"{'':>15}")
                else:
                    mark = "*" if c.unreliable else " "
                    row.append(f"{c.reject_freq:7.3f} ({c.mc_se:.3f}){mark}")
            lines.append(" ".join(row))
    if any(c.unreliable for c in cells):
        lines.append("* more than 2% of replications failed")
    return "\n".join(lines) + "\n"
