"""Command-line interface.

Subcommands: ``cq`` (quantilograms, bands and portmanteau tests), ``partial``
(partial quantilograms under controls), ``mc`` (size/power experiments) and
``critvals`` (regenerate the self-normalised critical-value table).

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
degeneracy.
"""

import argparse
import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bootstrap import (SBConfig, bootstrap_ci, bootstrap_critical_value, bootstrap_distribution,
                        choose_gamma)
from .cqgram import QuantilePair, cq_vector, q_box_ljung
from .errors import ConfigError, XQGramError
from .io import atomic_write_text, ingest_csv, write_records
from .mc import CSV_FIELDS, ExperimentGrid, format_table, run_size_power
from .partial import ControlPanel, partial_cq, partial_sb_test, partial_sn_statistic
from .selfnorm import (CriticalValueTable, SNConfig, a_hat, recursive_cq, s_statistic,
                       simulate_sn_critical_values, sn_intervals)

RHO_FIELDS = ["alpha1", "alpha2", "k", "rho_hat", "ci_low", "ci_high"]
Q_FIELDS = ["alpha1", "alpha2", "p", "Q", "critical_value"]
SUMMARY_FIELDS = ["alpha1", "alpha2", "peak_lag", "peak_value", "method", "gamma"]
PARTIAL_FIELDS = ["alpha1", "alpha2", "beta", "k", "partial_rho", "ci_low", "ci_high",
                  "rho_hat", "statistic", "critical_value", "reject"]


# -- argument parsing helpers ----------------------------------------------

def parse_float_list(text, name="value"):
    """Comma list of floats; ``a:b:step`` ranges and ``a,b,...,z`` progressions are expanded."""
    if text is None:
        return None
    text = text.replace("…", "...")
    parts = [p.strip() for p in text.split(",") if p.strip()]
    try:
        if len(parts) == 1 and parts[0].count(":") == 2:
            lo, hi, step = (float(v) for v in parts[0].split(":"))
            n = int(math.floor((hi - lo) / step + 1e-9)) + 1
            return [round(lo + i * step, 10) for i in range(n)]
        if "..." in parts:
            i = parts.index("...")
            if i < 2 or i != len(parts) - 2:
                raise ConfigError(f"{name}: write progressions as a,b,...,z")
            head = [float(p) for p in parts[:i]]
            last = float(parts[-1])
            step = head[1] - head[0]
            if step <= 0:
                raise ConfigError(f"{name}: progression must increase")
            n = int(math.floor((last - head[0]) / step + 1e-9)) + 1
            return [round(head[0] + j * step, 10) for j in range(n)]
        return [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"cannot parse {name} list {text!r}") from None


def parse_int_list(text, name="value"):
    """Comma list of ints with ``a-b`` ranges."""
    if text is None:
        return None
    out = []
    for part in (p.strip() for p in text.split(",")):
        if not part:
            continue
        try:
            if "-" in part:
                lo, hi = (int(v) for v in part.split("-"))
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise ConfigError(f"cannot parse {name} list {text!r}") from None
    return out


@dataclass
class RunConfig:
    input: str = ""
    x1: str = ""
    x2: str = ""
    controls: list = field(default_factory=list)
    alpha1: list = field(default_factory=lambda: [0.5])
    alpha2: list = field(default_factory=lambda: [0.5])
    beta: list = field(default_factory=list)
    lags: list = field(default_factory=list)
    p: list = field(default_factory=list)
    method: str = "sb"
    B: int = 1000
    gamma: float | None = None
    omega: float = 0.1
    tau: float = 0.05
    seed: int = 0
    out: str = "."
    format: str = "csv"

    def validate(self):
        if not self.lags:
            raise ConfigError("lag range is empty")
        if min(self.lags) < 1:
            raise ConfigError("lags must be positive")
        if not self.alpha1 or not self.alpha2:
            raise ConfigError("alpha lists must be nonempty")
        for a in self.alpha1 + self.alpha2 + list(self.beta):
            if not 0.0 < a < 1.0:
                raise ConfigError(f"quantile level {a} outside (0, 1)")
        if self.method not in ("sb", "sn"):
            raise ConfigError(f"method must be sb or sn, got {self.method!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        return self

    @property
    def max_lag(self):
        return max(self.lags)

    def pairs(self):
        return [QuantilePair(a1, a2) for a2 in self.alpha2 for a1 in self.alpha1]

    def sb(self, gamma=None):
        return SBConfig(gamma=self.gamma if gamma is None else gamma, B=self.B, seed=self.seed, tau=self.tau)

    def sn(self):
        return SNConfig(omega=self.omega, tau=self.tau, table=CriticalValueTable.default())


def config_hash(payload):
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def _file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _echo(cfg, kind):
    d = asdict(cfg)
    d.pop("out")
    d["command"] = kind
    d["input_sha256"] = _file_digest(cfg.input) if cfg.input and Path(cfg.input).is_file() else None
    d["version"] = __version__
    return d


def _emit(cfg, kind, tables, echo):
    """Write each ``name -> (records, fields)`` table plus the config echo; returns paths."""
    h = config_hash(echo)
    out = Path(cfg.out)
    ext = cfg.format
    paths = {}
    for name, (records, fields) in tables.items():
        paths[name] = write_records(out / f"{kind}-{h}-{name}.{ext}", records, fields, cfg.format)
    paths["config"] = out / f"{kind}-{h}-config.json"
    atomic_write_text(paths["config"], json.dumps(echo, indent=1, sort_keys=True) + "\n")
    return paths


def _load_pair(cfg):
    cols = ingest_csv(cfg.input, [cfg.x1, cfg.x2] + list(cfg.controls))
    return cols


# -- commands -----------------------------------------------------------------

def cmd_cq(cfg):
    """Quantilograms over lags and quantile pairs with SB or SN bands and portmanteau tests."""
    cfg.validate()
    cols = _load_pair(cfg)
    x1, x2 = cols[cfg.x1], cols[cfg.x2]
    T = x1.size
    if cfg.max_lag > T - 2:
        raise ConfigError(f"max lag {cfg.max_lag} too large for T={T}")
    ps = cfg.p or list(range(1, cfg.max_lag + 1))
    if max(ps) > cfg.max_lag:
        raise ConfigError("portmanteau p exceeds the maximum lag")
    rho_recs, q_recs, summary = [], [], []
    gamma = None
    if cfg.method == "sb":
        gamma = cfg.gamma if cfg.gamma is not None else choose_gamma(x1, x2)
        sbcfg = cfg.sb(gamma)
    else:
        sncfg = cfg.sn()
        c1 = sncfg.critical_value(1)
        p_cap = sncfg.table.max_p(cfg.omega, cfg.tau)
    for pair in cfg.pairs():
        try:
            if cfg.method == "sb":
                dist = bootstrap_distribution(x1, x2, cfg.max_lag, pair, sbcfg, variant="LB")
                res = dist.rho_hat
                bands = bootstrap_ci(dist, res, cfg.tau)
                for p in ps:
                    q_recs.append({"alpha1": pair.a1, "alpha2": pair.a2, "p": p,
                                   "Q": q_box_ljung(res.truncate(p)),
                                   "critical_value": bootstrap_critical_value(dist.q_star_for(p, "LB"), cfg.tau)})
            else:
                rec = recursive_cq(x1, x2, cfg.max_lag, pair, cfg.omega)
                res = rec.full
                bands = sn_intervals(rec, c1)
                for p in ps:
                    if p > p_cap:
                        continue
                    sub = rec.truncate(p)
                    q_recs.append({"alpha1": pair.a1, "alpha2": pair.a2, "p": p,
                                   "Q": s_statistic(sub.full, a_hat(sub)),
                                   "critical_value": sncfg.critical_value(p)})
        except XQGramError as exc:
            raise type(exc)(f"quantile pair {pair}: {exc}") from exc
        emitted = sorted(set(cfg.lags))
        for k in emitted:
            lo, hi = bands[k - 1]
            rho_recs.append({"alpha1": pair.a1, "alpha2": pair.a2, "k": k,
                             "rho_hat": float(res.rho[k - 1]), "ci_low": lo, "ci_high": hi})
        vals = np.array([res.rho[k - 1] for k in emitted])
        i = int(np.argmax(np.abs(vals)))
        summary.append({"alpha1": pair.a1, "alpha2": pair.a2, "peak_lag": emitted[i],
                        "peak_value": float(vals[i]), "method": cfg.method, "gamma": gamma})
    echo = _echo(cfg, "cq")
    return _emit(cfg, "cq", {"rho": (rho_recs, RHO_FIELDS), "portmanteau": (q_recs, Q_FIELDS),
                             "summary": (summary, SUMMARY_FIELDS)}, echo)


def cmd_partial(cfg):
    """Partial quantilograms per lag with the plain quantilogram alongside."""
    cfg.validate()
    if not cfg.controls:
        raise ConfigError("partial requires at least one --controls column")
    beta = cfg.beta or [0.5]
    cols = _load_pair(cfg)
    x1, x2 = cols[cfg.x1], cols[cfg.x2]
    T = x1.size
    if cfg.max_lag > T - 2:
        raise ConfigError(f"max lag {cfg.max_lag} too large for T={T}")
    z = ControlPanel(np.stack([cols[c] for c in cfg.controls]), beta, tuple(cfg.controls))
    gamma = None
    if cfg.method == "sb":
        gamma = cfg.gamma if cfg.gamma is not None else choose_gamma(x1, x2)
    else:
        sncfg = cfg.sn()
        crit = math.sqrt(sncfg.critical_value(1))
    recs = []
    for pair in cfg.pairs():
        plain = cq_vector(x1, x2, cfg.max_lag, pair).rho
        for k in sorted(set(cfg.lags)):
            try:
                if cfg.method == "sb":
                    rep = partial_sb_test(x1, x2, z, k, pair, cfg.sb(gamma))
                    est = float(rep.rho[0])
                    lo, hi = rep.ci[0]
                    stat, cval, reject = est, float("nan"), rep.reject
                else:
                    stat, est, _, A = partial_sn_statistic(x1, x2, z, k, pair, cfg.omega, return_normalizer=True)
                    half = crit * math.sqrt(A / T)
                    lo, hi = est - half, est + half
                    cval, reject = crit, abs(stat) > crit
            except XQGramError as exc:
                raise type(exc)(f"quantile pair {pair}, k={k}: {exc}") from exc
            recs.append({"alpha1": pair.a1, "alpha2": pair.a2, "beta": ";".join(f"{b:g}" for b in z.beta),
                         "k": k, "partial_rho": est, "ci_low": lo, "ci_high": hi,
                         "rho_hat": float(plain[k - 1]), "statistic": stat,
                         "critical_value": cval, "reject": bool(reject)})
    echo = _echo(cfg, "partial")
    echo["gamma_used"] = gamma
    return _emit(cfg, "partial", {"rho": (recs, PARTIAL_FIELDS)}, echo)


def cmd_mc(args):
    grid = ExperimentGrid(
        dgp=args.dgp, method=args.method.upper(), T=args.T, p=args.p, alphas=args.alpha,
        nrep=args.nrep, B=args.B, omega=args.omega, tau=args.tau, seed=args.seed,
        gamma=args.gamma, burn_in=args.burn_in, workers=args.workers)
    cells = run_size_power(grid)
    echo = {"command": "mc", "dgp": grid.dgp, "method": grid.method, "T": grid.T, "p": grid.p,
            "alpha": grid.alphas, "nrep": grid.nrep, "B": grid.B, "omega": grid.omega, "tau": grid.tau,
            "seed": grid.seed, "gamma": grid.gamma, "burn_in": grid.burn_in, "format": args.format,
            "version": __version__}
    h = config_hash(echo)
    out = Path(args.out)
    paths = {"table": write_records(out / f"mc-{h}.{args.format}", [c.record() for c in cells],
                                    CSV_FIELDS + ["failures", "unreliable"], args.format)}
    paths["text"] = out / f"mc-{h}.txt"
    atomic_write_text(paths["text"], format_table(cells))
    paths["config"] = out / f"mc-{h}-config.json"
    atomic_write_text(paths["config"], json.dumps(echo, indent=1, sort_keys=True) + "\n")
    return paths, cells


def cmd_simulate_critvals(p_list, omega_list, tau_list, n_grid, n_rep, seed, out):
    table = simulate_sn_critical_values(p_list, omega_list, tau_list, n_grid, n_rep, seed)
    out = Path(out)
    if out.is_dir() or str(out).endswith("/"):
        echo = {"p": p_list, "omega": omega_list, "tau": tau_list, "n_grid": n_grid,
                "n_rep": n_rep, "seed": seed}
        out = out / f"critvals-{config_hash(echo)}.txt"
    table.save(out)
    return out, table


# -- argparse -----------------------------------------------------------------

def _add_common(sp, default_B):
    sp.add_argument("--input", required=True, help="CSV file with a header row")
    sp.add_argument("--x1", required=True, help="column of the predicted series")
    sp.add_argument("--x2", required=True, help="column of the predicting series")
    sp.add_argument("--alpha1", default="0.5", help="levels for x1: list, a:b:step or a,b,...,z")
    sp.add_argument("--alpha2", default="0.5", help="levels for x2")
    sp.add_argument("--max-lag", type=int, default=None, dest="max_lag")
    sp.add_argument("--lags", default=None, help="lags to report, e.g. 1-60 or 1,5,12")
    sp.add_argument("--p", default=None, help="portmanteau orders, e.g. 1-10")
    sp.add_argument("--method", choices=["sb", "sn"], default="sb")
    sp.add_argument("--B", type=int, default=default_B)
    sp.add_argument("--gamma", type=float, default=None, help="SB parameter; omit for automatic choice")
    sp.add_argument("--omega", type=float, default=0.1)
    sp.add_argument("--tau", type=float, default=0.05)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default=".")
    sp.add_argument("--format", choices=["csv", "json"], default="csv")


def build_parser():
    ap = argparse.ArgumentParser(prog="xqgram", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("cq", help="cross-quantilograms, bands and portmanteau tests")
    _add_common(sp, 1000)

    sp = sub.add_parser("partial", help="partial cross-quantilograms with controls")
    _add_common(sp, 1000)
    sp.add_argument("--controls", required=True, help="comma-separated control columns")
    sp.add_argument("--beta", default="0.5", help="quantile level per control (or one for all)")

    sp = sub.add_parser("mc", help="Monte Carlo size/power experiment")
    sp.add_argument("--dgp", type=int, choices=[1, 2], required=True)
    sp.add_argument("--method", choices=["sb", "sn"], default="sb")
    sp.add_argument("--T", default="500,1000,2000")
    sp.add_argument("--p", default="1")
    sp.add_argument("--alpha", default="0.5")
    sp.add_argument("--nrep", type=int, default=300)
    sp.add_argument("--B", type=int, default=250)
    sp.add_argument("--gamma", type=float, default=None)
    sp.add_argument("--omega", type=float, default=0.1)
    sp.add_argument("--tau", type=float, default=0.05)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--burn-in", type=int, default=500, dest="burn_in")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out", default=".")
    sp.add_argument("--format", choices=["csv", "json"], default="csv")

    sp = sub.add_parser("critvals", help="simulate self-normalised critical values")
    sp.add_argument("--p", default="1-10")
    sp.add_argument("--omega", default="0.05,0.1")
    sp.add_argument("--tau", default="0.1,0.05,0.01")
    sp.add_argument("--n-grid", type=int, default=1000, dest="n_grid")
    sp.add_argument("--n-rep", type=int, default=50_000, dest="n_rep")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default="critvals.txt", help="output file, or a directory")
    return ap


def run_config_from_args(args):
    lags = parse_int_list(args.lags, "lags")
    if not lags:
        if args.max_lag is None:
            raise ConfigError("give --max-lag or --lags")
        lags = list(range(1, args.max_lag + 1))
    elif args.max_lag is not None:
        lags = [k for k in lags if k <= args.max_lag]
    return RunConfig(
        input=args.input, x1=args.x1, x2=args.x2,
        controls=[c.strip() for c in getattr(args, "controls", "").split(",") if c.strip()],
        alpha1=parse_float_list(args.alpha1, "alpha1"), alpha2=parse_float_list(args.alpha2, "alpha2"),
        beta=parse_float_list(getattr(args, "beta", None), "beta") or [],
        lags=lags, p=parse_int_list(args.p, "p") or [], method=args.method, B=args.B,
        gamma=args.gamma, omega=args.omega, tau=args.tau, seed=args.seed, out=args.out,
        format=args.format)


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.command in ("cq", "partial"):
            cfg = run_config_from_args(args)
            paths = cmd_cq(cfg) if args.command == "cq" else cmd_partial(cfg)
        elif args.command == "mc":
            args.T = parse_int_list(args.T, "T")
            args.p = parse_int_list(args.p, "p")
            args.alpha = parse_float_list(args.alpha, "alpha")
            paths, cells = cmd_mc(args)
            sys.stdout.write(format_table(cells))
        else:
            out, _ = cmd_simulate_critvals(parse_int_list(args.p, "p"), parse_float_list(args.omega, "omega"),
                                           parse_float_list(args.tau, "tau"), args.n_grid, args.n_rep,
                                           args.seed, args.out)
            paths = {"table": out}
    except XQGramError as exc:
        print(f"xqgram {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
