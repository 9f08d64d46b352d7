"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line."""

import time

import numpy as np
import pytest

import invariants
from conftest import naive_cq, record_criterion
from xqgram.cli import RunConfig, cmd_cq
from xqgram.cqgram import QuantilePair, cross_quantilogram
from xqgram.io import read_records_csv
from xqgram.mc import ExperimentGrid, run_size_power
from xqgram.selfnorm import CriticalValueTable, simulate_sn_critical_values

SEED = 7


def rate(cells, T=None, alpha=None):
    (cell,) = [c for c in cells if (T is None or c.T == T) and (alpha is None or c.alpha == alpha)]
    return cell.reject_freq, cell.mc_se


@pytest.fixture(scope="module")
def dgp2_sb():
    return run_size_power(ExperimentGrid(dgp=2, method="SB", T=[2000], p=[1], alphas=[0.1, 0.5],
                                         nrep=200, B=250, seed=SEED))


def test_criterion_01_naive_oracle():
    rng = np.random.default_rng(SEED)
    grid = [round(0.1 * i, 1) for i in range(1, 10)]
    worst = 0.0
    start = time.perf_counter()
    for _ in range(500):
        T = int(rng.integers(8, 13))
        x1, x2 = rng.permutation(np.arange(2 * T) / 7.0 - 1.0).reshape(2, T)
        k = int(rng.integers(0, 4))
        a1, a2 = rng.choice(grid, 2)
        got = cross_quantilogram(x1, x2, k, QuantilePair(a1, a2))
        worst = max(worst, abs(got - naive_cq(x1, x2, k, a1, a2)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 5.0
    record_criterion(1, ok, f"500 pairs, max |diff| = {worst:.2e} (tol 1e-12), {elapsed:.2f} s (< 5 s)")
    assert ok


def test_criterion_02_bootstrap_size():
    cells = run_size_power(ExperimentGrid(dgp=1, method="SB", T=[1000], p=[1], alphas=[0.5],
                                          nrep=300, B=250, seed=SEED))
    f, se = rate(cells)
    ok = abs(f - 0.05) <= 0.035
    record_criterion(2, ok, f"DGP1 SB size {f:.3f} (se {se:.3f}); target 0.05 +/- 0.035")
    assert ok


def test_criterion_03_bootstrap_power(dgp2_sb):
    f, se = rate(dgp2_sb, alpha=0.1)
    ok = f >= 0.90
    record_criterion(3, ok, f"DGP2 SB power at alpha=0.1: {f:.3f} (se {se:.3f}); target >= 0.90")
    assert ok


def test_criterion_04_median_null(dgp2_sb):
    f, se = rate(dgp2_sb, alpha=0.5)
    ok = abs(f - 0.05) <= 0.05
    record_criterion(4, ok, f"DGP2 SB at median: {f:.3f} (se {se:.3f}); target 0.05 +/- 0.05")
    assert ok


def test_criterion_05_sn_size():
    cells = run_size_power(ExperimentGrid(dgp=1, method="SN", T=[2000], p=[1], alphas=[0.5],
                                          nrep=1000, omega=0.1, seed=SEED))
    f, se = rate(cells)
    ok = abs(f - 0.041) <= 0.02
    record_criterion(5, ok, f"DGP1 SN size {f:.3f} (se {se:.3f}); target 0.041 +/- 0.02")
    assert ok


def test_criterion_06_sn_power():
    cells = run_size_power(ExperimentGrid(dgp=2, method="SN", T=[2000], p=[1], alphas=[0.1],
                                          nrep=500, omega=0.1, seed=SEED))
    f, se = rate(cells)
    ok = abs(f - 0.842) <= 0.06
    record_criterion(6, ok, f"DGP2 SN power {f:.3f} (se {se:.3f}); target 0.842 +/- 0.06")
    assert ok


def test_criterion_07_tail_size_distortion():
    cells = run_size_power(ExperimentGrid(dgp=1, method="SN", T=[500, 1000, 2000], p=[1], alphas=[0.05],
                                          nrep=500, omega=0.1, seed=SEED))
    f = [rate(cells, T=T)[0] for T in (500, 1000, 2000)]
    ok = f[0] > f[1] > f[2]
    record_criterion(7, ok, "SN size at alpha=0.05 for T=500/1000/2000: "
                            + " > ".join(f"{v:.3f}" for v in f) + " (strictly decreasing)")
    assert ok


def test_criterion_08_invariance_suite():
    budget = {
        "monotone-transform invariance": 2500,
        "boundedness": 2000,
        "A-hat PSD": 1500,
        "Q_LB >= Q_BP": 2000,
        "recursive final row": 1000,
        "partial-correlation identity": 1000,
    }
    ran = {name: invariants.run(name, n) for name, n in budget.items()}
    total = sum(ran.values())
    ok = total >= 10_000
    record_criterion(8, ok, f"{total} randomised cases passed over {len(ran)} properties (>= 10000)")
    assert ok


def test_criterion_09_critical_value_stability():
    vals = [simulate_sn_critical_values(1, 0.1, [0.05], n_grid=1000, n_rep=100_000, seed=s).lookup(1, 0.1, 0.05)
            for s in range(5)]
    spread = (max(vals) - min(vals)) / np.median(vals)
    shipped = CriticalValueTable.default().lookup(1, 0.1, 0.05)
    vs_shipped = abs(shipped / np.mean(vals) - 1.0)
    ok = spread <= 0.02 and vs_shipped <= 0.02
    record_criterion(9, ok, f"5 seeds: {min(vals):.2f}..{max(vals):.2f}, spread {100 * spread:.2f}% (<= 2%); "
                            f"shipped {shipped:.2f} within {100 * vs_shipped:.2f}%")
    assert ok


def synthetic_returns_panel(T=2500, lag=12, seed=SEED):
    """Market and institution returns with Student-t tails; a market lower-tail event
    raises the chance of an institution lower-tail event ``lag`` periods later."""
    rng = np.random.default_rng(seed)
    mkt = rng.standard_t(4, T) * 0.01
    inst = rng.standard_t(4, T) * 0.015
    crash = mkt < np.quantile(mkt, 0.05)
    hit = np.zeros(T, dtype=bool)
    hit[lag:] = crash[:-lag] & (rng.uniform(size=T - lag) < 0.4)
    inst[hit] -= 0.06
    return inst, mkt


def test_criterion_10_peak_fields(tmp_path):
    inst, mkt = synthetic_returns_panel()
    path = tmp_path / "panel.csv"
    rows = ["date,JPM,VWRETD"] + [f"{i},{float(a)!r},{float(b)!r}" for i, (a, b) in enumerate(zip(inst, mkt))]
    path.write_text("\n".join(rows) + "\n")
    cfg = RunConfig(input=str(path), x1="JPM", x2="VWRETD", alpha1=[0.05], alpha2=[0.05],
                    lags=list(range(1, 61)), method="sb", B=250, seed=SEED, out=str(tmp_path / "out"))
    paths = cmd_cq(cfg)
    (summary,) = read_records_csv(paths["summary"])
    rho = read_records_csv(paths["rho"])
    ok = ({"peak_lag", "peak_value"} <= set(summary) and len(rho) == 60
          and summary["peak_lag"] == 12 and summary["peak_value"] == max(r["rho_hat"] for r in rho))
    record_criterion(10, ok, f"synthetic panel: peak_lag={summary.get('peak_lag'):g} (planted 12), "
                             f"peak_value={summary.get('peak_value'):.3f}")
    assert ok
