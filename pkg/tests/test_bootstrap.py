import math

import numpy as np
import pytest
from scipy import stats

from xqgram.bootstrap import (SBConfig, aligned_panel, bootstrap_ci, bootstrap_critical_value,
                              bootstrap_distribution, choose_gamma, optimal_block_length,
                              order_statistic_quantile, percentile_interval, replicate_rng,
                              resample_rho, sb_block_lengths, sb_indices, sb_resample, sb_test)
from xqgram.cqgram import QuantilePair, cq_vector
from xqgram.errors import ConfigError


def ar1(rng, n, phi):
    e = rng.standard_normal(n + 200)
    x = np.empty_like(e)
    x[0] = e[0]
    for t in range(1, e.size):
        x[t] = phi * x[t - 1] + e[t]
    return x[200:]


def test_block_lengths_are_geometric():
    rng = np.random.default_rng(1)
    gamma = 0.15
    draws = np.concatenate([sb_block_lengths(rng, 500, gamma) for _ in range(400)])
    top = 25
    counts = np.array([np.sum(draws == j) for j in range(1, top)] + [np.sum(draws >= top)])
    pmf = np.array([(1 - gamma) ** (j - 1) * gamma for j in range(1, top)] + [(1 - gamma) ** (top - 1)])
    assert stats.chisquare(counts, pmf * draws.size).pvalue > 0.001
    assert draws.mean() == pytest.approx(1 / gamma, rel=0.05)


def test_block_lengths_cover_needed_total():
    rng = np.random.default_rng(2)
    for total in (1, 7, 100):
        lengths = sb_block_lengths(rng, total, 0.3)
        assert lengths.sum() >= total
        assert lengths[:-1].sum() < total


def test_block_starts_uniform():
    rng = np.random.default_rng(3)
    n = 10
    firsts = [sb_indices(n, 0.5, rng)[0] for _ in range(5000)]
    counts = np.bincount(firsts, minlength=n)
    assert stats.chisquare(counts).pvalue > 0.001


def test_resample_preserves_rows(rng):
    x1, x2 = rng.standard_normal((2, 40))
    panel = aligned_panel(x1, x2, 3)
    assert panel.rows.shape == (37, 4)
    assert panel.rows[0].tolist() == [x1[3], x2[2], x2[1], x2[0]]
    res = sb_resample(panel, 0.2, replicate_rng(0, 1))
    rows = {tuple(r) for r in panel.rows}
    assert all(tuple(r) in rows for r in res.rows)


def test_resample_rho_without_resampling_matches_estimate(rng):
    # the identity resample gives the quantilogram of the aligned rows, each column with its own quantile
    x1, x2 = rng.standard_normal((2, 80))
    p = 3
    panel = aligned_panel(x1, x2, p)
    idx = np.arange(panel.row_count)[None, :]
    got = resample_rho(panel.rows, idx, 0.3, 0.3)[0]
    for k in range(1, p + 1):
        y1, y2 = panel.rows[:, 0], panel.rows[:, k]
        h1 = (y1 < np.sort(y1)[math.ceil(0.3 * y1.size) - 1]) - 0.3
        h2 = (y2 < np.sort(y2)[math.ceil(0.3 * y2.size) - 1]) - 0.3
        assert got[k - 1] == pytest.approx(h1 @ h2 / math.sqrt((h1 @ h1) * (h2 @ h2)), abs=1e-12)


@pytest.mark.parametrize("phi", [0.3, 0.6, 0.9])
def test_block_length_against_arch(phi):
    arch = pytest.importorskip("arch.bootstrap")
    ours, ref = [], []
    for seed in range(5):
        x = ar1(np.random.default_rng(seed), 2000, phi)
        ours.append(optimal_block_length(x))
        ref.append(float(arch.optimal_block_length(x)["stationary"].iloc[0]))
    # the two differ only in the lag at which the insignificance window is anchored
    assert np.mean(ours) == pytest.approx(np.mean(ref), rel=0.15)


def test_block_length_grows_with_persistence():
    rng = np.random.default_rng(5)
    b = [optimal_block_length(ar1(rng, 3000, phi)) for phi in (0.0, 0.5, 0.9)]
    assert b[0] < b[1] < b[2]
    assert 1.0 <= b[0] <= 3.0


def test_choose_gamma_bounds(rng):
    x1, x2 = rng.standard_normal((2, 500))
    g = choose_gamma(x1, x2)
    assert 1 / 500 <= g <= 0.5
    with pytest.raises(ConfigError):
        choose_gamma(x1[:10], x2[:10])


def test_order_statistic_convention():
    draws = np.arange(1.0, 101.0)
    assert order_statistic_quantile(draws, 0.95) == 95.0
    assert bootstrap_critical_value(draws, 0.05) == 95.0
    assert bootstrap_critical_value(np.arange(1.0, 251.0), 0.05) == 238.0
    with pytest.raises(ConfigError):
        bootstrap_critical_value(np.arange(10.0), 0.05)


def test_percentile_interval_orientation():
    centred = np.linspace(-1.0, 1.0, 201) + 0.5
    lo, hi = percentile_interval(centred, 0.1, 100, 0.1)
    assert lo == pytest.approx(0.1 + (-0.9 + 0.5) / 10)
    assert hi == pytest.approx(0.1 + (0.9 + 0.5) / 10)


def test_distribution_reproducible_and_worker_free(rng):
    x1, x2 = rng.standard_normal((2, 300))
    cfg = SBConfig(gamma=0.2, B=100, seed=11)
    pair = QuantilePair(0.2, 0.2)
    a = bootstrap_distribution(x1, x2, 3, pair, cfg)
    b = bootstrap_distribution(x1, x2, 3, pair, cfg, workers=3)
    np.testing.assert_array_equal(a.rho_star, b.rho_star)
    c = bootstrap_distribution(x1, x2, 3, pair, SBConfig(gamma=0.2, B=100, seed=12))
    assert not np.array_equal(a.rho_star, c.rho_star)
    # prefix property: a larger B extends the same replicate sequence
    d = bootstrap_distribution(x1, x2, 3, pair, SBConfig(gamma=0.2, B=150, seed=11))
    np.testing.assert_array_equal(a.rho_star, d.rho_star[:100])


def test_ci_brackets_estimate_under_null(rng):
    x1, x2 = rng.standard_normal((2, 400))
    dist = bootstrap_distribution(x1, x2, 4, QuantilePair(0.5, 0.5), SBConfig(gamma=0.3, B=200, seed=1))
    ci = bootstrap_ci(dist, dist.rho_hat, 0.05)
    assert all(lo <= hi for lo, hi in ci)
    with pytest.raises(ConfigError):
        bootstrap_ci(dist, dist.rho_hat, 0.001)


def test_sb_test_detects_planted_dependence(rng):
    T = 800
    x2 = rng.standard_normal(T)
    x1 = rng.standard_normal(T)
    x1[1:] += 1.5 * x2[:-1]
    rep = sb_test(x1, x2, 2, QuantilePair(0.1, 0.1), SBConfig(B=200, seed=3))
    assert rep.reject
    assert rep.statistic > rep.critical_value
    assert rep.to_dict()["method"] == "SB"


def test_config_validation():
    with pytest.raises(ConfigError):
        SBConfig(gamma=1.5)
    with pytest.raises(ConfigError):
        SBConfig(B=0)
    with pytest.raises(ConfigError):
        SBConfig(tau=1.0)
