import math

import numpy as np
import pytest

from xqgram.bootstrap import SBConfig
from xqgram.cqgram import QuantilePair, cross_quantilogram
from xqgram.errors import ConfigError, SingularHitMatrix
from xqgram.partial import (ControlPanel, hit_correlation, hit_vectors, partial_cq,
                            partial_from_precision, partial_sb_test, partial_sn_statistic,
                            partial_sn_test, recursive_partial)

PAIR = QuantilePair(0.2, 0.2)


def closed_form_partial(R):
    """Partial correlation of components 1 and 2 given 3 from the normalised second moments."""
    d = np.sqrt(np.diag(R))
    r = R / np.outer(d, d)
    return (r[0, 1] - r[0, 2] * r[1, 2]) / math.sqrt((1 - r[0, 2] ** 2) * (1 - r[1, 2] ** 2))


def test_three_by_three_closed_form(rng):
    for _ in range(50):
        h = rng.standard_normal((60, 3))
        hm = hit_correlation(h, 60)
        assert partial_from_precision(hm.P) == pytest.approx(closed_form_partial(hm.R), abs=1e-12)
        assert np.array_equal(hm.R, hm.R.T)


def test_hit_vectors_layout(rng):
    x1, x2, z = rng.standard_normal((3, 50))
    cp = ControlPanel(z, 0.9, ("vix",))
    h = hit_vectors(x1, x2, cp, 2, PAIR)
    assert h.shape == (48, 3)
    assert set(np.round(h[:, 2], 12)) <= {0.1, -0.9}


def test_independent_control_leaves_quantilogram_close(rng):
    x1, x2, z = rng.standard_normal((3, 3000))
    x1[1:] += x2[:-1]
    cp = ControlPanel(z, 0.5)
    plain = cross_quantilogram(x1, x2, 1, PAIR)
    assert partial_cq(x1, x2, cp, 1, PAIR) == pytest.approx(plain, abs=0.02)


def test_control_explains_dependence(rng):
    # x1 and lagged x2 both load on a common control: partialling it out removes the link
    T = 4000
    c = rng.standard_normal(T)
    x2 = np.r_[c[1:], 0.0] + 0.3 * rng.standard_normal(T)
    x1 = c + 0.3 * rng.standard_normal(T)
    cp = ControlPanel(c, 0.5)
    assert cross_quantilogram(x1, x2, 1, QuantilePair(0.5, 0.5)) > 0.3
    assert abs(partial_cq(x1, x2, cp, 1, QuantilePair(0.5, 0.5))) < \
        cross_quantilogram(x1, x2, 1, QuantilePair(0.5, 0.5))


def test_duplicate_controls_are_singular(rng):
    x1, x2, z = rng.standard_normal((3, 200))
    cp = ControlPanel(np.stack([z, z]), 0.5, ("vix", "vix_copy"))
    with pytest.raises(SingularHitMatrix, match="vix_copy"):
        partial_cq(x1, x2, cp, 1, PAIR)


def test_beta_count_mismatch(rng):
    with pytest.raises(ConfigError):
        ControlPanel(rng.standard_normal((2, 30)), [0.5, 0.5, 0.5])


def test_recursive_final_row(rng):
    x1, x2, z = rng.standard_normal((3, 300))
    cp = ControlPanel(z, 0.7)
    s0, vals = recursive_partial(x1, x2, cp, 2, PAIR, 0.1)
    assert s0 == 30
    assert vals[-1] == pytest.approx(partial_cq(x1, x2, cp, 2, PAIR), abs=1e-12)
    mid = 150
    assert vals[mid - s0] == pytest.approx(
        partial_cq(x1[:mid], x2[:mid], ControlPanel(z[:mid], 0.7), 2, PAIR), abs=1e-12)


def test_sn_route(rng):
    x1, x2, z = rng.standard_normal((3, 800))
    cp = ControlPanel(z, 0.5)
    stat, est, dropped, A = partial_sn_statistic(x1, x2, cp, 1, PAIR, 0.1, return_normalizer=True)
    assert stat == pytest.approx(math.sqrt(800) * est / math.sqrt(A))
    rep = partial_sn_test(x1, x2, cp, 1, PAIR)
    assert rep.statistic == stat and rep.critical_value > 0


def test_sb_route(rng):
    x1, x2, z = rng.standard_normal((3, 600))
    x1[1:] += 1.5 * x2[:-1]
    cp = ControlPanel(z, 0.5)
    rep = partial_sb_test(x1, x2, cp, 1, PAIR, SBConfig(gamma=0.3, B=200, seed=4))
    lo, hi = rep.ci[0]
    assert lo <= rep.rho[0] <= hi
    assert rep.reject
