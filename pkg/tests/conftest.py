from fractions import Fraction

import numpy as np
import pytest

ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def naive_quantile(x, a):
    """Smallest sample point minimising the check loss, in exact rational arithmetic."""
    a = Fraction(str(a))
    xs = [Fraction(float(v)) for v in x]

    def loss(v):
        return sum((u - v) * (a - (1 if u < v else 0)) for u in xs)

    best = min(loss(v) for v in xs)
    return float(min(v for v in xs if loss(v) == best))


def naive_cq(x1, x2, k, a1, a2):
    """Direct transcription of the sample cross-quantilogram."""
    T = len(x1)
    q1 = naive_quantile(x1, a1)
    q2 = naive_quantile(x2, a2)
    psi1 = [(1.0 if x1[t] < q1 else 0.0) - a1 for t in range(T)]
    psi2 = [(1.0 if x2[t] < q2 else 0.0) - a2 for t in range(T)]
    num = sum(psi1[t] * psi2[t - k] for t in range(k, T))
    d1 = sum(psi1[t] ** 2 for t in range(k, T))
    d2 = sum(psi2[t - k] ** 2 for t in range(k, T))
    return num / (d1 ** 0.5 * d2 ** 0.5)
