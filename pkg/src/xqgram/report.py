"""Test report shared by the bootstrap and self-normalised routes."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class TestReport:
    statistic: float
    critical_value: float
    reject: bool
    method: str  # "SB" or "SN"
    config: dict
    rho: np.ndarray | None = None
    ci: list | None = None  # per-lag (low, high)
    extra: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def to_dict(self):
        return {
            "statistic": float(self.statistic),
            "critical_value": float(self.critical_value),
            "reject": bool(self.reject),
            "method": self.method,
            "config": dict(self.config),
            "rho": None if self.rho is None else [float(r) for r in np.ravel(self.rho)],
            "ci": None if self.ci is None else [[float(lo), float(hi)] for lo, hi in self.ci],
            "extra": self.extra,
        }
