"""Cross-quantilogram estimation and inference for directional predictability."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .bootstrap import (SBConfig, bootstrap_ci, bootstrap_critical_value, bootstrap_distribution,
                        choose_gamma, optimal_block_length, sb_test)
from .cqgram import (CQResult, QuantileGrid, QuantilePair, cq_vector, cross_quantilogram,
                     default_grid, q_box_ljung, q_box_pierce, sup_q)
from .errors import *  # noqa: F401,F403
from .mc import ExperimentGrid, gen_dgp1, gen_dgp2, run_size_power
from .partial import ControlPanel, partial_cq, partial_sb_test, partial_sn_test
from .quantile import empirical_quantile, psi
from .report import TestReport
from .selfnorm import (CriticalValueTable, SNConfig, recursive_cq, simulate_sn_critical_values,
                       sn_test)
