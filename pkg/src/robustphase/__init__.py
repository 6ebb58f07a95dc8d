"""Robust versus optimal fixed-interval smoothing of a squeezed-beam optical phase."""

from .errors import (DegenerateIntervalError, DomainError, FixedPointError, IndefiniteError,
                     InstabilityError, RiccatiBlowupError)
from .estimators import (CausalFilter, FilterRun, FixedPointResult, SmootherRun, kalman_filter,
                         optimal_smoother, robust_filter, robust_smoother, rts_smoother,
                         solve_sigma_f_fixed_point, steady_filter_variance)
from .evaluate import SweepRow, SweepTable, mc_sigma_s2, run_sweep, summarize
from .model import (IqcBudget, PhysicalParams, SqueezedNoise, SystemCoefficients, UncertaintySpec,
                    build_coefficients, compute_R_sq, iqc_check)
from .oracle import BatchProblem, brute_force_optimal, brute_force_robust
from .simulate import SimConfig, Trajectory, simulate_measurement, simulate_ou

__version__ = "0.1.0"
