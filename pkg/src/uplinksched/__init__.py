"""Latency-optimal static uplink scheduling for training-based massive MIMO."""

__version__ = "0.1.0"

from .errors import (DivergenceError, DomainError, InfeasibleGroupError, InvariantViolation,
                     NoFeasiblePartitionError, ParameterError, SchedulingError)
from .model import (EnergyAllocation, FrameConfig, PilotMatrix, ReceiverKind, UserProfile, UserSet,
                    estimation_error_variance, rate_approx, sinr_approx, wbe_error_variance,
                    wbe_pilot_matrix)
from .energy import CoefficientSet, GroupRateResult, coefficients, common_rate_curve, group_rate, optimal_training_energy
from .scheduler import (CandidateGroup, SchedulingPolicy, count_reduced_search_space, enumerate_candidates,
                        optimize_policy, solve_partition_dp, solve_partition_lp)
from .asymptotic import (ProductDistribution, RegimeReport, H_expectation, asymptotic_latency,
                         asymptotic_params, asymptotic_policy, chi_star, classify_regime, h_value,
                         lambert_w0)
from .baselines import BaselineResult, random_equal, random_optimal
from .montecarlo import RateStats, RealizationBatch, accuracy_report, exact_rate_samples
from .config import ExperimentConfig, build_population, load_config, parse_config
