"""Throughput analysis, optimisation and simulation of IR-HARQ and cross-packet HARQ."""

__version__ = "0.1.0"

from .analysis import (Method, RateSchedule, ThroughputReport, failure_probs_ir,  # noqa: E402
                       failure_probs_xp, throughput_ir, throughput_xp)
from .channel import (ChannelModel, Constant, GaussianCodebook, MiDistribution, Qam,  # noqa: E402
                      Rayleigh, TwoStateMi, cdf_sum, ergodic_capacity, mi_distribution,
                      mi_gaussian, mi_qam, sample_mi)
from .closed_form import (ClosedFormK2Policy, HeuristicPolicy, argmax_r2_numeric,  # noqa: E402
                          closed_form_r2, heuristic_rates, heuristic_throughput, lambert_w0,
                          throughput_k2)
from .exceptions import ConfigurationError, ContractViolation, ResourceError, SolverError  # noqa: E402
from .grid_optimizer import SearchSpace, optimize_ir, optimize_xp  # noqa: E402
from .mdp import (ActionGrid, Persistent, TabularPolicy, Truncated, build_states,  # noqa: E402
                  evaluate_policy, policy_iteration)
from .simulator import (FixedSchedulePolicy, SimResult, empirical_failure_probs,  # noqa: E402
                        estimate_throughput, run_cycle)
