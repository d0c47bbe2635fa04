"""Renewal-reward throughput of IR-HARQ and fixed-rate cross-packet HARQ."""

import enum
from dataclasses import dataclass, field

import numpy as np

from .validation import as_rates, check_k_max, check_positive

__all__ = [
    "Method", "RateSchedule", "ThroughputReport", "failure_probs_ir", "throughput_ir",
    "failure_probs_xp", "throughput_xp", "throughput_from_failures", "failure_step",
]


class Method(str, enum.Enum):
    ANALYTIC_IR = "analytic_ir"
    ANALYTIC_XP = "analytic_xp"
    MDP = "mdp"
    MONTE_CARLO = "monte_carlo"
    CLOSED_FORM_K2 = "closed_form_k2"
    HEURISTIC = "heuristic"


@dataclass(frozen=True)
class RateSchedule:
    """Per-round rates ``(R_1, ..., R_K)`` of a non-adaptive XP transmission.

    ``R_k`` is the rate of the packet added in round ``k``; IR-HARQ at rate ``R``
    is the schedule ``(R, 0, ..., 0)``.
    """

    rates: tuple

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(r) for r in as_rates(self.rates)))

    @classmethod
    def ir(cls, r, k_max):
        return cls((r,) + (0.0,) * (check_k_max(k_max) - 1))

    @property
    def k_max(self):
        return len(self.rates)

    @property
    def cumulative(self):
        return np.cumsum(self.rates)

    def __iter__(self):
        return iter(self.rates)


@dataclass(frozen=True)
class ThroughputReport:
    eta: float
    failure_probs: tuple
    method: Method
    expected_rounds: float
    ci_halfwidth: float = None
    n_cycles: int = None
    flags: tuple = field(default_factory=tuple)

    def to_dict(self):
        return {
            "eta": self.eta,
            "failure_probs": list(self.failure_probs),
            "method": self.method.value,
            "expected_rounds": self.expected_rounds,
            "ci_halfwidth": self.ci_halfwidth,
            "n_cycles": self.n_cycles,
            "flags": list(self.flags),
        }


def throughput_from_failures(rates, f):
    """``sum_k R_k (f_{k-1} - f_K) / (1 + sum_{k<K} f_k)`` with ``f_0 = 1``."""
    rates = np.asarray(rates, dtype=float)
    f = np.asarray(f, dtype=float)
    f_prev = np.concatenate(([1.0], f[:-1]))
    rounds = 1.0 + float(f[:-1].sum())
    eta = float(rates @ (f_prev - f[-1])) / rounds
    return max(eta, 0.0), rounds


def failure_step(dist, values, probs, threshold):
    """One round of forward propagation restricted to the failure region.

    ``(values, probs)`` is the sub-distribution of the accumulated MI on cycles
    that have failed so far; the result is the sub-distribution after adding one
    round of MI and removing the mass that reaches ``threshold``.
    """
    values, probs = dist.add_independent(values, probs, upto=threshold + dist.grid_step)
    probs = probs * dist.fail_weight(values, threshold)
    nz = np.nonzero(probs > 0)[0]
    if nz.size == 0:
        return np.zeros(1), np.zeros(1)
    if dist.is_atomic:
        return values[nz], probs[nz]
    return values[: nz[-1] + 1], probs[: nz[-1] + 1]


def failure_probs_ir(dist, r, k_max):
    """``f_k = Pr{I_1 + ... + I_k < R}`` for ``k = 1..k_max``."""
    r = check_positive(r, "r")
    k_max = check_k_max(k_max)
    f = []
    values, probs = np.zeros(1), np.ones(1)
    for _ in range(k_max):
        values, probs = dist.add_independent(values, probs, upto=r + dist.grid_step)
        f.append(float(np.clip(probs @ dist.fail_weight(values, r), 0.0, 1.0)))
    return np.array(f)


def throughput_ir(dist, r, k_max):
    f = failure_probs_ir(dist, r, k_max)
    eta = r * (1.0 - f[-1]) / (1.0 + f[:-1].sum())
    return ThroughputReport(float(eta), tuple(f.tolist()), Method.ANALYTIC_IR,
                            float(1.0 + f[:-1].sum()))


def failure_probs_xp(dist, schedule):
    """Nested failure probabilities ``f_k = Pr{Isig_l < Rsig_l for all l <= k}``."""
    if not isinstance(schedule, RateSchedule):
        schedule = RateSchedule(schedule)
    values, probs = np.zeros(1), np.ones(1)
    f = []
    for rsig in schedule.cumulative:
        values, probs = failure_step(dist, values, probs, float(rsig))
        f.append(float(np.clip(probs.sum(), 0.0, 1.0)))
    # rounding in the convolutions must not break nestedness
    return np.minimum.accumulate(np.array(f))


def throughput_xp(dist, schedule):
    if not isinstance(schedule, RateSchedule):
        schedule = RateSchedule(schedule)
    f = failure_probs_xp(dist, schedule)
    eta, rounds = throughput_from_failures(schedule.rates, f)
    return ThroughputReport(eta, tuple(f.tolist()), Method.ANALYTIC_XP, rounds)
