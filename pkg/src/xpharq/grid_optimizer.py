"""Exhaustive rate-grid search for fixed IR and XP schedules."""

import math
from dataclasses import dataclass

import numpy as np

from .analysis import RateSchedule, failure_step, throughput_ir, throughput_xp
from .exceptions import ConfigurationError
from .validation import check_grid_multiple, check_k_max, check_positive

__all__ = ["SearchSpace", "optimize_ir", "optimize_xp"]

TIE_TOL = 1e-12


@dataclass(frozen=True)
class SearchSpace:
    """Candidate rates ``{lo, lo + step, ..., hi}`` per round and global constraints.

    Parameters
    ----------
    rate_step : float
        Grid spacing in bits/symbol.
    r1_range, rk_range : tuple of float
        Inclusive ranges for the first and the subsequent rates.
    r_sum_max : float
        Upper bound on the total rate ``R_1 + ... + R_K``.
    decodability_cap : float or None
        If set, every candidate rate must be strictly below it (e.g. ``log2 M``).
    k_max : int
        Number of rounds.
    """

    rate_step: float = 0.25
    r1_range: tuple = (0.25, 3.75)
    rk_range: tuple = (0.0, 3.75)
    r_sum_max: float = 8.0
    decodability_cap: float = None
    k_max: int = 2

    def __post_init__(self):
        step = check_positive(self.rate_step, "rate_step")
        for name in ("r1_range", "rk_range"):
            lo, hi = getattr(self, name)
            check_grid_multiple(lo, step, f"{name}[0]", "rate_step")
            check_grid_multiple(hi, step, f"{name}[1]", "rate_step")
            if hi < lo:
                raise ConfigurationError(f"{name} is empty: {lo} > {hi}")
            object.__setattr__(self, name, (float(lo), float(hi)))
        if self.r1_range[0] <= 0:
            raise ConfigurationError("r1_range must start above 0")
        if self.rk_range[0] < 0:
            raise ConfigurationError("rk_range must start at or above 0")
        check_positive(self.r_sum_max, "r_sum_max")
        if self.decodability_cap is not None:
            check_positive(self.decodability_cap, "decodability_cap")
        object.__setattr__(self, "k_max", check_k_max(self.k_max))

    def _grid(self, lo, hi):
        n0 = int(round(lo / self.rate_step))
        n1 = int(round(hi / self.rate_step))
        g = np.arange(n0, n1 + 1) * self.rate_step
        if self.decodability_cap is not None:
            g = g[g < self.decodability_cap - TIE_TOL]
        return g

    def r1_grid(self):
        return self._grid(*self.r1_range)

    def rk_grid(self):
        return self._grid(*self.rk_range)


def _select_best(candidates):
    """Pick the best ``(eta, key)`` pair; ties within ``TIE_TOL`` go to the smallest key.

    The result does not depend on the order of ``candidates``.
    """
    best = None
    for eta, key in candidates:
        if best is None or eta > best[0] + TIE_TOL or (abs(eta - best[0]) <= TIE_TOL and key < best[1]):
            best = (eta, key)
    if best is None:
        raise ConfigurationError("empty feasible rate set")
    return best


def optimize_ir(dist, space):
    """Best single rate for IR-HARQ with ``space.k_max`` rounds.

    Returns ``(r, report)``; ties go to the smaller rate.
    """
    grid = space.r1_grid()
    grid = grid[grid <= space.r_sum_max + TIE_TOL]
    reports = {}
    cands = []
    for r in grid:
        rep = throughput_ir(dist, float(r), space.k_max)
        reports[float(r)] = rep
        cands.append((rep.eta, (float(r),)))
    eta, key = _select_best(cands)
    return key[0], reports[key[0]]


def optimize_xp(dist, space):
    """Best fixed XP schedule on the grid, by depth-first branch and bound.

    A cycle ending with success in round ``k`` delivers ``Rsig_k`` bits, so a
    partial schedule ``(R_1..R_j)`` earns at most
    ``sum_{k<=j} Rsig_k (f_{k-1} - f_k) + f_j r_sum_max`` bits per cycle over at
    least ``1 + sum_{k<=j} f_k`` rounds (``j < K``); branches whose bound falls
    below the incumbent are cut.  Returns ``(schedule, report)`` with the
    lexicographically smallest schedule among ties.
    """
    k_max = space.k_max
    r1_grid = space.r1_grid()
    rk_grid = space.rk_grid()
    r_cap = space.r_sum_max + TIE_TOL
    r1_grid = r1_grid[r1_grid <= r_cap]
    if r1_grid.size == 0 or (k_max > 1 and rk_grid.size == 0):
        raise ConfigurationError("empty feasible rate set")

    best = [-math.inf, None]

    def consider(eta, key):
        if eta > best[0] + TIE_TOL or (abs(eta - best[0]) <= TIE_TOL and key < best[1]):
            best[0], best[1] = eta, key

    def descend(prefix, rsig, reward, rounds, f_prev, values, probs):
        # values/probs: failure sub-distribution of Isig after len(prefix) rounds
        j = len(prefix)
        if j == k_max:
            eta = reward / rounds
            consider(eta, tuple(prefix))
            return
        grid = r1_grid if j == 0 else rk_grid
        for r in grid:
            r = float(r)
            new_rsig = rsig + r
            if new_rsig > r_cap:
                break
            if j + 1 == k_max:
                # last round: f_K via one CDF evaluation per failure point
                f_k = float(probs @ dist.cdf(new_rsig - values))
                eta = (reward + new_rsig * (f_prev - f_k)) / rounds
                consider(max(eta, 0.0), tuple(prefix) + (r,))
                continue
            v2, p2 = failure_step(dist, values, probs, new_rsig)
            f_k = float(np.clip(p2.sum(), 0.0, 1.0))
            f_k = min(f_k, f_prev)
            new_reward = reward + new_rsig * (f_prev - f_k)
            new_rounds = rounds + f_k
            bound = (new_reward + f_k * space.r_sum_max) / new_rounds
            if bound < best[0] - TIE_TOL:
                continue
            descend(prefix + [r], new_rsig, new_reward, new_rounds, f_k, v2, p2)

    descend([], 0.0, 0.0, 1.0, 1.0, np.zeros(1), np.ones(1))
    if best[1] is None:
        raise ConfigurationError("empty feasible rate set")
    schedule = RateSchedule(best[1])
    report = throughput_xp(dist, schedule)
    return schedule, report
