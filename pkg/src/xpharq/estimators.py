"""Estimator-style wrappers (``fit``/``predict``/``score``) around the optimisers.

``fit`` takes the channel, either a :class:`~xpharq.channel.ChannelModel`, a
:class:`~xpharq.channel.MiDistribution` or a channel config dict, and learns a
rate choice for it.  ``predict`` maps decision points ``(k, Isig, Rsig)`` to
rates; ``score`` is the throughput of the fitted choice.
"""

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .channel import ChannelModel, MiDistribution
from .closed_form import HeuristicPolicy, heuristic_throughput
from .exceptions import ConfigurationError
from .grid_optimizer import SearchSpace, optimize_ir, optimize_xp
from .mdp import ActionGrid, build_states, policy_iteration
from .simulator import FixedSchedulePolicy

__all__ = ["IrRateOptimizer", "XpRateOptimizer", "MdpRateAdapter", "HeuristicRateAdapter"]


def _as_channel(X):
    if isinstance(X, (ChannelModel, MiDistribution)):
        return X
    if isinstance(X, dict):
        return ChannelModel.from_config(X)
    raise ConfigurationError(f"cannot interpret {type(X).__name__} as a channel")


def _as_dist(X, mi_step):
    ch = _as_channel(X)
    return ch if isinstance(ch, MiDistribution) else ch.discretize(mi_step)


def _decision_points(X):
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ConfigurationError("decision points must have shape (n, 3): columns k, isig, rsig")
    if np.any(arr[:, 0] < 1) or np.any(arr[:, 0] != np.round(arr[:, 0])):
        raise ConfigurationError("round numbers k must be integers >= 1")
    return arr


def _predict_policy(policy, X):
    pts = _decision_points(X)
    out = np.empty(pts.shape[0])
    for k in np.unique(pts[:, 0]).astype(int):
        sel = pts[:, 0] == k
        out[sel] = policy.rates(int(k), pts[sel, 1], pts[sel, 2])
    return out


class _FixedScheduleEstimator(BaseEstimator):
    def _space(self, cap=None):
        return SearchSpace(self.rate_step, (self.rate_step, self.r1_max), (0.0, self.rk_max),
                           self.r_max, cap, self.k_max)

    def predict(self, X):
        check_is_fitted(self, "schedule_")
        return _predict_policy(FixedSchedulePolicy(self.schedule_), X)

    def score(self, X=None, y=None):
        check_is_fitted(self, "report_")
        return self.report_.eta


class IrRateOptimizer(_FixedScheduleEstimator):
    """Best IR-HARQ rate on a grid.

    Parameters
    ----------
    k_max : int
    rate_step, r1_max, rk_max, r_max : float
        Rate grid; see :class:`~xpharq.grid_optimizer.SearchSpace`.
    decodability_cap : float or None
    mi_step : float
        MI grid used when ``fit`` receives a channel model.
    """

    def __init__(self, k_max=2, rate_step=0.25, r1_max=3.75, rk_max=3.75, r_max=8.0,
                 decodability_cap=None, mi_step=0.005):
        self.k_max = k_max
        self.rate_step = rate_step
        self.r1_max = r1_max
        self.rk_max = rk_max
        self.r_max = r_max
        self.decodability_cap = decodability_cap
        self.mi_step = mi_step

    def fit(self, X, y=None):
        dist = _as_dist(X, self.mi_step)
        self.rate_, self.report_ = optimize_ir(dist, self._space(self.decodability_cap))
        self.schedule_ = (self.rate_,) + (0.0,) * (self.k_max - 1)
        return self


class XpRateOptimizer(IrRateOptimizer):
    """Best fixed cross-packet schedule ``(R_1..R_K)`` on a grid."""

    def fit(self, X, y=None):
        dist = _as_dist(X, self.mi_step)
        schedule, self.report_ = optimize_xp(dist, self._space(self.decodability_cap))
        self.schedule_ = schedule.rates
        return self


class MdpRateAdapter(BaseEstimator):
    """Optimal adaptive rates by policy iteration.

    Parameters
    ----------
    k_max : int or None
        Round budget; ``None`` solves persistent HARQ.
    rate_step, r_max : float
        Action grid.
    first_rate : float or None
        Pins the first-round rate.
    mi_step : float
    """

    def __init__(self, k_max=2, rate_step=0.25, r_max=8.0, first_rate=None, mi_step=0.005):
        self.k_max = k_max
        self.rate_step = rate_step
        self.r_max = r_max
        self.first_rate = first_rate
        self.mi_step = mi_step

    def fit(self, X, y=None):
        dist = _as_dist(X, self.mi_step)
        space = build_states(dist, ActionGrid(self.rate_step, self.r_max), self.k_max)
        res = policy_iteration(space, first_rate=self.first_rate)
        self.policy_ = res.policy
        self.gain_ = res.gain
        self.n_iter_ = res.iterations
        return self

    def predict(self, X):
        check_is_fitted(self, "policy_")
        return _predict_policy(self.policy_, X)

    def score(self, X=None, y=None):
        check_is_fitted(self, "gain_")
        return self.gain_


class HeuristicRateAdapter(BaseEstimator):
    """Heuristic adaptation ``R_k = I_{k-1}`` with the first rate chosen on a grid."""

    def __init__(self, k_max=None, rate_step=0.25, r1_max=8.0):
        self.k_max = k_max
        self.rate_step = rate_step
        self.r1_max = r1_max

    def fit(self, X, y=None):
        ch = _as_channel(X)
        k = math.inf if self.k_max is None else self.k_max
        grid = np.arange(1, int(round(self.r1_max / self.rate_step)) + 1) * self.rate_step
        best = None
        for r1 in grid:
            rep = heuristic_throughput(float(r1), k, ch)
            if best is None or rep.eta > best[1].eta + 1e-12:
                best = (float(r1), rep)
        self.r1_, self.report_ = best
        self.policy_ = HeuristicPolicy(self.r1_, self.k_max)
        return self

    def predict(self, X):
        check_is_fitted(self, "policy_")
        return _predict_policy(self.policy_, X)

    def score(self, X=None, y=None):
        check_is_fitted(self, "report_")
        return self.report_.eta
