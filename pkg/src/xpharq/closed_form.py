"""Two-round optimal rate adaptation (Lambert W) and the heuristic adaptation policy."""

import math
from dataclasses import dataclass

import numpy as np

from .analysis import Method, ThroughputReport
from .channel import LN2
from .exceptions import ContractViolation
from .validation import check_k_max, check_positive

__all__ = [
    "lambert_w0", "argmax_r2_numeric", "closed_form_r2", "throughput_k2",
    "heuristic_rates", "heuristic_throughput", "HeuristicPolicy", "ClosedFormK2Policy",
    "LambertEval",
]

_HALLEY_MAXITER = 64


@dataclass(frozen=True)
class LambertEval:
    """Principal-branch Lambert W evaluator with a residual guarantee."""

    tolerance: float = 1e-12
    branch: str = "principal"

    def __call__(self, x):
        w = lambert_w0(x)
        x_arr = np.asarray(x, dtype=float)
        resid = np.abs(np.asarray(w) * np.exp(w) - x_arr)
        if np.any(resid > self.tolerance * np.maximum(1.0, x_arr)):
            raise ArithmeticError("Lambert W residual above tolerance")
        return w


def lambert_w0(x):
    """Principal branch ``W0(x)`` for ``x >= 0`` by Halley iteration.

    Starts from ``log(1 + x)`` below ``e`` and from ``log x - log log x`` above.
    """
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0) or np.any(np.isnan(x_arr)):
        raise ValueError("lambert_w0 is only defined here for x >= 0")
    xs = np.atleast_1d(x_arr).astype(float)
    big = xs >= math.e
    w = np.log1p(xs)
    lx = np.log(xs[big])
    w[big] = lx - np.log(lx)
    for _ in range(_HALLEY_MAXITER):
        ew = np.exp(w)
        f = w * ew - xs
        wp1 = w + 1.0
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w = w - step
        if np.all(np.abs(step) <= 4e-16 * (1.0 + np.abs(w))):
            break
    w[xs == 0] = 0.0
    return float(w[0]) if x_arr.ndim == 0 else w.reshape(x_arr.shape)


def closed_form_r2(i1, r1, avg_snr):
    """Optimal second-round rate for a Gaussian codebook on Rayleigh fading.

    Maximising ``(R1 + R) * exp(-(2**(R1 + R - I1) - 1) / avg_snr)`` over
    ``R >= 0``: the log-objective is concave in ``s = R1 + R`` and stationary at
    ``s ln2 2**s = avg_snr 2**I1``, i.e. ``(s ln2) e^(s ln2) = avg_snr 2**I1``.
    Hence ``R2 = max(0, W0(avg_snr * 2**I1) / ln 2 - R1)`` with the natural log.
    """
    avg_snr = check_positive(avg_snr, "avg_snr")
    i1 = np.asarray(i1, dtype=float)
    s = lambert_w0(avg_snr * np.exp2(i1)) / LN2
    out = np.maximum(0.0, s - r1)
    return float(out) if out.ndim == 0 else out


def _golden_max(fun, lo, hi, tol):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return (a + b) / 2.0


def argmax_r2_numeric(i1, r1, dist, scan_step=1e-3, tol=1e-6, r_max=None):
    """Second-round rate maximising ``(R1 + R) * Pr{I >= R1 + R - I1}`` over ``R >= 0``.

    ``dist`` is anything with a vectorised ``ccdf`` (a gridded
    :class:`~xpharq.channel.MiDistribution` or an exact
    :class:`~xpharq.channel.ChannelModel`).  A dense scan finds the global
    maximum, golden-section search refines it; ties go to the smaller rate.
    """
    if not i1 < r1:
        raise ContractViolation(f"argmax_r2_numeric needs i1 < r1 (a failed first round), got {i1}, {r1}")
    upper = dist.upper_mi(1e-15) if hasattr(dist, "upper_mi") else dist.support_max
    hi = max(0.0, upper - r1 + i1) + 2 * scan_step
    if r_max is not None:
        hi = min(hi, r_max)
    grid = np.arange(int(math.ceil(hi / scan_step)) + 1) * scan_step

    def objective(r):
        r = np.asarray(r, dtype=float)
        return (r1 + r) * dist.ccdf(r1 + r - i1)

    vals = objective(grid)
    j = int(np.argmax(vals))
    best_r, best_v = float(grid[j]), float(vals[j])
    lo, up = max(0.0, best_r - scan_step), best_r + scan_step
    if r_max is not None:
        up = min(up, r_max)
    if up - lo > tol:
        cand = _golden_max(lambda r: float(objective(r)), lo, up, tol)
        cand_v = float(objective(cand))
        if cand_v > best_v or (cand_v == best_v and cand < best_r):
            best_r = cand
    return best_r


def throughput_k2(r1, dist, policy_r2):
    """Throughput of two-round XP with first rate ``r1`` and adaptive ``R2 = policy_r2(I1)``.

    The conditional expectation over ``I1 < R1`` is evaluated on the MI grid of
    ``dist``.  With a constant policy this equals ``throughput_xp(dist, (r1, c))``.
    """
    r1 = check_positive(r1, "r1")
    values, probs = dist.values, dist.probs
    w = dist.fail_weight(values, r1)
    failing = (w > 0) & (probs > 0)
    v = values[failing]
    sub = probs[failing] * w[failing]
    f1 = float(sub.sum())
    if callable(policy_r2):
        r2 = np.asarray(policy_r2(v), dtype=float)
        if r2.shape != v.shape:
            r2 = np.array([float(policy_r2(x)) for x in v])
    else:
        r2 = np.full(v.shape, float(policy_r2))
    if np.any(r2 < 0) or not np.all(np.isfinite(r2)):
        raise ContractViolation("second-round rates must be finite and >= 0")
    thresh = r1 + r2 - v
    succ2 = dist.ccdf(thresh)
    term2 = float(sub @ ((r1 + r2) * succ2))
    f2 = float(sub @ (1.0 - succ2))
    eta = (r1 * (1.0 - f1) + term2) / (1.0 + f1)
    return ThroughputReport(max(eta, 0.0), (f1, f2), Method.CLOSED_FORM_K2, 1.0 + f1)


def heuristic_rates(trajectory, r1):
    """Next rate ``R_k = R1 - (Rsig_{k-1} - Isig_{k-1})`` of the heuristic policy.

    ``trajectory`` is the list of ``(Isig, Rsig)`` pairs of the rounds so far
    (empty for the first round).  Every recorded round must be a failure.
    """
    r1 = check_positive(r1, "r1")
    if len(trajectory) == 0:
        return r1
    for isig, rsig in trajectory:
        if not rsig > isig:
            raise ContractViolation(f"round with Isig={isig} >= Rsig={rsig} is not a failure")
    isig, rsig = trajectory[-1]
    rate = r1 - (rsig - isig)
    if rate < -1e-12:
        raise ContractViolation(f"heuristic rate {rate} < 0: trajectory inconsistent with r1={r1}")
    return max(rate, 0.0)


def heuristic_throughput(r1, k_max, dist):
    """Closed-form throughput of the heuristic policy.

    ``dist`` provides ``cdf`` and ``partial_mean``; with ``f1 = Pr{I < R1}`` and
    the truncated mean ``C = E[I 1{I < R1}]``::

        eta = R1 (1 - f1) + C (1 - f1) / (1 - f1**K)
                            * (-(K - 1) f1**(K - 1) + (1 - f1**(K - 1)) / (1 - f1))

    and ``R1 (1 - f1) + C`` for ``K = inf``.
    """
    r1 = check_positive(r1, "r1")
    k_max = check_k_max(k_max, allow_inf=True)
    f1 = float(dist.cdf(r1))
    c_trunc = float(dist.partial_mean(r1))
    if f1 >= 1.0:
        return ThroughputReport(0.0, (1.0,), Method.HEURISTIC, math.inf, flags=("never_decodes",))
    if f1 <= 0.0:
        return ThroughputReport(r1, (0.0,), Method.HEURISTIC, 1.0)
    if math.isinf(k_max):
        return ThroughputReport(r1 * (1.0 - f1) + c_trunc, (f1,), Method.HEURISTIC,
                                1.0 / (1.0 - f1))
    k = k_max
    bracket = -(k - 1) * f1 ** (k - 1) + (1.0 - f1 ** (k - 1)) / (1.0 - f1)
    eta = r1 * (1.0 - f1) + c_trunc * (1.0 - f1) / (1.0 - f1 ** k) * bracket
    f = tuple(f1 ** j for j in range(1, k + 1))
    return ThroughputReport(eta, f, Method.HEURISTIC, (1.0 - f1 ** k) / (1.0 - f1))


@dataclass(frozen=True)
class HeuristicPolicy:
    """Rate policy ``R_k = R1 - (Rsig_{k-1} - Isig_{k-1})``, i.e. ``R_k = I_{k-1}``.

    Usable directly by the simulator; ``k_max=None`` means persistent HARQ.
    """

    r1: float
    k_max: int = None

    def __post_init__(self):
        object.__setattr__(self, "r1", check_positive(self.r1, "r1"))
        if self.k_max is not None:
            object.__setattr__(self, "k_max", check_k_max(self.k_max))

    kind = "heuristic"

    def rates(self, k, isig, rsig):
        if k == 1:
            return np.full(np.shape(isig), self.r1)
        return np.maximum(self.r1 - (np.asarray(rsig) - np.asarray(isig)), 0.0)


@dataclass(frozen=True)
class ClosedFormK2Policy:
    """Two-round policy: ``R1`` then the Lambert-W rate ``closed_form_r2(I1, R1, avg_snr)``."""

    r1: float
    avg_snr: float

    k_max = 2
    kind = "closed_form_k2"

    def rates(self, k, isig, rsig):
        if k == 1:
            return np.full(np.shape(isig), self.r1)
        return np.atleast_1d(closed_form_r2(np.asarray(isig), self.r1, self.avg_snr))
