"""Self-check suite run by ``xpharq validate``.

Each check returns a :class:`Check` with a PASS/FAIL verdict and a short,
deterministic detail string (no timings) so that reruns produce identical
output.  ``quick=True`` uses fewer Monte Carlo cycles and random cases.
"""

import math
from dataclasses import dataclass

import numpy as np

from .analysis import throughput_ir, throughput_xp, failure_probs_xp
from .channel import ChannelModel, MiDistribution, Qam, Rayleigh, TwoStateMi, ergodic_capacity
from .closed_form import (HeuristicPolicy, argmax_r2_numeric, closed_form_r2, heuristic_throughput,
                          lambert_w0, throughput_k2)
from .grid_optimizer import SearchSpace, optimize_ir, optimize_xp
from .mdp import (ActionGrid, Persistent, Truncated, build_states, evaluate_policy,
                  fixed_schedule_policy, policy_iteration)
from .simulator import FixedSchedulePolicy, estimate_throughput

__all__ = ["Check", "run_suite", "two_state"]


@dataclass(frozen=True)
class Check:
    number: int
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'} [{self.number}] {self.name}: {self.detail}"


def two_state():
    return ChannelModel(TwoStateMi(1.0, 1.5, 0.75))


def _close(a, b, tol):
    return abs(a - b) <= tol


def check_two_state():
    d = two_state().discretize()
    got = {
        "capacity": (ergodic_capacity(d), 1.375),
        "ir(1.5,2)": (throughput_ir(d, 1.5, 2).eta, 1.2),
        "ir(3,3)": (throughput_ir(d, 3.0, 3).eta, 3.0 / 2.4375),
        "xp(1.5,0.5)": (throughput_xp(d, (1.5, 0.5)).eta, 1.3),
        "xp(1.5,1,0.5)": (throughput_xp(d, (1.5, 1.0, 0.5)).eta, 1.78125 / 1.3125),
    }
    ok = all(_close(a, b, 1e-9) for a, b in got.values())
    f2 = tuple(failure_probs_xp(d, (1.5, 0.5)).tolist())
    f3 = tuple(failure_probs_xp(d, (1.5, 1.0, 0.5)).tolist())
    ok = ok and f2 == (0.25, 0.0) and f3 == (0.25, 0.0625, 0.0)
    worst = max(abs(a - b) for a, b in got.values())
    return Check(1, "two-state exact suite", ok, f"max error {worst:.3g}; f={f2},{f3}")


def _random_dist(rng):
    if rng.random() < 0.5:
        n = int(rng.integers(1, 4))
        values = rng.integers(0, 600, size=n) * 0.005
        probs = rng.dirichlet(np.ones(n))
        return MiDistribution(0.005, atoms=list(zip(values, probs)))
    return ChannelModel(Rayleigh.from_db(float(rng.uniform(-5, 25)))).discretize(0.01)


def check_degeneration(n_cases=200, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        d = _random_dist(rng)
        k = int(rng.integers(1, 5))
        r = float(rng.uniform(0.05, 6.0))
        a = throughput_xp(d, (r,) + (0.0,) * (k - 1)).eta
        b = throughput_ir(d, r, k).eta
        worst = max(worst, abs(a - b))
    return Check(2, "XP with zero tail rates equals IR", worst <= 1e-12,
                 f"{n_cases} cases, max |diff| {worst:.3g}")


def check_lambert():
    x = np.logspace(-6, 6, 1000)
    w = lambert_w0(x)
    rel = float(np.max(np.abs(w * np.exp(w) - x) / np.maximum(1.0, x)))
    ok = rel <= 1e-12 and lambert_w0(math.e) == 1.0 and lambert_w0(0.0) == 0.0
    return Check(3, "Lambert W residual and fixed points", ok, f"max scaled residual {rel:.3g}")


def check_k2_closed_form():
    worst = 0.0
    for r1 in (1.0, 2.0, 3.0):
        for db in np.linspace(0.0, 30.0, 20):
            g = 10.0 ** (db / 10.0)
            ch = ChannelModel(Rayleigh(g))
            for i1 in np.linspace(0.0, r1, 20, endpoint=False):
                worst = max(worst, abs(closed_form_r2(i1, r1, g) - argmax_r2_numeric(i1, r1, ch)))
    return Check(4, "K=2 closed form matches numeric argmax", worst <= 1e-4, f"max |diff| {worst:.3g} bits")


def check_mdp_desk():
    d = two_state().discretize()
    space = build_states(d, ActionGrid(0.25, 4.0), Truncated(2))
    res = policy_iteration(space, first_rate=1.5)
    key, m = (1, 6), 200
    acts = space.grid.actions(6)
    vals = [(6 + a) * 0.25 * float(space.ccdf_lat[(6 + a) * space.ratio - m]) for a in acts]
    brute = int(acts[int(np.argmax(vals))])
    chosen = res.policy.action(key, m)
    r2 = chosen * 0.25
    k2 = throughput_k2(1.5, d, lambda v: np.full(np.shape(v), r2)).eta
    fixed, _ = evaluate_policy(fixed_schedule_policy(space, (1.5, 0.5)), space)
    ok = chosen == brute and _close(res.gain, k2, 1e-8) and _close(fixed, 1.3, 1e-8)
    return Check(5, "MDP desk-scale correctness", ok,
                 f"action {r2} (brute {brute * 0.25}), gain {res.gain!r}, fixed {fixed!r}")


def _dominance_channels():
    return [("two_state", two_state())] + [
        (f"rayleigh_{db}dB", ChannelModel(Rayleigh.from_db(db))) for db in (0.0, 10.0, 20.0)]


def check_dominance():
    worst = math.inf
    parts = []
    for name, ch in _dominance_channels():
        d = ch.discretize()
        for k in (2, 3):
            space = SearchSpace(0.25, (0.25, 8.0), (0.0, 8.0), 8.0, None, k)
            _, ir = optimize_ir(d, space)
            _, xp = optimize_xp(d, space)
            mdp = policy_iteration(build_states(d, ActionGrid(0.25, 8.0), Truncated(k))).gain
            gap = min(mdp - xp.eta, xp.eta - ir.eta)
            worst = min(worst, gap)
            parts.append(f"{name}/K{k}:{mdp:.4f}>={xp.eta:.4f}>={ir.eta:.4f}")
    return Check(6, "dominance MDP >= XP >= IR", worst >= -1e-8, f"min gap {worst:.3g}; " + " ".join(parts))


def mc_configurations():
    """The Monte Carlo agreement set: ``(name, policy, channel, analytic eta)``."""
    ts = two_state()
    ray = ChannelModel(Rayleigh.from_db(10.0))
    dray = ray.discretize()
    qam = ChannelModel(Rayleigh.from_db(15.0), Qam(16))
    dqam = qam.discretize()
    configs = [
        ("two_state xp(1.5,0.5)", FixedSchedulePolicy((1.5, 0.5)), ts, 1.3),
        ("two_state xp(1.5,1,0.5)", FixedSchedulePolicy((1.5, 1.0, 0.5)), ts, 1.78125 / 1.3125),
        ("two_state ir(1.5,K2)", FixedSchedulePolicy.ir(1.5, 2), ts, 1.2),
        ("two_state ir(3,K3)", FixedSchedulePolicy.ir(3.0, 3), ts, 3.0 / 2.4375),
        ("rayleigh10 ir(3,K3)", FixedSchedulePolicy.ir(3.0, 3), ray, throughput_ir(dray, 3.0, 3).eta),
        ("rayleigh10 xp(3.25,0.5)", FixedSchedulePolicy((3.25, 0.5)), ray,
         throughput_xp(dray, (3.25, 0.5)).eta),
        ("qam15 ir(3,K2)", FixedSchedulePolicy.ir(3.0, 2), qam, throughput_ir(dqam, 3.0, 2).eta),
        ("qam15 xp(3,1,0.5)", FixedSchedulePolicy((3.0, 1.0, 0.5)), qam,
         throughput_xp(dqam, (3.0, 1.0, 0.5)).eta),
    ]
    for name, ch, d in (("rayleigh10", ray, dray), ("qam15", qam, dqam)):
        res = policy_iteration(build_states(d, ActionGrid(0.25, 8.0), Truncated(3)))
        configs.append((f"{name} mdp K3", res.policy, ch, res.gain))
    configs.append(("two_state heuristic(1.5)", HeuristicPolicy(1.5), ts, heuristic_throughput(1.5, None, ts).eta))
    configs.append(("rayleigh10 heuristic(3,K4)", HeuristicPolicy(3.0, 4), ray, heuristic_throughput(3.0, 4, ray).eta))
    return configs


def check_monte_carlo(n_cycles=10**6, seed=1, threads=1):
    worst = 0.0
    parts = []
    for i, (name, pol, ch, eta) in enumerate(mc_configurations()):
        sim = estimate_throughput(pol, ch, n_cycles, seed + i, threads=threads)
        z = abs(sim.eta_hat - eta) / sim.std_err
        worst = max(worst, z)
        parts.append(f"{name}:{z:.2f}")
    return Check(7, "Monte Carlo agreement within 3 std err", worst <= 3.0,
                 f"max z {worst:.2f}; " + " ".join(parts))


def heuristic_tail_bound(r1, f1, c, eta_inf, k):
    """Bound on ``|eta_K - eta_inf|`` for the heuristic policy.

    Numerator and denominator of the renewal ratio differ from their ``K = inf``
    values by geometric tails ``f1^K r1 + c (K f1^(K-1) (1-f1) + f1^K) / (1-f1)``
    and ``f1^K / (1-f1)``; the denominator is at least 1.
    """
    if f1 >= 1.0:
        return math.inf
    num_tail = f1 ** k * r1 + c * (k * f1 ** (k - 1) * (1 - f1) + f1 ** k) / (1 - f1)
    return num_tail + eta_inf * f1 ** k / (1 - f1)


def check_heuristic(n_cycles=10**6, seed=2, threads=1):
    ok = True
    parts = []
    ray = ChannelModel(Rayleigh.from_db(10.0))
    for r1 in (1.0, 2.5, 4.0):
        f1 = float(ray.cdf(r1))
        ok &= _close(heuristic_throughput(r1, 1, ray).eta, r1 * (1 - f1), 1e-12)
        c = float(ray.partial_mean(r1))
        eta_inf = heuristic_throughput(r1, None, ray).eta
        gap = abs(heuristic_throughput(r1, 50, ray).eta - eta_inf)
        ok &= gap <= heuristic_tail_bound(r1, f1, c, eta_inf, 50)
    worst = 0.0
    for i, (db, r1, k) in enumerate(((0.0, 1.0, 3), (5.0, 2.0, 4), (10.0, 3.0, None),
                                     (15.0, 4.0, 2), (20.0, 5.5, 6))):
        ch = ChannelModel(Rayleigh.from_db(db))
        eta = heuristic_throughput(r1, k, ch).eta
        sim = estimate_throughput(HeuristicPolicy(r1, k), ch, n_cycles, seed + i, threads=threads)
        z = abs(sim.eta_hat - eta) / sim.std_err
        worst = max(worst, z)
        parts.append(f"{db}dB:{z:.2f}")
    ok &= worst <= 3.0
    return Check(8, "heuristic formula limits and simulation", bool(ok), f"max z {worst:.2f}; " + " ".join(parts))


def check_shapes():
    sweep = (0.0, 5.0, 10.0, 15.0, 20.0)
    ok = True
    curves = {"ir": [], "xp": []}
    for db in sweep:
        ch = ChannelModel(Rayleigh.from_db(db))
        d = ch.discretize()
        cap = ergodic_capacity(d)
        space = SearchSpace(0.25, (0.25, 8.0), (0.0, 8.0), 8.0, None, 2)
        ir = optimize_ir(d, space)[1].eta
        xp = optimize_xp(d, space)[1].eta
        curves["ir"].append(ir)
        curves["xp"].append(xp)
        ok &= ir <= cap + 1e-9 and xp <= cap + 1e-9 and xp >= ir - 1e-12
    for c in curves.values():
        ok &= bool(np.all(np.diff(c) >= -1e-12))
    increases = 0
    space = build_states(ChannelModel(Rayleigh.from_db(20.0)).discretize(), ActionGrid(0.25, 8.0), Persistent())
    pol = policy_iteration(space).policy
    for (_, r), acts in pol.actions.items():
        by_deficit = acts[::-1]
        cap = space.grid.n_total - r
        up = np.nonzero(np.diff(by_deficit) > 0)[0]
        increases += int(np.sum(by_deficit[up + 1] < cap))
    ok &= increases == 0
    return Check(9, "throughput curve shapes and policy monotonicity", bool(ok),
                 f"ir={np.round(curves['ir'], 4).tolist()} xp={np.round(curves['xp'], 4).tolist()} "
                 f"policy increases with deficit: {increases}")


def check_determinism(n_cycles=200_000, seed=5):
    ch = ChannelModel(Rayleigh.from_db(10.0))
    pol = HeuristicPolicy(3.0, 4)
    a = estimate_throughput(pol, ch, n_cycles, seed, threads=1)
    b = estimate_throughput(pol, ch, n_cycles, seed, threads=4)
    c = estimate_throughput(pol, ch, n_cycles, seed, threads=2)
    ok = a.to_dict() == b.to_dict() == c.to_dict()
    return Check(10, "deterministic simulation across thread counts", ok, f"eta_hat {a.eta_hat!r}")


def run_suite(quick=True, seed=0, threads=1):
    n = 200_000 if quick else 10**6
    return [
        check_two_state(),
        check_degeneration(50 if quick else 200, seed),
        check_lambert(),
        check_k2_closed_form(),
        check_mdp_desk(),
        check_dominance(),
        check_monte_carlo(n, seed + 1, threads),
        check_heuristic(n, seed + 100, threads),
        check_shapes(),
        check_determinism(seed=seed + 5),
    ]
