import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import lambertw

from xpharq.analysis import throughput_ir, throughput_xp
from xpharq.channel import ChannelModel, MiDistribution, Rayleigh
from xpharq.closed_form import (ClosedFormK2Policy, HeuristicPolicy, LambertEval, argmax_r2_numeric,
                                closed_form_r2, heuristic_rates, heuristic_throughput, lambert_w0,
                                throughput_k2)
from xpharq.exceptions import ContractViolation


def _newton_w(x):
    w = math.log1p(x)
    for _ in range(200):
        step = (w * math.exp(w) - x) / (math.exp(w) * (w + 1))
        w -= step
        if abs(step) < 1e-16:
            break
    return w


def test_lambert_fixed_points():
    assert lambert_w0(0.0) == 0.0
    assert lambert_w0(math.e) == 1.0
    assert lambert_w0(1.0) == pytest.approx(0.5671432904, abs=1e-10)
    assert lambert_w0(1.0) == pytest.approx(_newton_w(1.0), abs=1e-12)


def test_lambert_residual_bound():
    x = np.concatenate((10.0 ** np.arange(-6, 7), np.logspace(-6, 6, 1000),
                        np.random.default_rng(0).uniform(0, 1e3, 1000)))
    w = lambert_w0(x)
    assert np.all(np.abs(w * np.exp(w) - x) <= 1e-12 * np.maximum(1.0, x))
    assert np.allclose(w, lambertw(x).real, rtol=1e-13, atol=1e-15)


def test_lambert_rejects_negative():
    with pytest.raises(ValueError):
        lambert_w0(-0.1)


def test_lambert_eval_wrapper():
    ev = LambertEval()
    assert ev(math.e) == 1.0


@given(st.floats(0.0, 1e8))
def test_lambert_inverse_property(x):
    w = lambert_w0(x)
    assert abs(w * math.exp(w) - x) <= 1e-12 * max(1.0, x)


def test_numeric_argmax_two_state(two_state_dist):
    assert argmax_r2_numeric(1.0, 1.5, two_state_dist) == pytest.approx(0.5, abs=1e-9)


def test_numeric_argmax_degenerate_boundary():
    d = MiDistribution(0.005, atoms=[(0.1, 1.0)])
    # every R >= 0 needs I >= 0.5 + R: the objective is identically zero
    assert argmax_r2_numeric(0.0, 0.5, d) == 0.0


def test_numeric_argmax_requires_failure(two_state_dist):
    with pytest.raises(ContractViolation):
        argmax_r2_numeric(1.5, 1.5, two_state_dist)


def test_closed_form_matches_numeric_argmax():
    worst = 0.0
    for r1 in (1.0, 2.0, 3.0):
        for db in np.linspace(0.0, 30.0, 20):
            g = 10 ** (db / 10)
            ch = ChannelModel(Rayleigh(g))
            for i1 in np.linspace(0.0, r1, 20, endpoint=False):
                worst = max(worst, abs(closed_form_r2(i1, r1, g) - argmax_r2_numeric(i1, r1, ch)))
    assert worst <= 1e-4


def test_closed_form_clamps_and_is_monotone():
    # tiny SNR: the unconstrained optimum total rate is below R1
    assert closed_form_r2(0.0, 3.0, 0.1) == 0.0
    i1 = np.linspace(0, 2.99, 300)
    r2 = closed_form_r2(i1, 3.0, 10.0)
    assert np.all(np.diff(r2) >= 0)


def test_closed_form_is_stationary_point():
    # derivative of log((R1 + R) e^{-(2^{R1 + R - I1} - 1)/g}) vanishes at the optimum
    g, i1, r1 = 20.0, 0.7, 1.0
    s = r1 + closed_form_r2(i1, r1, g)
    assert 1 / s - math.log(2) * 2 ** (s - i1) / g == pytest.approx(0.0, abs=1e-12)


def test_throughput_k2_constant_policy(two_state_dist):
    assert throughput_k2(1.5, two_state_dist, lambda v: np.full(np.shape(v), 0.5)).eta == pytest.approx(1.3, abs=1e-12)
    assert throughput_k2(1.5, two_state_dist, 0.0).eta == pytest.approx(throughput_ir(two_state_dist, 1.5, 2).eta)


def test_throughput_k2_optimal_policy_dominates(two_state_dist):
    pol = lambda v: np.array([argmax_r2_numeric(x, 1.5, two_state_dist) for x in np.atleast_1d(v)])
    assert throughput_k2(1.5, two_state_dist, pol).eta >= 1.3 - 1e-12


@given(st.floats(-3.0, 25.0), st.floats(0.25, 5.0), st.floats(0.0, 3.0))
def test_throughput_k2_constant_equals_xp(avg_db, r1, c):
    d = ChannelModel(Rayleigh.from_db(avg_db)).discretize(0.01)
    a = throughput_k2(r1, d, c).eta
    b = throughput_xp(d, (r1, c)).eta
    assert abs(a - b) <= 1e-9


def test_heuristic_rates_examples():
    assert heuristic_rates([(1.0, 1.5)], 1.5) == pytest.approx(1.0)
    assert heuristic_rates([], 1.5) == 1.5
    # deficit equal to R1: nothing new can be added
    assert heuristic_rates([(0.0, 1.5)], 1.5) == 0.0
    with pytest.raises(ContractViolation):
        heuristic_rates([(2.0, 1.5)], 1.5)


def test_heuristic_rates_recursion_identity(two_state, rng):
    r1 = 2.0
    for _ in range(200):
        traj, isig, rsig = [], 0.0, 0.0
        mis = two_state.sample_mi(rng, 6)
        for k, i in enumerate(mis, start=1):
            rate = heuristic_rates(traj, r1)
            if k > 1:
                assert rate == pytest.approx(mis[k - 2], abs=1e-12)
            isig, rsig = isig + i, rsig + rate
            if isig >= rsig:
                break
            traj.append((isig, rsig))


def test_heuristic_throughput_special_cases(two_state, rayleigh10):
    f1 = float(rayleigh10.cdf(2.0))
    assert heuristic_throughput(2.0, 1, rayleigh10).eta == pytest.approx(2.0 * (1 - f1), abs=1e-14)
    assert heuristic_throughput(1.5, None, two_state).eta == pytest.approx(1.375, abs=1e-14)
    assert heuristic_throughput(0.5, 5, two_state).eta == 0.5
    never = MiDistribution(0.005, atoms=[(0.5, 1.0)])
    rep = heuristic_throughput(1.0, 4, never)
    assert rep.eta == 0.0 and "never_decodes" in rep.flags


def _heuristic_by_recursion(r1, k_max, f1, c):
    # each round is a fresh trial of I >= R1; success at round k earns R1 plus
    # k - 1 failed MIs, each with conditional mean c / f1
    reward = sum(f1 ** (k - 1) * (1 - f1) * r1 for k in range(1, k_max + 1))
    reward += sum((k - 1) * f1 ** (k - 2) * (1 - f1) * c for k in range(2, k_max + 1))
    rounds = sum(f1 ** j for j in range(k_max))
    return reward / rounds


@pytest.mark.parametrize("k_max", [1, 2, 3, 7])
@pytest.mark.parametrize("avg_db", [0.0, 12.0])
def test_heuristic_formula_matches_per_round_accounting(k_max, avg_db):
    ch = ChannelModel(Rayleigh.from_db(avg_db))
    r1 = 2.0
    f1, c = float(ch.cdf(r1)), float(ch.partial_mean(r1))
    assert heuristic_throughput(r1, k_max, ch).eta == pytest.approx(_heuristic_by_recursion(r1, k_max, f1, c), rel=1e-12)


@given(st.floats(-5.0, 25.0), st.floats(0.25, 6.0))
def test_heuristic_nondecreasing_in_rounds(avg_db, r1):
    ch = ChannelModel(Rayleigh.from_db(avg_db)).discretize(0.01)
    etas = [heuristic_throughput(r1, k, ch).eta for k in range(1, 12)]
    assert np.all(np.diff(etas) >= -1e-12)
    assert etas[-1] <= heuristic_throughput(r1, None, ch).eta + 1e-12


@pytest.mark.parametrize("avg_db, r1", [(0.0, 1.0), (10.0, 3.0), (20.0, 6.0)])
def test_heuristic_converges_geometrically(avg_db, r1):
    ch = ChannelModel(Rayleigh.from_db(avg_db))
    f1, c = float(ch.cdf(r1)), float(ch.partial_mean(r1))
    eta_inf = heuristic_throughput(r1, None, ch).eta
    gap = abs(heuristic_throughput(r1, 50, ch).eta - eta_inf)
    # tails of the renewal numerator and denominator beyond round 50
    num_tail = f1 ** 50 * r1 + sum((k - 1) * f1 ** (k - 2) * (1 - f1) * c for k in range(51, 5000))
    den_tail = sum(f1 ** j for j in range(50, 5000))
    assert gap <= num_tail + eta_inf * den_tail + 1e-15


def test_policy_adapters():
    h = HeuristicPolicy(2.0, 4)
    assert h.rates(1, np.zeros(3), np.zeros(3)).tolist() == [2.0] * 3
    assert h.rates(2, np.array([0.5, 1.7]), np.array([2.0, 2.0])).tolist() == [0.5, 1.7]
    k2 = ClosedFormK2Policy(1.0, 10.0)
    assert k2.k_max == 2
    assert k2.rates(2, np.array([0.3]), np.array([1.0]))[0] == pytest.approx(closed_form_r2(0.3, 1.0, 10.0))
