import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from xpharq.analysis import (Method, RateSchedule, failure_probs_ir, failure_probs_xp,
                             throughput_ir, throughput_xp)
from xpharq.channel import ChannelModel, MiDistribution, Rayleigh, ergodic_capacity
from xpharq.exceptions import ConfigurationError


def test_ir_failure_probs_examples(two_state_dist):
    assert failure_probs_ir(two_state_dist, 1.5, 2).tolist() == [0.25, 0.0]
    assert failure_probs_ir(two_state_dist, 3.0, 3).tolist() == [1.0, 0.4375, 0.0]


def test_ir_failure_probs_small_rate(two_state_dist, rayleigh10_dist):
    assert failure_probs_ir(two_state_dist, 1e-9, 3).tolist() == [0.0, 0.0, 0.0]
    assert np.all(failure_probs_ir(rayleigh10_dist, 1e-9, 3) < 1e-6)


def test_ir_throughput_examples(two_state_dist):
    rep = throughput_ir(two_state_dist, 1.5, 2)
    assert rep.eta == pytest.approx(1.2, abs=1e-12)
    assert rep.method is Method.ANALYTIC_IR
    assert rep.expected_rounds == pytest.approx(1.25)
    assert throughput_ir(two_state_dist, 3.0, 3).eta == pytest.approx(3 / 2.4375, abs=1e-9)
    assert throughput_ir(two_state_dist, 1.0, 1).eta == pytest.approx(1.0, abs=1e-15)


def test_xp_failure_probs_examples(two_state_dist):
    assert failure_probs_xp(two_state_dist, (1.5, 0.5)).tolist() == [0.25, 0.0]
    assert failure_probs_xp(two_state_dist, (1.5, 1.0, 0.5)).tolist() == [0.25, 0.0625, 0.0]


def test_xp_throughput_examples(two_state_dist):
    assert throughput_xp(two_state_dist, (1.5, 0.5)).eta == pytest.approx(1.3, abs=1e-12)
    assert throughput_xp(two_state_dist, (1.5, 1.0, 0.5)).eta == pytest.approx(1.78125 / 1.3125, abs=1e-9)


def _xp_by_enumeration(atoms, rates):
    """Throughput and nested failure probabilities by summing over all MI sequences."""
    k_max = len(rates)
    rsig = np.cumsum(rates)
    f = np.zeros(k_max)
    reward = 0.0
    rounds = 0.0
    for combo in itertools.product(atoms, repeat=k_max):
        p = math.prod(pr for _, pr in combo)
        isig = np.cumsum([v for v, _ in combo])
        ok = isig >= rsig - 1e-12
        first = int(np.argmax(ok)) if ok.any() else None
        end = k_max if first is None else first + 1
        rounds += p * end
        if first is not None:
            reward += p * rsig[first]
        f[:end if first is None else first] += p
    return reward / rounds, f


@pytest.mark.parametrize("rates", [(1.5, 0.5), (1.0, 1.25, 0.0), (2.0, 0.0, 1.0, 0.25), (0.75, 0.75, 0.75)])
def test_xp_matches_enumeration(rates):
    atoms = [(0.5, 0.3), (1.0, 0.45), (1.75, 0.25)]
    d = MiDistribution(0.005, atoms=atoms)
    eta, f = _xp_by_enumeration(atoms, rates)
    rep = throughput_xp(d, rates)
    assert rep.eta == pytest.approx(eta, abs=1e-13)
    assert np.allclose(rep.failure_probs, f, atol=1e-14)


@given(st.lists(st.integers(0, 300), min_size=2, max_size=2),
       st.floats(0.05, 0.95),
       st.lists(st.integers(0, 12), min_size=1, max_size=4))
def test_two_atom_failure_probs_match_enumeration(vals, p, rate_steps):
    atoms = [(vals[0] * 0.005, 1 - p), (vals[1] * 0.005, p)]
    rates = [0.25 * (rate_steps[0] + 1)] + [0.25 * r for r in rate_steps[1:]]
    d = MiDistribution(0.005, atoms=atoms)
    _, f = _xp_by_enumeration(d.atoms, rates)
    assert np.allclose(failure_probs_xp(d, rates), f, atol=1e-12)


def test_ir_matches_quadrature_on_rayleigh():
    # two rounds: Pr{I1 + I2 < R} = int F(R - x) dF(x)
    from scipy import integrate
    ch = ChannelModel(Rayleigh.from_db(5.0))
    r = 2.5
    pdf = lambda x: (ch.cdf(x + 1e-6) - ch.cdf(x - 1e-6)) / 2e-6
    oracle, _ = integrate.quad(lambda x: float(pdf(x)) * float(ch.cdf(r - x)), 0, r, limit=200)
    f = failure_probs_ir(ch.discretize(0.0025), r, 2)
    assert f[0] == pytest.approx(float(ch.cdf(r)), abs=1e-5)
    assert f[1] == pytest.approx(oracle, abs=2e-4)


def _random_channel(data):
    if data.draw(st.booleans()):
        n = data.draw(st.integers(1, 3))
        vals = data.draw(st.lists(st.integers(0, 700), min_size=n, max_size=n))
        w = data.draw(st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n))
        tot = sum(w)
        return MiDistribution(0.005, atoms=[(v * 0.005, x / tot) for v, x in zip(vals, w)])
    return ChannelModel(Rayleigh.from_db(data.draw(st.floats(-5.0, 25.0)))).discretize(0.01)


@given(st.data())
def test_xp_failures_nested(data):
    d = _random_channel(data)
    k = data.draw(st.integers(1, 5))
    rates = [data.draw(st.floats(0.05, 5.0))] + [data.draw(st.floats(0.0, 3.0)) for _ in range(k - 1)]
    f = failure_probs_xp(d, rates)
    assert np.all(np.diff(f) <= 0)
    assert np.all((f >= 0) & (f <= 1))


@given(st.data())
def test_zero_tail_xp_degenerates_to_ir(data):
    d = _random_channel(data)
    k = data.draw(st.integers(1, 5))
    r = data.draw(st.floats(0.05, 6.0))
    a = throughput_xp(d, (r,) + (0.0,) * (k - 1))
    b = throughput_ir(d, r, k)
    assert abs(a.eta - b.eta) <= 1e-12
    assert np.allclose(a.failure_probs, b.failure_probs, atol=1e-12)


@given(st.data())
def test_throughput_below_capacity(data):
    d = _random_channel(data)
    k = data.draw(st.integers(1, 4))
    rates = [data.draw(st.floats(0.05, 6.0))] + [data.draw(st.floats(0.0, 3.0)) for _ in range(k - 1)]
    cap = ergodic_capacity(d)
    assert throughput_xp(d, rates).eta <= cap + 2 * d.grid_step
    assert throughput_ir(d, rates[0], k).eta <= cap + 2 * d.grid_step


def test_schedule_validation():
    with pytest.raises(ConfigurationError):
        RateSchedule((0.0, 1.0))
    with pytest.raises(ConfigurationError):
        RateSchedule((1.0, -0.5))
    with pytest.raises(ConfigurationError):
        RateSchedule((1.0, math.inf))
    s = RateSchedule.ir(2.0, 3)
    assert s.rates == (2.0, 0.0, 0.0) and s.k_max == 3
    assert s.cumulative.tolist() == [2.0, 2.0, 2.0]


def test_report_serialises(two_state_dist):
    d = throughput_xp(two_state_dist, (1.5, 0.5)).to_dict()
    assert d["method"] == "analytic_xp" and d["failure_probs"] == [0.25, 0.0]
