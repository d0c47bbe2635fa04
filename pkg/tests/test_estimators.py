import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from xpharq.channel import ChannelModel, Rayleigh
from xpharq.closed_form import heuristic_throughput
from xpharq.estimators import HeuristicRateAdapter, IrRateOptimizer, MdpRateAdapter, XpRateOptimizer
from xpharq.exceptions import ConfigurationError


def test_params_and_clone():
    est = XpRateOptimizer(k_max=3, rate_step=0.5, r1_max=6.0, rk_max=4.0)
    params = est.get_params()
    assert params["k_max"] == 3 and params["rate_step"] == 0.5
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    est.set_params(k_max=2)
    assert est.k_max == 2


def test_ir_and_xp_on_two_state(two_state_dist):
    ir = IrRateOptimizer(k_max=2).fit(two_state_dist)
    assert ir.rate_ == 1.5 and ir.score() == pytest.approx(1.2)
    xp = XpRateOptimizer(k_max=2).fit(two_state_dist)
    assert xp.score() >= 1.3 - 1e-12
    pred = xp.predict([[1, 0.0, 0.0], [2, 1.0, xp.schedule_[0]]])
    assert pred.tolist() == list(xp.schedule_)


def test_mdp_adapter_from_config_dict():
    cfg = {"snr": {"kind": "two_state_mi", "i_a": 1.0, "i_b": 1.5, "p": 0.75}}
    est = MdpRateAdapter(k_max=2, r_max=4.0, first_rate=1.5).fit(cfg)
    assert est.score() == pytest.approx(1.3, abs=1e-8)
    assert est.predict([[1, 0, 0], [2, 1.0, 1.5]]).tolist() == [1.5, 0.5]


def test_heuristic_adapter(rayleigh10):
    est = HeuristicRateAdapter(k_max=None, rate_step=0.25, r1_max=8.0).fit(rayleigh10)
    grid = np.arange(1, 33) * 0.25
    brute = max(heuristic_throughput(float(r), np.inf, rayleigh10).eta for r in grid)
    assert est.score() == pytest.approx(brute, abs=1e-12)
    # I1 = 1.0 and I2 = 0.2: round 3 carries I2
    assert est.predict([[3, 1.2, 1.0 + est.r1_]])[0] == pytest.approx(0.2, abs=1e-12)


def test_unfitted_and_bad_input(two_state_dist):
    with pytest.raises(NotFittedError):
        IrRateOptimizer().predict([[1, 0, 0]])
    est = IrRateOptimizer().fit(two_state_dist)
    with pytest.raises(ConfigurationError):
        est.predict([[0, 0, 0]])
    with pytest.raises(ConfigurationError):
        est.predict([1, 0, 0])
    with pytest.raises(ConfigurationError):
        IrRateOptimizer().fit("rayleigh")


def test_fit_on_channel_model_discretises():
    ch = ChannelModel(Rayleigh.from_db(10.0))
    a = IrRateOptimizer(k_max=2, mi_step=0.01).fit(ch)
    b = IrRateOptimizer(k_max=2).fit(ch.discretize(0.01))
    assert a.rate_ == b.rate_ and a.score() == b.score()
