import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from doubledescent import neural_net as nn
from doubledescent.dataset_io import Dataset


def test_param_count_examples():
    assert nn.param_count(784, 10, 10) == 7960
    assert nn.param_count(784, 0, 10) == 10
    H = nn.threshold_hidden_units(4000, 784, 10)
    assert H == 51
    assert nn.param_count(784, H, 10) >= 40000 > nn.param_count(784, H - 1, 10)


@given(st.integers(1, 50), st.integers(0, 40), st.integers(1, 12))
def test_param_count_matches_arrays(d, H, K):
    net = nn.init_net(d, H, K, "random_small", seed=0)
    assert net.n_params == sum(getattr(net, p).size for p in nn.PARAMS) == nn.param_count(d, H, K)


@given(st.integers(1, 4000), st.integers(1, 900), st.integers(1, 12))
def test_threshold_is_smallest_sufficient_width(n, d, K):
    H = nn.threshold_hidden_units(n, d, K)
    assert nn.param_count(d, H, K) >= n * K
    assert H == 0 or nn.param_count(d, H - 1, K) < n * K


def test_glorot_bounds():
    net = nn.init_net(784, 30, 10, "glorot", seed=1)
    assert np.max(np.abs(net.W1)) <= math.sqrt(6 / (784 + 30))
    assert np.max(np.abs(net.W2)) <= math.sqrt(6 / (30 + 10))
    assert np.all(net.b1 == 0) and np.all(net.b2 == 0)


def test_weight_reuse_copies_donor():
    donor = nn.init_net(5, 4, 3, "glorot", seed=2)
    same = nn.init_net(5, 4, 3, "weight_reuse", donor=donor, seed=3)
    for p in nn.PARAMS:
        assert np.array_equal(getattr(same, p), getattr(donor, p))
    big = nn.init_net(5, 9, 3, "weight_reuse", donor=donor, seed=3)
    assert np.array_equal(big.W1[:4], donor.W1) and np.array_equal(big.b1[:4], donor.b1)
    assert np.array_equal(big.W2[:, :4], donor.W2) and np.array_equal(big.b2, donor.b2)
    with pytest.raises(ValueError):
        nn.init_net(5, 3, 3, "weight_reuse", donor=donor)
    with pytest.raises(ValueError):
        nn.init_net(5, 6, 3, "weight_reuse")


def test_random_small_variance():
    net = nn.init_net(400, 300, 10, "random_small", seed=4)
    assert net.W1.var() == pytest.approx(0.01, rel=0.02)


def test_weight_reuse_output_perturbation_scale():
    rng = np.random.default_rng(5)
    donor = nn.init_net(6, 3, 2, "glorot", seed=6)
    x = rng.uniform(size=(1, 6))
    base = donor.forward(x)[0, 0]
    diffs, sq_act = [], []
    for s in range(4000):
        net = nn.init_net(6, 11, 2, "weight_reuse", donor=donor, seed=s)
        diffs.append(net.forward(x)[0, 0] - base)
        sq_act.append(np.sum(net.hidden(x)[0, 3:] ** 2))
    # new units' outgoing weights have std 0.1, so the shift has std 0.1 * rms(new activations)
    expect = 0.1 * math.sqrt(np.mean(sq_act))
    assert np.std(diffs) == pytest.approx(expect, rel=0.1)


def _fd_grads(net, X, Y, h=1e-5):
    out = {}
    for p in nn.PARAMS:
        arr = getattr(net, p)
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up, _ = nn.loss_and_grads(net, X, Y)
            arr[idx] = old - h
            down, _ = nn.loss_and_grads(net, X, Y)
            arr[idx] = old
            g[idx] = (up - down) / (2 * h)
        out[p] = g
    return out


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    net = nn.init_net(4, 5, 3, "random_small", seed=seed)
    net.W1 *= 10
    X, Y = rng.standard_normal((3, 4)), rng.standard_normal((3, 3))
    pre = X @ net.W1.T + net.b1
    if np.min(np.abs(pre)) < 1e-3:  # a ReLU kink inside the stencil would void the check
        pytest.skip("pre-activation too close to zero")
    _, grads = nn.loss_and_grads(net, X, Y)
    fd = _fd_grads(net, X, Y)
    for p in nn.PARAMS:
        rel = np.abs(grads[p] - fd[p]) / np.maximum(np.maximum(np.abs(grads[p]), np.abs(fd[p])), 1e-8)
        assert np.max(rel) < 1e-5, p


def _one_datum():
    ds = Dataset(np.array([[1.0]]), np.array([[2.0]]))
    net = nn.TwoLayerNet(np.array([[0.5]]), np.array([0.1]), np.array([[0.5]]), np.array([0.0]))
    return ds, net


def test_one_datum_converges():
    ds, net = _one_datum()
    plain = nn.TrainConfig(momentum=0.0, base_step=0.01, batch_size=1, epochs_max=6000, regime="overparam")
    _, hist = nn.train(net, ds, plain)
    assert np.all(np.diff(hist.train_sq) <= 0)
    assert hist.train_sq[-1] < 1e-6
    heavy = nn.TrainConfig(momentum=0.95, base_step=0.01, batch_size=1, epochs_max=6000, regime="overparam")
    assert nn.train(net, ds, heavy)[1].train_sq[-1] < 1e-6


def test_zero_step_leaves_net_unchanged(rng):
    ds = Dataset.from_classes(rng.standard_normal((20, 3)), rng.integers(0, 2, 20), 2)
    net = nn.init_net(3, 4, 2, seed=0)
    out, hist = nn.train(net, ds, nn.TrainConfig(base_step=0.0, epochs_max=7, regime="overparam"))
    for p in nn.PARAMS:
        assert np.array_equal(getattr(out, p), getattr(net, p))
    assert hist.epochs == 7


def test_divergence_reports_epoch(rng):
    ds = Dataset(rng.standard_normal((10, 3)) * 100, rng.standard_normal((10, 1)))
    with pytest.raises(nn.TrainingDiverged) as err:
        nn.train(nn.init_net(3, 8, 1, seed=0), ds,
                 nn.TrainConfig(base_step=10.0, batch_size=2, epochs_max=50, regime="overparam"))
    assert 0 <= err.value.epoch < 50


def test_underparam_stops_at_zero_error():
    X = np.array([[1.0, 0.0], [0.0, 1.0]] * 10)
    ds = Dataset.from_classes(X, np.array([0, 1] * 10), 2)
    _, hist = nn.train(nn.init_net(2, 4, 2, seed=1), ds,
                       nn.TrainConfig(base_step=0.05, batch_size=4, epochs_max=500, regime="underparam"))
    assert hist.stopped_early and hist.train_01[-1] == 0.0 and hist.epochs < 500


def test_step_schedule():
    cfg = nn.TrainConfig(base_step=1.0)
    assert cfg.step_at(499) == 1.0 and cfg.step_at(500) == pytest.approx(0.9)
    assert cfg.step_at(1000) == pytest.approx(0.81)
    assert nn.TrainConfig(base_step=1.0, regime="overparam").step_at(5000) == 1.0
    with pytest.raises(ValueError):
        nn.TrainConfig(momentum=1.0)


def test_training_is_deterministic(rng):
    ds = Dataset.from_classes(rng.standard_normal((30, 4)), rng.integers(0, 3, 30), 3)
    cfg = nn.TrainConfig(base_step=0.01, batch_size=8, epochs_max=5)
    a, ha = nn.train(nn.init_net(4, 6, 3, seed=2), ds, cfg, seed=9)
    b, hb = nn.train(nn.init_net(4, 6, 3, seed=2), ds, cfg, seed=9)
    assert np.array_equal(a.W1, b.W1) and ha.train_sq == hb.train_sq


def test_weight_reuse_sweep_training_risk_nonincreasing():
    rng = np.random.default_rng(11)
    centers = rng.standard_normal((4, 6)) * 2
    ids = rng.integers(0, 4, 120)
    ds = Dataset.from_classes(centers[ids] + rng.standard_normal((120, 6)), ids, 4)
    grid = [1, 2, 3, 5, 8, 12, 20, 40, 80]
    cfg = nn.TrainConfig(base_step=0.005, batch_size=8, epochs_max=150)
    pts = nn.sweep_hidden_units(ds, grid, cfg, seed=0)
    under = [p for p in pts if p.n_params < ds.n * ds.K]
    assert [p.init for p in under] == ["glorot"] + ["weight_reuse"] * (len(under) - 1)
    final = [p.history.train_sq[-1] for p in under]
    assert all(b <= a + 1e-3 for a, b in zip(final, final[1:]))
    assert [p.n_params for p in pts] == [nn.param_count(6, h, 4) for h in grid]
