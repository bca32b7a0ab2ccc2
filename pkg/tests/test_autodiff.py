"""Tape gradients against hand derivatives and central finite differences."""

import numpy as np
import pytest

from dtmcast.autodiff import Tensor, concat
from dtmcast.nn import Mlp, apply_mlp

FD_H = 1e-5
FD_TOL = 1e-4


def finite_diff(f, arrays, h=FD_H):
    """Central finite differences of scalar f() w.r.t. each array in place."""
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        flat = arr.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = f()
            flat[i] = keep - h
            down = f()
            flat[i] = keep
            gflat[i] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def max_rel_err(a, b):
    err = 0.0
    for x, y in zip(a, b):
        denom = np.maximum(np.maximum(np.abs(x), np.abs(y)), 1e-6)
        err = max(err, float(np.max(np.abs(x - y) / denom)))
    return err


def test_single_linear_layer_hand_affine():
    net = Mlp([1, 1], rng=np.random.default_rng(0))
    net.weights[0][:] = [[2.0]]
    net.biases[0][:] = [1.0]
    assert net.forward(np.array([3.0])) == pytest.approx([7.0])


def test_zero_initialized_net_zero_output(rng):
    net = Mlp([4, 8, 3], rng=rng)
    net.set_params([np.zeros_like(p) for p in net.params()])
    out = net.forward(rng.normal(size=(5, 4)))
    assert np.all(out == 0.0)


def test_tanh_head_codomain(rng):
    net = Mlp([3, 16, 4], out_activation="tanh", rng=rng)
    out = net.forward(rng.normal(size=(50, 3)))
    assert np.all(out > -1.0) and np.all(out < 1.0)


def test_quadratic_loss_hand_derivative():
    # loss = (w*x + b - y)^2, d/dw = 2(wx+b-y)x, d/db = 2(wx+b-y)
    net = Mlp([1, 1], rng=np.random.default_rng(1))
    net.weights[0][:] = [[1.5]]
    net.biases[0][:] = [0.25]
    x, y = 2.0, 5.0
    params = net.tensor_params()
    pred = apply_mlp(params, Tensor(np.array([[x]])))
    diff = pred - Tensor(np.array([[y]]))
    loss = (diff * diff).mean()
    loss.backward()
    resid = 1.5 * x + 0.25 - y
    assert np.allclose(params[0].grad, [[2 * resid * x]])
    assert np.allclose(params[1].grad, [2 * resid])


@pytest.mark.parametrize("seed", range(6))
def test_three_layer_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    sizes = [int(rng.integers(2, 6)) for _ in range(4)]
    out_act = ["identity", "tanh"][seed % 2]
    net = Mlp(sizes, out_activation=out_act, rng=rng)
    x = rng.normal(size=(4, sizes[0]))
    w = rng.normal(size=(4, sizes[-1]))  # fixed mixing to scalar

    def loss_value():
        return float((net.forward(x) * w).sum())

    params = net.tensor_params()
    out = apply_mlp(params, Tensor(x), out_activation=out_act)
    (out * Tensor(w)).sum().backward()
    ad = [p.grad for p in params]
    fd = finite_diff(loss_value, net.params())
    assert max_rel_err(ad, fd) < FD_TOL


def test_gradient_wrt_inputs_matches_finite_differences(rng):
    net = Mlp([5, 8, 8, 2], rng=rng)
    x = rng.normal(size=(3, 5))
    mix = rng.normal(size=(3, 2))

    xt = Tensor(x)
    out = apply_mlp(net.tensor_params(), xt)
    (out * Tensor(mix)).sum().backward()

    def loss_value():
        return float((net.forward(x) * mix).sum())

    fd = finite_diff(loss_value, [x])
    assert max_rel_err([xt.grad], fd) < FD_TOL


def test_concat_backward_splits_gradient(rng):
    a = Tensor(rng.normal(size=(2, 3)))
    b = Tensor(rng.normal(size=(2, 2)))
    mix = rng.normal(size=(2, 5))
    (concat([a, b], axis=1) * Tensor(mix)).sum().backward()
    assert np.allclose(a.grad, mix[:, :3])
    assert np.allclose(b.grad, mix[:, 3:])


def test_bias_broadcast_gradient_sums_over_batch(rng):
    w = Tensor(rng.normal(size=(3, 2)))
    b = Tensor(rng.normal(size=(2,)))
    x = Tensor(rng.normal(size=(7, 3)))
    (x @ w + b).sum().backward()
    assert np.allclose(b.grad, np.full(2, 7.0))


def test_reused_parameter_accumulates(rng):
    # the same tensor applied twice must accumulate both contributions
    w = Tensor(np.array([[1.5]]))
    x1 = Tensor(np.array([[2.0]]))
    x2 = Tensor(np.array([[3.0]]))
    ((x1 @ w) + (x2 @ w)).sum().backward()
    assert np.allclose(w.grad, [[5.0]])


def test_backward_requires_scalar(rng):
    t = Tensor(rng.normal(size=(2, 2)))
    with pytest.raises(ValueError):
        (t * 2.0).backward()
