"""Layer forward oracles and finite-difference gradient checks.

Analytic backward passes are compared against central differences
(step 1e-5, float64). The comparison denominator guards against division
by zero, so exact-zero gradients (masked ReLU inputs) pass trivially.
"""

import numpy as np
import pytest

from beamvista.nn.layers import (Conv2d, FullyConnected, GlobalAvgPool,
                                 MaxPool2d, ReLU, ResidualBlock)
from beamvista.nn.train import cross_entropy

STEP = 1e-5
TOL = 1e-4


def rel_err(a, b):
    num = np.abs(a - b)
    den = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1.0)
    return float((num / den).max())


def numeric_grad(loss_fn, arr, h=STEP):
    g = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        lp = loss_fn()
        flat[i] = keep - h
        lm = loss_fn()
        flat[i] = keep
        gf[i] = (lp - lm) / (2.0 * h)
    return g


def check_layer(layer, x, seed=0):
    """Projected-loss gradient check of dx and every parameter."""
    rng = np.random.default_rng(seed)
    r = rng.normal(size=layer.forward(x).shape)

    def loss():
        return float(np.sum(layer.forward(x) * r))

    loss()  # populate caches for the analytic pass
    dx = layer.backward(r.copy())
    grads = layer.gradients()

    errs = {"x": rel_err(dx, numeric_grad(loss, x))}
    for name, param in layer.parameters().items():
        errs[name] = rel_err(grads[name], numeric_grad(loss, param))
    return errs


def oracle_conv(x, w, b, stride, padding):
    B, C, H, W = x.shape
    F, _, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    oh = (H + 2 * padding - k) // stride + 1
    ow = (W + 2 * padding - k) // stride + 1
    out = np.zeros((B, F, oh, ow))
    for bi in range(B):
        for f in range(F):
            for oy in range(oh):
                for ox in range(ow):
                    patch = xp[bi, :, oy * stride:oy * stride + k,
                               ox * stride:ox * stride + k]
                    out[bi, f, oy, ox] = np.sum(patch * w[f]) + b[f]
    return out


class TestConvForward:
    @pytest.mark.parametrize("stride,padding", [(1, 0), (1, 1), (2, 1), (3, 0)])
    def test_matches_naive_loops(self, stride, padding):
        rng = np.random.default_rng(4)
        layer = Conv2d(3, 5, 3, stride=stride, padding=padding, rng=rng)
        x = rng.normal(size=(2, 3, 9, 9))
        np.testing.assert_allclose(
            layer.forward(x),
            oracle_conv(x, layer.w, layer.b, stride, padding), atol=1e-10)

    def test_channel_mismatch_rejected(self):
        layer = Conv2d(3, 4, 3)
        with pytest.raises(ValueError):
            layer.forward(np.zeros((1, 2, 8, 8)))

    def test_too_small_input_rejected(self):
        layer = Conv2d(1, 1, 5)
        with pytest.raises(ValueError):
            layer.forward(np.zeros((1, 1, 3, 3)))


class TestGradients:
    def test_conv_plain(self):
        rng = np.random.default_rng(10)
        layer = Conv2d(2, 3, 3, rng=rng)
        errs = check_layer(layer, rng.normal(size=(2, 2, 6, 6)))
        assert max(errs.values()) < TOL, errs

    def test_conv_strided_padded(self):
        rng = np.random.default_rng(11)
        layer = Conv2d(2, 4, 3, stride=2, padding=1, rng=rng)
        errs = check_layer(layer, rng.normal(size=(2, 2, 7, 7)))
        assert max(errs.values()) < TOL, errs

    def test_relu(self):
        rng = np.random.default_rng(12)
        errs = check_layer(ReLU(), rng.normal(size=(3, 4, 5, 5)))
        assert max(errs.values()) < TOL, errs

    def test_maxpool(self):
        rng = np.random.default_rng(13)
        errs = check_layer(MaxPool2d(2), rng.normal(size=(2, 3, 6, 6)))
        assert max(errs.values()) < TOL, errs

    def test_maxpool_overlapping(self):
        rng = np.random.default_rng(14)
        errs = check_layer(MaxPool2d(3, stride=2),
                           rng.normal(size=(2, 2, 7, 7)))
        assert max(errs.values()) < TOL, errs

    def test_global_avg_pool(self):
        rng = np.random.default_rng(15)
        errs = check_layer(GlobalAvgPool(), rng.normal(size=(3, 5, 4, 4)))
        assert max(errs.values()) < TOL, errs

    def test_fully_connected(self):
        rng = np.random.default_rng(16)
        layer = FullyConnected(12, 7, rng=rng)
        errs = check_layer(layer, rng.normal(size=(4, 12)))
        assert max(errs.values()) < TOL, errs

    def test_fully_connected_flattens(self):
        rng = np.random.default_rng(17)
        layer = FullyConnected(2 * 3 * 3, 5, rng=rng)
        errs = check_layer(layer, rng.normal(size=(2, 2, 3, 3)))
        assert max(errs.values()) < TOL, errs

    def test_residual_block(self):
        rng = np.random.default_rng(18)
        layer = ResidualBlock(3, rng=rng)
        errs = check_layer(layer, rng.normal(size=(2, 3, 5, 5)))
        assert max(errs.values()) < TOL, errs

    def test_residual_block_narrow_hidden(self):
        rng = np.random.default_rng(19)
        layer = ResidualBlock(4, hidden=2, rng=rng)
        errs = check_layer(layer, rng.normal(size=(2, 4, 5, 5)))
        assert max(errs.values()) < TOL, errs

    def test_softmax_cross_entropy(self):
        rng = np.random.default_rng(20)
        logits = rng.normal(size=(6, 9))
        labels = rng.integers(0, 9, 6)
        _loss, dl = cross_entropy(logits, labels)

        def loss():
            return cross_entropy(logits, labels)[0]

        assert rel_err(dl, numeric_grad(loss, logits)) < TOL


class TestStateErrors:
    @pytest.mark.parametrize("layer,shape", [
        (ReLU(), (1, 1, 2, 2)),
        (MaxPool2d(2), (1, 1, 4, 4)),
        (GlobalAvgPool(), (1, 1, 2, 2)),
        (Conv2d(1, 1, 3), (1, 1, 4, 4)),
        (FullyConnected(4, 2), (1, 4)),
        (ResidualBlock(2), (1, 2, 4, 4)),
    ])
    def test_backward_before_forward(self, layer, shape):
        with pytest.raises(RuntimeError):
            layer.backward(np.zeros(shape))


class TestStaticAnalysis:
    def test_conv_flop_count(self):
        # 3x3 single-channel conv on a padded 4x4 input: 2*9*16 ops
        layer = Conv2d(1, 1, 3, padding=1)
        assert layer.flops((1, 4, 4)) == 288

    def test_fc_flop_count(self):
        assert FullyConnected(10, 5).flops((10,)) == 100

    def test_conv_param_count(self):
        layer = Conv2d(3, 8, 3)
        assert sum(v.size for v in layer.parameters().values()) == 224

    def test_shapes_chain(self):
        conv = Conv2d(3, 16, 3, stride=2, padding=1)
        assert conv.out_shape((3, 64, 64)) == (16, 32, 32)
        assert MaxPool2d(2).out_shape((16, 32, 32)) == (16, 16, 16)
        assert GlobalAvgPool().out_shape((16, 16, 16)) == (16,)
        assert ResidualBlock(16).out_shape((16, 8, 8)) == (16, 8, 8)
        assert FullyConnected(16, 4).out_shape((16,)) == (4,)

    def test_fc_shape_mismatch(self):
        with pytest.raises(ValueError):
            FullyConnected(16, 4).out_shape((8,))

    def test_cross_entropy_oracle(self):
        # two rows computed by hand against log-sum-exp
        logits = np.array([[1.0, 2.0, 0.5], [0.0, 0.0, 0.0]])
        labels = np.array([1, 2])
        loss, _ = cross_entropy(logits, labels)
        lse0 = np.log(np.exp(1.0) + np.exp(2.0) + np.exp(0.5))
        want = ((lse0 - 2.0) + (np.log(3.0) - 0.0)) / 2.0
        assert abs(loss - want) < 1e-12

    def test_cross_entropy_shift_invariant(self):
        rng = np.random.default_rng(21)
        logits = rng.normal(size=(4, 6))
        labels = rng.integers(0, 6, 4)
        a, da = cross_entropy(logits, labels)
        b, db = cross_entropy(logits + 1000.0, labels)
        assert abs(a - b) < 1e-9
        np.testing.assert_allclose(da, db, atol=1e-12)
