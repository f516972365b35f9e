"""Network layers with explicit forward/backward passes.

Every layer exposes forward(x), backward(dout), parameters()/gradients()
(flat name -> array dicts, empty when the layer has none), out_shape() and
flops() for static analysis, and astype() for precision switches. Arrays
flow as (B, C, H, W); convolutions lower to a column matrix and a single
GEMM, with the gather/scatter kernels supplied by the active backend.
"""

import numpy as np

from .. import backend


def _kaiming_uniform(rng, shape, fan_in):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, shape)


class Conv2d:
    """2D convolution (cross-correlation) with square kernel."""

    def __init__(self, in_channels, out_channels, kernel_size, stride=1,
                 padding=0, rng=None):
        if kernel_size < 1 or stride < 1 or padding < 0:
            raise ValueError("bad conv geometry")
        rng = rng or np.random.default_rng(0)
        fan_in = in_channels * kernel_size * kernel_size
        self.w = _kaiming_uniform(
            rng, (out_channels, in_channels, kernel_size, kernel_size), fan_in)
        bb = 1.0 / np.sqrt(fan_in)
        self.b = rng.uniform(-bb, bb, out_channels)
        self.stride = stride
        self.padding = padding
        self.dw = None
        self.db = None
        self._xp = None
        self._x_shape = None

    @property
    def in_channels(self):
        return self.w.shape[1]

    @property
    def out_channels(self):
        return self.w.shape[0]

    @property
    def kernel_size(self):
        return self.w.shape[2]

    def _geometry(self, H, W):
        k, s, p = self.kernel_size, self.stride, self.padding
        oh = (H + 2 * p - k) // s + 1
        ow = (W + 2 * p - k) // s + 1
        if oh < 1 or ow < 1:
            raise ValueError(f"input {H}x{W} too small for k={k} s={s} p={p}")
        return oh, ow

    def forward(self, x):
        B, C, H, W = x.shape
        if C != self.in_channels:
            raise ValueError(f"expected {self.in_channels} channels, got {C}")
        p = self.padding
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        oh, ow = self._geometry(H, W)
        cols = backend.im2col(xp, self.kernel_size, self.stride, oh, ow)
        w2 = self.w.reshape(self.out_channels, -1)
        out = w2 @ cols + self.b[:, None]
        self._xp = xp
        self._x_shape = x.shape
        self._oh, self._ow = oh, ow
        return out.reshape(self.out_channels, B, oh, ow).transpose(1, 0, 2, 3)

    def backward(self, dout):
        if self._xp is None:
            raise RuntimeError("backward before forward")
        B, C, H, W = self._x_shape
        k, s, p = self.kernel_size, self.stride, self.padding
        oh, ow = self._oh, self._ow
        dout2 = dout.transpose(1, 0, 2, 3).reshape(self.out_channels, -1)
        # columns are recomputed instead of cached: one extra gather per
        # step, half the activation memory
        cols = backend.im2col(self._xp, k, s, oh, ow)
        self.dw = (dout2 @ cols.T).reshape(self.w.shape)
        self.db = dout2.sum(axis=1)
        dcols = self.w.reshape(self.out_channels, -1).T @ dout2
        dxp = backend.col2im(dcols, B, C, H + 2 * p, W + 2 * p, k, s, oh, ow)
        return dxp[:, :, p:p + H, p:p + W] if p else dxp

    def parameters(self):
        return {"w": self.w, "b": self.b}

    def gradients(self):
        return {"w": self.dw, "b": self.db}

    def astype(self, dtype):
        self.w = self.w.astype(dtype)
        self.b = self.b.astype(dtype)

    def out_shape(self, in_shape):
        _C, H, W = in_shape
        oh, ow = self._geometry(H, W)
        return (self.out_channels, oh, ow)

    def flops(self, in_shape):
        _F, oh, ow = self.out_shape(in_shape)
        k = self.kernel_size
        return 2 * k * k * self.in_channels * self.out_channels * oh * ow


class ReLU:
    def __init__(self):
        self._mask = None

    def forward(self, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dout):
        if self._mask is None:
            raise RuntimeError("backward before forward")
        return dout * self._mask

    def parameters(self):
        return {}

    def gradients(self):
        return {}

    def astype(self, dtype):
        pass

    def out_shape(self, in_shape):
        return in_shape

    def flops(self, in_shape):
        return int(np.prod(in_shape))


class MaxPool2d:
    def __init__(self, kernel_size, stride=None):
        if kernel_size < 1:
            raise ValueError("kernel_size must be >= 1")
        self.kernel_size = kernel_size
        self.stride = stride or kernel_size
        self._idx = None

    def _geometry(self, H, W):
        k, s = self.kernel_size, self.stride
        if H < k or W < k:
            raise ValueError(f"input {H}x{W} smaller than pool window {k}")
        return (H - k) // s + 1, (W - k) // s + 1

    def forward(self, x):
        B, C, H, W = x.shape
        oh, ow = self._geometry(H, W)
        out, idx = backend.maxpool_forward(x, self.kernel_size, self.stride,
                                           oh, ow)
        self._idx = idx
        self._x_shape = x.shape
        return out

    def backward(self, dout):
        if self._idx is None:
            raise RuntimeError("backward before forward")
        B, C, H, W = self._x_shape
        return backend.maxpool_backward(dout, self._idx, B, C, H, W)

    def parameters(self):
        return {}

    def gradients(self):
        return {}

    def astype(self, dtype):
        pass

    def out_shape(self, in_shape):
        C, H, W = in_shape
        oh, ow = self._geometry(H, W)
        return (C, oh, ow)

    def flops(self, in_shape):
        return int(np.prod(in_shape))


class GlobalAvgPool:
    """(B, C, H, W) -> (B, C) spatial mean."""

    def __init__(self):
        self._x_shape = None

    def forward(self, x):
        self._x_shape = x.shape
        return x.mean(axis=(2, 3))

    def backward(self, dout):
        if self._x_shape is None:
            raise RuntimeError("backward before forward")
        B, C, H, W = self._x_shape
        scale = np.asarray(1.0 / (H * W), dtype=dout.dtype)
        return np.broadcast_to((dout * scale)[:, :, None, None],
                               self._x_shape).copy()

    def parameters(self):
        return {}

    def gradients(self):
        return {}

    def astype(self, dtype):
        pass

    def out_shape(self, in_shape):
        return (in_shape[0],)

    def flops(self, in_shape):
        return int(np.prod(in_shape))


class FullyConnected:
    """Dense layer; flattens any trailing input dimensions."""

    def __init__(self, in_features, out_features, rng=None):
        rng = rng or np.random.default_rng(0)
        self.w = _kaiming_uniform(rng, (out_features, in_features), in_features)
        bb = 1.0 / np.sqrt(in_features)
        self.b = rng.uniform(-bb, bb, out_features)
        self._x2 = None

    @property
    def in_features(self):
        return self.w.shape[1]

    @property
    def out_features(self):
        return self.w.shape[0]

    def forward(self, x):
        self._x_shape = x.shape
        x2 = x.reshape(x.shape[0], -1)
        if x2.shape[1] != self.in_features:
            raise ValueError(
                f"expected {self.in_features} features, got {x2.shape[1]}")
        self._x2 = x2
        return x2 @ self.w.T + self.b

    def backward(self, dout):
        if self._x2 is None:
            raise RuntimeError("backward before forward")
        self.dw = dout.T @ self._x2
        self.db = dout.sum(axis=0)
        return (dout @ self.w).reshape(self._x_shape)

    def parameters(self):
        return {"w": self.w, "b": self.b}

    def gradients(self):
        return {"w": self.dw, "b": self.db}

    def astype(self, dtype):
        self.w = self.w.astype(dtype)
        self.b = self.b.astype(dtype)

    def out_shape(self, in_shape):
        if int(np.prod(in_shape)) != self.in_features:
            raise ValueError("input shape does not match in_features")
        return (self.out_features,)

    def flops(self, in_shape):
        return 2 * self.in_features * self.out_features


class ResidualBlock:
    """Two 3x3 same-shape convolutions with an identity skip.

    out = relu(conv2(relu(conv1(x))) + x); conv2's output width is pinned
    to the block input width by the skip connection.
    """

    def __init__(self, channels, hidden=None, rng=None):
        rng = rng or np.random.default_rng(0)
        hidden = hidden or channels
        self.conv1 = Conv2d(channels, hidden, 3, stride=1, padding=1, rng=rng)
        self.conv2 = Conv2d(hidden, channels, 3, stride=1, padding=1, rng=rng)
        self._mask1 = None
        self._mask_out = None

    @property
    def channels(self):
        return self.conv1.in_channels

    @property
    def hidden(self):
        return self.conv1.out_channels

    def forward(self, x):
        h1 = self.conv1.forward(x)
        self._mask1 = h1 > 0
        h2 = self.conv2.forward(h1 * self._mask1)
        pre = h2 + x
        self._mask_out = pre > 0
        return pre * self._mask_out

    def backward(self, dout):
        if self._mask_out is None:
            raise RuntimeError("backward before forward")
        dpre = dout * self._mask_out
        dr1 = self.conv2.backward(dpre)
        dx = self.conv1.backward(dr1 * self._mask1)
        return dx + dpre

    def parameters(self):
        out = {}
        for sub, conv in (("conv1", self.conv1), ("conv2", self.conv2)):
            for k, v in conv.parameters().items():
                out[f"{sub}.{k}"] = v
        return out

    def gradients(self):
        out = {}
        for sub, conv in (("conv1", self.conv1), ("conv2", self.conv2)):
            for k, v in conv.gradients().items():
                out[f"{sub}.{k}"] = v
        return out

    def astype(self, dtype):
        self.conv1.astype(dtype)
        self.conv2.astype(dtype)

    def out_shape(self, in_shape):
        return in_shape

    def flops(self, in_shape):
        mid = self.conv1.out_shape(in_shape)
        total = self.conv1.flops(in_shape) + int(np.prod(mid))
        total += self.conv2.flops(mid)
        # residual add + final activation
        total += 2 * int(np.prod(in_shape))
        return total
