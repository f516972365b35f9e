"""Network container and the beam-prediction architecture."""

import numpy as np

from ..errors import ConfigError
from .layers import Conv2d, FullyConnected, ReLU, ResidualBlock


class Network:
    """Ordered layer stack with per-channel input normalization.

    forward() takes raw frames as (B, C, H, W) floats in [0, 1], applies the
    stored channel statistics when present, and runs the stack in the
    configured dtype. input_mean/input_std stay float64 so they serialize
    exactly.
    """

    def __init__(self, layers, input_shape, dtype=np.float64):
        self.layers = list(layers)
        self.input_shape = tuple(input_shape)
        self.dtype = np.dtype(dtype)
        for layer in self.layers:
            layer.astype(self.dtype)
        self.input_mean = None
        self.input_std = None
        self._ready = False

    def normalize(self, x):
        x = np.asarray(x).astype(self.dtype, copy=True)
        if self.input_mean is not None:
            mean = self.input_mean.astype(self.dtype)[:, None, None]
            std = self.input_std.astype(self.dtype)[:, None, None]
            x -= mean
            x /= std
        return x

    def forward(self, x):
        out = self.normalize(x)
        for layer in self.layers:
            out = layer.forward(out)
        self._ready = True
        return out

    def backward(self, dout):
        if not self._ready:
            raise RuntimeError("backward before forward")
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def parameters(self):
        out = {}
        for i, layer in enumerate(self.layers):
            for k, v in layer.parameters().items():
                out[f"layer{i}.{k}"] = v
        return out

    def gradients(self):
        out = {}
        for i, layer in enumerate(self.layers):
            for k, v in layer.gradients().items():
                out[f"layer{i}.{k}"] = v
        return out

    def set_parameters(self, values):
        """Assign arrays by the names parameters() uses."""
        for name, value in values.items():
            prefix, _, rest = name.partition(".")
            obj = self.layers[int(prefix[5:])]
            parts = rest.split(".")
            for part in parts[:-1]:
                obj = getattr(obj, part)
            setattr(obj, parts[-1], np.asarray(value))

    def snapshot(self):
        state = {k: v.copy() for k, v in self.parameters().items()}
        mean = None if self.input_mean is None else self.input_mean.copy()
        std = None if self.input_std is None else self.input_std.copy()
        return state, mean, std

    def restore(self, snap):
        state, mean, std = snap
        self.set_parameters({k: v.copy() for k, v in state.items()})
        self.input_mean = mean
        self.input_std = std

    def astype(self, dtype):
        dtype = np.dtype(dtype)
        for layer in self.layers:
            layer.astype(dtype)
        self.dtype = dtype
        return self

    def topk(self, x, k):
        """(B, k) beam indices, best first; ties resolve to lower index."""
        logits = self.forward(x)
        return np.argsort(-logits, axis=1, kind="stable")[:, :k]


def count_params(net):
    return int(sum(v.size for v in net.parameters().values()))


def count_flops(net, input_shape=None):
    """Forward-pass op count (multiply and add counted separately)."""
    shape = tuple(input_shape or net.input_shape)
    total = 0
    for layer in net.layers:
        total += layer.flops(shape)
        shape = layer.out_shape(shape)
    return int(total)


def build_drone_net(num_beams, input_shape=(3, 64, 64), seed=0,
                    dtype=np.float64):
    """Beam classifier: three strided conv stages with residual refinement.

    64x64 frames reduce 64 -> 32 -> 16 -> 8 spatially; the final dense layer
    maps the 64x8x8 feature block to one logit per beam. The dense head (in
    place of spatial averaging) keeps marker position information, which is
    what separates neighboring beams.
    """
    if num_beams < 2:
        raise ConfigError("need at least two beams to classify")
    C, H, W = input_shape
    if H % 8 or W % 8:
        raise ConfigError("frame sides must be divisible by 8")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xD12]))
    layers = [
        Conv2d(C, 16, 3, stride=2, padding=1, rng=rng),
        ReLU(),
        ResidualBlock(16, rng=rng),
        Conv2d(16, 32, 3, stride=2, padding=1, rng=rng),
        ReLU(),
        ResidualBlock(32, rng=rng),
        Conv2d(32, 64, 3, stride=2, padding=1, rng=rng),
        ReLU(),
        FullyConnected(64 * (H // 8) * (W // 8), num_beams, rng=rng),
    ]
    return Network(layers, input_shape, dtype=dtype)
