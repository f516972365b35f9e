"""Model serialization: architecture JSON plus raw little-endian weights.

File layout mirrors the dataset container:

    magic "VWNN" | u16 version | u16 flags | 8 reserved bytes
    u32 meta length | meta JSON (sorted keys)
    parameter blob (arrays back to back, meta order)
    sha256 of everything above

Weights round-trip bit exactly; the trailing digest catches any flip.
"""

import hashlib
import json
import struct

import numpy as np

from ..errors import CorruptionError, FormatError
from ..fileio import atomic_write_bytes, canonical_json
from .layers import (Conv2d, FullyConnected, GlobalAvgPool, MaxPool2d, ReLU,
                     ResidualBlock)
from .net import Network

MAGIC = b"VWNN"
VERSION = 1
_HEADER = struct.Struct("<4sHH8x")
_U32 = struct.Struct("<I")
_DIGEST_SIZE = 32

_DTYPE_CODES = {"float32": "<f4", "float64": "<f8"}


def _describe(layer):
    if isinstance(layer, Conv2d):
        return {"kind": "conv", "in": layer.in_channels,
                "out": layer.out_channels, "k": layer.kernel_size,
                "stride": layer.stride, "padding": layer.padding}
    if isinstance(layer, ReLU):
        return {"kind": "relu"}
    if isinstance(layer, MaxPool2d):
        return {"kind": "maxpool", "k": layer.kernel_size,
                "stride": layer.stride}
    if isinstance(layer, GlobalAvgPool):
        return {"kind": "gap"}
    if isinstance(layer, FullyConnected):
        return {"kind": "fc", "in": layer.in_features,
                "out": layer.out_features}
    if isinstance(layer, ResidualBlock):
        return {"kind": "residual", "channels": layer.channels,
                "hidden": layer.hidden}
    raise TypeError(f"cannot serialize layer {type(layer).__name__}")


def _build(desc):
    kind = desc["kind"]
    rng = np.random.default_rng(0)
    if kind == "conv":
        return Conv2d(desc["in"], desc["out"], desc["k"], desc["stride"],
                      desc["padding"], rng=rng)
    if kind == "relu":
        return ReLU()
    if kind == "maxpool":
        return MaxPool2d(desc["k"], desc["stride"])
    if kind == "gap":
        return GlobalAvgPool()
    if kind == "fc":
        return FullyConnected(desc["in"], desc["out"], rng=rng)
    if kind == "residual":
        return ResidualBlock(desc["channels"], desc["hidden"], rng=rng)
    raise FormatError(f"unknown layer kind {kind!r}")


def clone_network(net):
    """Independent copy rebuilt from descriptors; no caches carried over."""
    copy = Network([_build(_describe(layer)) for layer in net.layers],
                   net.input_shape, dtype=net.dtype)
    copy.astype(net.dtype)
    copy.set_parameters({k: v.copy() for k, v in net.parameters().items()})
    if net.input_mean is not None:
        copy.input_mean = net.input_mean.copy()
        copy.input_std = net.input_std.copy()
    return copy


def save_model(net, path):
    dtype_name = net.dtype.name
    if dtype_name not in _DTYPE_CODES:
        raise TypeError(f"cannot serialize dtype {dtype_name}")
    code = _DTYPE_CODES[dtype_name]
    params = net.parameters()
    order = list(params.keys())
    meta = {
        "format": "VWNN",
        "version": VERSION,
        "arch": [_describe(layer) for layer in net.layers],
        "input_shape": [int(d) for d in net.input_shape],
        "dtype": dtype_name,
        "input_mean": None if net.input_mean is None
        else [float(v) for v in net.input_mean],
        "input_std": None if net.input_std is None
        else [float(v) for v in net.input_std],
        "param_order": order,
        "param_shapes": {k: list(params[k].shape) for k in order},
    }
    blob = b"".join(
        np.ascontiguousarray(params[k], dtype=code).tobytes() for k in order)
    mbytes = canonical_json(meta)
    body = (_HEADER.pack(MAGIC, VERSION, 0) + _U32.pack(len(mbytes))
            + mbytes + blob)
    atomic_write_bytes(path, body + hashlib.sha256(body).digest())


def load_model(path):
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEADER.size + _U32.size + _DIGEST_SIZE:
        raise FormatError(f"{path}: too short to be a model file")
    magic, version, _flags = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    body, digest = raw[:-_DIGEST_SIZE], raw[-_DIGEST_SIZE:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptionError(f"{path}: file hash mismatch")
    (mlen,) = _U32.unpack_from(body, _HEADER.size)
    mstart = _HEADER.size + _U32.size
    if mstart + mlen > len(body):
        raise CorruptionError(f"{path}: meta extends past end of file")
    try:
        meta = json.loads(body[mstart:mstart + mlen])
    except json.JSONDecodeError as e:
        raise CorruptionError(f"{path}: meta is not valid JSON") from e

    dtype_name = meta["dtype"]
    if dtype_name not in _DTYPE_CODES:
        raise FormatError(f"{path}: unknown dtype {dtype_name!r}")
    code = _DTYPE_CODES[dtype_name]
    itemsize = np.dtype(code).itemsize

    net = Network([_build(d) for d in meta["arch"]],
                  tuple(meta["input_shape"]), dtype=dtype_name)
    net.astype(dtype_name)
    if meta["input_mean"] is not None:
        net.input_mean = np.asarray(meta["input_mean"], np.float64)
        net.input_std = np.asarray(meta["input_std"], np.float64)

    shapes = meta["param_shapes"]
    expect = sum(int(np.prod(shapes[k])) for k in meta["param_order"])
    blob = body[mstart + mlen:]
    if len(blob) != expect * itemsize:
        raise CorruptionError(f"{path}: parameter blob length mismatch")

    values = {}
    offset = 0
    for name in meta["param_order"]:
        shape = tuple(shapes[name])
        n = int(np.prod(shape))
        arr = np.frombuffer(blob, dtype=code, count=n, offset=offset * itemsize)
        values[name] = arr.reshape(shape).astype(dtype_name)
        offset += n
    have = set(net.parameters().keys())
    if have != set(values.keys()):
        raise CorruptionError(f"{path}: parameter names do not match arch")
    net.set_parameters(values)
    return net
