"""Pure-numpy implementations of the hot data-movement kernels.

These are the fallback path when numba is unavailable or disabled via
``BEAMVISTA_BACKEND=numpy``. The GEMM contractions themselves live in the
callers (BLAS through ``@``); what varies between backends is the
im2col/col2im gather-scatter and pooling index bookkeeping.
"""

import numpy as np


def im2col(xp, k, stride, oh, ow):
    """Padded input (B,C,Hp,Wp) -> column matrix (C*k*k, B*oh*ow)."""
    B, C, _, _ = xp.shape
    cols = np.empty((C, k, k, B, oh, ow), dtype=xp.dtype)
    for ky in range(k):
        for kx in range(k):
            block = xp[:, :, ky:ky + oh * stride:stride, kx:kx + ow * stride:stride]
            cols[:, ky, kx] = block.transpose(1, 0, 2, 3)
    return cols.reshape(C * k * k, B * oh * ow)


def col2im(dcols, B, C, Hp, Wp, k, stride, oh, ow):
    """Scatter-add column gradients (C*k*k, B*oh*ow) back to (B,C,Hp,Wp)."""
    dxp = np.zeros((B, C, Hp, Wp), dtype=dcols.dtype)
    dc = dcols.reshape(C, k, k, B, oh, ow)
    for ky in range(k):
        for kx in range(k):
            dxp[:, :, ky:ky + oh * stride:stride, kx:kx + ow * stride:stride] += \
                dc[:, ky, kx].transpose(1, 0, 2, 3)
    return dxp


def maxpool_forward(x, k, stride, oh, ow):
    """Max pooling; returns pooled values and flat argmax index per window.

    The index is into the flattened H*W plane of the input so backward can
    scatter without re-deriving window geometry.
    """
    B, C, H, W = x.shape
    s = x.strides
    win = np.lib.stride_tricks.as_strided(
        x, (B, C, oh, ow, k, k),
        (s[0], s[1], s[2] * stride, s[3] * stride, s[2], s[3]))
    flat = win.reshape(B, C, oh, ow, k * k)
    local = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, local[..., None], axis=-1)[..., 0]
    oy = np.arange(oh)[:, None] * stride
    ox = np.arange(ow)[None, :] * stride
    iy = oy[None, None] + local // k
    ix = ox[None, None] + local % k
    idx = (iy * W + ix).astype(np.int64)
    return out, idx


def maxpool_backward(dout, idx, B, C, H, W):
    dx = np.zeros((B, C, H * W), dtype=dout.dtype)
    b = np.arange(B)[:, None, None, None]
    c = np.arange(C)[None, :, None, None]
    np.add.at(dx, (b, c, idx), dout)
    return dx.reshape(B, C, H, W)
