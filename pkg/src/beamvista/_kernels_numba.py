"""Numba-jitted versions of the hot kernels.

Same contracts as `_kernels_numpy`. All loops write disjoint locations, so
results are bitwise identical across thread counts.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def im2col(xp, k, stride, oh, ow):
    B, C, Hp, Wp = xp.shape
    cols = np.empty((C * k * k, B * oh * ow), dtype=xp.dtype)
    for c in range(C):
        for ky in range(k):
            for kx in range(k):
                row = (c * k + ky) * k + kx
                for b in range(B):
                    for oy in range(oh):
                        iy = oy * stride + ky
                        base = (b * oh + oy) * ow
                        for ox in range(ow):
                            cols[row, base + ox] = xp[b, c, iy, ox * stride + kx]
    return cols


@njit(cache=True)
def col2im(dcols, B, C, Hp, Wp, k, stride, oh, ow):
    dxp = np.zeros((B, C, Hp, Wp), dtype=dcols.dtype)
    for c in range(C):
        for ky in range(k):
            for kx in range(k):
                row = (c * k + ky) * k + kx
                for b in range(B):
                    for oy in range(oh):
                        iy = oy * stride + ky
                        base = (b * oh + oy) * ow
                        for ox in range(ow):
                            dxp[b, c, iy, ox * stride + kx] += dcols[row, base + ox]
    return dxp


@njit(cache=True)
def maxpool_forward(x, k, stride, oh, ow):
    B, C, H, W = x.shape
    out = np.empty((B, C, oh, ow), dtype=x.dtype)
    idx = np.empty((B, C, oh, ow), dtype=np.int64)
    for b in range(B):
        for c in range(C):
            for oy in range(oh):
                for ox in range(ow):
                    iy0 = oy * stride
                    ix0 = ox * stride
                    best = x[b, c, iy0, ix0]
                    best_i = iy0 * W + ix0
                    for ky in range(k):
                        for kx in range(k):
                            v = x[b, c, iy0 + ky, ix0 + kx]
                            if v > best:
                                best = v
                                best_i = (iy0 + ky) * W + (ix0 + kx)
                    out[b, c, oy, ox] = best
                    idx[b, c, oy, ox] = best_i
    return out, idx


@njit(cache=True)
def maxpool_backward(dout, idx, B, C, H, W):
    dx = np.zeros((B, C, H * W), dtype=dout.dtype)
    _, _, oh, ow = dout.shape
    for b in range(B):
        for c in range(C):
            for oy in range(oh):
                for ox in range(ow):
                    dx[b, c, idx[b, c, oy, ox]] += dout[b, c, oy, ox]
    return dx.reshape(B, C, H, W)
