"""Pure-numpy implementations of the hot kernels (fallback backend).

Convolutions use sliding-window views plus tensordot (BLAS); the TDLMS
scan is inherently sequential and runs as a per-pixel loop.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _windows(x, stride):
    # x already padded; (B, C, Hp, Wp) -> (B, C, Ho, Wo, 3, 3)
    win = sliding_window_view(x, (3, 3), axis=(2, 3))
    return win[:, :, ::stride, ::stride]


def conv2d_forward(xp, w, b, stride):
    """3x3 convolution on a pre-padded NCHW batch.

    xp: (B, C, H+2, W+2), w: (O, C, 3, 3), b: (O,).
    Returns (B, O, Ho, Wo) with Ho = H//stride (H divisible by stride).
    """
    win = _windows(xp, stride)
    y = np.tensordot(win, w, axes=[(1, 4, 5), (1, 2, 3)])
    y = np.ascontiguousarray(y.transpose(0, 3, 1, 2))
    y += b[None, :, None, None]
    return y


def conv2d_grads(xp, dy, stride):
    """Weight/bias gradients: xp as in forward, dy (B, O, Ho, Wo)."""
    win = _windows(xp, stride)
    dw = np.tensordot(dy, win, axes=[(0, 2, 3), (0, 2, 3)])
    db = dy.sum(axis=(0, 2, 3))
    return np.ascontiguousarray(dw), db


def conv2d_input_grad(dy, w, stride, in_hw):
    """Gradient wrt the (unpadded) input, shape (B, C, H, W)."""
    B, O, Ho, Wo = dy.shape
    H, W = in_hw
    if stride == 1:
        dy_d = dy
    else:
        dy_d = np.zeros((B, O, H, W), dy.dtype)
        dy_d[:, :, ::stride, ::stride] = dy
    wt = np.ascontiguousarray(w.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])
    pad = np.pad(dy_d, ((0, 0), (0, 0), (1, 1), (1, 1)))
    zb = np.zeros(wt.shape[0], dy.dtype)
    return conv2d_forward(pad, wt, zb, 1)


def tdlms_scan(xp, out_hw, ksize, mu):
    """Adaptive 2-D LMS prediction, raster scan, zero-initialized weights.

    xp is the reflect-padded image; the center tap is held at zero so the
    predictor regresses each pixel on its neighbourhood only.
    """
    M, N = out_hw
    r = ksize // 2
    w = np.zeros((ksize, ksize), xp.dtype)
    y = np.empty((M, N), xp.dtype)
    for i in range(M):
        for j in range(N):
            win = xp[i:i + ksize, j:j + ksize]
            pred = float((w * win).sum())
            y[i, j] = pred
            err = xp[i + r, j + r] - pred
            w += (mu * err) * win
            w[r, r] = 0.0
    return y
