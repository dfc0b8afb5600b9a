"""Numba @njit implementations of the hot kernels.

Every output element is written by exactly one thread and inner loops run
in a fixed order, so results are reproducible run-to-run regardless of
thread count.  Stride-1 and stride-2 paths are written out separately:
the unit-stride inner loops auto-vectorize, a runtime stride would not.
The TDLMS scan is compiled without fastmath: its contract is bit-equality
with a scalar-loop reference.
"""

import numpy as np
from numba import njit, prange


@njit(cache=True, parallel=True, fastmath=True)
def _conv_fwd_s1(xp, w, b):
    B, C, Hp, Wp = xp.shape
    O = w.shape[0]
    Ho, Wo = Hp - 2, Wp - 2
    y = np.empty((B, O, Ho, Wo), xp.dtype)
    for bo in prange(B * O):
        bi = bo // O
        o = bo % O
        row = np.empty(Wo, xp.dtype)
        for ho in range(Ho):
            for t in range(Wo):
                row[t] = b[o]
            for c in range(C):
                for kh in range(3):
                    for kw in range(3):
                        wv = w[o, c, kh, kw]
                        src = xp[bi, c, ho + kh]
                        for t in range(Wo):
                            row[t] += wv * src[t + kw]
            for t in range(Wo):
                y[bi, o, ho, t] = row[t]
    return y


@njit(cache=True, parallel=True, fastmath=True)
def _conv_fwd_s2(xp, w, b):
    B, C, Hp, Wp = xp.shape
    O = w.shape[0]
    Ho = (Hp - 3) // 2 + 1
    Wo = (Wp - 3) // 2 + 1
    y = np.empty((B, O, Ho, Wo), xp.dtype)
    for bo in prange(B * O):
        bi = bo // O
        o = bo % O
        row = np.empty(Wo, xp.dtype)
        for ho in range(Ho):
            hi = 2 * ho
            for t in range(Wo):
                row[t] = b[o]
            for c in range(C):
                for kh in range(3):
                    for kw in range(3):
                        wv = w[o, c, kh, kw]
                        src = xp[bi, c, hi + kh]
                        for t in range(Wo):
                            row[t] += wv * src[2 * t + kw]
            for t in range(Wo):
                y[bi, o, ho, t] = row[t]
    return y


def conv2d_forward(xp, w, b, stride):
    if stride == 1:
        return _conv_fwd_s1(xp, w, b)
    if stride == 2:
        return _conv_fwd_s2(xp, w, b)
    raise ValueError(f"unsupported stride {stride}")


@njit(cache=True, parallel=True, fastmath=True)
def _conv_grads_s1(xp, dy):
    B, C, Hp, Wp = xp.shape
    O, Ho, Wo = dy.shape[1], dy.shape[2], dy.shape[3]
    dw = np.zeros((O, C, 3, 3), xp.dtype)
    db = np.zeros(O, xp.dtype)
    for o in prange(O):
        bs = db[o] - db[o]
        for bi in range(B):
            for ho in range(Ho):
                gy = dy[bi, o, ho]
                for c in range(C):
                    for kh in range(3):
                        src = xp[bi, c, ho + kh]
                        for kw in range(3):
                            acc = bs - bs
                            for t in range(Wo):
                                acc += gy[t] * src[t + kw]
                            dw[o, c, kh, kw] += acc
                for t in range(Wo):
                    bs += gy[t]
        db[o] = bs
    return dw, db


@njit(cache=True, parallel=True, fastmath=True)
def _conv_grads_s2(xp, dy):
    B, C, Hp, Wp = xp.shape
    O, Ho, Wo = dy.shape[1], dy.shape[2], dy.shape[3]
    dw = np.zeros((O, C, 3, 3), xp.dtype)
    db = np.zeros(O, xp.dtype)
    for o in prange(O):
        bs = db[o] - db[o]
        for bi in range(B):
            for ho in range(Ho):
                hi = 2 * ho
                gy = dy[bi, o, ho]
                for c in range(C):
                    for kh in range(3):
                        src = xp[bi, c, hi + kh]
                        for kw in range(3):
                            acc = bs - bs
                            for t in range(Wo):
                                acc += gy[t] * src[2 * t + kw]
                            dw[o, c, kh, kw] += acc
                for t in range(Wo):
                    bs += gy[t]
        db[o] = bs
    return dw, db


def conv2d_grads(xp, dy, stride):
    if stride == 1:
        return _conv_grads_s1(xp, dy)
    if stride == 2:
        return _conv_grads_s2(xp, dy)
    raise ValueError(f"unsupported stride {stride}")


@njit(cache=True, parallel=True, fastmath=True)
def _conv2d_dx_inner(dyp, wt, H, W):
    # stride-1 "same" convolution of the padded/dilated output grad with
    # the flipped, channel-transposed weights.
    B, O = dyp.shape[0], dyp.shape[1]
    C = wt.shape[0]
    dx = np.empty((B, C, H, W), dyp.dtype)
    for bc in prange(B * C):
        bi = bc // C
        c = bc % C
        row = np.empty(W, dyp.dtype)
        for h in range(H):
            for t in range(W):
                row[t] = 0
            for o in range(O):
                for kh in range(3):
                    for kw in range(3):
                        wv = wt[c, o, kh, kw]
                        src = dyp[bi, o, h + kh]
                        for t in range(W):
                            row[t] += wv * src[t + kw]
            for t in range(W):
                dx[bi, c, h, t] = row[t]
    return dx


def conv2d_input_grad(dy, w, stride, in_hw):
    B, O, Ho, Wo = dy.shape
    H, W = in_hw
    if stride == 1:
        dy_d = dy
    else:
        dy_d = np.zeros((B, O, H, W), dy.dtype)
        dy_d[:, :, ::stride, ::stride] = dy
    wt = np.ascontiguousarray(w.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])
    dyp = np.pad(dy_d, ((0, 0), (0, 0), (1, 1), (1, 1)))
    return _conv2d_dx_inner(dyp, wt, H, W)


@njit(cache=True)
def tdlms_scan(xp, out_hw, ksize, mu):
    M, N = out_hw
    r = ksize // 2
    w = np.zeros((ksize, ksize), xp.dtype)
    y = np.empty((M, N), xp.dtype)
    for i in range(M):
        for j in range(N):
            pred = xp[0, 0] - xp[0, 0]
            for ki in range(ksize):
                for kj in range(ksize):
                    pred += w[ki, kj] * xp[i + ki, j + kj]
            y[i, j] = pred
            err = xp[i + r, j + r] - pred
            me = mu * err
            for ki in range(ksize):
                for kj in range(ksize):
                    w[ki, kj] += me * xp[i + ki, j + kj]
            w[r, r] = 0.0
    return y
