"""numba-compiled kernels; same contracts as :mod:`relqg.kernels._numpy`."""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _sig(z):
    return 1.0 / (1.0 + math.exp(-z))


@njit(cache=True)
def lstm_forward(x, wx, wh, b, h0, c0):
    T, B, _ = x.shape
    H = h0.shape[1]
    hs = np.empty((T, B, H), dtype=x.dtype)
    cs = np.empty((T, B, H), dtype=x.dtype)
    gates = np.empty((T, B, 4 * H), dtype=x.dtype)
    h = h0.copy()
    c = c0.copy()
    # input projection for every step in one matmul
    xw = np.dot(np.ascontiguousarray(x).reshape(T * B, x.shape[2]), wx).reshape(T, B, 4 * H)
    for t in range(T):
        z = xw[t] + np.dot(h, wh)
        for r in range(B):
            for k in range(H):
                i = _sig(z[r, k] + b[k])
                f = _sig(z[r, H + k] + b[H + k])
                g = math.tanh(z[r, 2 * H + k] + b[2 * H + k])
                o = _sig(z[r, 3 * H + k] + b[3 * H + k])
                cn = f * c[r, k] + i * g
                hn = o * math.tanh(cn)
                c[r, k] = cn
                h[r, k] = hn
                gates[t, r, k] = i
                gates[t, r, H + k] = f
                gates[t, r, 2 * H + k] = g
                gates[t, r, 3 * H + k] = o
                hs[t, r, k] = hn
                cs[t, r, k] = cn
    return hs, cs, gates


@njit(cache=True)
def lstm_backward(x, wx, wh, h0, c0, hs, cs, gates, dhs):
    T, B, D = x.shape
    H = h0.shape[1]
    dwh = np.zeros_like(wh)
    db = np.zeros(4 * H, dtype=x.dtype)
    dh_next = np.zeros((B, H), dtype=x.dtype)
    dc_next = np.zeros((B, H), dtype=x.dtype)
    dz_all = np.empty((T, B, 4 * H), dtype=x.dtype)
    wh_t = np.ascontiguousarray(wh.T)
    for t in range(T - 1, -1, -1):
        dz = dz_all[t]
        for r in range(B):
            for k in range(H):
                i = gates[t, r, k]
                f = gates[t, r, H + k]
                g = gates[t, r, 2 * H + k]
                o = gates[t, r, 3 * H + k]
                c_prev = cs[t - 1, r, k] if t > 0 else c0[r, k]
                dh = dhs[t, r, k] + dh_next[r, k]
                tc = math.tanh(cs[t, r, k])
                dc = dh * o * (1.0 - tc * tc) + dc_next[r, k]
                dz[r, k] = dc * g * i * (1.0 - i)
                dz[r, H + k] = dc * c_prev * f * (1.0 - f)
                dz[r, 2 * H + k] = dc * i * (1.0 - g * g)
                dz[r, 3 * H + k] = dh * tc * o * (1.0 - o)
                dc_next[r, k] = dc * f
        h_prev = np.ascontiguousarray(hs[t - 1]) if t > 0 else h0
        dwh += np.dot(np.ascontiguousarray(h_prev.T), dz)
        for r in range(B):
            for k in range(4 * H):
                db[k] += dz[r, k]
        dh_next = np.dot(dz, wh_t)
    dz_flat = dz_all.reshape(T * B, 4 * H)
    x_flat = np.ascontiguousarray(x).reshape(T * B, D)
    dwx = np.dot(np.ascontiguousarray(x_flat.T), dz_flat)
    dx = np.dot(dz_flat, np.ascontiguousarray(wx.T)).reshape(T, B, D)
    return dx, dwx, dwh, db, dh_next, dc_next


@njit(cache=True)
def scatter_add_columns(src, index, size):
    rows, n = src.shape
    out = np.zeros((rows, size), dtype=src.dtype)
    for r in range(rows):
        for j in range(n):
            out[r, index[j]] += src[r, j]
    return out


@njit(cache=True)
def lcs_length(a, b):
    n = a.shape[0]
    m = b.shape[0]
    if n == 0 or m == 0:
        return 0
    prev = np.zeros(m + 1, dtype=np.int64)
    cur = np.zeros(m + 1, dtype=np.int64)
    for i in range(n):
        cur[0] = 0
        for j in range(m):
            if a[i] == b[j]:
                cur[j + 1] = prev[j] + 1
            elif prev[j + 1] >= cur[j]:
                cur[j + 1] = prev[j + 1]
            else:
                cur[j + 1] = cur[j]
        prev, cur = cur, prev
    return prev[m]
