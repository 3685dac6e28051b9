"""Reference kernels written against plain numpy.

Shapes follow the batched-time convention used by the model: sequences are
``(T, B, D)``, recurrent states are ``(B, H)``, and the fused LSTM weight is
``(D + H, 4H)`` with gate blocks ordered input, forget, candidate, output.
"""

import numpy as np


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def lstm_forward(x, wx, wh, b, h0, c0):
    T, B, _ = x.shape
    H = h0.shape[1]
    hs = np.empty((T, B, H), dtype=x.dtype)
    cs = np.empty((T, B, H), dtype=x.dtype)
    gates = np.empty((T, B, 4 * H), dtype=x.dtype)
    h = h0
    c = c0
    xw = (x.reshape(T * B, -1) @ wx).reshape(T, B, 4 * H) + b
    for t in range(T):
        z = xw[t] + h @ wh
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H:2 * H])
        g = np.tanh(z[:, 2 * H:3 * H])
        o = _sigmoid(z[:, 3 * H:])
        c = f * c + i * g
        h = o * np.tanh(c)
        gates[t, :, :H] = i
        gates[t, :, H:2 * H] = f
        gates[t, :, 2 * H:3 * H] = g
        gates[t, :, 3 * H:] = o
        hs[t] = h
        cs[t] = c
    return hs, cs, gates


def lstm_backward(x, wx, wh, h0, c0, hs, cs, gates, dhs):
    T, B, D = x.shape
    H = h0.shape[1]
    dwh = np.zeros_like(wh)
    db = np.zeros(4 * H, dtype=x.dtype)
    dh_next = np.zeros((B, H), dtype=x.dtype)
    dc_next = np.zeros((B, H), dtype=x.dtype)
    dz_all = np.empty((T, B, 4 * H), dtype=x.dtype)
    for t in range(T - 1, -1, -1):
        dz = dz_all[t]
        i = gates[t, :, :H]
        f = gates[t, :, H:2 * H]
        g = gates[t, :, 2 * H:3 * H]
        o = gates[t, :, 3 * H:]
        c_prev = cs[t - 1] if t > 0 else c0
        h_prev = hs[t - 1] if t > 0 else h0
        dh = dhs[t] + dh_next
        tc = np.tanh(cs[t])
        dc = dh * o * (1.0 - tc * tc) + dc_next
        dz[:, :H] = dc * g * i * (1.0 - i)
        dz[:, H:2 * H] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * H:3 * H] = dc * i * (1.0 - g * g)
        dz[:, 3 * H:] = dh * tc * o * (1.0 - o)
        dc_next = dc * f
        dwh += h_prev.T @ dz
        db += dz.sum(axis=0)
        dh_next = dz @ wh.T
    dz_flat = dz_all.reshape(T * B, 4 * H)
    dwx = x.reshape(T * B, D).T @ dz_flat
    dx = (dz_flat @ wx.T).reshape(T, B, D)
    return dx, dwx, dwh, db, dh_next, dc_next


def scatter_add_columns(src, index, size):
    out = np.zeros((src.shape[0], size), dtype=src.dtype)
    np.add.at(out, (slice(None), index), src)
    return out


def lcs_length(a, b):
    if len(a) == 0 or len(b) == 0:
        return 0
    # row-by-row DP; equality matrix computed once
    eq = a[:, None] == b[None, :]
    prev = np.zeros(len(b) + 1, dtype=np.int64)
    for i in range(len(a)):
        cur = np.zeros_like(prev)
        for j in range(len(b)):
            if eq[i, j]:
                cur[j + 1] = prev[j] + 1
            else:
                cur[j + 1] = max(prev[j + 1], cur[j])
        prev = cur
    return int(prev[-1])
