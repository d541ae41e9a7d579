"""Pure numpy recurrent scans.

Reference implementation of the four sequential kernels. The compiled
extension ``_scan_ext`` exposes the same functions with the same
signatures and must agree with these to rounding.

Conventions shared by both backends:

* ``xg`` holds the input projections ``X @ W.T + b`` for every gate,
  stacked along the feature axis (GRU: z, r, h; LSTM: i, f, o, c).
* ``u`` is the matching stack of recurrent matrices, shape ``(G*H, H)``.
* ``hs`` (and ``cs``) have ``T + 1`` rows; row 0 is the zero initial
  state and row ``t + 1`` the state emitted at step ``t``.
* Backward kernels return the gradient with respect to the gate
  pre-activations, ``(T, G*H)``.
"""

import numpy as np


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def gru_forward(xg, u):
    T, G = xg.shape
    H = G // 3
    gates = np.empty((T, G))
    hs = np.zeros((T + 1, H))
    u_zr = u[: 2 * H]
    u_h = u[2 * H :]
    for t in range(T):
        h = hs[t]
        zr = _sigmoid(xg[t, : 2 * H] + u_zr @ h)
        z = zr[:H]
        r = zr[H:]
        cand = np.tanh(xg[t, 2 * H :] + u_h @ (r * h))
        hs[t + 1] = (1.0 - z) * h + z * cand
        gates[t, : 2 * H] = zr
        gates[t, 2 * H :] = cand
    return gates, hs


def gru_backward(dhs, gates, hs, u):
    T, G = gates.shape
    H = G // 3
    da = np.empty((T, G))
    u_zr = u[: 2 * H]
    u_h = u[2 * H :]
    dh_next = np.zeros(H)
    for t in range(T - 1, -1, -1):
        h_prev = hs[t]
        z = gates[t, :H]
        r = gates[t, H : 2 * H]
        cand = gates[t, 2 * H :]
        dh = dhs[t] + dh_next
        da_h = dh * z * (1.0 - cand * cand)
        d_rh = u_h.T @ da_h
        da_z = dh * (cand - h_prev) * z * (1.0 - z)
        da_r = d_rh * h_prev * r * (1.0 - r)
        da[t, :H] = da_z
        da[t, H : 2 * H] = da_r
        da[t, 2 * H :] = da_h
        dh_next = dh * (1.0 - z) + d_rh * r + u_zr.T @ da[t, : 2 * H]
    return da


def lstm_forward(xg, u):
    T, G = xg.shape
    H = G // 4
    gates = np.empty((T, G))
    hs = np.zeros((T + 1, H))
    cs = np.zeros((T + 1, H))
    for t in range(T):
        a = xg[t] + u @ hs[t]
        ifo = _sigmoid(a[: 3 * H])
        g = np.tanh(a[3 * H :])
        c = ifo[H : 2 * H] * cs[t] + ifo[:H] * g
        cs[t + 1] = c
        hs[t + 1] = ifo[2 * H :] * np.tanh(c)
        gates[t, : 3 * H] = ifo
        gates[t, 3 * H :] = g
    return gates, hs, cs


def lstm_backward(dhs, gates, hs, cs, u):
    T, G = gates.shape
    H = G // 4
    da = np.empty((T, G))
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    for t in range(T - 1, -1, -1):
        i = gates[t, :H]
        f = gates[t, H : 2 * H]
        o = gates[t, 2 * H : 3 * H]
        g = gates[t, 3 * H :]
        tc = np.tanh(cs[t + 1])
        dh = dhs[t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        da[t, :H] = dc * g * i * (1.0 - i)
        da[t, H : 2 * H] = dc * cs[t] * f * (1.0 - f)
        da[t, 2 * H : 3 * H] = dh * tc * o * (1.0 - o)
        da[t, 3 * H :] = dc * i * (1.0 - g * g)
        dc_next = dc * f
        dh_next = u.T @ da[t]
    return da
