"""Compiled inner loops of the propagator sweep."""
import numpy as np
from numba import njit


@njit(cache=True)
def march_block(r, c, mu, w, ptr, pk, prow, pw, frow, fdata, grow, gdata,
                state, j0, j1, n_rows, rec_slot, rec_out, integ, do_integ, dt,
                xbuf, x_lo, x_hi):
    """Advance rows [0, n_rows) of a block of decoupled modes from step j0 to j1.

    state has shape (n_rows_total, 2, B); slot (j & 1) holds the value at step j.
    Row i is driven by its parents prow[ptr[i]:ptr[i+1]] through the basis
    function pk[e] with weight pw[e] = sqrt(alpha_k).
    """
    B = state.shape[2]
    s = np.zeros(B, state.dtype)
    sg = np.zeros(B, state.dtype)
    for j in range(j0, j1):
        o = j & 1
        nw = 1 - o
        for i in range(n_rows):
            for m in range(B):
                s[m] = 0.0
                sg[m] = 0.0
            for e in range(ptr[i], ptr[i + 1]):
                b = prow[e]
                wk = w[j, pk[e]] * pw[e]
                for m in range(B):
                    s[m] += wk * (state[b, o, m] + state[b, nw, m])
                gi = grow[b]
                if gi >= 0:
                    for m in range(B):
                        sg[m] += wk * gdata[gi, j, m]
            fi = frow[i]
            for m in range(B):
                src = 0.5 * mu[j, m] * s[m] + sg[m]
                if fi >= 0:
                    src += fdata[fi, j, m]
                old = state[i, o, m]
                new = r[j, m] * old + c[j, m] * src
                state[i, nw, m] = new
                if do_integ:
                    integ[i, m] += 0.5 * dt * ((old * np.conj(old)).real + (new * np.conj(new)).real)
                if x_lo <= i < x_hi:
                    xbuf[m, i - x_lo, j - j0] = 0.5 * (old + new)
        slot = rec_slot[j + 1]
        if slot >= 0:
            for i in range(n_rows):
                for m in range(B):
                    rec_out[slot, i, m] = state[i, nw, m]


@njit(cache=True)
def gather_top(acc, ptr, pk, prow, pw, top_lo, top_hi, x_lo, out, slot):
    """Top-level values u_alpha = sum_{(k, beta)} sqrt(alpha_k) acc[:, beta, k]."""
    B = acc.shape[0]
    for i in range(top_lo, top_hi):
        for m in range(B):
            out[slot, i, m] = 0.0
        for e in range(ptr[i], ptr[i + 1]):
            b = prow[e] - x_lo
            k = pk[e]
            for m in range(B):
                out[slot, i, m] += pw[e] * acc[m, b, k]
