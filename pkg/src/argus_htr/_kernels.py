"""Compiled anti-diagonal sweeps for the lattice layer.

Same storage layout and arithmetic as the numpy sweeps in `cells`; used when
numba is importable. `cells.lattice_forward(..., backend="numpy")` keeps the
pure numpy path available for cross-checking.
"""

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover
    njit = None

AVAILABLE = njit is not None


def _sweep_forward(proj, r1, r2, S, Y, G, h, w, leaky):
    D = proj.shape[0]
    U = r1.shape[1]
    K = h + w - 1
    a = np.empty(5 * U)
    for d in range(D):
        for k in range(K):
            lo = max(0, k - w + 1)
            hi = min(h - 1, k) + 1
            for y in range(lo, hi):
                for g in range(5 * U):
                    acc = proj[d, k, y, g]
                    for u in range(U):
                        acc += Y[d, k, y + 1, u] * r1[d, u, g] + Y[d, k, y, u] * r2[d, u, g]
                    a[g] = acc
                for j in range(U):
                    ai, af1, af2 = a[j], a[U + j], a[2 * U + j]
                    if leaky:
                        m = max(ai, max(af1, af2))
                        ei = math.exp(ai - m)
                        e1 = math.exp(af1 - m)
                        e2 = math.exp(af2 - m)
                        tot = ei + e1 + e2
                        gi, gf1, gf2 = ei / tot, e1 / tot, e2 / tot
                    else:
                        gi = 0.5 * (1.0 + math.tanh(0.5 * ai))
                        gf1 = 0.5 * (1.0 + math.tanh(0.5 * af1))
                        gf2 = 0.5 * (1.0 + math.tanh(0.5 * af2))
                    go = 0.5 * (1.0 + math.tanh(0.5 * a[3 * U + j]))
                    gc = math.tanh(a[4 * U + j])
                    s = gf1 * S[d, k, y + 1, j] + gf2 * S[d, k, y, j] + gi * gc
                    G[d, k, y, j] = gi
                    G[d, k, y, U + j] = gf1
                    G[d, k, y, 2 * U + j] = gf2
                    G[d, k, y, 3 * U + j] = go
                    G[d, k, y, 4 * U + j] = gc
                    S[d, k + 1, y + 1, j] = s
                    Y[d, k + 1, y + 1, j] = go * math.tanh(s)


def _sweep_backward(dext, r1, r2, S, G, dY, dS, dA, h, w, leaky):
    D = dext.shape[0]
    U = r1.shape[1]
    K = h + w - 1
    for d in range(D):
        for k in range(K - 1, -1, -1):
            lo = max(0, k - w + 1)
            hi = min(h - 1, k) + 1
            for y in range(lo, hi):
                for j in range(U):
                    gi = G[d, k, y, j]
                    gf1 = G[d, k, y, U + j]
                    gf2 = G[d, k, y, 2 * U + j]
                    go = G[d, k, y, 3 * U + j]
                    gc = G[d, k, y, 4 * U + j]
                    s1 = S[d, k, y + 1, j]
                    s2 = S[d, k, y, j]
                    ts = math.tanh(S[d, k + 1, y + 1, j])
                    dy = dext[d, k, y, j] + dY[d, k + 1, y + 1, j]
                    dst = dS[d, k + 1, y + 1, j] + dy * go * (1.0 - ts * ts)
                    dgi = dst * gc
                    dgf1 = dst * s1
                    dgf2 = dst * s2
                    if leaky:
                        dot = gi * dgi + gf1 * dgf1 + gf2 * dgf2
                        dA[d, k, y, j] = gi * (dgi - dot)
                        dA[d, k, y, U + j] = gf1 * (dgf1 - dot)
                        dA[d, k, y, 2 * U + j] = gf2 * (dgf2 - dot)
                    else:
                        dA[d, k, y, j] = dgi * gi * (1.0 - gi)
                        dA[d, k, y, U + j] = dgf1 * gf1 * (1.0 - gf1)
                        dA[d, k, y, 2 * U + j] = dgf2 * gf2 * (1.0 - gf2)
                    dA[d, k, y, 3 * U + j] = dy * ts * go * (1.0 - go)
                    dA[d, k, y, 4 * U + j] = dst * gi * (1.0 - gc * gc)
                    dS[d, k, y + 1, j] += dst * gf1
                    dS[d, k, y, j] += dst * gf2
                for u in range(U):
                    acc1 = 0.0
                    acc2 = 0.0
                    for g in range(5 * U):
                        acc1 += dA[d, k, y, g] * r1[d, u, g]
                        acc2 += dA[d, k, y, g] * r2[d, u, g]
                    dY[d, k, y + 1, u] += acc1
                    dY[d, k, y, u] += acc2


if AVAILABLE:
    sweep_forward = njit(cache=True)(_sweep_forward)
    sweep_backward = njit(cache=True)(_sweep_backward)
else:  # pragma: no cover
    sweep_forward = sweep_backward = None
