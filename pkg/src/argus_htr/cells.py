"""Two-dimensional recurrent cells (MDLeaky, MDLSTM) and lattice scanning.

Both cells own five gate blocks per unit, laid out along the last axis of
every weight matrix in the order ``input, forget1, forget2, output, cell``.
Each block sees the input features, the activation of the horizontal
predecessor (``prev1``) and of the vertical predecessor (``prev2``).

MDLeaky turns the input gate and the two forget gates into a softmax, so the
new state is a convex combination of the two predecessor states and the
squashed cell input and can never leave [-1, 1]. MDLSTM uses independent
sigmoid gates and its state may grow without bound on a 2D lattice.

Kernels are written for arbitrary leading batch dimensions. The lattice
functions evaluate all four scan directions at once by flipping the input so
that every direction becomes a top-left to bottom-right scan, then sweep the
anti-diagonals of the grid (cells on one anti-diagonal do not depend on each
other).
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels

MDLEAKY = "mdleaky"
MDLSTM = "mdlstm"
VARIANTS = (MDLEAKY, MDLSTM)
N_GATES = 5
GATE_INPUT, GATE_FORGET1, GATE_FORGET2, GATE_OUTPUT, GATE_CELL = range(5)

# (dx, dy) for the four column-first scan directions
DIRECTIONS = ((1, 1), (1, -1), (-1, 1), (-1, -1))

# lattice sweep implementation: "numba" (compiled) or "numpy" (reference)
DEFAULT_BACKEND = "numba" if _kernels.AVAILABLE else "numpy"


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class CellWeights:
    """Weights of one cell layer: w_in (F, 5U), w_rec1/w_rec2 (U, 5U), bias (5U,)."""

    w_in: np.ndarray
    w_rec1: np.ndarray
    w_rec2: np.ndarray
    bias: np.ndarray

    @property
    def units(self):
        return self.w_rec1.shape[0]

    @property
    def n_inputs(self):
        return self.w_in.shape[0]

    def arrays(self):
        return [self.w_in, self.w_rec1, self.w_rec2, self.bias]

    @classmethod
    def zeros(cls, n_inputs, units):
        g = N_GATES * units
        return cls(np.zeros((n_inputs, g)), np.zeros((units, g)), np.zeros((units, g)), np.zeros(g))

    @classmethod
    def random(cls, n_inputs, units, rng, scale=0.1):
        w = cls.zeros(n_inputs, units)
        for a in w.arrays():
            a[...] = rng.uniform(-scale, scale, a.shape)
        return w


def n_cell_weights(n_inputs, units):
    """Trainable weights of one cell layer; identical for both variants."""
    return N_GATES * units * (n_inputs + 2 * units + 1)


@dataclass
class CellState:
    s: np.ndarray
    y: np.ndarray

    @classmethod
    def zeros(cls, shape):
        return cls(np.zeros(shape), np.zeros(shape))


def scan_order(w, h, d):
    """Column-first visiting order of a w x h grid for direction d = (dx, dy).

    Yields ``((x, y), prev1, prev2)`` where prev1 = (x - dx, y) is the
    horizontal predecessor and prev2 = (x, y - dy) the vertical one; a
    predecessor off the grid is reported as None.
    """
    dx, dy = d
    if w < 1 or h < 1:
        raise ValueError("grid must be at least 1x1")
    xs = range(w) if dx > 0 else range(w - 1, -1, -1)
    ys = range(h) if dy > 0 else range(h - 1, -1, -1)
    for x in xs:
        for y in ys:
            p1 = (x - dx, y) if 0 <= x - dx < w else None
            p2 = (x, y - dy) if 0 <= y - dy < h else None
            yield (x, y), p1, p2


def split_gates(a):
    """View (..., 5U) as (..., 5, U)."""
    return a.reshape(a.shape[:-1] + (N_GATES, a.shape[-1] // N_GATES))


def preactivations(x, y1, y2, w):
    return x @ w.w_in + y1 @ w.w_rec1 + y2 @ w.w_rec2 + w.bias


def gates_forward(a, s1, s2, variant):
    """Apply the gate nonlinearities and the state update.

    Returns (gates, s, y); ``gates`` has the shape of ``a`` and holds the
    activated gate values needed by `gates_backward`.
    """
    a5 = split_gates(a)
    g = np.empty_like(a5)
    if variant == MDLEAKY:
        z = a5[..., :3, :]
        e = np.exp(z - z.max(axis=-2, keepdims=True))
        g[..., :3, :] = e / e.sum(axis=-2, keepdims=True)
    elif variant == MDLSTM:
        g[..., :3, :] = sigmoid(a5[..., :3, :])
    else:
        raise ValueError(f"unknown cell variant {variant!r}")
    g[..., GATE_OUTPUT, :] = sigmoid(a5[..., GATE_OUTPUT, :])
    g[..., GATE_CELL, :] = np.tanh(a5[..., GATE_CELL, :])
    s = (
        g[..., GATE_FORGET1, :] * s1
        + g[..., GATE_FORGET2, :] * s2
        + g[..., GATE_INPUT, :] * g[..., GATE_CELL, :]
    )
    y = g[..., GATE_OUTPUT, :] * np.tanh(s)
    return g.reshape(a.shape), s, y


def gates_backward(gates, s1, s2, s, dy, ds, variant):
    """Gradients of the gate stage: returns (da, ds1, ds2).

    `dy` and `ds` are the upstream gradients with respect to this cell's
    activation and state.
    """
    g = split_gates(gates)
    gi, gf1, gf2 = g[..., 0, :], g[..., 1, :], g[..., 2, :]
    go, gc = g[..., 3, :], g[..., 4, :]
    ts = np.tanh(s)
    dst = ds + dy * go * (1.0 - ts * ts)
    da = np.empty_like(g)
    dgi = dst * gc
    dgf1 = dst * s1
    dgf2 = dst * s2
    if variant == MDLEAKY:
        dot = gi * dgi + gf1 * dgf1 + gf2 * dgf2
        da[..., 0, :] = gi * (dgi - dot)
        da[..., 1, :] = gf1 * (dgf1 - dot)
        da[..., 2, :] = gf2 * (dgf2 - dot)
    else:
        da[..., 0, :] = dgi * gi * (1.0 - gi)
        da[..., 1, :] = dgf1 * gf1 * (1.0 - gf1)
        da[..., 2, :] = dgf2 * gf2 * (1.0 - gf2)
    da[..., 3, :] = dy * ts * go * (1.0 - go)
    da[..., 4, :] = dst * gi * (1.0 - gc * gc)
    return da.reshape(gates.shape), dst * gf1, dst * gf2


def cell_forward(x, prev1, prev2, w, variant):
    """One cell step. Absent predecessors (None) are zero states.

    Returns the new CellState and a cache tuple for `cell_backward`.
    """
    shape = np.shape(x)[:-1] + (w.units,)
    prev1 = prev1 if prev1 is not None else CellState.zeros(shape)
    prev2 = prev2 if prev2 is not None else CellState.zeros(shape)
    a = preactivations(x, prev1.y, prev2.y, w)
    gates, s, y = gates_forward(a, prev1.s, prev2.s, variant)
    return CellState(s, y), (variant, x, prev1, prev2, w, gates, s)


def mdleaky_forward(x, prev1, prev2, w):
    return cell_forward(x, prev1, prev2, w, MDLEAKY)[0]


def mdlstm_forward(x, prev1, prev2, w):
    return cell_forward(x, prev1, prev2, w, MDLSTM)[0]


def cell_backward(cache, dy, ds):
    """Backward pass of one cell step.

    Returns (dx, dprev1, dprev2, dw) where dprev1/dprev2 are CellStates of
    gradients and dw is a CellWeights of gradients (summed over any batch
    dimensions).
    """
    variant, x, prev1, prev2, w, gates, s = cache
    da, ds1, ds2 = gates_backward(gates, prev1.s, prev2.s, s, dy, ds, variant)
    dx = da @ w.w_in.T
    dp1 = CellState(ds1, da @ w.w_rec1.T)
    dp2 = CellState(ds2, da @ w.w_rec2.T)
    g = da.shape[-1]
    da2 = da.reshape(-1, g)
    dw = CellWeights(
        np.reshape(x, (-1, x.shape[-1])).T @ da2,
        prev1.y.reshape(-1, prev1.y.shape[-1]).T @ da2,
        prev2.y.reshape(-1, prev2.y.shape[-1]).T @ da2,
        da2.sum(axis=0),
    )
    return dx, dp1, dp2, dw


# ---------------------------------------------------------------------------
# lattice layer: four directions, anti-diagonal wavefront


def _orient(x, d):
    """Flip a (h, w, ...) array so direction d scans top-left to bottom-right."""
    dx, dy = DIRECTIONS[d]
    if dx < 0:
        x = x[:, ::-1]
    if dy < 0:
        x = x[::-1]
    return x


def _bmm(a, w):
    """(4, K, h, m) @ (4, m, n) -> (4, K, h, n)."""
    d, k, h, m = a.shape
    return np.matmul(a.reshape(d, k * h, m), w).reshape(d, k, h, w.shape[-1])


def _outer_sum(a, b):
    """Sum over lattice slots of outer products: (4, K, h, m), (4, K, h, n) -> (4, m, n)."""
    d = a.shape[0]
    return np.matmul(a.reshape(d, -1, a.shape[-1]).transpose(0, 2, 1), b.reshape(d, -1, b.shape[-1]))


def _skew_index(h, w):
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    return yy + xx, yy


def _sweep_forward_numpy(proj, w_rec1, w_rec2, S, Y, G, h, w, leaky):
    variant = MDLEAKY if leaky else MDLSTM
    for k in range(h + w - 1):
        lo = max(0, k - w + 1)
        hi = min(h - 1, k) + 1
        a = proj[:, k, lo:hi] + Y[:, k, lo + 1 : hi + 1] @ w_rec1 + Y[:, k, lo:hi] @ w_rec2
        g, s, y = gates_forward(a, S[:, k, lo + 1 : hi + 1], S[:, k, lo:hi], variant)
        G[:, k, lo:hi] = g
        S[:, k + 1, lo + 1 : hi + 1] = s
        Y[:, k + 1, lo + 1 : hi + 1] = y


def _sweep_backward_numpy(dext, w_rec1, w_rec2, S, G, dY, dS, dA, h, w, leaky):
    variant = MDLEAKY if leaky else MDLSTM
    r1t = np.swapaxes(w_rec1, 1, 2)
    r2t = np.swapaxes(w_rec2, 1, 2)
    for k in range(h + w - 2, -1, -1):
        lo = max(0, k - w + 1)
        hi = min(h - 1, k) + 1
        dy = dext[:, k, lo:hi] + dY[:, k + 1, lo + 1 : hi + 1]
        ds = dS[:, k + 1, lo + 1 : hi + 1]
        s1 = S[:, k, lo + 1 : hi + 1]
        s2 = S[:, k, lo:hi]
        da, ds1, ds2 = gates_backward(G[:, k, lo:hi], s1, s2, S[:, k + 1, lo + 1 : hi + 1], dy, ds, variant)
        dA[:, k, lo:hi] = da
        dY[:, k, lo + 1 : hi + 1] += da @ r1t
        dY[:, k, lo:hi] += da @ r2t
        dS[:, k, lo + 1 : hi + 1] += ds1
        dS[:, k, lo:hi] += ds2


_SWEEPS = {
    "numpy": (_sweep_forward_numpy, _sweep_backward_numpy),
    "numba": (_kernels.sweep_forward, _kernels.sweep_backward),
}


def lattice_forward(x, w_in, w_rec1, w_rec2, bias, variant, backend=None):
    """Run one cell layer over a (h, w, F) input in all four directions.

    Weight arrays carry a leading direction axis of length 4. Returns the
    per-direction activations, shape (4, h, w, U), in the input's own
    orientation, and a cache for `lattice_backward`.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown cell variant {variant!r}")
    backend = backend or DEFAULT_BACKEND
    h, w, F = x.shape
    U = w_rec1.shape[1]
    K = h + w - 1
    xo = np.stack([_orient(x, d) for d in range(4)])
    ki, yi = _skew_index(h, w)
    xs = np.zeros((4, K, h, F))
    xs[:, ki, yi] = xo
    proj = _bmm(xs, w_in) + bias[:, None, None, :]
    # padded skewed storage: cell (y, x) lives at [x + y + 1, y + 1]
    S = np.zeros((4, K + 1, h + 1, U))
    Y = np.zeros((4, K + 1, h + 1, U))
    G = np.zeros((4, K, h, N_GATES * U))
    _SWEEPS[backend][0](proj, w_rec1, w_rec2, S, Y, G, h, w, variant == MDLEAKY)
    out = Y[:, ki + 1, yi + 1]
    out = np.stack([_orient(out[d], d) for d in range(4)])
    cache = (variant, xs, S, Y, G, (w_in, w_rec1, w_rec2), (h, w), backend)
    return out, cache


def lattice_states(cache):
    """Internal states (4, h, w, U) in each direction's scan orientation."""
    S, (h, w) = cache[2], cache[6]
    ki, yi = _skew_index(h, w)
    return S[:, ki + 1, yi + 1]


def lattice_backward(cache, dout, need_dx=True):
    """Backward pass of `lattice_forward`.

    `dout` is the gradient w.r.t. the (4, h, w, U) activations. Returns
    (dx, (dw_in, dw_rec1, dw_rec2, dbias)); dx is None unless requested.
    """
    variant, xs, S, Y, G, (w_in, w_rec1, w_rec2), (h, w), backend = cache
    K = h + w - 1
    U = w_rec1.shape[1]
    ki, yi = _skew_index(h, w)
    dext = np.zeros((4, K, h, U))
    dext[:, ki, yi] = np.stack([_orient(dout[d], d) for d in range(4)])
    dY = np.zeros_like(Y)
    dS = np.zeros_like(S)
    dA = np.zeros_like(G)
    _SWEEPS[backend][1](dext, w_rec1, w_rec2, S, G, dY, dS, dA, h, w, variant == MDLEAKY)
    dw_in = _outer_sum(xs, dA)
    dw_rec1 = _outer_sum(Y[:, :-1, 1:], dA)
    dw_rec2 = _outer_sum(Y[:, :-1, :-1], dA)
    dbias = dA.sum(axis=(1, 2))
    dx = None
    if need_dx:
        dxs = _bmm(dA, np.swapaxes(w_in, 1, 2))[:, ki, yi]
        dx = sum(_orient(dxs[d], d) for d in range(4))
    return dx, (dw_in, dw_rec1, dw_rec2, dbias)
