"""Central finite-difference checks of the analytic gradients.

The relative error of an analytic gradient ``a`` against a numeric one ``n``
is ``max|a - n| / max(max|a|, max|n|)``.
"""

import numpy as np

from .cells import MDLEAKY, CellState, CellWeights, cell_backward, cell_forward, lattice_backward, lattice_forward
from .ctc import ctc_loss_grad
from .network import NetConfig, backward, forward, init_params

STEP = 1e-5


def rel_error(analytic, numeric):
    a = np.ravel(analytic)
    n = np.ravel(numeric)
    scale = max(np.abs(a).max(initial=0.0), np.abs(n).max(initial=0.0))
    if scale == 0.0:
        return 0.0
    return float(np.abs(a - n).max() / scale)


def numeric_grad(f, arrays, h=STEP):
    """d f() / d arrays by central differences, perturbing the arrays in place."""
    out = []
    for arr in arrays:
        g = np.zeros_like(arr)
        flat, gf = arr.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            fp = f()
            flat[i] = old - h
            fm = f()
            flat[i] = old
            gf[i] = (fp - fm) / (2 * h)
        out.append(g)
    return out


def check_cell(variant=MDLEAKY, n_inputs=3, units=2, seed=0):
    """Single cell step; loss is a fixed random projection of (y, s)."""
    rng = np.random.default_rng(seed)
    w = CellWeights.random(n_inputs, units, rng, scale=1.0)
    x = rng.normal(size=n_inputs)
    p1 = CellState(rng.uniform(-1, 1, units), rng.uniform(-1, 1, units))
    p2 = CellState(rng.uniform(-1, 1, units), rng.uniform(-1, 1, units))
    cy, cs = rng.normal(size=units), rng.normal(size=units)

    def loss():
        st, _ = cell_forward(x, p1, p2, w, variant)
        return float(st.y @ cy + st.s @ cs)

    _, cache = cell_forward(x, p1, p2, w, variant)
    dx, d1, d2, dw = cell_backward(cache, cy, cs)
    analytic = [dx, d1.s, d1.y, d2.s, d2.y, *dw.arrays()]
    numeric = numeric_grad(loss, [x, p1.s, p1.y, p2.s, p2.y, *w.arrays()])
    return rel_error(np.concatenate([a.ravel() for a in analytic]), np.concatenate([n.ravel() for n in numeric]))


def check_lattice(variant=MDLEAKY, shape=(4, 4), n_inputs=2, units=3, seed=0):
    """Four-direction lattice layer; loss is a random projection of its output."""
    rng = np.random.default_rng(seed)
    h, w = shape
    g = 5 * units
    x = rng.normal(size=(h, w, n_inputs))
    ws = [
        rng.uniform(-0.5, 0.5, (4, n_inputs, g)),
        rng.uniform(-0.5, 0.5, (4, units, g)),
        rng.uniform(-0.5, 0.5, (4, units, g)),
        rng.uniform(-0.5, 0.5, (4, g)),
    ]
    c = rng.normal(size=(4, h, w, units))

    def loss():
        return float((lattice_forward(x, *ws, variant)[0] * c).sum())

    _, cache = lattice_forward(x, *ws, variant)
    dx, dws = lattice_backward(cache, c)
    analytic = np.concatenate([a.ravel() for a in (dx, *dws)])
    numeric = np.concatenate([n.ravel() for n in numeric_grad(loss, [x, *ws])])
    return rel_error(analytic, numeric)


def check_network(variant=MDLEAKY, seed=0, shape=(8, 12), target=(1, 2)):
    """Tiny network (alphabet 3) under CTC loss on a random image."""
    rng = np.random.default_rng(seed)
    cfg = NetConfig.tiny(3, variant)
    p = init_params(cfg, seed)
    for _, v in p:
        v[...] = rng.uniform(-0.5, 0.5, v.shape)
    img = rng.uniform(0.0, 1.0, shape)
    target = list(target)

    def loss():
        return ctc_loss_grad(forward(img, p)[0], target)[0]

    probs, cache = forward(img, p)
    _, dlogits = ctc_loss_grad(probs, target)
    analytic = backward(cache, dlogits).flat()
    numeric = np.concatenate([n.ravel() for n in numeric_grad(loss, [v for _, v in p])])
    return rel_error(analytic, numeric)
