import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from argus_htr import cells
from argus_htr.cells import (
    DIRECTIONS,
    MDLEAKY,
    MDLSTM,
    CellState,
    CellWeights,
    cell_backward,
    cell_forward,
    gates_forward,
    lattice_backward,
    lattice_forward,
    lattice_states,
    mdleaky_forward,
    mdlstm_forward,
    n_cell_weights,
    scan_order,
)
from argus_htr.gradcheck import check_cell, check_lattice


def zero_weights_with_bias(n_inputs, units, bias):
    w = CellWeights.zeros(n_inputs, units)
    w.bias[...] = np.repeat(np.asarray(bias, dtype=float), units)
    return w


def random_lattice_weights(rng, F, U, scale):
    g = 5 * U
    return (
        rng.uniform(-scale, scale, (4, F, g)),
        rng.uniform(-scale, scale, (4, U, g)),
        rng.uniform(-scale, scale, (4, U, g)),
        rng.uniform(-scale, scale, (4, g)),
    )


# ---------------------------------------------------------------- scan order


def test_scan_order_2x2():
    order = list(scan_order(2, 2, (1, 1)))
    assert [c for c, _, _ in order] == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert order[-1][1:] == ((0, 1), (1, 0))


def test_scan_order_single_cell():
    for d in DIRECTIONS:
        assert list(scan_order(1, 1, d)) == [((0, 0), None, None)]


def test_scan_order_3x2_reversed_columns():
    order = list(scan_order(3, 2, (-1, 1)))
    assert order[0][0] == (2, 0)
    pred = {c: (p1, p2) for c, p1, p2 in order}
    assert pred[(1, 1)] == ((2, 1), (1, 0))


@given(st.integers(1, 9), st.integers(1, 9), st.sampled_from(DIRECTIONS))
def test_scan_order_topological(w, h, d):
    seen = set()
    for (x, y), p1, p2 in scan_order(w, h, d):
        assert (x, y) not in seen
        for p in (p1, p2):
            assert p is None or p in seen
        assert (p1 is None) == (not 0 <= x - d[0] < w)
        assert (p2 is None) == (not 0 <= y - d[1] < h)
        seen.add((x, y))
    assert len(seen) == w * h


def test_scan_order_rejects_empty():
    with pytest.raises(ValueError):
        list(scan_order(0, 3, (1, 1)))


# ---------------------------------------------------------------- cell equations


def test_weight_shapes_and_count():
    w = CellWeights.zeros(7, 3)
    assert w.w_in.shape == (7, 15) and w.w_rec1.shape == (3, 15) and w.bias.shape == (15,)
    assert sum(a.size for a in w.arrays()) == n_cell_weights(7, 3) == 5 * 3 * (7 + 6 + 1)


def test_mdleaky_symmetric_gates():
    st_ = mdleaky_forward(np.zeros(2), None, None, zero_weights_with_bias(2, 1, [0.7, 0.7, 0.7, 0.0, 0.0]))
    assert st_.s[0] == 0.0 and st_.y[0] == 0.0
    g, _, _ = gates_forward(np.array([0.7, 0.7, 0.7, 0.0, 0.0]), np.zeros(1), np.zeros(1), MDLEAKY)
    np.testing.assert_allclose(g[:3], 1 / 3, atol=1e-15)


def test_mdleaky_hand_computed():
    a = np.array([1.0, 0.0, -1.0, 0.0, 2.0])
    g, s, y = gates_forward(a, np.array([0.5]), np.array([-0.5]), MDLEAKY)
    np.testing.assert_allclose(g[:3], [0.66524, 0.24473, 0.09003], atol=1e-5)
    z = math.e + 1 + 1 / math.e
    lam = (math.e / z, 1 / z, 1 / math.e / z)
    s_ref = lam[1] * 0.5 + lam[2] * -0.5 + lam[0] * math.tanh(2)
    assert s[0] == pytest.approx(s_ref, abs=1e-14)
    assert s[0] == pytest.approx(0.71866, abs=1e-5)
    assert y[0] == pytest.approx(0.5 * math.tanh(s_ref), abs=1e-14)


def test_mdleaky_forward_uses_both_predecessors():
    w = zero_weights_with_bias(1, 1, [1.0, 0.0, -1.0, 0.0, 2.0])
    out = mdleaky_forward(np.zeros(1), CellState(np.array([0.5]), np.zeros(1)), CellState(np.array([-0.5]), np.zeros(1)), w)
    assert out.s[0] == pytest.approx(0.71866, abs=1e-5)


def test_mdlstm_closed_gates():
    w = zero_weights_with_bias(2, 2, [-20.0] * 5)
    out = mdlstm_forward(np.zeros(2), None, None, w)
    np.testing.assert_allclose(out.s, 0.0, atol=1e-8)


def test_mdlstm_exceeds_one():
    w = zero_weights_with_bias(1, 1, [-20.0, 20.0, 20.0, 0.0, 0.0])
    one = CellState(np.ones(1), np.zeros(1))
    out = mdlstm_forward(np.zeros(1), one, one, w)
    assert out.s[0] == pytest.approx(2.0, abs=1e-7)


def test_mdlstm_binomial_growth():
    n = 12
    eps = math.tanh(0.01) / (1 + math.exp(-20))
    U = 1
    bias = np.tile(np.array([20.0, 20.0, 20.0, 0.0, 0.01])[:, None], (1, U)).ravel()
    wi, r1, r2, b = (np.zeros((4, 1, 5 * U)), np.zeros((4, U, 5 * U)), np.zeros((4, U, 5 * U)), np.tile(bias, (4, 1)))
    _, cache = lattice_forward(np.zeros((n + 1, n + 1, 1)), wi, r1, r2, b, MDLSTM)
    s = lattice_states(cache)[0, :, :, 0]
    assert s[n, n] >= math.comb(2 * n, n) * eps
    # an MDLeaky lattice with the same weights stays bounded
    _, cache = lattice_forward(np.zeros((n + 1, n + 1, 1)), wi, r1, r2, b, MDLEAKY)
    assert np.abs(lattice_states(cache)).max() <= 1.0


def test_gates_reject_unknown_variant():
    with pytest.raises(ValueError):
        gates_forward(np.zeros(5), np.zeros(1), np.zeros(1), "gru")


@given(st.integers(0, 2**32 - 1), st.floats(0.1, 1000.0))
def test_mdleaky_convex_and_bounded(seed, scale):
    rng = np.random.default_rng(seed)
    a = rng.uniform(-scale, scale, (50, 5 * 3))
    s1, s2 = rng.uniform(-1, 1, (2, 50, 3))
    g, s, y = gates_forward(a, s1, s2, MDLEAKY)
    lam = g.reshape(50, 5, 3)[:, :3]
    assert np.all(lam >= 0.0)
    np.testing.assert_allclose(lam.sum(axis=1), 1.0, atol=1e-12)
    assert np.abs(s).max() <= 1.0 + 1e-12 and np.abs(y).max() <= 1.0


# ---------------------------------------------------------------- lattice


def sequential_lattice(x, ws, variant):
    """Cell-by-cell evaluation following scan_order: the lattice oracle."""
    h, w, _ = x.shape
    U = ws[1].shape[1]
    out = np.zeros((4, h, w, U))
    for d, dirn in enumerate(DIRECTIONS):
        cw = CellWeights(ws[0][d], ws[1][d], ws[2][d], ws[3][d])
        states = {}
        for (cx, cy), p1, p2 in scan_order(w, h, dirn):
            st_, _ = cell_forward(x[cy, cx], states.get(p1), states.get(p2), cw, variant)
            states[(cx, cy)] = st_
            out[d, cy, cx] = st_.y
    return out


@pytest.mark.parametrize("variant", [MDLEAKY, MDLSTM])
@pytest.mark.parametrize("backend", ["numpy", "numba"])
def test_lattice_matches_sequential_oracle(variant, backend, rng):
    if backend == "numba" and not cells._kernels.AVAILABLE:
        pytest.skip("numba not installed")
    for h, w in [(1, 1), (1, 5), (4, 1), (3, 4), (6, 5)]:
        x = rng.normal(size=(h, w, 2))
        ws = random_lattice_weights(rng, 2, 3, 1.0)
        out, _ = lattice_forward(x, *ws, variant, backend=backend)
        np.testing.assert_allclose(out, sequential_lattice(x, ws, variant), atol=1e-13)


@pytest.mark.skipif(not cells._kernels.AVAILABLE, reason="numba not installed")
@pytest.mark.parametrize("variant", [MDLEAKY, MDLSTM])
def test_backends_agree(variant, rng):
    x = rng.normal(size=(7, 9, 3))
    ws = random_lattice_weights(rng, 3, 4, 0.8)
    dout = rng.normal(size=(4, 7, 9, 4))
    res = {}
    for b in ("numpy", "numba"):
        out, cache = lattice_forward(x, *ws, variant, backend=b)
        res[b] = (out, *lattice_backward(cache, dout)[1], lattice_backward(cache, dout)[0])
    for a, b in zip(res["numpy"], res["numba"]):
        np.testing.assert_allclose(a, b, rtol=1e-11, atol=1e-12)


def test_lattice_zero_upstream_gradient(rng):
    x = rng.normal(size=(3, 4, 2))
    _, cache = lattice_forward(x, *random_lattice_weights(rng, 2, 2, 1.0), MDLEAKY)
    dx, dws = lattice_backward(cache, np.zeros((4, 3, 4, 2)))
    assert not dx.any() and not any(d.any() for d in dws)
    assert lattice_backward(cache, np.zeros((4, 3, 4, 2)), need_dx=False)[0] is None


def test_lattice_bounded_under_large_weights(rng):
    for _ in range(50):
        h, w = rng.integers(1, 20, 2)
        x = rng.normal(size=(h, w, 2)) * 10
        _, cache = lattice_forward(x, *random_lattice_weights(rng, 2, 2, 1e3), MDLEAKY)
        assert np.abs(lattice_states(cache)).max() <= 1.0 + 1e-12


# ---------------------------------------------------------------- gradients


def test_cell_backward_zero_upstream(rng):
    w = CellWeights.random(3, 2, rng)
    _, cache = cell_forward(rng.normal(size=3), None, None, w, MDLEAKY)
    dx, d1, d2, dw = cell_backward(cache, np.zeros(2), np.zeros(2))
    assert not dx.any() and not d1.s.any() and not d2.y.any()
    assert not any(a.any() for a in dw.arrays())


@pytest.mark.parametrize("variant", [MDLEAKY, MDLSTM])
@pytest.mark.parametrize("seed", range(5))
def test_cell_gradient(variant, seed):
    assert check_cell(variant, seed=seed) < 1e-6


@pytest.mark.parametrize("variant", [MDLEAKY, MDLSTM])
def test_lattice_gradient(variant):
    assert check_lattice(variant, shape=(4, 4), units=3) < 1e-4


def test_cell_backward_sums_batches(rng):
    w = CellWeights.random(2, 2, rng, 1.0)
    x = rng.normal(size=(3, 2))
    _, cache = cell_forward(x, None, None, w, MDLEAKY)
    dy = rng.normal(size=(3, 2))
    _, _, _, dw = cell_backward(cache, dy, np.zeros((3, 2)))
    total = sum(
        cell_backward(cell_forward(x[i], None, None, w, MDLEAKY)[1], dy[i], np.zeros(2))[3].w_in for i in range(3)
    )
    np.testing.assert_allclose(dw.w_in, total, atol=1e-14)
