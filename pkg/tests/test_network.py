import struct

import numpy as np
import pytest

from argus_htr.cells import MDLEAKY, MDLSTM
from argus_htr.gradcheck import check_network
from argus_htr.network import (
    FORMAT_VERSION,
    BadMagicError,
    CheckpointError,
    NetConfig,
    TruncatedFileError,
    VersionMismatchError,
    backward,
    forward,
    init_params,
    load_params,
    params_bytes,
    read_params,
    save_params,
)

TINY = NetConfig.tiny(3)


def test_default_config():
    cfg = NetConfig(152)
    assert cfg.level_sizes == (3, 15, 75) and cfg.ff_sizes == (9, 30)
    assert cfg.input_tile == (2, 2) and cfg.subsample_tiles == ((2, 2), (2, 2))
    assert cfg.n_outputs == 153


def test_tiny_parameter_count_by_hand():
    # level 0: F = 2*2 pixels, U = 2 -> 4 directions * 5U(F + 2U + 1)
    lvl0 = 4 * 5 * 2 * (4 + 4 + 1)
    ff0 = (2 * 2 * 2) * 3 + 3
    lvl1 = 4 * 5 * 3 * (3 + 6 + 1)
    ff1 = (2 * 2 * 3) * 4 + 4
    lvl2 = 4 * 5 * 4 * (4 + 8 + 1)
    out = 4 * 4 + 4
    assert lvl0 + ff0 + lvl1 + ff1 + lvl2 + out == 2099
    assert TINY.n_params() == 2099 == init_params(TINY, 0).size()


@pytest.mark.parametrize("alphabet", [3, 40, 152])
def test_variants_have_equal_parameter_counts(alphabet):
    for sizes in [dict(), dict(level_sizes=(2, 3, 4), ff_sizes=(3, 4))]:
        a = NetConfig(alphabet, MDLEAKY, **sizes)
        b = NetConfig(alphabet, MDLSTM, **sizes)
        assert a.n_params() == b.n_params() == init_params(a, 0).size()


@pytest.mark.parametrize(
    "kw",
    [dict(cell_variant="gru"), dict(ff_sizes=(3,)), dict(alphabet_size=0), dict(input_tile=(0, 2))],
)
def test_config_invalid(kw):
    args = dict(alphabet_size=3, cell_variant=MDLEAKY, input_tile=(2, 2), level_sizes=(2, 3, 4), ff_sizes=(3, 4))
    args.update(kw)
    with pytest.raises(ValueError):
        NetConfig(**args)


def test_init_params():
    a, b, c = init_params(TINY, 1), init_params(TINY, 1), init_params(TINY, 2)
    assert a.equals(b) and not a.equals(c)
    for name, v in a:
        if name.endswith(("bias", ".b")):
            assert not v.any()
        else:
            assert np.abs(v).max() <= 0.1


def test_output_rows_are_distributions(rng):
    cfg = NetConfig.tiny(5)
    for shape in [(8, 12), (90, 37), (3, 2), (1, 40)]:
        p = init_params(cfg, int(rng.integers(100)), scale=1.0)
        probs, _ = forward(rng.uniform(size=shape), p)
        assert probs.shape[1] == 6
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)
        assert np.all(probs > 0) and np.all(probs < 1)


def test_frame_count():
    p = init_params(TINY, 0)
    probs, _ = forward(np.zeros((90, 100)), p)
    assert probs.shape == (13, 4)  # ceil(ceil(ceil(100 / 2) / 2) / 2)


def test_full_alphabet_width():
    p = init_params(NetConfig(152), 0)
    probs, _ = forward(np.zeros((90, 8)), p)
    assert probs.shape[1] == 153


def test_blank_image_scale_invariant():
    p = init_params(TINY, 3, scale=1.0)
    img = np.zeros((16, 20))
    np.testing.assert_array_equal(forward(img, p)[0], forward(2 * img, p)[0])


def test_forward_deterministic(rng):
    p = init_params(TINY, 4, scale=1.0)
    img = rng.uniform(size=(20, 30))
    np.testing.assert_array_equal(forward(img, p)[0], forward(img.copy(), p)[0])


def test_rejects_narrow_writing():
    with pytest.raises(ValueError):
        forward(np.zeros((90, 1)), init_params(TINY, 0))


def test_zero_upstream_gradient(rng):
    p = init_params(TINY, 0, scale=1.0)
    probs, cache = forward(rng.uniform(size=(8, 12)), p)
    g = backward(cache, np.zeros_like(probs))
    assert not g.flat().any()


def test_gradient_is_linear_in_upstream(rng):
    p = init_params(TINY, 0, scale=1.0)
    a, b = rng.uniform(size=(2, 8, 12))
    pa, ca = forward(a, p)
    pb, cb = forward(b, p)
    ga, gb = rng.normal(size=pa.shape), rng.normal(size=pb.shape)
    total = backward(ca, ga).add_(backward(cb, gb))
    np.testing.assert_allclose(total.flat(), backward(ca, ga).flat() + backward(cb, gb).flat(), atol=1e-12)
    np.testing.assert_allclose(backward(ca, 2 * ga).flat(), 2 * backward(ca, ga).flat(), atol=1e-12)


@pytest.mark.parametrize("variant", [MDLEAKY, MDLSTM])
def test_full_network_gradient(variant):
    assert check_network(variant) < 1e-4


# ---------------------------------------------------------------- checkpoints


def test_checkpoint_round_trip(tmp_path, rng):
    for cfg in (TINY, NetConfig(7, MDLSTM, (3, 1), (2, 4), (5,), ((1, 2),))):
        p = init_params(cfg, 9)
        for _, v in p:
            v[...] = rng.normal(size=v.shape)
        path = tmp_path / "m.args"
        save_params(path, p)
        q = load_params(path)
        assert q.config == cfg and q.equals(p)
        assert params_bytes(q) == path.read_bytes()


def test_checkpoint_layout():
    data = params_bytes(init_params(TINY, 0))
    assert data[:4] == b"ARGS"
    assert struct.unpack("<H", data[4:6])[0] == FORMAT_VERSION


def test_checkpoint_errors_are_distinct():
    data = params_bytes(init_params(TINY, 0))
    with pytest.raises(BadMagicError):
        read_params(b"ARGX" + data[4:])
    with pytest.raises(BadMagicError):
        read_params(b"AR")
    with pytest.raises(VersionMismatchError):
        read_params(data[:4] + struct.pack("<H", FORMAT_VERSION + 1) + data[6:])
    for cut in (5, 12, len(data) // 2, len(data) - 1):
        with pytest.raises(TruncatedFileError):
            read_params(data[:cut])
    for err in (BadMagicError, VersionMismatchError, TruncatedFileError):
        assert issubclass(err, CheckpointError)
    assert len({BadMagicError, VersionMismatchError, TruncatedFileError}) == 3


def test_batch_accumulation_is_sum(rng):
    p = init_params(TINY, 2, scale=0.5)
    acc, per_line = None, []
    for width in (16, 24):
        probs, cache = forward(rng.uniform(size=(8, width)), p)
        g = backward(cache, probs - np.eye(probs.shape[1])[np.zeros(probs.shape[0], dtype=int)])
        per_line.append(g.flat())
        acc = g if acc is None else acc.add_(g)
    np.testing.assert_allclose(acc.flat(), per_line[0] + per_line[1], rtol=0, atol=1e-12)
