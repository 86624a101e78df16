import numpy as np
import pytest

from argus_htr.pgm import PGMError, decode_pgm, encode_pgm, quantize, read_pgm, write_pgm


def test_intensity_convention():
    raw = b"P5\n2 1\n255\n" + bytes([0, 255])
    img = decode_pgm(raw)
    np.testing.assert_array_equal(img, [[1.0, 0.0]])


def test_round_trip_bit_exact(tmp_path, rng):
    img = quantize(rng.uniform(0, 1, (7, 13)))
    path = tmp_path / "x.pgm"
    write_pgm(path, img)
    back = read_pgm(path)
    np.testing.assert_array_equal(back, img)
    assert encode_pgm(back) == path.read_bytes()


def test_comments_in_header():
    raw = b"P5\n# a comment\n3 1 # trailing\n255\n" + bytes([10, 20, 30])
    assert decode_pgm(raw).shape == (1, 3)


@pytest.mark.parametrize(
    "raw",
    [
        b"P2\n1 1\n255\n0",
        b"P5\n2 2\n255\n" + bytes(3),
        b"P5\n2",
        b"",
    ],
)
def test_malformed(raw):
    with pytest.raises(PGMError):
        decode_pgm(raw)
