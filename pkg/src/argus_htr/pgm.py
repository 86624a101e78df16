"""Minimal binary PGM (P5) reader and writer.

Images are returned as float64 ink-intensity arrays of shape (height, width)
with 1 = full ink and 0 = background, i.e. the inverse of the stored gray
value.
"""

import numpy as np


class PGMError(ValueError):
    pass


def _tokens(data, count, pos):
    """Read `count` whitespace-separated header tokens, skipping comments."""
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise PGMError("truncated PGM header")
        out.append(data[start:pos])
    return out, pos


def decode_pgm(data: bytes) -> np.ndarray:
    if data[:2] != b"P5":
        raise PGMError("not a binary PGM (missing P5 magic)")
    (w, h, maxval), pos = _tokens(data, 3, 2)
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise PGMError("malformed PGM header") from None
    if w < 1 or h < 1 or not 0 < maxval < 256:
        raise PGMError(f"unsupported PGM geometry {w}x{h} maxval {maxval}")
    pos += 1  # single whitespace byte after maxval
    raw = np.frombuffer(data, dtype=np.uint8, count=-1, offset=pos)
    if raw.size < w * h:
        raise PGMError("truncated PGM pixel data")
    raw = raw[: w * h].reshape(h, w)
    return 1.0 - raw.astype(np.float64) / maxval


def encode_pgm(img: np.ndarray) -> bytes:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise PGMError("expected a non-empty 2D image")
    raw = np.rint((1.0 - np.clip(img, 0.0, 1.0)) * 255.0).astype(np.uint8)
    h, w = raw.shape
    return b"P5\n%d %d\n255\n" % (w, h) + raw.tobytes()


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        return decode_pgm(f.read())


def write_pgm(path, img):
    with open(path, "wb") as f:
        f.write(encode_pgm(img))


def quantize(img):
    """Round intensities to the 8-bit grid a PGM round trip would produce."""
    return 1.0 - np.rint((1.0 - np.clip(img, 0.0, 1.0)) * 255.0) / 255.0
