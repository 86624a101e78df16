"""Hierarchical multi-directional recurrent network.

Layout: the writing is cut into input tiles whose pixels form the features of
the first lattice. Every level runs a cell layer in the four scan directions;
the direction outputs are summed, cut into subsampling tiles and fed through a
tanh feedforward layer to form the next level's input. After the last level
the activations are summed over directions and over the vertical axis, and an
affine layer plus softmax yields one posterior row per remaining column.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .cells import MDLEAKY, VARIANTS, lattice_backward, lattice_forward, n_cell_weights

__all__ = [
    "NetConfig",
    "NetParams",
    "init_params",
    "forward",
    "backward",
    "softmax",
    "save_params",
    "load_params",
    "CheckpointError",
    "BadMagicError",
    "VersionMismatchError",
    "TruncatedFileError",
]


@dataclass(frozen=True)
class NetConfig:
    alphabet_size: int
    cell_variant: str = MDLEAKY
    input_tile: tuple = (2, 2)  # (w, h)
    level_sizes: tuple = (3, 15, 75)
    ff_sizes: tuple = (9, 30)
    subsample_tiles: tuple = ((2, 2), (2, 2))  # (w, h) per level transition

    def __post_init__(self):
        object.__setattr__(self, "input_tile", tuple(int(v) for v in self.input_tile))
        object.__setattr__(self, "level_sizes", tuple(int(v) for v in self.level_sizes))
        object.__setattr__(self, "ff_sizes", tuple(int(v) for v in self.ff_sizes))
        object.__setattr__(
            self, "subsample_tiles", tuple(tuple(int(v) for v in t) for t in self.subsample_tiles)
        )
        if self.cell_variant not in VARIANTS:
            raise ValueError(f"unknown cell variant {self.cell_variant!r}")
        n = len(self.level_sizes)
        if n < 1 or len(self.ff_sizes) != n - 1 or len(self.subsample_tiles) != n - 1:
            raise ValueError("need one feedforward size and subsample tile per level transition")
        if self.alphabet_size < 1:
            raise ValueError("alphabet_size must be positive")
        sizes = [*self.input_tile, *self.level_sizes, *self.ff_sizes]
        sizes += [v for t in self.subsample_tiles for v in t]
        if min(sizes) < 1:
            raise ValueError("all sizes must be positive")

    @property
    def n_outputs(self):
        return self.alphabet_size + 1

    @classmethod
    def tiny(cls, alphabet_size, cell_variant=MDLEAKY):
        return cls(alphabet_size, cell_variant, (2, 2), (2, 3, 4), (3, 4), ((2, 2), (2, 2)))

    def shapes(self):
        """Parameter names and shapes in declaration (serialization) order."""
        out = []
        n_in = self.input_tile[0] * self.input_tile[1]
        for lvl, units in enumerate(self.level_sizes):
            g = 5 * units
            out += [
                (f"cell{lvl}.w_in", (4, n_in, g)),
                (f"cell{lvl}.w_rec1", (4, units, g)),
                (f"cell{lvl}.w_rec2", (4, units, g)),
                (f"cell{lvl}.bias", (4, g)),
            ]
            if lvl < len(self.ff_sizes):
                tw, th = self.subsample_tiles[lvl]
                n_ff = self.ff_sizes[lvl]
                out += [(f"ff{lvl}.w", (tw * th * units, n_ff)), (f"ff{lvl}.b", (n_ff,))]
                n_in = n_ff
        out += [("out.w", (self.level_sizes[-1], self.n_outputs)), ("out.b", (self.n_outputs,))]
        return out

    def n_params(self):
        """Closed-form parameter count."""
        n = 0
        n_in = self.input_tile[0] * self.input_tile[1]
        for lvl, units in enumerate(self.level_sizes):
            n += 4 * n_cell_weights(n_in, units)
            if lvl < len(self.ff_sizes):
                tw, th = self.subsample_tiles[lvl]
                n += (tw * th * units + 1) * self.ff_sizes[lvl]
                n_in = self.ff_sizes[lvl]
        return n + (self.level_sizes[-1] + 1) * self.n_outputs


@dataclass
class NetParams:
    """Named parameter tensors of a network (or a gradient of the same shape)."""

    config: NetConfig
    tensors: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.tensors:
            self.tensors = {name: np.zeros(shape) for name, shape in self.config.shapes()}

    def __getitem__(self, name):
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors.items())

    def zeros_like(self):
        return NetParams(self.config)

    def copy(self):
        return NetParams(self.config, {k: v.copy() for k, v in self.tensors.items()})

    def flat(self):
        return np.concatenate([v.ravel() for v in self.tensors.values()])

    def set_flat(self, vec):
        i = 0
        for v in self.tensors.values():
            v[...] = vec[i : i + v.size].reshape(v.shape)
            i += v.size

    def size(self):
        return sum(v.size for v in self.tensors.values())

    def add_(self, other, scale=1.0):
        for k, v in self.tensors.items():
            v += scale * other.tensors[k]
        return self

    def equals(self, other):
        return self.config == other.config and all(
            np.array_equal(v, other.tensors[k]) for k, v in self.tensors.items()
        )


def init_params(cfg, seed, scale=0.1):
    """Weights uniform in [-scale, scale], biases zero; deterministic in `seed`."""
    rng = np.random.default_rng(seed)
    p = NetParams(cfg)
    for name, v in p:
        if name.endswith(("bias", ".b")):
            continue
        v[...] = rng.uniform(-scale, scale, v.shape)
    return p


def softmax(z):
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _tile(x, tw, th):
    """(h, w, F) -> (ceil(h/th), ceil(w/tw), th*tw*F), zero-padding the edges."""
    h, w, f = x.shape
    H = -(-h // th) * th
    W = -(-w // tw) * tw
    if (H, W) != (h, w):
        x = np.pad(x, ((0, H - h), (0, W - w), (0, 0)))
    x = x.reshape(H // th, th, W // tw, tw, f).transpose(0, 2, 1, 3, 4)
    return x.reshape(H // th, W // tw, th * tw * f)


def _untile(d, tw, th, h, w):
    """Adjoint of `_tile`: (h', w', th*tw*F) -> (h, w, F)."""
    hh, ww, n = d.shape
    f = n // (th * tw)
    d = d.reshape(hh, ww, th, tw, f).transpose(0, 2, 1, 3, 4).reshape(hh * th, ww * tw, f)
    return d[:h, :w]


def forward(writing, p, cfg=None):
    """Posterior matrix (T, C+1) for a writing, plus a cache for `backward`."""
    cfg = cfg or p.config
    writing = np.asarray(writing, dtype=np.float64)
    tw, th = cfg.input_tile
    if writing.ndim != 2 or writing.shape[1] < tw or writing.shape[0] < 1:
        raise ValueError(f"writing of shape {writing.shape} is narrower than one {tw}x{th} input tile")
    x = _tile(writing[:, :, None], tw, th)
    levels = []
    for lvl in range(len(cfg.level_sizes)):
        ys, lcache = lattice_forward(
            x,
            p[f"cell{lvl}.w_in"],
            p[f"cell{lvl}.w_rec1"],
            p[f"cell{lvl}.w_rec2"],
            p[f"cell{lvl}.bias"],
            cfg.cell_variant,
        )
        ysum = ys.sum(axis=0)
        entry = {"lattice": lcache, "shape": ysum.shape}
        if lvl < len(cfg.ff_sizes):
            sw, sh = cfg.subsample_tiles[lvl]
            tiles = _tile(ysum, sw, sh)
            x = np.tanh(tiles @ p[f"ff{lvl}.w"] + p[f"ff{lvl}.b"])
            entry.update(tiles=tiles, z=x)
        levels.append(entry)
    feats = ysum.sum(axis=0)
    logits = feats @ p["out.w"] + p["out.b"]
    probs = softmax(logits)
    return probs, {"levels": levels, "feats": feats, "params": p, "config": cfg}


def backward(cache, grad_logits):
    """Gradient of a scalar loss w.r.t. all parameters, given dL/dlogits."""
    p, cfg = cache["params"], cache["config"]
    grad = p.zeros_like()
    g = np.asarray(grad_logits, dtype=np.float64)
    grad["out.w"][...] = cache["feats"].T @ g
    grad["out.b"][...] = g.sum(axis=0)
    dfeats = g @ p["out.w"].T
    levels = cache["levels"]
    h, w, _ = levels[-1]["shape"]
    dysum = np.broadcast_to(dfeats[None], (h, w, dfeats.shape[1]))
    for lvl in range(len(levels) - 1, -1, -1):
        entry = levels[lvl]
        dys = np.broadcast_to(dysum[None], (4,) + dysum.shape)
        dx, (dwi, dr1, dr2, db) = lattice_backward(entry["lattice"], dys, need_dx=lvl > 0)
        grad[f"cell{lvl}.w_in"][...] = dwi
        grad[f"cell{lvl}.w_rec1"][...] = dr1
        grad[f"cell{lvl}.w_rec2"][...] = dr2
        grad[f"cell{lvl}.bias"][...] = db
        if lvl == 0:
            break
        prev = levels[lvl - 1]
        z, tiles = prev["z"], prev["tiles"]
        dpre = dx * (1.0 - z * z)
        f = dpre.shape[-1]
        grad[f"ff{lvl - 1}.w"][...] = tiles.reshape(-1, tiles.shape[-1]).T @ dpre.reshape(-1, f)
        grad[f"ff{lvl - 1}.b"][...] = dpre.sum(axis=(0, 1))
        sw, sh = cfg.subsample_tiles[lvl - 1]
        ph, pw, _ = prev["shape"]
        dysum = _untile(dpre @ p[f"ff{lvl - 1}.w"].T, sw, sh, ph, pw)
    return grad


# ---------------------------------------------------------------------------
# checkpoint container

MAGIC = b"ARGS"
FORMAT_VERSION = 1
_VARIANT_CODES = {v: i for i, v in enumerate(VARIANTS)}


class CheckpointError(ValueError):
    pass


class BadMagicError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class TruncatedFileError(CheckpointError):
    pass


def _config_bytes(cfg):
    n = len(cfg.level_sizes)
    out = struct.pack("<BIHHB", _VARIANT_CODES[cfg.cell_variant], cfg.alphabet_size, *cfg.input_tile, n)
    out += struct.pack(f"<{n}I", *cfg.level_sizes)
    out += struct.pack(f"<{n - 1}I", *cfg.ff_sizes)
    out += struct.pack(f"<{2 * (n - 1)}H", *(v for t in cfg.subsample_tiles for v in t))
    return out


class _Reader:
    def __init__(self, data, pos=0):
        self.data = data
        self.pos = pos

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise TruncatedFileError(f"file truncated while reading {what}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def tensor(self, shape, what):
        n = int(np.prod(shape))
        return np.frombuffer(self.take(8 * n, what), dtype="<f8").reshape(shape).astype(np.float64)

    def at_end(self):
        return self.pos == len(self.data)


def _read_config(r):
    variant, alpha, tw, th, n = r.unpack("<BIHHB", "network config")
    if variant >= len(VARIANTS):
        raise CheckpointError(f"unknown cell variant code {variant}")
    levels = r.unpack(f"<{n}I", "network config")
    ffs = r.unpack(f"<{n - 1}I", "network config")
    tiles = r.unpack(f"<{2 * (n - 1)}H", "network config")
    return NetConfig(
        alpha, VARIANTS[variant], (tw, th), levels, ffs, tuple(zip(tiles[::2], tiles[1::2]))
    )


def params_bytes(p):
    out = [MAGIC, struct.pack("<H", FORMAT_VERSION), _config_bytes(p.config)]
    for name, shape in p.config.shapes():
        out.append(np.ascontiguousarray(p[name], dtype="<f8").tobytes())
    return b"".join(out)


def read_params(data):
    """Parse a checkpoint; returns (NetParams, reader positioned after the tensors)."""
    r = _Reader(data)
    if r.take(min(4, len(data)), "magic") != MAGIC:
        raise BadMagicError("bad magic: not an ARGS checkpoint")
    (version,) = r.unpack("<H", "format version")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"checkpoint format version {version}, expected {FORMAT_VERSION}")
    cfg = _read_config(r)
    p = NetParams(cfg, {name: r.tensor(shape, name) for name, shape in cfg.shapes()})
    return p, r


def save_params(path, p, extra=b""):
    with open(path, "wb") as f:
        f.write(params_bytes(p) + extra)


def load_params(path):
    with open(path, "rb") as f:
        p, _ = read_params(f.read())
    return p
