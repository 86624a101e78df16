"""Line normalization: baseline flattening, height normalization, deslanting.

A raw line image is turned into a *writing*: the local median of the ink is
followed along the line, the main body around it is shifted onto a fixed
horizontal band of a fixed-height canvas, ascender and descender zones are
rescaled into the remaining rows, the slant introduced by the vertical shift is
removed with a global horizontal shear and the result is scaled down.

Images are float arrays of shape (height, width) holding ink intensity in
[0, 1] (1 = full ink).
"""

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NormConfig",
    "estimate_median_curve",
    "normalize_height",
    "estimate_slant",
    "correct_slant",
    "shear",
    "rescale",
    "preprocess_line",
    "SLANT_CANDIDATES",
]

SLANT_CANDIDATES = np.linspace(-0.7, 0.7, 29)


@dataclass(frozen=True)
class NormConfig:
    above: int = 80
    below: int = 60
    target_height: int = 180
    scale: float = 0.5
    ink_threshold: float = 0.5
    median_window: int = 61

    def __post_init__(self):
        if self.above < 0 or self.below < 0:
            raise ValueError("main body extents must be non-negative")
        if self.above + self.below > self.target_height:
            raise ValueError("above + below must not exceed target_height")
        if not 0.0 < self.scale <= 1.0:
            raise ValueError("scale must lie in (0, 1]")
        if self.median_window < 1 or self.median_window % 2 == 0:
            raise ValueError("median_window must be odd and >= 1")

    @property
    def band_top(self):
        """First output row of the main body band."""
        return (self.target_height - self.above - self.below) // 2

    @property
    def baseline_row(self):
        """Output row the median curve is mapped to."""
        return self.band_top + self.above

    @property
    def output_height(self):
        return max(1, int(round(self.target_height * self.scale)))


def _as_image(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2D image, got shape {img.shape}")
    return img


def estimate_median_curve(img, cfg=NormConfig()):
    """Per-column median row of the ink pixels within a sliding column window.

    Columns whose window holds no ink are filled by linear interpolation
    between the nearest ink-bearing columns (constant beyond the ends). A
    blank image yields a constant curve at height/2.
    """
    img = _as_image(img)
    h, w = img.shape
    ink = (img >= cfg.ink_threshold).astype(np.int64)
    # windowed per-row ink counts via a cumulative sum along columns
    half = cfg.median_window // 2
    csum = np.zeros((h, w + 1), dtype=np.int64)
    np.cumsum(ink, axis=1, out=csum[:, 1:])
    lo = np.clip(np.arange(w) - half, 0, w)
    hi = np.clip(np.arange(w) + half + 1, 0, w)
    counts = csum[:, hi] - csum[:, lo]
    cum = np.cumsum(counts, axis=0)
    n = cum[-1]
    has_ink = n > 0
    if not has_ink.any():
        return np.full(w, min(h / 2.0, h - 1.0))
    # rows holding the ranks (n-1)//2 and n//2; their mean is the median
    r_lo = (n - 1) // 2
    r_hi = n // 2
    row_lo = np.argmax(cum > r_lo[None, :], axis=0)
    row_hi = np.argmax(cum > r_hi[None, :], axis=0)
    med = 0.5 * (row_lo + row_hi).astype(np.float64)
    cols = np.arange(w)
    if not has_ink.all():
        med = np.interp(cols, cols[has_ink], med[has_ink])
    return med


def _sample_columns(img, src):
    """Sample each column of `img` at fractional rows `src` (shape (H', w)).

    Linear interpolation; rows outside the image read as 0.
    """
    h, w = img.shape
    f = np.floor(src)
    t = src - f
    i0 = f.astype(np.int64)
    i1 = i0 + 1
    cols = np.broadcast_to(np.arange(w), src.shape)
    padded = np.zeros((h + 2, w))
    padded[1:-1] = img
    v0 = padded[np.clip(i0, -1, h) + 1, cols]
    v1 = padded[np.clip(i1, -1, h) + 1, cols]
    return (1.0 - t) * v0 + t * v1


def _row_map(curve, h, cfg):
    """Source row for every output row, per column: shape (target_height, w)."""
    H = cfg.target_height
    top = cfg.band_top
    bottom = top + cfg.above + cfg.below  # last row of the band
    r = np.arange(H, dtype=np.float64)[:, None]
    c = np.asarray(curve, dtype=np.float64)[None, :]
    band_lo = c - cfg.above
    band_hi = c + cfg.below
    src = band_lo + (r - top)

    if top > 0:
        # rows [0, top] <- input rows [0, band_lo]
        k = np.where(band_lo > 0, band_lo / top, 1.0)
        upper = np.where(band_lo > 0, r * k, band_lo - (top - r))
        src = np.where(r < top, upper, src)
    last_out = H - 1
    last_in = h - 1.0
    if last_out > bottom:
        span = last_out - bottom
        k = np.where(band_hi < last_in, (last_in - band_hi) / span, 1.0)
        lower = band_hi + (r - bottom) * k
        src = np.where(r > bottom, lower, src)
    return src


def normalize_height(img, curve, cfg=NormConfig()):
    """Remap columns so the main body around `curve` becomes a horizontal band.

    The band [curve - above, curve + below] lands on output rows
    [band_top, band_top + above + below]; the zones above and below are
    linearly rescaled into the remaining rows of a `target_height` canvas.
    """
    img = _as_image(img)
    curve = np.asarray(curve, dtype=np.float64)
    if curve.shape != (img.shape[1],):
        raise ValueError("median curve length must equal the image width")
    src = _row_map(curve, img.shape[0], cfg)
    return np.clip(_sample_columns(img, src), 0.0, 1.0)


def _shift_rows(img, shifts, width, offset):
    """Shift every row r right by shifts[r] + offset onto a canvas of `width`."""
    h, w = img.shape
    x = np.arange(width, dtype=np.float64)[None, :] - offset - shifts[:, None]
    f = np.floor(x)
    t = x - f
    i0 = f.astype(np.int64)
    padded = np.zeros((h, w + 2))
    padded[:, 1:-1] = img
    rows = np.arange(h)[:, None]
    v0 = padded[rows, np.clip(i0, -1, w) + 1]
    v1 = padded[rows, np.clip(i0 + 1, -1, w) + 1]
    return (1.0 - t) * v0 + t * v1


def shear(img, angle, baseline_row=None):
    """Shift row r horizontally by (r - baseline_row) * tan(angle).

    The canvas is widened so no ink is clipped; new area is background.
    Returns the sheared image and the column offset applied to the input.
    """
    img = _as_image(img)
    h, w = img.shape
    if abs(angle) >= math.pi / 2:
        raise ValueError("shear angle must satisfy |angle| < pi/2")
    if baseline_row is None:
        baseline_row = (h - 1) / 2.0
    shifts = (np.arange(h) - baseline_row) * math.tan(angle)
    if angle == 0.0:
        return img.copy(), 0
    offset = int(math.ceil(max(0.0, -shifts.min())))
    width = w + offset + int(math.ceil(max(0.0, shifts.max())))
    out = _shift_rows(img, shifts, width, offset)
    return np.clip(out, 0.0, 1.0), offset


def correct_slant(img, angle, baseline_row=None):
    """Horizontal shear about `baseline_row` (default: the middle row)."""
    return shear(img, angle, baseline_row)[0]


def estimate_slant(img, candidates=SLANT_CANDIDATES):
    """Slant angle of the writing, in radians.

    Returns the candidate angle a whose inverse shear (by -a) maximizes the
    variance of the column ink sums. Ties go to the candidate closest to 0.
    """
    img = _as_image(img)
    h, w = img.shape
    rows, cols = np.nonzero(img)
    if rows.size == 0:
        return 0.0
    mass = img[rows, cols]
    max_shift = h * max(abs(math.tan(a)) for a in candidates)
    pad = int(math.ceil(max_shift)) + 1
    width = w + 2 * pad + 1
    order = sorted(range(len(candidates)), key=lambda i: (abs(candidates[i]), -candidates[i]))
    best, best_score = 0.0, -1.0
    for i in order:
        a = float(candidates[i])
        # linear interpolation of a shifted row == linear splatting of its pixels
        x = cols + pad - (rows - (h - 1) / 2.0) * math.tan(a)
        f = np.floor(x)
        t = x - f
        fi = f.astype(np.int64)
        proj = np.bincount(fi, mass * (1.0 - t), minlength=width + 1)
        proj += np.bincount(fi + 1, mass * t, minlength=width + 1)
        score = float(np.var(proj))
        if score > best_score:
            best, best_score = a, score
    return best


def rescale(img, scale):
    """Bilinear resize by `scale` (pixel-centre aligned, edge-clamped)."""
    img = _as_image(img)
    if scale == 1.0:
        return img.copy()
    for axis in (0, 1):
        n = img.shape[axis]
        m = max(1, int(round(n * scale)))
        src = np.clip((np.arange(m) + 0.5) * (n / m) - 0.5, 0.0, n - 1.0)
        i0 = np.floor(src).astype(np.int64)
        i1 = np.minimum(i0 + 1, n - 1)
        t = src - i0
        a = np.take(img, i0, axis=axis)
        b = np.take(img, i1, axis=axis)
        shape = [1, 1]
        shape[axis] = m
        t = t.reshape(shape)
        img = (1.0 - t) * a + t * b
    return np.clip(img, 0.0, 1.0)


def preprocess_line(img, cfg=NormConfig()):
    """Full normalization of a raw line image into a network-ready writing."""
    img = _as_image(img)
    curve = estimate_median_curve(img, cfg)
    norm = normalize_height(img, curve, cfg)
    angle = estimate_slant(norm)
    if angle != 0.0:
        norm = correct_slant(norm, -angle, cfg.baseline_row)
    out = rescale(norm, cfg.scale)
    assert out.shape[0] == cfg.output_height
    return out
