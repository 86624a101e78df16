# Walk one synthetic line through the normalization steps and save every stage
# as a PGM so the result can be inspected with any image viewer.
import os
import sys

import numpy as np

from argus_htr.dataset import SynthConfig, synth_line
from argus_htr.pgm import write_pgm
from argus_htr.preprocess import (
    NormConfig,
    correct_slant,
    estimate_median_curve,
    estimate_slant,
    normalize_height,
    preprocess_line,
    rescale,
)

out = sys.argv[1] if len(sys.argv) > 1 else "normalize_demo"
os.makedirs(out, exist_ok=True)

rng = np.random.default_rng(3)
cfg = SynthConfig(wobble_amplitude=12.0, slant_range=0.3)
img = synth_line("wavy baseline demo", cfg, rng)
write_pgm(os.path.join(out, "0_raw.pgm"), img)

norm = NormConfig()
curve = estimate_median_curve(img, norm)
half = norm.median_window // 2


def interior_spread(im):
    # peak-to-peak of the median curve away from the line ends
    cols = np.nonzero((im >= norm.ink_threshold).any(axis=0))[0]
    return np.ptp(estimate_median_curve(im, norm)[cols[0] + half : cols[-1] + 1 - half])


print("raw", img.shape, "median curve moves", interior_spread(img), "rows")

flat = normalize_height(img, curve, norm)
write_pgm(os.path.join(out, "1_height.pgm"), flat)
print("height normalized", flat.shape, "curve now moves", interior_spread(flat), "rows")

angle = estimate_slant(flat)
# the estimate is the slant of the writing, so shear by its negative
upright = correct_slant(flat, -angle, norm.baseline_row)
write_pgm(os.path.join(out, "2_slant.pgm"), upright)
print("slant", round(float(angle), 3), "->", upright.shape)

small = rescale(upright, norm.scale)
write_pgm(os.path.join(out, "3_writing.pgm"), small)
print("writing", small.shape)

# the one-call version gives the same writing
assert np.array_equal(small, preprocess_line(img, norm))
print("stages written to", out)
