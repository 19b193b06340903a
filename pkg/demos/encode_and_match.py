"""Walkthrough of the encoding layer.

Builds the random codebooks, encodes a small spectrum, perturbs it, and
shows that Hamming distance separates near-duplicates from unrelated
spectra by a wide margin.

Run:  python demos/encode_and_match.py
"""

import numpy as np

from hdoms import (
    Peak,
    PreprocessConfig,
    Spectrum,
    encode_spectrum,
    gen_item_memory,
    hamming,
    preprocess_spectrum,
    similarity_score,
)

DIM = 4096

pre = PreprocessConfig()
im = gen_item_memory(pre.num_bins(), pre.num_levels, DIM, seed=1)
print(f"item memory: {im.num_bins} bin vectors, {im.num_levels} level vectors, "
      f"{DIM} bits each")

# Adjacent intensity levels stay close, extremes are near-orthogonal.
from hdoms import Hypervector  # noqa: E402

lv = lambda i: Hypervector(im.level_vectors[i], DIM)
print(f"hamming(level 10, level 11) = {hamming(lv(10), lv(11))}")
print(f"hamming(level 10, level 40) = {hamming(lv(10), lv(40))}")
print(f"hamming(level 0,  level 63) = {hamming(lv(0), lv(63))}")

# A toy spectrum and a lightly perturbed copy.
rng = np.random.default_rng(7)
mzs = np.sort(rng.uniform(100, 1500, size=30))
intensities = rng.uniform(10, 1000, size=30)

spectrum = Spectrum(0, "demo", 500.0, 2,
                    [Peak(m, i) for m, i in zip(mzs, intensities)])
perturbed = Spectrum(1, "demo-noisy", 500.0, 2,
                     [Peak(m, i * rng.uniform(0.9, 1.1))
                      for m, i in zip(mzs, intensities)])
unrelated = Spectrum(2, "other", 500.0, 2,
                     [Peak(m, i) for m, i in
                      zip(np.sort(rng.uniform(100, 1500, 30)),
                          rng.uniform(10, 1000, 30))])

hv = encode_spectrum(preprocess_spectrum(spectrum, pre), im)
hv_noisy = encode_spectrum(preprocess_spectrum(perturbed, pre), im)
hv_other = encode_spectrum(preprocess_spectrum(unrelated, pre), im)

print(f"\nscore(self, self)      = {similarity_score(hv, hv)}  (max = {DIM})")
print(f"score(self, perturbed) = {similarity_score(hv, hv_noisy)}")
print(f"score(self, unrelated) = {similarity_score(hv, hv_other)}  "
      f"(random pairs sit near {DIM // 2})")
