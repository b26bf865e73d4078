# Mixture-of-mixtures sampling for unsupervised training.
#
# Raw fixed-length distant-mic clips are paired within a recording location
# (never across), each cropped at an independent random offset, and summed.
#
#   python3 demos/04_mixture_of_mixtures.py

import tempfile
from collections import Counter

import numpy as np

from sepkit.corpus import raw_clips_from_corpus, sample_moms
from sepkit.fixture import make_fixture_corpus

workdir = tempfile.mkdtemp(prefix="sepkit_mom_")
corpus = make_fixture_corpus(workdir, seed=2002, duration_s=120.0)

raw = raw_clips_from_corpus(corpus, raw_len=20.0)
print("raw 20 s clips per location:", dict(Counter(c.location for c in raw)))

rng = np.random.default_rng(123)
moms = list(sample_moms(raw, count=12, rng=rng, crop_len=10.0))

for mom in moms[:5]:
    print(f"{mom.location:<10} {mom.meta['clip1']} + {mom.meta['clip2']}"
          f"  offsets {mom.meta['offset1']}, {mom.meta['offset2']} samples")

print("\nall pairs same-location:",
      all(m.meta["clip1"].rsplit("_", 1)[0]
          == m.meta["clip2"].rsplit("_", 1)[0] for m in moms))
print("mom == mixture1 + mixture2 bit-exact:",
      all(np.array_equal(m.mom.samples,
                         m.mixture1.samples + m.mixture2.samples)
          for m in moms))
print("crop length:", len(moms[0].mixture1) / moms[0].mixture1.sample_rate, "s")
