# Walkthrough of the three training losses: thresholded SNR, PIT, and MixIT.
#
# Run from the repo root after `pip install -e .`:
#   python3 demos/01_separation_losses.py

import numpy as np

from sepkit.dsp import SourceSet, Waveform
from sepkit.losses import LossConfig, mixit_loss, pit_loss, snr_loss

rng = np.random.default_rng(0)
sr = 16000


def wave(x):
    return Waveform(x, sr)


# --- thresholded SNR -------------------------------------------------------
# The per-signal loss is -10 log10(||y||^2 / (||y - yhat||^2 + tau ||y||^2)).
# tau = 10^(-snr_max/10) soft-clamps how negative (good) the loss can get.

y = wave(rng.standard_normal(sr))
cfg = LossConfig(snr_max=30.0)

print("== thresholded SNR ==")
print("perfect estimate:", snr_loss(y, y, cfg), "dB  (the -snr_max clamp)")
print("zero estimate:   ", snr_loss(y, wave(np.zeros(sr)), cfg), "dB")
noisy = wave(y.samples + 0.1 * rng.standard_normal(sr))
print("estimate at ~20 dB SNR:", round(snr_loss(y, noisy, cfg), 3), "dB")

# --- PIT ---------------------------------------------------------------------
# Supervised training with M references: the loss searches all permutations
# matching model outputs to references, so output order never matters.

refs = [rng.standard_normal(sr) for _ in range(3)]
shuffled = [refs[2], refs[0], refs[1]]
result = pit_loss(SourceSet(tuple(wave(r) for r in refs)),
                  SourceSet(tuple(wave(e) for e in shuffled)),
                  cfg, backend="assignment_solver")
print("\n== PIT ==")
print("total over best permutation:", result.total_loss, "dB  (3 x -30)")
print("recovered mapping ref->est:", result.assignment.mapping)

# --- MixIT ---------------------------------------------------------------------
# Unsupervised training: the input is a mixture of two real mixtures and the
# loss assigns each output source to one of them, best assignment wins.

x1 = wave(rng.standard_normal(sr) * 0.3)
x2 = wave(rng.standard_normal(sr) * 0.3)
# pretend the separator split x1 into two parts and recovered x2 whole
part = rng.standard_normal(sr) * 0.1
ests = SourceSet((wave(x1.samples - part), wave(part), wave(x2.samples)))
result = mixit_loss(x1, x2, ests, cfg)
print("\n== MixIT ==")
print("total loss:", round(result.total_loss, 6), "dB")
print("per-mixture terms:", [round(t, 3) for t in result.per_term])
print("assignment of the 3 sources to mixtures:", result.assignment.assignment)
