# Least-squares projection of a close microphone onto a distant one.
#
# We simulate a "headset" signal, a room impulse response, and a noisy
# distant microphone, then recover the room filter by solving the Toeplitz
# normal equations in the time domain.
#
#   python3 demos/02_projection_filter.py

import numpy as np

from sepkit.dsp import Waveform
from sepkit.projection import estimate_fir, lag_orthogonality

rng = np.random.default_rng(7)
sr = 16000

# headset: 8 s of speech-ish excitation
headset = Waveform(rng.standard_normal(8 * sr) * 0.2, sr)

# room: sparse early reflections plus exponential decay, 180 taps (~11 ms)
room = rng.standard_normal(180) * np.exp(-np.arange(180) / 40.0)
room[:9] = 0.0
room[9] = 1.0
room *= 0.4

clean_distant = np.convolve(headset.samples, room)[:len(headset)]
noise = 0.02 * rng.standard_normal(len(headset))
distant = Waveform(clean_distant + noise, sr)

print("estimating a 256-tap filter from 8 s of audio...")
result = estimate_fir(headset, distant, n_taps=256, regularization=0.0)

err = np.linalg.norm(result.filter.taps[:180] - room) / np.linalg.norm(room)
print("relative tap error vs true room filter:", round(err, 4))
print("residual energy ratio ||y - x*h||^2/||y||^2:",
      round(result.residual_energy_ratio, 5))
print("max residual/lagged-input correlation:",
      f"{lag_orthogonality(headset, distant, result.filter):.2e}")

# the residual serves as the "imperfect noise reference": everything at the
# distant mic that the filtered headset cannot explain
noise_energy = np.sum(noise**2)
resid_energy = np.sum(result.residual.samples**2)
print("residual energy vs injected noise energy:",
      round(resid_energy / noise_energy, 3), "(should be ~1)")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(8, 3))
    ax.plot(room, label="true room filter", lw=1)
    ax.plot(result.filter.taps[:180], label="estimate", lw=1, ls="--")
    ax.legend()
    ax.set_xlabel("tap")
    fig.tight_layout()
    fig.savefig("projection_filter_demo.png", dpi=120)
    print("wrote projection_filter_demo.png")
except ImportError:
    pass
