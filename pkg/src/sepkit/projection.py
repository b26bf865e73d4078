"""Least-squares FIR estimation from a close microphone to a distant one.

Fits an N-tap causal filter h minimizing ||x*h - y||^2 with pre-windowed
(zero-padded) boundaries, so the normal equations use an NxN symmetric
Toeplitz autocorrelation matrix and a Levinson recursion applies. The
filtered close-mic signal x*h stands in as a clean reverberant reference at
the distant mic; y - x*h is the imperfect noise residual.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, toeplitz
from scipy.signal import fftconvolve

from .dsp import Waveform, convolve, read_wav, write_wav
from .errors import DegenerateInputError, ShapeMismatchError
from .losses import sq_norm


@dataclass(frozen=True)
class FirFilter:
    """N-tap causal impulse response."""

    taps: np.ndarray
    sample_rate: int

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64)
        if taps.ndim != 1 or taps.size < 1:
            raise ValueError("taps must be a non-empty 1-D vector")
        if not np.all(np.isfinite(taps)):
            raise ValueError("taps contain NaN or Inf")
        object.__setattr__(self, "taps", taps)

    @property
    def n_taps(self) -> int:
        return self.taps.size


@dataclass(frozen=True)
class ProjectionResult:
    filter: FirFilter
    filtered: Waveform              # x * h, truncated to len(x)
    residual: Waveform              # y - x * h
    residual_energy_ratio: float    # ||residual||^2 / ||y||^2


def default_n_taps(sample_rate: int) -> int:
    """200 ms of taps: 3200 at 16 kHz."""
    return round(0.2 * sample_rate)


def levinson_solve(r: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve T x = b for symmetric positive-definite Toeplitz T.

    ``r`` is the first column of T. O(N^2) Levinson recursion; raises
    DegenerateInputError when a reflection coefficient reaches 1 (T not
    numerically positive definite), signalling the caller to fall back to a
    dense solve.
    """
    r = np.asarray(r, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = r.size
    if r[0] <= 0.0:
        raise DegenerateInputError("Toeplitz system has non-positive diagonal")
    rho = r[1:] / r[0]
    c = b / r[0]
    x = np.zeros(n)
    x[0] = c[0]
    if n == 1:
        return x
    y = np.zeros(n - 1)
    y[0] = -rho[0]
    alpha = -rho[0]
    beta = 1.0
    for k in range(1, n):
        beta = (1.0 - alpha * alpha) * beta
        if not beta > 1e-14:
            raise DegenerateInputError(
                f"Levinson breakdown at order {k}: matrix not positive definite")
        mu = (c[k] - rho[:k] @ x[k - 1::-1]) / beta
        x[:k] += mu * y[k - 1::-1]
        x[k] = mu
        if k < n - 1:
            alpha = -(rho[k] + rho[:k] @ y[k - 1::-1]) / beta
            y[:k] += alpha * y[k - 1::-1]
            y[k] = alpha
    return x


def _autocorrelation(x: np.ndarray, n_lags: int) -> np.ndarray:
    full = fftconvolve(x, x[::-1])
    return full[x.size - 1:x.size - 1 + n_lags]


def _crosscorrelation(x: np.ndarray, y: np.ndarray, n_lags: int) -> np.ndarray:
    # lag k: sum_n y[n] x[n - k]
    full = fftconvolve(y, x[::-1])
    return full[x.size - 1:x.size - 1 + n_lags]


def estimate_fir(x: Waveform, y: Waveform, n_taps: int,
                 regularization: float | None = None) -> ProjectionResult:
    """Least-squares FIR from x (close mic) to y (distant mic).

    Solves (R + lambda I) h = r_xy in the time domain: Levinson when
    lambda = 0 and R is well-conditioned, dense SPD solve otherwise.
    ``regularization=None`` applies the default Tikhonov lambda of
    1e-6 * R[0]; pass 0.0 for the unregularized path.
    """
    if x.sample_rate != y.sample_rate:
        raise ShapeMismatchError(
            f"sample rate mismatch: {x.sample_rate} vs {y.sample_rate}")
    if len(x) != len(y):
        raise ShapeMismatchError(f"length mismatch: {len(x)} vs {len(y)}")
    if n_taps < 1:
        raise ValueError(f"n_taps must be >= 1, got {n_taps}")
    if len(x) < 4 * n_taps:
        raise ValueError(
            f"signal of {len(x)} samples too short for {n_taps} taps "
            f"(need >= {4 * n_taps})")
    if regularization is not None and regularization < 0:
        raise ValueError(f"regularization must be >= 0, got {regularization}")

    r = _autocorrelation(x.samples, n_taps)
    if r[0] <= 0.0:
        raise DegenerateInputError("close-mic signal is all-zero")
    lam = 1e-6 * r[0] if regularization is None else float(regularization)
    rxy = _crosscorrelation(x.samples, y.samples, n_taps)

    taps = None
    if lam == 0.0:
        try:
            taps = levinson_solve(r, rxy)
        except DegenerateInputError:
            taps = None
    if taps is None:
        taps = _dense_spd_solve(r, rxy, lam)

    filt = FirFilter(taps, x.sample_rate)
    filtered = convolve(x, filt, mode="direct")
    resid = Waveform(y.samples - filtered.samples, y.sample_rate)
    ref_energy = sq_norm(y.samples)
    ratio = sq_norm(resid.samples) / ref_energy if ref_energy > 0 else 0.0
    return ProjectionResult(filt, filtered, resid, float(ratio))


def _dense_spd_solve(r: np.ndarray, rxy: np.ndarray, lam: float) -> np.ndarray:
    matrix = toeplitz(r)
    matrix[np.diag_indices_from(matrix)] += lam
    try:
        return cho_solve(cho_factor(matrix), rxy)
    except np.linalg.LinAlgError as exc:
        raise DegenerateInputError(
            f"normal equations singular (lambda={lam}); regularize or use more data"
        ) from exc


def apply_projection(x: Waveform, f: FirFilter) -> Waveform:
    """Same-length causal filtering of x; delegates to dsp.convolve (direct)."""
    if x.sample_rate != f.sample_rate:
        raise ShapeMismatchError(
            f"sample rate mismatch: {x.sample_rate} vs {f.sample_rate}")
    return convolve(x, f, mode="direct")


def residual(y: Waveform, filtered: Waveform) -> Waveform:
    """Elementwise y - filtered."""
    if len(y) != len(filtered):
        raise ShapeMismatchError(f"length mismatch: {len(y)} vs {len(filtered)}")
    return Waveform(y.samples - filtered.samples, y.sample_rate)


def lag_orthogonality(x: Waveform, y: Waveform, f: FirFilter) -> float:
    """Max normalized correlation between the LS residual and lagged x.

    Evaluated over the zero-padded regression support the normal equations
    minimize over (length T + N - 1), where an exact least-squares solution
    is orthogonal to every lagged copy of x. Returns
    max_k |<e, shift(x, k)>| / (||e|| ||x||) for k in [0, N).
    """
    n = f.n_taps
    t = len(x)
    full = np.convolve(x.samples, f.taps)          # length T + N - 1
    e = -full
    e[:t] += y.samples
    cross = fftconvolve(e, x.samples[::-1])
    inner = cross[t - 1:t - 1 + n]
    scale = np.sqrt(sq_norm(e) * sq_norm(x.samples))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(inner)) / scale)


def save_taps_binary(f: FirFilter, path) -> None:
    """Raw little-endian float64 coefficient dump."""
    with open(path, "wb") as fh:
        fh.write(f.taps.astype("<f8").tobytes())


def load_taps_binary(path, sample_rate: int) -> FirFilter:
    with open(path, "rb") as fh:
        taps = np.frombuffer(fh.read(), dtype="<f8")
    return FirFilter(taps.copy(), sample_rate)


def save_taps_text(f: FirFilter, path) -> None:
    """One coefficient per line, full double precision."""
    with open(path, "w") as fh:
        for tap in f.taps:
            fh.write(f"{float(tap)!r}\n")


def load_taps_text(path, sample_rate: int) -> FirFilter:
    with open(path) as fh:
        taps = [float(line) for line in fh if line.strip()]
    return FirFilter(np.array(taps), sample_rate)


def filter_to_wav(f: FirFilter, path) -> None:
    """Export the impulse response as a float32 WAV."""
    write_wav(Waveform(f.taps, f.sample_rate), path, encoding="float32")


def filter_from_wav(path) -> FirFilter:
    w = read_wav(path)
    return FirFilter(w.samples, w.sample_rate)
