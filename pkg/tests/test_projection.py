import numpy as np
import pytest

from oracles import oracle_dense_fir
from sepkit.dsp import Waveform, convolve
from sepkit.errors import DegenerateInputError, ShapeMismatchError
from sepkit.projection import (FirFilter, apply_projection, estimate_fir,
                               filter_from_wav, filter_to_wav,
                               lag_orthogonality, levinson_solve,
                               load_taps_binary, load_taps_text, residual,
                               save_taps_binary, save_taps_text)

SR = 16000


def wave(x):
    return Waveform(np.asarray(x, dtype=float), SR)


@pytest.fixture()
def noisy_system(rng):
    """64-tap random system, white input, observation noise at 20 dB SNR."""
    h_true = rng.standard_normal(64) * np.exp(-np.arange(64) / 20.0)
    x = rng.standard_normal(65536)
    clean = np.convolve(x, h_true)[:65536]
    noise = rng.standard_normal(65536)
    noise *= np.sqrt(np.dot(clean, clean) / np.dot(noise, noise)) / 10.0
    return wave(x), wave(clean + noise), h_true


def test_identity_system(rng):
    x = wave(rng.standard_normal(4096) * 0.2)
    result = estimate_fir(x, x, 8, regularization=0.0)
    assert abs(result.filter.taps[0] - 1.0) < 1e-9
    assert np.max(np.abs(result.filter.taps[1:])) < 1e-6
    assert result.residual_energy_ratio < 1e-10


def test_scaled_delay(rng):
    x = wave(rng.standard_normal(16384))
    y = wave(0.5 * np.concatenate([np.zeros(3), x.samples[:-3]]))
    result = estimate_fir(x, y, 6, regularization=0.0)
    assert abs(result.filter.taps[3] - 0.5) < 1e-3
    off_taps = np.delete(result.filter.taps, 3)
    assert np.max(np.abs(off_taps)) < 1e-3
    assert result.residual_energy_ratio < 1e-5


def test_noisy_recovery_matches_dense_oracle(noisy_system):
    x, y, h_true = noisy_system
    result = estimate_fir(x, y, 64, regularization=0.0)
    rel = np.linalg.norm(result.filter.taps - h_true) / np.linalg.norm(h_true)
    assert rel < 0.05
    oracle = oracle_dense_fir(x.samples, y.samples, 64)
    assert np.linalg.norm(result.filter.taps - oracle) \
        / np.linalg.norm(oracle) < 1e-8


def test_residual_orthogonal_to_lagged_input(noisy_system):
    x, y, _ = noisy_system
    result = estimate_fir(x, y, 64, regularization=0.0)
    assert lag_orthogonality(x, y, result.filter) < 1e-6


def test_levinson_agrees_with_dense(rng):
    x = wave(rng.standard_normal(32768))
    h = rng.standard_normal(32)
    y = wave(np.convolve(x.samples, h)[:32768])
    lev = estimate_fir(x, y, 48, regularization=0.0)
    from scipy.linalg import cho_factor, cho_solve, toeplitz
    from sepkit.projection import _autocorrelation, _crosscorrelation
    r = _autocorrelation(x.samples, 48)
    rxy = _crosscorrelation(x.samples, y.samples, 48)
    dense = cho_solve(cho_factor(toeplitz(r)), rxy)
    assert np.linalg.norm(lev.filter.taps - dense) / np.linalg.norm(dense) < 1e-6


def test_levinson_breakdown_raises():
    # constant signal: rank-1 autocorrelation, not positive definite
    r = np.full(8, 4.0)
    with pytest.raises(DegenerateInputError):
        levinson_solve(r, np.ones(8))


def test_residual_ratio_non_increasing_in_taps(rng):
    x = wave(rng.standard_normal(16384))
    h = rng.standard_normal(24) * np.exp(-np.arange(24) / 8.0)
    y = wave(np.convolve(x.samples, h)[:16384]
             + 0.05 * rng.standard_normal(16384))
    ratios = [estimate_fir(x, y, n, regularization=0.0).residual_energy_ratio
              for n in (4, 8, 16, 32, 64)]
    for smaller, larger in zip(ratios[1:], ratios[:-1]):
        assert smaller <= larger + 1e-9


def test_linearity_in_target(rng):
    x = wave(rng.standard_normal(8192))
    y = wave(rng.standard_normal(8192))
    base = estimate_fir(x, y, 16, regularization=0.0)
    scaled = estimate_fir(x, wave(3.0 * y.samples), 16, regularization=0.0)
    assert np.allclose(scaled.filter.taps, 3.0 * base.filter.taps,
                       rtol=1e-9, atol=1e-12)


def test_filtered_plus_residual_reconstructs(noisy_system):
    x, y, _ = noisy_system
    result = estimate_fir(x, y, 64, regularization=0.0)
    recon = result.filtered.samples + result.residual.samples
    assert np.max(np.abs(recon - y.samples)) < 1e-9
    assert 0.0 <= result.residual_energy_ratio <= 1.0 + 1e-9


def test_preconditions(rng):
    x = wave(rng.standard_normal(100))
    with pytest.raises(ShapeMismatchError):
        estimate_fir(x, wave(np.zeros(50)), 4)
    with pytest.raises(ValueError):
        estimate_fir(x, x, 30)    # length < 4 * n_taps
    with pytest.raises(DegenerateInputError):
        estimate_fir(wave(np.zeros(100)), x, 4, regularization=0.0)
    with pytest.raises(ValueError):
        estimate_fir(x, x, 4, regularization=-1.0)


def test_apply_projection_matches_direct_convolve(rng):
    x = wave(rng.standard_normal(2048))
    f = FirFilter(rng.standard_normal(32), SR)
    assert np.array_equal(apply_projection(x, f).samples,
                          convolve(x, f, mode="direct").samples)
    unit = FirFilter(np.array([1.0]), SR)
    assert np.array_equal(apply_projection(x, unit).samples, x.samples)
    zero = FirFilter(np.zeros(8), SR)
    assert np.all(apply_projection(x, zero).samples == 0.0)
    with pytest.raises(ShapeMismatchError):
        apply_projection(x, FirFilter(np.ones(4), 8000))


def test_residual_op(rng):
    y = wave(rng.standard_normal(64))
    assert np.all(residual(y, y).samples == 0.0)
    zeros = wave(np.zeros(64))
    assert np.array_equal(residual(y, zeros).samples, y.samples)
    with pytest.raises(ShapeMismatchError):
        residual(y, wave(np.zeros(32)))


def test_filter_export_roundtrips(tmp_path, rng):
    f = FirFilter(rng.standard_normal(48), SR)
    save_taps_binary(f, tmp_path / "taps.f64")
    back = load_taps_binary(tmp_path / "taps.f64", SR)
    assert np.array_equal(back.taps, f.taps)

    save_taps_text(f, tmp_path / "taps.txt")
    back = load_taps_text(tmp_path / "taps.txt", SR)
    assert np.array_equal(back.taps, f.taps)

    filter_to_wav(f, tmp_path / "ir.wav")
    back = filter_from_wav(tmp_path / "ir.wav")
    assert np.allclose(back.taps, f.taps, atol=1e-6)
    assert back.sample_rate == SR
