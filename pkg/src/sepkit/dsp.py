"""Core audio plumbing: WAV I/O, mixing, convolution, and STFT/iSTFT.

All signals are mono ``Waveform`` objects carrying float64 samples. The
canonical pipeline rate is 16 kHz, but nothing here assumes it.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .errors import AudioFormatError, ShapeMismatchError

CANONICAL_RATE = 16000

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class Waveform:
    """A mono signal: float64 samples at a fixed sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples contain NaN or Inf")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        """Length in seconds."""
        return len(self) / self.sample_rate

    def slice(self, start: int, stop: int) -> "Waveform":
        """Sample-index slice as a new Waveform."""
        return Waveform(self.samples[start:stop].copy(), self.sample_rate)


@dataclass(frozen=True)
class SourceSet:
    """An ordered stack of M equal-length waveforms at one sample rate."""

    sources: tuple

    def __post_init__(self):
        sources = tuple(self.sources)
        if len(sources) < 1:
            raise ValueError("SourceSet needs at least one source")
        t = len(sources[0])
        rate = sources[0].sample_rate
        for w in sources[1:]:
            if len(w) != t:
                raise ShapeMismatchError(
                    f"source length {len(w)} != {t}; all members must match")
            if w.sample_rate != rate:
                raise ShapeMismatchError(
                    f"sample rate {w.sample_rate} != {rate}; all members must match")
        object.__setattr__(self, "sources", sources)

    @property
    def m(self) -> int:
        return len(self.sources)

    @property
    def t(self) -> int:
        return len(self.sources[0])

    @property
    def sample_rate(self) -> int:
        return self.sources[0].sample_rate

    def as_matrix(self) -> np.ndarray:
        """Stack into an (M, T) float64 array."""
        return np.stack([w.samples for w in self.sources])

    def __len__(self):
        return self.m

    def __getitem__(self, i) -> Waveform:
        return self.sources[i]


@dataclass(frozen=True)
class Spectrogram:
    """Complex STFT frames plus the analysis geometry needed to invert them."""

    frames: np.ndarray          # (n_frames, n_bins) complex
    window_size: int            # samples
    hop: int                    # samples
    window: str = "sqrt_hann"
    sample_rate: int = CANONICAL_RATE
    n_samples: int = field(default=0)   # original signal length

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


def _read_chunks(data: bytes):
    """Yield (chunk_id, payload) pairs from a RIFF body, validating sizes."""
    pos = 0
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise AudioFormatError(
                f"truncated chunk {cid!r}: declared {size} bytes, got {len(body)}")
        yield cid, body
        pos += 8 + size + (size & 1)    # chunks are word-aligned


def read_wav(path, channel: int = 0) -> Waveform:
    """Read a RIFF/WAVE file into a Waveform.

    Supports mono or multichannel 16-bit PCM and 32-bit IEEE float; the
    requested channel (default 0) is extracted. PCM16 code -32768 maps to
    amplitude -1.0.
    """
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise AudioFormatError(f"{path}: not a RIFF/WAVE file")
    fmt = None
    payload = None
    for cid, body in _read_chunks(raw[12:]):
        if cid == b"fmt ":
            if len(body) < 16:
                raise AudioFormatError(f"{path}: fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
            if fmt[0] == _WAVE_FORMAT_EXTENSIBLE:
                if len(body) < 40:
                    raise AudioFormatError(f"{path}: malformed extensible fmt chunk")
                (subformat,) = struct.unpack_from("<H", body, 24)
                fmt = (subformat,) + fmt[1:]
        elif cid == b"data":
            payload = body
    if fmt is None or payload is None:
        raise AudioFormatError(f"{path}: missing fmt or data chunk")
    audio_format, n_channels, sample_rate, _, block_align, bits = fmt
    if n_channels < 1 or block_align != n_channels * bits // 8:
        raise AudioFormatError(f"{path}: inconsistent channel layout")
    if audio_format == _WAVE_FORMAT_PCM and bits == 16:
        flat = np.frombuffer(payload[:len(payload) - len(payload) % 2], dtype="<i2")
        scale = 1.0 / 32768.0
    elif audio_format == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        flat = np.frombuffer(payload[:len(payload) - len(payload) % 4], dtype="<f4")
        scale = 1.0
    else:
        raise AudioFormatError(
            f"{path}: unsupported encoding (format {audio_format}, {bits}-bit); "
            "only 16-bit PCM and 32-bit float are handled")
    if flat.size % n_channels:
        raise AudioFormatError(f"{path}: data chunk truncated mid-frame")
    if not 0 <= channel < n_channels:
        raise AudioFormatError(
            f"{path}: channel {channel} out of range for {n_channels} channels")
    samples = flat.reshape(-1, n_channels)[:, channel].astype(np.float64) * scale
    return Waveform(samples, sample_rate)


def write_wav(w: Waveform, path, encoding: str = "float32") -> None:
    """Write a Waveform as mono WAV.

    pcm16 clamps samples to [-1, 1) before quantizing (so +-overloads land on
    the extreme codes); float32 is a bit-exact container for float32-valued
    samples.
    """
    if encoding == "pcm16":
        clipped = np.clip(w.samples, -1.0, 1.0)
        codes = np.clip(np.rint(clipped * 32768.0), -32768, 32767).astype("<i2")
        payload = codes.tobytes()
        audio_format, bits = _WAVE_FORMAT_PCM, 16
    elif encoding == "float32":
        payload = w.samples.astype("<f4").tobytes()
        audio_format, bits = _WAVE_FORMAT_IEEE_FLOAT, 32
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    block_align = bits // 8
    byte_rate = w.sample_rate * block_align
    if audio_format == _WAVE_FORMAT_PCM:
        fmt_body = struct.pack("<HHIIHH", audio_format, 1, w.sample_rate,
                               byte_rate, block_align, bits)
        chunks = [(b"fmt ", fmt_body), (b"data", payload)]
    else:
        # IEEE float wants a cbSize field and a fact chunk
        fmt_body = struct.pack("<HHIIHHH", audio_format, 1, w.sample_rate,
                               byte_rate, block_align, bits, 0)
        fact = struct.pack("<I", len(w))
        chunks = [(b"fmt ", fmt_body), (b"fact", fact), (b"data", payload)]
    body = b""
    for cid, chunk in chunks:
        body += cid + struct.pack("<I", len(chunk)) + chunk
        if len(chunk) & 1:
            body += b"\x00"
    with open(path, "wb") as f:
        f.write(b"RIFF" + struct.pack("<I", 4 + len(body)) + b"WAVE" + body)


def mix(a: Waveform, b: Waveform) -> Waveform:
    """Elementwise sum of two aligned waveforms. No renormalization."""
    if len(a) != len(b):
        raise ShapeMismatchError(f"length mismatch: {len(a)} vs {len(b)}")
    if a.sample_rate != b.sample_rate:
        raise ShapeMismatchError(
            f"sample rate mismatch: {a.sample_rate} vs {b.sample_rate}")
    return Waveform(a.samples + b.samples, a.sample_rate)


def convolve(x: Waveform, h, mode: str = "fft") -> Waveform:
    """Causal linear convolution of x with FIR taps, truncated to len(x).

    ``h`` may be a FirFilter or a bare coefficient array. Zero initial state;
    the tail beyond len(x) is dropped so input and output stay aligned.
    direct and fft modes agree to ~1e-6 relative L2.
    """
    taps = np.asarray(getattr(h, "taps", h), dtype=np.float64)
    if taps.ndim != 1 or taps.size == 0:
        raise ValueError("filter must be a non-empty 1-D tap vector")
    t = len(x)
    if mode == "direct":
        out = np.convolve(x.samples, taps)[:t]
    elif mode == "fft":
        out = fftconvolve(x.samples, taps)[:t]
    else:
        raise ValueError(f"unknown convolution mode {mode!r}")
    return Waveform(out, x.sample_rate)


def _whole_samples(ms: float, sample_rate: int, name: str) -> int:
    n = ms * sample_rate / 1000.0
    rounded = round(n)
    if rounded < 1 or abs(n - rounded) > 1e-6:
        raise ValueError(
            f"{name} of {ms} ms is not a whole number of samples at {sample_rate} Hz")
    return int(rounded)


def _sqrt_hann(n: int) -> np.ndarray:
    # periodic Hann, so overlap-add sums stay flat in the interior
    return np.sqrt(0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n))


def stft(w: Waveform, window_ms: float = 32.0, hop_ms: float = 8.0) -> Spectrogram:
    """Square-root-Hann STFT. 32 ms / 8 ms at 16 kHz gives a 512/128 geometry.

    Frames lie fully inside the signal (no padding); the signal must cover at
    least one window.
    """
    win = _whole_samples(window_ms, w.sample_rate, "window")
    hop = _whole_samples(hop_ms, w.sample_rate, "hop")
    if hop > win:
        raise ValueError(f"hop ({hop}) exceeds window ({win})")
    t = len(w)
    if t < win:
        raise ValueError(f"signal of {t} samples shorter than one {win}-sample window")
    window = _sqrt_hann(win)
    n_frames = 1 + (t - win) // hop
    frames = np.empty((n_frames, win // 2 + 1), dtype=np.complex128)
    for k in range(n_frames):
        start = k * hop
        frames[k] = np.fft.rfft(window * w.samples[start:start + win])
    return Spectrogram(frames, win, hop, "sqrt_hann", w.sample_rate, t)


def istft(s: Spectrogram) -> Waveform:
    """Weighted overlap-add inverse of ``stft``.

    Uses the same square-root-Hann window for synthesis and divides out the
    accumulated window-square envelope; reconstruction is near-exact wherever
    frames fully cover the signal.
    """
    if s.window != "sqrt_hann":
        raise ValueError(f"unknown window {s.window!r}")
    win, hop = s.window_size, s.hop
    if hop > win:
        raise ValueError(f"hop ({hop}) exceeds window ({win})")
    length = s.n_samples or (win + (s.n_frames - 1) * hop)
    window = _sqrt_hann(win)
    num = np.zeros(length)
    den = np.zeros(length)
    for k in range(s.n_frames):
        start = k * hop
        if start + win > length:
            break
        frame = np.fft.irfft(s.frames[k], n=win)
        num[start:start + win] += window * frame
        den[start:start + win] += window * window
    out = np.where(den > 1e-8, num / np.maximum(den, 1e-300), 0.0)
    return Waveform(out, s.sample_rate)


def cola_interior(t: int, window_size: int) -> slice:
    """Index range over which stft->istft reconstruction is compared."""
    return slice(window_size, max(window_size, t - window_size))
