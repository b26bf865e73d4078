"""Deterministic miniature meeting corpus in the real corpus's formats.

Generates, per meeting, a word-level annotation track, one clean headset WAV
per speaker, and a distant-mic WAV that is the sum of per-speaker room
filterings of the headsets plus steady background noise. Meeting ids follow
the usual site prefixes (ES/IS/TS), so locations resolve the same way they
do for the real data. Everything is a pure function of the seed.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .corpus import (Corpus, WordAnnotation, _active_set_runs,
                     _speaker_activity, write_annotations)
from .dsp import Waveform, write_wav

DEFAULT_MEETINGS = ("ES2002a", "IS1000a", "TS3003a")
_SPEAKERS = (("spkA", "male"), ("spkB", "female"),
             ("spkC", "male"), ("spkD", "female"))


def _word_signal(rng, n: int, sample_rate: int, f0: float) -> np.ndarray:
    """A crude voiced burst: a few harmonics plus noise under an envelope."""
    t = np.arange(n) / sample_rate
    tone = np.zeros(n)
    for k in range(1, 6):
        amp = rng.uniform(0.4, 1.0) / k
        tone += amp * np.sin(2 * np.pi * f0 * k * t + rng.uniform(0, 2 * np.pi))
    tone /= np.max(np.abs(tone)) + 1e-12
    noise = rng.standard_normal(n)
    noise /= np.max(np.abs(noise)) + 1e-12
    ramp = min(n // 8 + 1, 160)
    env = np.ones(n)
    env[:ramp] = np.linspace(0.0, 1.0, ramp)
    env[-ramp:] = np.linspace(1.0, 0.0, ramp)
    return env * (0.7 * tone + 0.3 * noise)


def _room_filter(rng, n_taps: int = 48) -> np.ndarray:
    delay = rng.integers(4, 14)
    taps = rng.standard_normal(n_taps) * np.exp(-np.arange(n_taps) / 10.0)
    taps[:delay] = 0.0
    taps[delay] = 1.0
    return 0.5 * taps / np.max(np.abs(taps))


def _script_meeting(rng, duration: float):
    """Utterance plan: (speaker, gender, [word (start, end)]) tuples."""
    utterances = []
    t = 1.0                      # end of the most recent utterance
    idx = 0
    prev_speaker = None
    while t < duration - 14.0:
        speaker, gender = _SPEAKERS[idx % len(_SPEAKERS)] if idx < len(_SPEAKERS) \
            else _SPEAKERS[rng.integers(len(_SPEAKERS))]
        if prev_speaker is not None and speaker != prev_speaker and rng.random() < 0.3:
            # overlapped turn-taking: start before the previous utterance ends
            overlap = min(float(rng.lognormal(0.0, 0.7)) + 0.3, 3.5)
            start = max(t - overlap, 1.0)
        else:
            start = t + rng.uniform(0.4, 1.5)
        words = []
        wt = start
        for _ in range(int(rng.integers(6, 22))):
            dur = rng.uniform(0.15, 0.5)
            words.append((wt, wt + dur))
            wt += dur + rng.uniform(0.05, 0.25)
        utterances.append((speaker, gender, words))
        prev_speaker = speaker
        t = max(t, words[-1][1])
        idx += 1
    return utterances


def make_fixture_corpus(root, seed: int = 2002,
                        meetings=DEFAULT_MEETINGS,
                        duration_s: float = 200.0,
                        sample_rate: int = 16000) -> Corpus:
    """Write the fixture corpus under ``root`` and return a Corpus over it."""
    root = Path(root)
    (root / "audio").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    annotations = []
    crosstalk_rows = []
    n_total = round(duration_s * sample_rate)

    for meeting in meetings:
        meeting_dir = root / "audio" / meeting
        meeting_dir.mkdir(parents=True, exist_ok=True)
        f0_base = {s: rng.uniform(100, 140) if g == "male" else rng.uniform(180, 240)
                   for s, g in _SPEAKERS}
        headsets = {s: np.zeros(n_total) for s, _ in _SPEAKERS}

        for speaker, gender, words in _script_meeting(rng, duration_s):
            amp = rng.uniform(0.18, 0.3)
            for w_idx, (ws, we) in enumerate(words):
                a = round(ws * sample_rate)
                b = round(we * sample_rate)
                if b > n_total:
                    break
                f0 = f0_base[speaker] * rng.uniform(0.92, 1.08)
                headsets[speaker][a:b] += amp * _word_signal(
                    rng, b - a, sample_rate, f0)
                annotations.append(WordAnnotation(
                    meeting, speaker, gender, f"w{w_idx:03d}",
                    round(ws, 4), round(we, 4)))

        distant = np.zeros(n_total)
        for speaker, _ in _SPEAKERS:
            room = _room_filter(rng)
            distant += np.convolve(headsets[speaker], room)[:n_total]
        background = np.convolve(rng.standard_normal(n_total),
                                 np.ones(8) / 8.0)[:n_total]
        distant += 0.01 * background

        for speaker, _ in _SPEAKERS:
            write_wav(Waveform(np.clip(headsets[speaker], -0.999, 0.999), sample_rate),
                      meeting_dir / f"headset_{speaker}.wav", encoding="pcm16")
        write_wav(Waveform(np.clip(distant, -0.999, 0.999), sample_rate),
                  meeting_dir / "distant.wav", encoding="pcm16")

    annotations.sort(key=lambda w: (w.meeting_id, w.start, w.speaker_id))
    write_annotations(annotations, root / "annotations.tsv")

    # label the measured two-speaker overlaps; leave a few unlabeled on purpose
    by_meeting = {}
    for w in annotations:
        by_meeting.setdefault(w.meeting_id, []).append(w)
    for meeting in sorted(by_meeting):
        activity, _ = _speaker_activity(by_meeting[meeting], gap_merge=0.3)
        for start, end, active in _active_set_runs(activity):
            if len(active) < 2:
                continue
            if rng.random() < 0.08:
                continue    # unlabeled
            label = ("none", "minor", "major")[
                int(rng.choice(3, p=[0.5, 0.3, 0.2]))]
            crosstalk_rows.append((meeting, round(start, 4), round(end, 4), label))
    with open(root / "crosstalk.tsv", "w") as fh:
        for meeting, start, end, label in crosstalk_rows:
            fh.write(f"{meeting}\t{start!r}\t{end!r}\t{label}\n")

    return Corpus(root)
