"""Overlapping-speech corpus machinery.

Covers the full synthetic-evaluation pipeline (word-boundary segmentation,
5 s clip inventory, log-normal overlap model, example assembly with three
reference sources), the real-overlap segment selection, and the
mixture-of-mixtures training sampler.

Annotation files are tab-separated lines:
    meeting_id  speaker_id  gender  word  start_s  end_s
Cross-talk label files are tab-separated lines:
    meeting_id  start_s  end_s  label          (label in none|minor|major)
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .dsp import Waveform, read_wav
from .errors import SepkitError, ShapeMismatchError
from .projection import estimate_fir

CLIP_SECONDS = 5.0
MOM_CROP_SECONDS = 10.0
RAW_CLIP_SECONDS = 20.0

LOCATION_PREFIXES = {"ES": "Edinburgh", "IS": "Idiap", "TS": "TNO"}


class AssemblyError(SepkitError):
    """No candidate clip matches the sampled overlap."""


def meeting_location(meeting_id: str) -> str:
    prefix = meeting_id[:2].upper()
    if prefix not in LOCATION_PREFIXES:
        raise ValueError(f"cannot infer location from meeting id {meeting_id!r}")
    return LOCATION_PREFIXES[prefix]


# ---------------------------------------------------------------------------
# Annotations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WordAnnotation:
    meeting_id: str
    speaker_id: str
    gender: str          # male | female | unknown
    word: str
    start: float         # seconds
    end: float

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValueError(
                f"bad word interval [{self.start}, {self.end}] for {self.word!r}")


def read_annotations(path) -> list[WordAnnotation]:
    words = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 6:
                raise ValueError(f"{path}:{lineno}: expected 6 tab-separated fields")
            meeting, speaker, gender, word, start, end = parts
            words.append(WordAnnotation(meeting, speaker, gender, word,
                                        float(start), float(end)))
    return words


def write_annotations(words, path) -> None:
    with open(path, "w") as fh:
        for w in words:
            fh.write(f"{w.meeting_id}\t{w.speaker_id}\t{w.gender}\t{w.word}"
                     f"\t{w.start!r}\t{w.end!r}\n")


def read_crosstalk_labels(path) -> list[tuple]:
    """(meeting_id, start, end, label) rows."""
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 tab-separated fields")
            meeting, start, end, label = parts
            if label not in ("none", "minor", "major"):
                raise ValueError(f"{path}:{lineno}: unknown cross-talk label {label!r}")
            rows.append((meeting, float(start), float(end), label))
    return rows


# ---------------------------------------------------------------------------
# Segmentation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpeechSegment:
    meeting_id: str
    speaker_id: str
    gender: str
    start: float
    end: float
    headset_ref: str | None = None
    distant_ref: str | None = None

    @property
    def duration(self) -> float:
        return self.end - self.start

    @property
    def location(self) -> str:
        return meeting_location(self.meeting_id)


def merge_intervals(intervals, gap: float = 0.0) -> list[tuple]:
    """Union of intervals, bridging gaps <= ``gap``."""
    merged = []
    for start, end in sorted(intervals):
        if merged and start - merged[-1][1] <= gap:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return [tuple(m) for m in merged]


def _speaker_activity(words, gap_merge: float) -> dict:
    """speaker_id -> merged activity intervals, plus speaker genders."""
    by_speaker = {}
    genders = {}
    for w in words:
        by_speaker.setdefault(w.speaker_id, []).append((w.start, w.end))
        genders.setdefault(w.speaker_id, w.gender)
    return {s: merge_intervals(iv, gap_merge) for s, iv in by_speaker.items()}, genders


def _active_set_runs(activity: dict) -> list[tuple]:
    """Maximal (start, end, frozenset(speakers)) runs of constant active set."""
    events = sorted({t for iv in activity.values() for se in iv for t in se})
    runs = []
    for a, b in zip(events, events[1:]):
        mid = 0.5 * (a + b)
        active = frozenset(s for s, iv in activity.items()
                           if any(p <= mid < q for p, q in iv))
        if runs and runs[-1][2] == active and runs[-1][1] == a:
            runs[-1] = (runs[-1][0], b, active)
        else:
            runs.append((a, b, active))
    return runs


def segment_isolated_speech(annotations, gap_merge: float = 0.3) -> list[SpeechSegment]:
    """Maximal single-speaker intervals per meeting.

    A speaker counts as active over their word intervals with intra-speaker
    gaps <= gap_merge bridged; a segment is a maximal interval where exactly
    one speaker is active, so no segment overlaps another speaker's words.
    """
    if not annotations:
        raise ValueError("empty annotation stream")
    by_meeting = {}
    for w in annotations:
        by_meeting.setdefault(w.meeting_id, []).append(w)
    segments = []
    for meeting in sorted(by_meeting):
        activity, genders = _speaker_activity(by_meeting[meeting], gap_merge)
        for start, end, active in _active_set_runs(activity):
            if len(active) != 1:
                continue
            speaker = next(iter(active))
            segments.append(SpeechSegment(meeting, speaker, genders[speaker],
                                          start, end))
    return segments


def measure_overlap_durations(annotations, gap_merge: float = 0.3) -> list[float]:
    """Durations of maximal intervals where two or more speakers are active.

    Activity uses the same intra-speaker gap bridging as segmentation, so a
    brief inter-word pause does not split one conversational overlap in two.
    """
    if not annotations:
        raise ValueError("empty annotation stream")
    by_meeting = {}
    for w in annotations:
        by_meeting.setdefault(w.meeting_id, []).append(w)
    durations = []
    for meeting in sorted(by_meeting):
        activity, _ = _speaker_activity(by_meeting[meeting], gap_merge)
        run_start = None
        last_end = None
        for start, end, active in _active_set_runs(activity):
            if len(active) >= 2:
                if run_start is None or start != last_end:
                    if run_start is not None:
                        durations.append(last_end - run_start)
                    run_start = start
                last_end = end
            else:
                if run_start is not None:
                    durations.append(last_end - run_start)
                    run_start = None
        if run_start is not None:
            durations.append(last_end - run_start)
    return durations


# ---------------------------------------------------------------------------
# Clip inventory
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Clip:
    parent: SpeechSegment
    offset: float           # seconds from segment start
    duration: float
    kind: str               # complete | chunk | remainder

    @property
    def speaker_id(self) -> str:
        return self.parent.speaker_id

    @property
    def gender(self) -> str:
        return self.parent.gender

    @property
    def location(self) -> str:
        return self.parent.location


def chop_clips(segments, clip_len: float = CLIP_SECONDS) -> list[Clip]:
    """Tile segments into clips: whole short segments become ``complete``
    clips, longer segments yield exact ``clip_len`` chunks from the start
    plus a sub-length ``remainder``. Total duration is conserved exactly.
    """
    clips = []
    for seg in segments:
        duration = seg.duration
        if duration < clip_len:
            if duration > 0:
                clips.append(Clip(seg, 0.0, duration, "complete"))
            continue
        n_chunks = int(duration // clip_len)
        for k in range(n_chunks):
            clips.append(Clip(seg, clip_len * k, clip_len, "chunk"))
        rem = duration - clip_len * n_chunks
        if rem > 0:
            clips.append(Clip(seg, clip_len * n_chunks, rem, "remainder"))
    return clips


# ---------------------------------------------------------------------------
# Overlap model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OverlapModel:
    mu: float        # mean of ln(overlap seconds)
    sigma: float     # population std of ln(overlap seconds)
    n_fitted: int


def fit_overlap_model(overlap_durations) -> OverlapModel:
    """Maximum-likelihood log-normal fit of overlap durations in seconds."""
    durations = np.asarray(list(overlap_durations), dtype=np.float64)
    if durations.size < 2:
        raise ValueError(f"need at least 2 overlap durations, got {durations.size}")
    if np.any(durations <= 0):
        raise ValueError("overlap durations must be positive")
    logs = np.log(durations)
    return OverlapModel(float(np.mean(logs)), float(np.std(logs)), durations.size)


def sample_overlap_duration(model: OverlapModel, rng) -> float:
    """One raw overlap draw in seconds (pre-clamp)."""
    return float(rng.lognormal(model.mu, model.sigma))


def sample_overlap(model: OverlapModel, rng, clip_len: float = CLIP_SECONDS) -> float:
    """Overlap fraction gamma = min(d / clip_len, 1) for d ~ lognormal."""
    return min(sample_overlap_duration(model, rng) / clip_len, 1.0)


# ---------------------------------------------------------------------------
# Example assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticExample:
    example_id: str
    mixture: Waveform
    s1: Waveform
    s2: Waveform
    noise: Waveform
    meta: dict


class GenderBalance:
    """Running S2 gender counts per location, used to steer selection."""

    def __init__(self):
        self.counts = {}

    def target(self, location: str) -> str | None:
        c = self.counts.get(location, {})
        male, female = c.get("male", 0), c.get("female", 0)
        if male == female:
            return None
        return "male" if male < female else "female"

    def record(self, location: str, gender: str) -> None:
        loc = self.counts.setdefault(location, {})
        loc[gender] = loc.get(gender, 0) + 1


def _clip_samples(clip: Clip, sample_rate: int) -> tuple:
    seg_start = round(clip.parent.start * sample_rate)
    start = seg_start + round(clip.offset * sample_rate)
    return start, start + round(clip.duration * sample_rate)


def _candidate_pool(inventory, clip1, gamma: float, tolerance: float,
                    n_target: int, sample_rate: int, clip_len: float):
    """(clip, placement) candidates for S2 at one tolerance level.

    ``centered``: complete clips whose duration is within tolerance of the
    target overlap. ``excerpt``: clips long enough to cut the target overlap
    out of, flush against one of their boundaries. A clip eligible both ways
    is used whole (centered).
    """
    target = gamma * clip_len
    pool = []
    for clip in inventory:
        if clip.speaker_id == clip1.speaker_id:
            continue
        if clip.location != clip1.location:
            continue
        n_clip = round(clip.duration * sample_rate)
        if gamma >= 1.0:
            if n_clip >= n_target:
                pool.append((clip, "excerpt"))
            continue
        if clip.kind == "complete" and abs(clip.duration - target) <= tolerance \
                and n_clip <= n_target + round(tolerance * sample_rate):
            pool.append((clip, "centered"))
        elif n_clip > n_target:
            pool.append((clip, "excerpt"))
    return pool


def assemble_example(clip1: Clip, clip_inventory, model: OverlapModel,
                     projections: dict, rng, balance: GenderBalance,
                     clip_len: float = CLIP_SECONDS,
                     match_tolerance: float = 0.25,
                     max_tolerance: float = 1.0,
                     example_id: str = "ex") -> SyntheticExample:
    """Build one synthetic example around a 5 s chunk.

    S1 is clip1's filtered headset, the noise reference is clip1's projection
    residual, and S2 is the filtered headset of a different same-location
    speaker placed to realize a sampled overlap fraction: a complete clip of
    matching duration goes in the middle, otherwise an excerpt cut flush from
    a longer clip's boundary sits at the window start or end.
    """
    if clip1.kind != "chunk":
        raise ValueError(f"S1 clip must be a {clip_len} s chunk, got {clip1.kind}")
    proj1 = projections[clip1.parent]
    sample_rate = proj1.filtered.sample_rate
    n_window = round(clip_len * sample_rate)
    c1_start, _ = _clip_samples(clip1, sample_rate)
    seg_start = round(clip1.parent.start * sample_rate)
    rel = c1_start - seg_start
    s1 = proj1.filtered.slice(rel, rel + n_window)
    noise = proj1.residual.slice(rel, rel + n_window)

    overlap_s = sample_overlap_duration(model, rng)
    gamma = min(overlap_s / clip_len, 1.0)
    n_target = round(gamma * clip_len * sample_rate)

    tolerance = match_tolerance
    pool = []
    while True:
        pool = _candidate_pool(clip_inventory, clip1, gamma, tolerance,
                               n_target, sample_rate, clip_len)
        if pool or tolerance >= max_tolerance:
            break
        tolerance = min(tolerance * 2, max_tolerance)
    if not pool:
        raise AssemblyError(
            f"no candidate clip for gamma={gamma:.3f} within +-{max_tolerance} s")

    target_gender = balance.target(clip1.location)
    if target_gender is not None:
        steered = [p for p in pool if p[0].gender == target_gender]
        if steered:
            pool = steered

    clip2, placement = pool[rng.integers(len(pool))]
    proj2 = projections[clip2.parent]
    c2_start, c2_end = _clip_samples(clip2, sample_rate)
    seg2_start = round(clip2.parent.start * sample_rate)
    clip2_audio = proj2.filtered.slice(c2_start - seg2_start, c2_end - seg2_start)
    n_clip2 = len(clip2_audio)

    if placement == "centered":
        n_active = n_clip2
        window_start = (n_window - n_active) // 2
        side = None
        excerpt_start = 0
    else:
        n_active = min(n_target, n_clip2)
        side = ("start", "end")[rng.integers(2)]
        if side == "start":
            # window-leading speech ends mid-window; cut flush from the
            # clip's tail so the excerpt finishes where the clip does
            window_start = 0
            excerpt_start = n_clip2 - n_active
        else:
            window_start = n_window - n_active
            excerpt_start = 0
    active = clip2_audio.samples[excerpt_start:excerpt_start + n_active]

    s2_samples = np.zeros(n_window)
    s2_samples[window_start:window_start + n_active] = active
    s2 = Waveform(s2_samples, sample_rate)

    distant = proj1.filtered.samples[rel:rel + n_window] \
        + proj1.residual.samples[rel:rel + n_window]
    mixture = Waveform(distant + s2_samples, sample_rate)
    gamma_realized = n_active / n_window

    balance.record(clip1.location, clip2.gender)
    meta = {
        "example_id": example_id,
        "location": clip1.location,
        "s1_meeting": clip1.parent.meeting_id,
        "s1_speaker": clip1.speaker_id,
        "s1_gender": clip1.gender,
        "s2_meeting": clip2.parent.meeting_id,
        "s2_speaker": clip2.speaker_id,
        "s2_gender": clip2.gender,
        "s1_start_s": clip1.parent.start + clip1.offset,
        "overlap_s": overlap_s,
        "gamma_sampled": gamma,
        "gamma": gamma_realized,
        "placement": placement,
        "placement_side": side,
        "s2_window_start": int(window_start),
        "s2_active_samples": int(n_active),
        "s2_source_start_sample": int(c2_start + excerpt_start),
        "s1_clip": _clip_key(clip1),
        "s2_clip": _clip_key(clip2),
    }
    return SyntheticExample(example_id, mixture, s1, s2, noise, meta)


def _clip_key(clip: Clip) -> str:
    return (f"{clip.parent.meeting_id}/{clip.speaker_id}"
            f"/{clip.parent.start:.3f}+{clip.offset:.3f}x{clip.duration:.3f}")


# ---------------------------------------------------------------------------
# Corpus on disk + synthetic set builder
# ---------------------------------------------------------------------------

class Corpus:
    """Directory layout:

    root/annotations.tsv, root/crosstalk.tsv,
    root/audio/<meeting>/headset_<speaker>.wav,
    root/audio/<meeting>/distant.wav
    """

    def __init__(self, root):
        self.root = Path(root)
        self._cache = {}

    def annotations(self) -> list[WordAnnotation]:
        return read_annotations(self.root / "annotations.tsv")

    def crosstalk_labels(self):
        path = self.root / "crosstalk.tsv"
        return read_crosstalk_labels(path) if path.exists() else []

    def headset_path(self, meeting: str, speaker: str) -> Path:
        return self.root / "audio" / meeting / f"headset_{speaker}.wav"

    def distant_path(self, meeting: str) -> Path:
        return self.root / "audio" / meeting / "distant.wav"

    def meetings(self) -> list[str]:
        return sorted(p.name for p in (self.root / "audio").iterdir() if p.is_dir())

    def load(self, path) -> Waveform:
        key = str(path)
        if key not in self._cache:
            self._cache[key] = read_wav(path)
        return self._cache[key]


def project_segments(corpus: Corpus, segments, n_taps: int,
                     regularization: float | None = None) -> dict:
    """Per-segment headset-to-distant FIR estimation.

    Returns {segment: ProjectionResult} with audio references attached; the
    filtered/residual waveforms are aligned to the segment's sample span.
    """
    projections = {}
    for seg in segments:
        headset = corpus.load(corpus.headset_path(seg.meeting_id, seg.speaker_id))
        distant = corpus.load(corpus.distant_path(seg.meeting_id))
        start = round(seg.start * headset.sample_rate)
        end = round(seg.end * headset.sample_rate)
        x = headset.slice(start, end)
        y = distant.slice(start, end)
        if len(x) != len(y):
            raise ShapeMismatchError(
                f"headset/distant length mismatch in {seg.meeting_id}")
        projections[seg] = estimate_fir(x, y, n_taps, regularization)
    return projections


@dataclass
class SyntheticSet:
    examples: list
    model: OverlapModel
    seed: int
    n_taps: int

    def __iter__(self):
        return iter(self.examples)


def build_synthetic_set(corpus: Corpus, count: int, seed: int, n_taps: int,
                        regularization: float | None = None,
                        gap_merge: float = 0.3,
                        clip_len: float = CLIP_SECONDS) -> SyntheticSet:
    """Run the whole pipeline: segment, project, chop, fit overlaps, assemble."""
    annotations = corpus.annotations()
    segments = segment_isolated_speech(annotations, gap_merge)
    if not segments:
        raise SepkitError("no isolated-speech segments found")
    sample_rate = corpus.load(corpus.headset_path(
        segments[0].meeting_id, segments[0].speaker_id)).sample_rate
    # segments too short to support the filter length are unusable
    segments = [seg for seg in segments
                if round(seg.duration * sample_rate) >= 4 * n_taps]
    segments = [replace(seg,
                        headset_ref=str(corpus.headset_path(seg.meeting_id, seg.speaker_id)),
                        distant_ref=str(corpus.distant_path(seg.meeting_id)))
                for seg in segments]
    projections = project_segments(corpus, segments, n_taps, regularization)
    clips = chop_clips(segments, clip_len)
    chunks = [c for c in clips if c.kind == "chunk"]
    if not chunks:
        raise SepkitError("corpus yields no 5 s chunks; cannot assemble examples")
    model = fit_overlap_model(measure_overlap_durations(annotations))
    rng = np.random.default_rng(seed)
    balance = GenderBalance()
    examples = []
    for i in range(count):
        clip1 = chunks[rng.integers(len(chunks))]
        examples.append(assemble_example(
            clip1, clips, model, projections, rng, balance,
            clip_len=clip_len, example_id=f"ex{i:06d}"))
    return SyntheticSet(examples, model, seed, n_taps)


# ---------------------------------------------------------------------------
# Real-overlap selection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OverlapItem:
    meeting_id: str
    start: float
    end: float
    speakers: tuple
    genders: tuple
    crosstalk: str

    @property
    def duration(self) -> float:
        return self.end - self.start

    @property
    def location(self) -> str:
        return meeting_location(self.meeting_id)


def _lookup_crosstalk(labels, meeting: str, start: float, end: float) -> str | None:
    best, best_overlap = None, 0.0
    for m, s, e, label in labels:
        if m != meeting:
            continue
        overlap = min(end, e) - max(start, s)
        if overlap > best_overlap:
            best, best_overlap = label, overlap
    return best


def select_overlap_segments(annotations, min_duration: float = 2.5,
                            crosstalk_labels=(), gap_merge: float = 0.3,
                            per_location_limit: int | None = None):
    """Two-speaker overlap segments with low cross-talk.

    Keeps maximal exactly-two-speaker intervals of at least ``min_duration``
    whose cross-talk label is none or minor; items without a label are
    skipped and counted. When ``per_location_limit`` is set, a greedy
    gender-balanced subset is taken per location. Returns (items, n_skipped).
    """
    if not annotations:
        raise ValueError("empty annotation stream")
    by_meeting = {}
    for w in annotations:
        by_meeting.setdefault(w.meeting_id, []).append(w)
    items = []
    skipped = 0
    for meeting in sorted(by_meeting):
        activity, genders = _speaker_activity(by_meeting[meeting], gap_merge)
        for start, end, active in _active_set_runs(activity):
            if len(active) != 2 or end - start < min_duration:
                continue
            label = _lookup_crosstalk(crosstalk_labels, meeting, start, end)
            if label is None:
                skipped += 1
                continue
            if label == "major":
                continue
            speakers = tuple(sorted(active))
            items.append(OverlapItem(meeting, start, end, speakers,
                                     tuple(genders[s] for s in speakers), label))
    if per_location_limit is not None:
        items = _balanced_subset(items, per_location_limit)
    return items, skipped


def _balanced_subset(items, limit: int) -> list:
    """Per location, greedily pick up to ``limit`` items keeping the running
    male/female speaker counts as even as possible (earliest item wins ties).
    """
    by_location = {}
    for item in items:
        by_location.setdefault(item.location, []).append(item)
    chosen = []
    for location in sorted(by_location):
        pool = list(by_location[location])
        male = female = 0
        picked = []
        while pool and len(picked) < limit:
            def imbalance(item):
                m = male + sum(g == "male" for g in item.genders)
                f = female + sum(g == "female" for g in item.genders)
                return abs(m - f)
            best = min(pool, key=lambda it: (imbalance(it), it.start))
            pool.remove(best)
            picked.append(best)
            male += sum(g == "male" for g in best.genders)
            female += sum(g == "female" for g in best.genders)
        chosen.extend(sorted(picked, key=lambda it: (it.meeting_id, it.start)))
    return chosen


# ---------------------------------------------------------------------------
# Mixtures of mixtures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RawClip:
    clip_id: str
    location: str
    audio: Waveform


@dataclass(frozen=True)
class MoMExample:
    mixture1: Waveform
    mixture2: Waveform
    mom: Waveform
    location: str
    meta: dict


def sample_moms(raw_clips, count: int, rng,
                crop_len: float = MOM_CROP_SECONDS):
    """Stream of mixture-of-mixture examples from raw clips.

    Pairs two distinct same-location raw clips per example and crops each at
    an independent uniform offset. Pairing is without replacement within an
    epoch and reshuffled across epochs; clips never cross locations.
    """
    by_location = {}
    for clip in raw_clips:
        by_location.setdefault(clip.location, []).append(clip)
    for location, clips in sorted(by_location.items()):
        if len(clips) < 2:
            raise ValueError(f"location {location} has {len(clips)} raw clip(s); "
                             "need at least 2")
    produced = 0
    while produced < count:
        epoch_pairs = []
        for location in sorted(by_location):
            clips = by_location[location]
            order = rng.permutation(len(clips))
            for i in range(0, len(clips) - 1, 2):
                epoch_pairs.append((clips[order[i]], clips[order[i + 1]]))
        order = rng.permutation(len(epoch_pairs))
        for idx in order:
            if produced >= count:
                return
            a, b = epoch_pairs[idx]
            crops = []
            offsets = []
            for clip in (a, b):
                n_crop = round(crop_len * clip.audio.sample_rate)
                max_off = len(clip.audio) - n_crop
                if max_off < 0:
                    raise ValueError(f"raw clip {clip.clip_id} shorter than {crop_len} s")
                off = int(rng.integers(0, max_off + 1))
                offsets.append(off)
                crops.append(clip.audio.slice(off, off + n_crop))
            mom = Waveform(crops[0].samples + crops[1].samples,
                           crops[0].sample_rate)
            yield MoMExample(crops[0], crops[1], mom, a.location, {
                "clip1": a.clip_id, "clip2": b.clip_id,
                "offset1": offsets[0], "offset2": offsets[1],
                "location": a.location,
            })
            produced += 1


def raw_clips_from_corpus(corpus: Corpus,
                          raw_len: float = RAW_CLIP_SECONDS) -> list[RawClip]:
    """Chop each meeting's distant-mic track into raw fixed-length clips."""
    clips = []
    for meeting in corpus.meetings():
        distant = corpus.load(corpus.distant_path(meeting))
        n_raw = round(raw_len * distant.sample_rate)
        location = meeting_location(meeting)
        for k in range(len(distant) // n_raw):
            clips.append(RawClip(f"{meeting}_raw{k:03d}", location,
                                 distant.slice(k * n_raw, (k + 1) * n_raw)))
    return clips
