"""Scale-invariant SNR evaluation and listening-test rating statistics.

SI-SNR projects the estimate onto the reference before measuring SNR, so it
ignores gain differences; SI-SNRi subtracts the unprocessed mixture's score,
making the raw mixture land at exactly 0 dB improvement.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import t as student_t

from .dsp import SourceSet, Waveform
from .errors import DegenerateInputError, ShapeMismatchError

DEFAULT_CAP_DB = 100.0


@dataclass(frozen=True)
class SeparatorOutput:
    estimates: SourceSet
    provenance: str      # external_files | identity_baseline | oracle_baseline


@dataclass(frozen=True)
class EvalRecord:
    example_id: str
    reference_name: str        # e.g. "s1", "s2"
    reference_kind: str        # "FH" or "H"
    estimate_index: int
    si_snr_out: float
    si_snr_in: float
    si_snr_improvement: float  # always si_snr_out - si_snr_in
    degenerate: bool = False


@dataclass(frozen=True)
class RatingAggregate:
    system_id: str
    mean: float            # 0-100 scale
    ci95_halfwidth: float
    n: int


def _si_snr_core(ref: np.ndarray, est: np.ndarray, cap_db: float):
    ref_energy = float(np.dot(ref, ref))
    if ref_energy == 0.0:
        raise DegenerateInputError("SI-SNR reference is all-zero")
    alpha = float(np.dot(est, ref)) / ref_energy
    if alpha == 0.0:
        return -cap_db, True
    target = alpha * ref
    noise = target - est
    num = float(np.dot(target, target))
    den = float(np.dot(noise, noise))
    if den == 0.0:
        return cap_db, False
    value = 10.0 * math.log10(num / den)
    return min(max(value, -cap_db), cap_db), False


def si_snr(ref: Waveform, est: Waveform, cap_db: float = DEFAULT_CAP_DB) -> float:
    """Scale-invariant SNR in dB, clamped to [-cap_db, +cap_db].

    An estimate exactly proportional to the reference returns +cap_db; an
    all-zero estimate returns -cap_db.
    """
    if len(ref) != len(est):
        raise ShapeMismatchError(f"length mismatch: {len(ref)} vs {len(est)}")
    value, _ = _si_snr_core(ref.samples, est.samples, cap_db)
    return value


def si_snr_improvement(ref: Waveform, mixture: Waveform, est: Waveform,
                       cap_db: float = DEFAULT_CAP_DB,
                       example_id: str = "", reference_name: str = "",
                       reference_kind: str = "FH",
                       estimate_index: int = 0) -> EvalRecord:
    """SI-SNRi record: si_snr(ref, est) - si_snr(ref, mixture)."""
    if len(ref) != len(mixture) or len(ref) != len(est):
        raise ShapeMismatchError("reference, mixture and estimate lengths differ")
    out, degenerate = _si_snr_core(ref.samples, est.samples, cap_db)
    snr_in, _ = _si_snr_core(ref.samples, mixture.samples, cap_db)
    return EvalRecord(example_id, reference_name, reference_kind, estimate_index,
                      out, snr_in, out - snr_in, degenerate)


def _si_snr_matrix(refs: SourceSet, ests: SourceSet, cap_db: float) -> np.ndarray:
    s = np.empty((refs.m, ests.m))
    for i in range(refs.m):
        for j in range(ests.m):
            s[i, j], _ = _si_snr_core(refs[i].samples, ests[j].samples, cap_db)
    return s


def resolve_sources(refs: SourceSet, ests: SourceSet,
                    cap_db: float = DEFAULT_CAP_DB,
                    exhaustive_limit: int = 6) -> tuple:
    """Match each reference to a distinct estimate, maximizing total SI-SNR.

    Exact: enumerated for small problems, linear-assignment-solved otherwise.
    Returns a tuple mapping reference index -> estimate index.
    """
    if ests.m < refs.m:
        raise ShapeMismatchError(
            f"need at least {refs.m} estimates, got {ests.m}")
    scores = _si_snr_matrix(refs, ests, cap_db)
    if ests.m <= exhaustive_limit:
        best, best_total = None, -math.inf
        for mapping in itertools.permutations(range(ests.m), refs.m):
            total = sum(scores[i, mapping[i]] for i in range(refs.m))
            if total > best_total:
                best, best_total = mapping, total
        return tuple(best)
    _, cols = linear_sum_assignment(-scores)
    return tuple(int(c) for c in cols)


def baseline_separator(mixture: Waveform, kind: str,
                       refs: SourceSet | None = None,
                       m: int | None = None) -> SeparatorOutput:
    """Trivial separators so the evaluation pipeline runs without a model.

    ``identity`` returns the mixture plus zero fills; ``oracle`` returns the
    references padded with zeros to M outputs.
    """
    zeros = Waveform(np.zeros(len(mixture)), mixture.sample_rate)
    if kind == "identity":
        m = m or (refs.m if refs else 2)
        sources = (mixture,) + (zeros,) * (m - 1)
    elif kind == "oracle":
        if refs is None:
            raise ValueError("oracle baseline requires reference sources")
        m = m or refs.m
        if m < refs.m:
            raise ValueError(f"M={m} smaller than {refs.m} references")
        sources = tuple(refs.sources) + (zeros,) * (m - refs.m)
    else:
        raise ValueError(f"unknown baseline kind {kind!r}")
    return SeparatorOutput(SourceSet(sources), f"{kind}_baseline")


def evaluate_example(refs: SourceSet, mixture: Waveform, ests: SourceSet,
                     example_id: str, reference_names=("s1", "s2"),
                     reference_kind: str = "FH",
                     cap_db: float = DEFAULT_CAP_DB) -> list:
    """EvalRecords for one example: joint best-matching of refs to estimates."""
    mapping = resolve_sources(refs, ests, cap_db)
    records = []
    for i in range(refs.m):
        records.append(si_snr_improvement(
            refs[i], mixture, ests[mapping[i]], cap_db,
            example_id=example_id, reference_name=reference_names[i],
            reference_kind=reference_kind, estimate_index=int(mapping[i])))
    return records


def _rating_value(record) -> tuple:
    if isinstance(record, dict):
        return record["system_id"], float(record["rating"])
    return record.system_id, float(record.rating)


def aggregate_ratings(records, system_id: str) -> RatingAggregate:
    """Mean and Student-t 95% half-width of one system's ratings."""
    ratings = [r for s, r in map(_rating_value, records) if s == system_id]
    n = len(ratings)
    if n == 0:
        raise ValueError(f"no ratings for system {system_id!r}")
    mean = math.fsum(ratings) / n
    if n == 1:
        half = 0.0
    else:
        var = math.fsum((r - mean) ** 2 for r in ratings) / (n - 1)
        half = float(student_t.ppf(0.975, n - 1)) * math.sqrt(var / n)
    return RatingAggregate(system_id, mean, half, n)


def aggregate_all(records) -> list:
    """Per-system aggregates, sorted by system id."""
    systems = sorted({s for s, _ in map(_rating_value, records)})
    return [aggregate_ratings(records, s) for s in systems]


def read_external_scores(path) -> list:
    """(example_id, system_id, metric, value) rows, tab-separated."""
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 tab-separated fields")
            rows.append((parts[0], parts[1], parts[2], float(parts[3])))
    return rows
