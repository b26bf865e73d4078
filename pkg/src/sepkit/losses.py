"""Signal-level thresholded-SNR loss and the PIT / MixIT assignment objectives.

The per-pair loss is the negative soft-thresholded SNR

    L(y, yhat) = -10 log10( ||y||^2 / (||y - yhat||^2 + tau ||y||^2) )

with tau = 10^(-snr_max/10), which clamps the best attainable value at
-snr_max dB. PIT minimizes the summed loss over all permutations matching
estimates to references; MixIT minimizes over all binary assignments of
estimates to two reference mixtures.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .dsp import SourceSet, Waveform
from .errors import CapacityError, DegenerateInputError, ShapeMismatchError

MIXIT_ENUMERATION_CAP = 20


@dataclass(frozen=True)
class LossConfig:
    """Operating point of the thresholded-SNR loss."""

    snr_max: float = 30.0
    tau: float = field(init=False)

    def __post_init__(self):
        if self.snr_max <= 0:
            raise ValueError(f"snr_max must be positive, got {self.snr_max}")
        object.__setattr__(self, "tau", 10.0 ** (-self.snr_max / 10.0))


@dataclass(frozen=True)
class Permutation:
    """mapping[m] = index of the estimate assigned to reference slot m."""

    mapping: tuple

    def __post_init__(self):
        mapping = tuple(int(i) for i in self.mapping)
        if sorted(mapping) != list(range(len(mapping))):
            raise ValueError(f"not a permutation of 0..{len(mapping) - 1}: {mapping}")
        object.__setattr__(self, "mapping", mapping)


@dataclass(frozen=True)
class MixingAssignment:
    """assignment[m] in {1, 2}: which reference mixture estimate m is summed into."""

    assignment: tuple

    def __post_init__(self):
        assignment = tuple(int(a) for a in self.assignment)
        if any(a not in (1, 2) for a in assignment):
            raise ValueError(f"entries must be 1 or 2: {assignment}")
        object.__setattr__(self, "assignment", assignment)


@dataclass(frozen=True)
class LossResult:
    total_loss: float              # dB
    per_term: tuple                # dB per reference slot / mixture
    assignment: object             # Permutation or MixingAssignment


def sq_norm(x: np.ndarray) -> float:
    """Compensated ||x||^2: pairwise partial sums combined exactly with fsum."""
    sq = np.square(np.asarray(x, dtype=np.float64))
    if sq.size <= 8192:
        return float(sq.sum()) if sq.size else 0.0
    return math.fsum(sq[i:i + 8192].sum() for i in range(0, sq.size, 8192))


def _snr_loss_arrays(y: np.ndarray, yhat: np.ndarray, tau: float) -> float:
    ref_energy = sq_norm(y)
    if ref_energy == 0.0:
        raise DegenerateInputError("reference signal is all-zero")
    err_energy = sq_norm(y - yhat)
    return -10.0 * math.log10(ref_energy / (err_energy + tau * ref_energy))


def snr_loss(y: Waveform, yhat: Waveform, cfg: LossConfig = LossConfig()) -> float:
    """Negative thresholded SNR in dB; exactly -snr_max iff yhat == y."""
    if len(y) != len(yhat):
        raise ShapeMismatchError(f"length mismatch: {len(y)} vs {len(yhat)}")
    return _snr_loss_arrays(y.samples, yhat.samples, cfg.tau)


def _pairwise_costs(refs: np.ndarray, ests: np.ndarray, tau: float) -> np.ndarray:
    m = refs.shape[0]
    costs = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            costs[i, j] = _snr_loss_arrays(refs[i], ests[j], tau)
    return costs


def pit_loss(refs: SourceSet, ests: SourceSet, cfg: LossConfig = LossConfig(),
             backend: str = "exhaustive") -> LossResult:
    """Permutation-invariant loss: min over bijections of summed snr_loss.

    ``exhaustive`` enumerates all M! permutations (lexicographically smallest
    argmin wins ties); ``assignment_solver`` solves the equivalent linear
    assignment problem on the MxM pairwise cost matrix. Totals agree to
    numerical precision.
    """
    if refs.m != ests.m:
        raise ShapeMismatchError(f"source count mismatch: {refs.m} refs vs {ests.m} estimates")
    if refs.t != ests.t:
        raise ShapeMismatchError(f"length mismatch: {refs.t} vs {ests.t}")
    costs = _pairwise_costs(refs.as_matrix(), ests.as_matrix(), cfg.tau)
    m = refs.m
    if backend == "exhaustive":
        best_perm = None
        best_total = math.inf
        for perm in itertools.permutations(range(m)):
            total = math.fsum(costs[i, perm[i]] for i in range(m))
            if total < best_total:
                best_total = total
                best_perm = perm
    elif backend == "assignment_solver":
        _, cols = linear_sum_assignment(costs)   # row indices come back as 0..M-1
        best_perm = tuple(int(c) for c in cols)
        best_total = math.fsum(costs[i, best_perm[i]] for i in range(m))
    else:
        raise ValueError(f"unknown backend {backend!r}")
    per_term = tuple(float(costs[i, best_perm[i]]) for i in range(m))
    return LossResult(float(best_total), per_term, Permutation(best_perm))


def mixit_assignments(m: int):
    """All 2^m assignment vectors over {1, 2}, in lexicographic order."""
    return itertools.product((1, 2), repeat=m)


def mixit_loss(mix1: Waveform, mix2: Waveform, ests: SourceSet,
               cfg: LossConfig = LossConfig()) -> LossResult:
    """Mixture-invariant loss over all binary assignments of estimates.

    Each estimate is summed into exactly one of the two reference mixtures;
    the loss is the sum of the two mixture-level snr_loss terms, minimized by
    exact enumeration (the terms couple sources, so no per-source shortcut is
    valid). Ties go to the lexicographically smallest assignment vector.
    """
    if len(mix1) != len(mix2):
        raise ShapeMismatchError(f"mixture length mismatch: {len(mix1)} vs {len(mix2)}")
    if ests.t != len(mix1):
        raise ShapeMismatchError(f"estimate length {ests.t} != mixture length {len(mix1)}")
    m = ests.m
    if m < 2:
        raise ShapeMismatchError("MixIT needs at least 2 estimates")
    if m > MIXIT_ENUMERATION_CAP:
        raise CapacityError(
            f"MixIT enumeration over 2^{m} assignments exceeds cap of "
            f"2^{MIXIT_ENUMERATION_CAP}")
    est = ests.as_matrix()
    total_est = est.sum(axis=0)
    x1, x2 = mix1.samples, mix2.samples
    best = None
    for assign in mixit_assignments(m):
        group1 = np.zeros_like(total_est)
        for k in range(m):
            if assign[k] == 1:
                group1 = group1 + est[k]
        group2 = total_est - group1
        term1 = _snr_loss_arrays(x1, group1, cfg.tau)
        term2 = _snr_loss_arrays(x2, group2, cfg.tau)
        total = term1 + term2
        if best is None or total < best[0]:
            best = (total, (term1, term2), assign)
    return LossResult(float(best[0]), best[1], MixingAssignment(best[2]))


def snr_loss_gradient(y: np.ndarray, yhat: np.ndarray, tau: float) -> np.ndarray:
    """Analytic d snr_loss / d yhat for fixed y."""
    ref_energy = sq_norm(y)
    if ref_energy == 0.0:
        raise DegenerateInputError("reference signal is all-zero")
    err = y - yhat
    denom = sq_norm(err) + tau * ref_energy
    return (-20.0 / math.log(10.0)) * err / denom


@dataclass(frozen=True)
class GradientCheckResult:
    max_relative_deviation: float
    tie_detected: bool


def _assignment_gap(totals) -> float:
    ordered = sorted(totals)
    return math.inf if len(ordered) < 2 else ordered[1] - ordered[0]


def loss_gradient_check(op: str, inputs: dict, epsilon: float = 1e-6,
                        n_coords: int = 32, seed: int = 0) -> GradientCheckResult:
    """Central-finite-difference check of the loss gradients in the estimates.

    The analytic gradient is the snr_loss gradient composed with the argmin
    assignment held fixed. Deviations are measured per coordinate as
    |fd - analytic| / max(1, |fd|, |analytic|) and the maximum is returned.
    If two assignments are (near-)tied at the evaluation point, the check is
    reported as a tie rather than failed.
    """
    cfg = inputs.get("cfg", LossConfig())
    rng = np.random.default_rng(seed)
    tie = False

    if op == "snr_loss":
        y = inputs["y"].samples
        yhat0 = inputs["yhat"].samples.copy()

        def value(v):
            return _snr_loss_arrays(y, v, cfg.tau)

        analytic = snr_loss_gradient(y, yhat0, cfg.tau)
        flat_grads = [(yhat0, analytic, value)]
    elif op == "pit_loss":
        refs, ests = inputs["refs"], inputs["ests"]
        result = pit_loss(refs, ests, cfg, backend="exhaustive")
        totals = [math.fsum(
            _snr_loss_arrays(refs[i].samples, ests[p[i]].samples, cfg.tau)
            for i in range(refs.m))
            for p in itertools.permutations(range(refs.m))]
        tie = _assignment_gap(totals) < 10 * epsilon
        mapping = result.assignment.mapping
        inverse = {j: i for i, j in enumerate(mapping)}
        flat_grads = []
        for j in range(ests.m):
            ref = refs[inverse[j]].samples
            est0 = ests[j].samples.copy()

            def value(v, _ref=ref):
                return _snr_loss_arrays(_ref, v, cfg.tau)

            flat_grads.append((est0, snr_loss_gradient(ref, est0, cfg.tau), value))
    elif op == "mixit_loss":
        mix1, mix2, ests = inputs["mix1"], inputs["mix2"], inputs["ests"]
        result = mixit_loss(mix1, mix2, ests, cfg)
        est = ests.as_matrix()
        totals = []
        for assign in mixit_assignments(ests.m):
            g1 = est[[k for k in range(ests.m) if assign[k] == 1]].sum(axis=0) \
                if any(a == 1 for a in assign) else np.zeros(ests.t)
            g2 = est[[k for k in range(ests.m) if assign[k] == 2]].sum(axis=0) \
                if any(a == 2 for a in assign) else np.zeros(ests.t)
            totals.append(_snr_loss_arrays(mix1.samples, g1, cfg.tau)
                          + _snr_loss_arrays(mix2.samples, g2, cfg.tau))
        tie = _assignment_gap(totals) < 10 * epsilon
        assign = result.assignment.assignment
        mixtures = (mix1.samples, mix2.samples)
        flat_grads = []
        for k in range(ests.m):
            n = assign[k]
            x = mixtures[n - 1]
            group = est[[j for j in range(ests.m) if assign[j] == n]].sum(axis=0)
            others = group - est[k]
            est0 = est[k].copy()

            def value(v, _x=x, _others=others):
                return _snr_loss_arrays(_x, _others + v, cfg.tau)

            flat_grads.append((est0, snr_loss_gradient(x, group, cfg.tau), value))
    else:
        raise ValueError(f"unknown loss identifier {op!r}")

    worst = 0.0
    for vec, analytic, value in flat_grads:
        coords = rng.choice(vec.size, size=min(n_coords, vec.size), replace=False)
        for c in coords:
            probe = vec.copy()
            probe[c] = vec[c] + epsilon
            up = value(probe)
            probe[c] = vec[c] - epsilon
            down = value(probe)
            fd = (up - down) / (2.0 * epsilon)
            dev = abs(fd - analytic[c]) / max(1.0, abs(fd), abs(analytic[c]))
            worst = max(worst, dev)
    return GradientCheckResult(worst, tie)
