"""Rank correlation, regression error, retrieval, and localization metrics.

Kendall's tau is the headline metric: difficulty predictors output scores on
arbitrary ranges, so only the induced ranking is comparable across methods.
The implementation here is the O(n log n) merge-sort pair counter with tau-b
tie correction; a quadratic reference counter lives in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from numba import njit

from .errors import ConfigError


@dataclass(frozen=True)
class RankedPairSummary:
    """Pair counts and the tie-corrected rank correlation derived from them."""

    n_concordant: int
    n_discordant: int
    n_ties_a: int
    n_ties_b: int
    tau: float


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in pixel coordinates, exclusive of degenerate extents."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self) -> None:
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError(
                f"degenerate box: ({self.xmin}, {self.ymin}, {self.xmax}, {self.ymax})"
            )

    @property
    def area(self) -> float:
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)


@dataclass(frozen=True)
class AgreementSummary:
    """One-vs-all rank agreement statistics across annotators."""

    mean: float
    std: float
    min: float
    max: float
    taus: tuple[float, ...]


@njit(cache=True)
def _count_inversions(values: np.ndarray) -> np.int64:
    """Strict inversions (left > right) via bottom-up merge sort; mutates input."""
    n = values.size
    buf = np.empty(n, dtype=values.dtype)
    inversions = np.int64(0)
    width = 1
    while width < n:
        lo = 0
        while lo < n:
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                # Equal elements take the left one first: ties are not inversions.
                if values[j] < values[i]:
                    inversions += mid - i
                    buf[k] = values[j]
                    j += 1
                else:
                    buf[k] = values[i]
                    i += 1
                k += 1
            while i < mid:
                buf[k] = values[i]
                i += 1
                k += 1
            while j < hi:
                buf[k] = values[j]
                j += 1
                k += 1
            for t in range(lo, hi):
                values[t] = buf[t]
            lo += 2 * width
        width *= 2
    return inversions


def _tied_pair_count(sorted_values: np.ndarray) -> int:
    """Sum of t*(t-1)/2 over runs of equal values; input must be sorted."""
    if sorted_values.size == 0:
        return 0
    change = np.empty(sorted_values.size, dtype=bool)
    change[0] = True
    change[1:] = sorted_values[1:] != sorted_values[:-1]
    starts = np.flatnonzero(change)
    run_lengths = np.diff(np.append(starts, sorted_values.size))
    return int(np.sum(run_lengths * (run_lengths - 1) // 2))


def kendall_tau(a: Sequence[float], b: Sequence[float]) -> RankedPairSummary:
    """Tau-b rank correlation between two aligned score vectors.

    Pairs are counted in O(n log n): sort lexicographically by (a, b), then
    discordant pairs are exactly the strict inversions of the b sequence
    (within equal-a runs b is already ascending, so tied pairs never count).
    """
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    if av.ndim != 1 or bv.ndim != 1 or av.size != bv.size:
        raise ConfigError(f"length mismatch: {av.shape} vs {bv.shape}")
    n = av.size
    if n < 2:
        raise ConfigError("kendall_tau needs at least 2 observations")
    if not (np.isfinite(av).all() and np.isfinite(bv).all()):
        raise ConfigError("kendall_tau requires finite inputs")

    order = np.lexsort((bv, av))
    a_sorted = av[order]
    b_by_a = bv[order]

    n0 = n * (n - 1) // 2
    ties_a = _tied_pair_count(a_sorted)
    ties_b = _tied_pair_count(np.sort(bv))
    both = np.empty(n, dtype=bool)
    both[0] = True
    both[1:] = (a_sorted[1:] != a_sorted[:-1]) | (b_by_a[1:] != b_by_a[:-1])
    starts = np.flatnonzero(both)
    run_lengths = np.diff(np.append(starts, n))
    ties_joint = int(np.sum(run_lengths * (run_lengths - 1) // 2))

    n_discordant = int(_count_inversions(b_by_a.copy()))
    n_concordant = n0 - ties_a - ties_b + ties_joint - n_discordant

    if ties_a == n0 or ties_b == n0:
        raise ConfigError("tau undefined: one input is completely tied")
    denom = math.sqrt(float(n0 - ties_a) * float(n0 - ties_b))
    tau = (n_concordant - n_discordant) / denom
    return RankedPairSummary(
        n_concordant=n_concordant,
        n_discordant=n_discordant,
        n_ties_a=ties_a,
        n_ties_b=ties_b,
        tau=tau,
    )


def pair_accuracy(tau: float) -> float:
    """Fraction of pairs ranked in agreement, (tau + 1) / 2."""
    if not -1.0 <= tau <= 1.0:
        raise ConfigError(f"tau out of range: {tau}")
    return (tau + 1.0) / 2.0


def mse(pred: Sequence[float], gt: Sequence[float]) -> float:
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise ConfigError(f"length mismatch: {p.shape} vs {g.shape}")
    if p.size == 0:
        raise ConfigError("mse of empty input")
    return float(np.mean((p - g) ** 2))


def average_precision(scores: Sequence[float], labels: Sequence[int]) -> float:
    """AP of the score-descending ranking, ties broken by input order.

    Every positive contributes its precision-at-rank (continuous summation,
    not 11-point interpolation).
    """
    s = np.asarray(scores, dtype=np.float64)
    lab = np.asarray(labels)
    if s.ndim != 1 or s.shape != lab.shape:
        raise ConfigError(f"length mismatch: {s.shape} vs {lab.shape}")
    positives = lab.astype(bool)
    n_pos = int(positives.sum())
    if n_pos == 0:
        raise ConfigError("average_precision needs at least one positive label")
    order = np.argsort(-s, kind="stable")
    ranked = positives[order]
    cum_tp = np.cumsum(ranked)
    precision = cum_tp / np.arange(1, s.size + 1)
    return float(precision[ranked].sum() / n_pos)


def mean_average_precision(
    per_class: Iterable[tuple[Sequence[float], Sequence[int]]],
) -> float:
    aps = [average_precision(s, lab) for s, lab in per_class]
    if not aps:
        raise ConfigError("mean_average_precision over zero classes")
    return float(np.mean(aps))


def iou(a: Box, b: Box) -> float:
    ix = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    iy = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def corloc(
    selected: Mapping[str, Box | None],
    gt: Mapping[str, Sequence[Box]],
    threshold: float = 0.5,
) -> tuple[float, list[str]]:
    """Fraction of images whose selected box overlaps a ground-truth box.

    Overlap counts when IoU strictly exceeds the threshold. Images without a
    selection count as failures and are reported in the diagnostics.
    """
    if not gt:
        raise ConfigError("corloc over zero images")
    diagnostics: list[str] = []
    hits = 0
    for image_id in sorted(gt):
        box = selected.get(image_id)
        if box is None:
            diagnostics.append(f"no selection for image {image_id}; counted as failure")
            continue
        if any(iou(box, g) > threshold for g in gt[image_id]):
            hits += 1
    return hits / len(gt), diagnostics


def one_vs_all_agreement(times: np.ndarray) -> AgreementSummary:
    """Tau of each annotator's times against the across-annotator mean time.

    `times` is (n_annotators, n_images); every annotator must cover the full
    image set (no missing entries).
    """
    t = np.asarray(times, dtype=np.float64)
    if t.ndim != 2:
        raise ConfigError("times must be a 2-D annotators x images array")
    if t.shape[0] < 2:
        raise ConfigError("one_vs_all_agreement needs at least 2 annotators")
    if not np.isfinite(t).all():
        raise ConfigError("times must be finite (full coverage required)")
    mean_times = t.mean(axis=0)
    taus = tuple(kendall_tau(row, mean_times).tau for row in t)
    arr = np.array(taus)
    return AgreementSummary(
        mean=float(arr.mean()),
        std=float(arr.std(ddof=1)),
        min=float(arr.min()),
        max=float(arr.max()),
        taus=taus,
    )
