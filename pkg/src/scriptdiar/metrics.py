"""Scoring: diarization error rate, speaker-change-detection F1,
Hungarian cluster-to-speaker mapping and corpus significance testing."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats
from scipy.optimize import linear_sum_assignment

from .core import InvalidInput, SpeakerTimeline, TIME_EPS

UNMAPPED = None  # marker for hypothesis labels with no reference match


@dataclass
class DERBreakdown:
    false_alarm: float
    missed: float
    speaker_error: float
    total_reference: float

    @property
    def der(self) -> float:
        return (self.false_alarm + self.missed + self.speaker_error) / self.total_reference


@dataclass
class ScdScore:
    precision: float
    recall: float
    f1: float
    tolerance: float
    n_reference: int
    n_hypothesis: int
    matched: int


def overlap_matrix(
    reference: SpeakerTimeline, hypothesis: SpeakerTimeline
) -> tuple[np.ndarray, list[str], list[str]]:
    ref_labels = reference.speakers()
    hyp_labels = hypothesis.speakers()
    M = np.zeros((len(ref_labels), len(hyp_labels)))
    ref_idx = {s: i for i, s in enumerate(ref_labels)}
    hyp_idx = {s: i for i, s in enumerate(hyp_labels)}
    for rt in reference.turns:
        for ht in hypothesis.turns:
            ov = rt.interval.overlap(ht.interval)
            if ov > 0:
                M[ref_idx[rt.speaker], hyp_idx[ht.speaker]] += ov
    return M, ref_labels, hyp_labels


def hungarian_map(
    reference: SpeakerTimeline, hypothesis: SpeakerTimeline
) -> dict[str, Optional[str]]:
    """Optimal one-to-one hyp-label -> ref-label mapping by overlap time.

    Hypothesis labels left without a positive-overlap partner map to None.
    """
    if not reference.turns or not hypothesis.turns:
        raise InvalidInput("hungarian_map needs non-empty timelines")
    M, ref_labels, hyp_labels = overlap_matrix(reference, hypothesis)
    rows, cols = linear_sum_assignment(-M)
    mapping: dict[str, Optional[str]] = {h: UNMAPPED for h in hyp_labels}
    for r, c in zip(rows, cols):
        if M[r, c] > 0:
            mapping[hyp_labels[c]] = ref_labels[r]
    return mapping


def _elementary_intervals(*timelines: SpeakerTimeline, extra: Sequence[float] = ()):
    times = set(extra)
    for tl in timelines:
        for t in tl.turns:
            times.add(t.interval.start)
            times.add(t.interval.end)
    times = sorted(times)
    return [(a, b) for a, b in zip(times, times[1:]) if b - a > TIME_EPS]


def der(
    reference: SpeakerTimeline,
    hypothesis: SpeakerTimeline,
    collar: float = 0.0,
    mapping: Optional[dict[str, Optional[str]]] = None,
) -> DERBreakdown:
    """Diarization error rate by timeline sweep.

    Overlapped reference speech counts each concurrent speaker toward the
    reference total; a collar excludes +-collar around every reference turn
    boundary from scoring.  The hyp->ref mapping defaults to the Hungarian
    assignment.
    """
    if reference.total_speech() <= 0:
        raise InvalidInput("reference timeline has no speech")
    if mapping is None and hypothesis.turns:
        mapping = hungarian_map(reference, hypothesis)
    mapping = mapping or {}

    excluded: list[tuple[float, float]] = []
    if collar > 0:
        for t in reference.turns:
            excluded.append((t.interval.start - collar, t.interval.start + collar))
            excluded.append((t.interval.end - collar, t.interval.end + collar))
    extra = [max(0.0, x) for pair in excluded for x in pair]

    fa = miss = spkerr = total_ref = 0.0
    for a, b in _elementary_intervals(reference, hypothesis, extra=extra):
        mid = (a + b) / 2.0
        if any(lo < mid < hi for lo, hi in excluded):
            continue
        dur = b - a
        ref_active = {t.speaker for t in reference.turns if t.interval.contains(mid)}
        hyp_speaker = next(
            (t.speaker for t in hypothesis.turns if t.interval.contains(mid)), None
        )
        n_ref = len(ref_active)
        n_hyp = 0 if hyp_speaker is None else 1
        total_ref += n_ref * dur
        miss += max(0, n_ref - n_hyp) * dur
        fa += max(0, n_hyp - n_ref) * dur
        if n_hyp == 1 and n_ref >= 1:
            mapped = mapping.get(hyp_speaker, UNMAPPED)
            if mapped not in ref_active:
                spkerr += dur
    if total_ref <= 0:
        raise InvalidInput("no scored reference speech (collar removed everything?)")
    return DERBreakdown(
        false_alarm=fa, missed=miss, speaker_error=spkerr, total_reference=total_ref
    )


def change_points(timeline: SpeakerTimeline) -> list[float]:
    """Speaker-change instants inside continuous speech.

    A change point is a time where the set of active speakers changes while
    speech continues on both sides; silence gaps between turns do not
    produce change points.
    """
    if not timeline.turns:
        return []
    intervals = _elementary_intervals(timeline)
    active = []
    for a, b in intervals:
        mid = (a + b) / 2.0
        active.append(
            frozenset(t.speaker for t in timeline.turns if t.interval.contains(mid))
        )
    points = []
    for i in range(1, len(intervals)):
        prev_set, cur_set = active[i - 1], active[i]
        contiguous = abs(intervals[i - 1][1] - intervals[i][0]) < TIME_EPS
        if contiguous and prev_set and cur_set and prev_set != cur_set:
            points.append(intervals[i][0])
    return points


def scd_f1(
    reference: SpeakerTimeline,
    hypothesis: SpeakerTimeline,
    tolerance: float = 0.1,
) -> ScdScore:
    """Speaker-change-detection F1 under a +-tolerance boundary match.

    Boundaries are matched one-to-one maximizing match count (optimal
    bipartite matching, not greedy); tolerance is an inclusive radius.
    """
    if tolerance < 0:
        raise InvalidInput("tolerance must be >= 0")
    ref_pts = change_points(reference)
    hyp_pts = change_points(hypothesis)
    if not ref_pts and not hyp_pts:
        return ScdScore(1.0, 1.0, 1.0, tolerance, 0, 0, 0)
    matched = 0
    if ref_pts and hyp_pts:
        W = np.zeros((len(ref_pts), len(hyp_pts)))
        for i, r in enumerate(ref_pts):
            for j, h in enumerate(hyp_pts):
                if abs(r - h) <= tolerance + TIME_EPS:
                    W[i, j] = 1.0
        rows, cols = linear_sum_assignment(-W)
        matched = int(sum(W[r, c] for r, c in zip(rows, cols)))
    precision = matched / len(hyp_pts) if hyp_pts else 0.0
    recall = matched / len(ref_pts) if ref_pts else math.nan
    if math.isnan(recall):
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return ScdScore(
        precision=precision,
        recall=recall,
        f1=f1,
        tolerance=tolerance,
        n_reference=len(ref_pts),
        n_hypothesis=len(hyp_pts),
        matched=matched,
    )


def corpus_significance(scores_a: Sequence[float], scores_b: Sequence[float]) -> float:
    """Two-sided two-sample Student's t-test p-value (pooled variance)."""
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise InvalidInput("need at least 2 scores per sample")
    if a.std() == 0 and b.std() == 0:
        return 1.0 if a.mean() == b.mean() else 0.0
    p = stats.ttest_ind(a, b, equal_var=True).pvalue
    return 1.0 if math.isnan(p) else float(p)
