"""Monotone alignment of script dialogue lines to timed ASR words.

Each dialogue line may link to a span of 1..max_span consecutive ASR words;
lines and words may also be deleted.  A minimum-total-cost monotone
alignment is found by dynamic programming, and links whose cost clears a
confidence threshold are turned into speaker-labeled time ranges.

The span cost is a token-LCS dissimilarity.  It is deliberately swappable:
anything with the `span_cost` signature (0 identical .. 1 dissimilar) can
be plugged into `align`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import InvalidInput, SpeakerTimeline, TimeInterval, Turn, normalize_name

DEFAULT_MAX_SPAN = 50
DEFAULT_DELETION_PERCENTILE = 0.015
DEFAULT_CONFIDENCE_THRESHOLD = 0.3

_PUNCT = re.compile(r"[^\w\s]")
_WS = re.compile(r"\s+")


@dataclass(frozen=True)
class DialogueLine:
    index: int
    speaker_name: str
    text: str


@dataclass(frozen=True)
class AsrWord:
    token: str
    interval: TimeInterval


@dataclass(frozen=True)
class Link:
    line_index: int
    first_word: int
    last_word: int  # inclusive
    cost: float


@dataclass
class Alignment:
    links: list[Link]
    deleted_lines: set[int]
    deleted_words: set[int]
    total_cost: float
    deletion_penalty: float


@dataclass(frozen=True)
class LabeledRange:
    interval: TimeInterval
    speaker_name: str
    cost: float


def normalize_text(raw: str) -> str:
    """Lowercase, strip punctuation, collapse whitespace."""
    return _WS.sub(" ", _PUNCT.sub("", raw.lower())).strip()


def tokenize(raw: str) -> list[str]:
    norm = normalize_text(raw)
    return norm.split() if norm else []


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(a) + 1)
    for tok in b:
        cur = [0]
        for p in range(1, len(a) + 1):
            if a[p - 1] == tok:
                cur.append(prev[p - 1] + 1)
            else:
                cur.append(max(prev[p], cur[-1]))
        prev = cur
    return prev[-1]


def span_cost(line: DialogueLine, words: Sequence[AsrWord]) -> float:
    """Token-LCS dissimilarity in [0, 1]; 0 for identical normalized text."""
    a = tokenize(line.text)
    b = [t for w in words for t in tokenize(w.token)]
    return token_span_cost(a, b)


def token_span_cost(line_tokens: Sequence[str], span_tokens: Sequence[str]) -> float:
    if not line_tokens or not span_tokens:
        return 1.0
    lcs = _lcs_length(line_tokens, span_tokens)
    return 1.0 - (2.0 * lcs) / (len(line_tokens) + len(span_tokens))


def _sample_band_costs(
    lines_tokens: list[list[str]],
    words_tokens: list[list[str]],
    max_span: int,
) -> list[float]:
    """Span costs of candidate {1,m} links near the DP diagonal."""
    n_l, n_w = len(lines_tokens), len(words_tokens)
    if n_l == 0 or n_w == 0:
        return []
    sizes = sorted({m for m in (1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, max_span) if 1 <= m <= max_span})
    flat_words = words_tokens
    sample: list[float] = []
    for i, lt in enumerate(lines_tokens):
        j = int(round((i + 0.5) / n_l * n_w))
        for m in sizes:
            s = min(max(0, j - m // 2), max(0, n_w - m))
            span = [t for toks in flat_words[s : s + m] for t in toks]
            sample.append(token_span_cost(lt, span))
    return sample


def deletion_penalty(
    lines: Sequence[DialogueLine],
    words: Sequence[AsrWord],
    max_span: int = DEFAULT_MAX_SPAN,
    deletion_percentile: float = DEFAULT_DELETION_PERCENTILE,
) -> float:
    """Calibrate the line/word deletion cost.

    Taken as the `deletion_percentile` quantile of span costs sampled along
    the DP diagonal, so only links competitive with the best observed
    matches beat deletion.
    """
    if not (0 < deletion_percentile < 1):
        raise InvalidInput("deletion_percentile must be in (0, 1)")
    lines_tokens = [tokenize(l.text) for l in lines]
    words_tokens = [tokenize(w.token) for w in words]
    sample = _sample_band_costs(lines_tokens, words_tokens, max_span)
    if not sample:
        return 0.0
    return float(np.quantile(np.asarray(sample), deletion_percentile))


def align(
    lines: Sequence[DialogueLine],
    words: Sequence[AsrWord],
    max_span: int = DEFAULT_MAX_SPAN,
    deletion_percentile: float = DEFAULT_DELETION_PERCENTILE,
    band_cells: int = 1_000_000,
    delta: Optional[float] = None,
) -> Alignment:
    """Minimum-cost monotone alignment of lines to word spans.

    A link {1,m} costs its span dissimilarity; deleting a line or a word
    costs `delta` (calibrated from the data unless given).  Ties break
    toward linking, then toward shorter spans.  For inputs beyond
    `band_cells` DP cells the search is restricted to a diagonal band.
    """
    if max_span < 1:
        raise InvalidInput("max_span must be >= 1")
    n_l, n_w = len(lines), len(words)
    if delta is None:
        delta = deletion_penalty(lines, words, max_span, deletion_percentile)
    if n_l == 0 or n_w == 0:
        return Alignment(
            links=[],
            deleted_lines=set(range(n_l)),
            deleted_words=set(range(n_w)),
            total_cost=delta * (n_l + n_w),
            deletion_penalty=delta,
        )

    lines_tokens = [tokenize(l.text) for l in lines]
    words_tokens = [tokenize(w.token) for w in words]

    half_band = n_w  # full matrix by default
    if (n_l + 1) * (n_w + 1) > band_cells:
        half_band = max(max_span + 1, band_cells // (2 * (n_l + 1)))

    INF = float("inf")
    C = np.full((n_l + 1, n_w + 1), INF)
    C[0, 0] = 0.0
    # back[i][j] = ("link", m, cost) | ("del_line",) | ("del_word",)
    back: dict[tuple[int, int], tuple] = {}

    def diag(i: int) -> int:
        return int(round(i / n_l * n_w))

    for j in range(1, min(n_w, half_band) + 1):
        C[0, j] = j * delta
        back[(0, j)] = ("del_word",)

    for i in range(1, n_l + 1):
        lt = lines_tokens[i - 1]
        lo = max(0, diag(i) - half_band)
        hi = min(n_w, diag(i) + half_band)
        # incremental LCS rows per span start: cost of [s, e] for growing e
        span_costs: dict[tuple[int, int], float] = {}
        for s in range(max(0, lo - max_span), hi):
            prev = [0] * (len(lt) + 1)
            length = 0
            for e in range(s, min(s + max_span, n_w)):
                for tok in words_tokens[e]:
                    cur = [0]
                    for p in range(1, len(lt) + 1):
                        if lt[p - 1] == tok:
                            cur.append(prev[p - 1] + 1)
                        else:
                            cur.append(max(prev[p], cur[-1]))
                    prev = cur
                length += len(words_tokens[e])
                if lt and length:
                    span_costs[(s, e)] = 1.0 - 2.0 * prev[-1] / (len(lt) + length)
                else:
                    span_costs[(s, e)] = 1.0
        for j in range(lo, hi + 1):
            # candidates in tie-break preference order, strict improvement only
            best = INF
            choice: Optional[tuple] = None
            for m in range(1, min(max_span, j) + 1):
                base = C[i - 1, j - m]
                if base == INF:
                    continue
                cost = base + span_costs[(j - m, j - 1)]
                if cost < best:
                    best, choice = cost, ("link", m, span_costs[(j - m, j - 1)])
            if C[i - 1, j] + delta < best:
                best, choice = C[i - 1, j] + delta, ("del_line",)
            if j > lo and C[i, j - 1] + delta < best:
                best, choice = C[i, j - 1] + delta, ("del_word",)
            if choice is not None:
                C[i, j] = best
                back[(i, j)] = choice

    if C[n_l, n_w] == INF:
        raise InvalidInput("alignment band too narrow for this instance")

    links: list[Link] = []
    deleted_lines: set[int] = set()
    deleted_words: set[int] = set()
    i, j = n_l, n_w
    while (i, j) != (0, 0):
        step = back[(i, j)]
        if step[0] == "link":
            _, m, cost = step
            links.append(Link(i - 1, j - m, j - 1, cost))
            i, j = i - 1, j - m
        elif step[0] == "del_line":
            deleted_lines.add(i - 1)
            i -= 1
        else:
            deleted_words.add(j - 1)
            j -= 1
    links.reverse()
    return Alignment(
        links=links,
        deleted_lines=deleted_lines,
        deleted_words=deleted_words,
        total_cost=float(C[n_l, n_w]),
        deletion_penalty=delta,
    )


def extract_ranges(
    alignment: Alignment,
    lines: Sequence[DialogueLine],
    words: Sequence[AsrWord],
    confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD,
) -> list[LabeledRange]:
    """Turn confident links into speaker-labeled time ranges.

    The range spans the first aligned word's start to the last aligned
    word's end.  Output is chronological and non-overlapping (ranges are
    clipped against the previous end when ASR word times jitter).
    """
    if not (0 <= confidence_threshold <= 1):
        raise InvalidInput("confidence_threshold must be in [0, 1]")
    out: list[LabeledRange] = []
    prev_end = -float("inf")
    for link in sorted(alignment.links, key=lambda l: words[l.first_word].interval.start):
        if link.cost > confidence_threshold:
            continue
        start = words[link.first_word].interval.start
        end = words[link.last_word].interval.end
        start = max(start, prev_end)
        if end <= start:
            continue
        out.append(
            LabeledRange(
                interval=TimeInterval(start, end),
                speaker_name=lines[link.line_index].speaker_name,
                cost=link.cost,
            )
        )
        prev_end = end
    return out


def ranges_to_timeline(ranges: Sequence[LabeledRange]) -> SpeakerTimeline:
    return SpeakerTimeline(
        [Turn(r.interval, normalize_name(r.speaker_name)) for r in ranges]
    )


def audit_pseudo_labels(
    ranges: Sequence[LabeledRange],
    total_lines: int,
    reference: Optional[SpeakerTimeline] = None,
) -> tuple[float, Optional[float]]:
    """Coverage (labeled lines / total lines) and accuracy vs a reference.

    Accuracy is the fraction of ranges whose speaker matches the reference
    speaker of maximal temporal overlap; None when no reference is given
    or the reference is empty.
    """
    coverage = len(ranges) / total_lines if total_lines > 0 else 0.0
    if reference is None or not reference.turns:
        return coverage, None
    if not ranges:
        return 0.0, None
    correct = 0
    for r in ranges:
        best_ov, best_name = 0.0, None
        for turn in reference.sorted_turns():
            ov = r.interval.overlap(turn.interval)
            if ov > best_ov:
                best_ov, best_name = ov, turn.speaker
        if best_name is not None and normalize_name(best_name) == normalize_name(
            r.speaker_name
        ):
            correct += 1
    return coverage, correct / len(ranges)
