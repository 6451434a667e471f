"""Core domain types, sub-segmentation and file I/O.

Everything downstream (alignment, clustering, scoring) works in terms of
these types: time intervals, VAD speech regions, fixed-length sub-segments,
embedding matrices, speaker timelines and pseudo labelings.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

TIME_EPS = 1e-9


class InvalidInput(ValueError):
    """Raised when an input violates a documented precondition."""


@dataclass(frozen=True)
class TimeInterval:
    start: float
    end: float

    def __post_init__(self):
        if not (math.isfinite(self.start) and math.isfinite(self.end)):
            raise InvalidInput(f"non-finite interval ({self.start}, {self.end})")
        if self.start < 0:
            raise InvalidInput(f"negative start time {self.start}")
        if self.end <= self.start:
            raise InvalidInput(f"empty interval ({self.start}, {self.end})")

    @property
    def duration(self) -> float:
        return self.end - self.start

    def overlap(self, other: "TimeInterval") -> float:
        return max(0.0, min(self.end, other.end) - max(self.start, other.start))

    def contains(self, t: float) -> bool:
        return self.start <= t < self.end


@dataclass(frozen=True)
class SpeechRegion:
    interval: TimeInterval


def validate_regions(regions: Sequence[SpeechRegion]) -> None:
    """Regions must be chronologically sorted and non-overlapping."""
    for prev, cur in zip(regions, regions[1:]):
        if cur.interval.start < prev.interval.end - TIME_EPS:
            raise InvalidInput(
                f"regions overlap or are unsorted near t={cur.interval.start}"
            )


@dataclass(frozen=True)
class SubSegment:
    interval: TimeInterval
    region_index: int
    row: int  # row index into the episode's embedding matrix


@dataclass(frozen=True)
class Turn:
    interval: TimeInterval
    speaker: str


@dataclass
class SpeakerTimeline:
    """A set of (interval, speaker) turns.

    Reference timelines may contain overlapping turns of distinct speakers;
    hypothesis timelines produced by clustering are single-speaker per
    instant by construction.
    """

    turns: list[Turn] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.turns)

    def speakers(self) -> list[str]:
        seen: dict[str, None] = {}
        for t in self.turns:
            seen.setdefault(t.speaker, None)
        return list(seen)

    def total_speech(self) -> float:
        return sum(t.interval.duration for t in self.turns)

    def sorted_turns(self) -> list[Turn]:
        return sorted(self.turns, key=lambda t: (t.interval.start, t.interval.end))


@dataclass
class EmbeddingSet:
    matrix: np.ndarray  # (n, d)
    subsegments: list[SubSegment]

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise InvalidInput("embedding matrix must be 2-D")
        if self.matrix.shape[0] != len(self.subsegments):
            raise InvalidInput(
                f"{self.matrix.shape[0]} rows vs {len(self.subsegments)} sub-segments"
            )
        norms = np.linalg.norm(self.matrix, axis=1)
        if np.any(norms == 0):
            raise InvalidInput("embedding matrix contains a zero row")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


@dataclass
class PseudoLabeling:
    """Per-sub-segment labels in {0, 1..k'}; 0 means unlabeled."""

    labels: np.ndarray  # (n,) int
    names: dict[int, str]

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        present = set(int(v) for v in np.unique(self.labels)) - {0}
        if present != set(self.names):
            raise InvalidInput(
                f"labels present {sorted(present)} do not match name table "
                f"{sorted(self.names)}"
            )
        if self.names and sorted(self.names) != list(range(1, len(self.names) + 1)):
            raise InvalidInput("pseudo labels must be numbered 1..k'")

    @property
    def k_prime(self) -> int:
        return len(self.names)

    @property
    def n(self) -> int:
        return len(self.labels)


def normalize_name(raw: str) -> str:
    """Canonicalize a character name: trim, uppercase, collapse whitespace."""
    return re.sub(r"\s+", " ", raw.strip()).upper()


def subsegment(regions: Sequence[SpeechRegion], length: float = 1.0) -> list[SubSegment]:
    """Tile speech regions with uniform sub-segments of the given length.

    Every region is cut into ceil(duration/length) pieces; all but the last
    have exactly `length` duration, the last keeps the remainder.  Short
    remainders are kept so embedding rows stay one-to-one with tiles.
    """
    if length <= 0:
        raise InvalidInput(f"sub-segment length must be positive, got {length}")
    validate_regions(regions)
    out: list[SubSegment] = []
    row = 0
    for ri, region in enumerate(regions):
        iv = region.interval
        n_full = int(math.floor((iv.duration + TIME_EPS) / length))
        bounds = [iv.start + i * length for i in range(n_full + 1)]
        if iv.end - bounds[-1] > TIME_EPS:
            bounds.append(iv.end)
        else:
            bounds[-1] = iv.end
        for a, b in zip(bounds, bounds[1:]):
            out.append(SubSegment(TimeInterval(a, b), region_index=ri, row=row))
            row += 1
    return out


def project_labels(
    timeline: SpeakerTimeline,
    subsegments: Sequence[SubSegment],
    min_overlap_fraction: float = 0.5,
) -> PseudoLabeling:
    """Project a labeled timeline onto sub-segments.

    A sub-segment takes the label of the turn with maximum temporal overlap,
    provided that overlap covers at least `min_overlap_fraction` of the
    sub-segment; otherwise it stays unlabeled (0).  Label ids are assigned
    1..k' in first-appearance order of (normalized) character names.
    """
    if not (0 < min_overlap_fraction <= 1):
        raise InvalidInput("min_overlap_fraction must be in (0, 1]")
    turns = timeline.sorted_turns()
    labels = np.zeros(len(subsegments), dtype=np.int64)
    names: dict[int, str] = {}
    by_name: dict[str, int] = {}
    for seg in subsegments:
        best_ov = 0.0
        best_name: Optional[str] = None
        for turn in turns:
            ov = seg.interval.overlap(turn.interval)
            if ov > best_ov:  # ties resolve to the earlier turn
                best_ov, best_name = ov, turn.speaker
        if best_name is None or best_ov < min_overlap_fraction * seg.interval.duration:
            continue
        name = normalize_name(best_name)
        if name not in by_name:
            by_name[name] = len(by_name) + 1
            names[by_name[name]] = name
        labels[seg.row] = by_name[name]
    return PseudoLabeling(labels=labels, names=names)


# ---------------------------------------------------------------------------
# File I/O


def write_rttm(timeline: SpeakerTimeline, file_id: str, path: Path | str) -> None:
    lines = []
    for turn in timeline.sorted_turns():
        iv = turn.interval
        lines.append(
            f"SPEAKER {file_id} 1 {iv.start:.3f} {iv.duration:.3f} "
            f"<NA> <NA> {turn.speaker} <NA> <NA>"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_rttm(path: Path | str) -> SpeakerTimeline:
    turns = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] != "SPEAKER":
            raise InvalidInput(f"unsupported RTTM record: {line!r}")
        start, dur = float(parts[3]), float(parts[4])
        turns.append(Turn(TimeInterval(start, start + dur), parts[7]))
    return SpeakerTimeline(turns)


def write_embeddings(matrix: np.ndarray, path: Path | str) -> None:
    """Row-major binary matrix; the .npy header carries n and d."""
    np.save(Path(path), np.asarray(matrix, dtype=np.float64))


def read_embeddings(path: Path | str) -> np.ndarray:
    m = np.load(Path(path))
    if m.ndim != 2:
        raise InvalidInput(f"embedding file {path} is not a matrix")
    return m


def write_pseudo_labels(pseudo: PseudoLabeling, path: Path | str) -> None:
    payload = {
        "labels": [int(v) for v in pseudo.labels],
        "names": {str(k): v for k, v in pseudo.names.items()},
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_pseudo_labels(path: Path | str) -> PseudoLabeling:
    payload = json.loads(Path(path).read_text())
    return PseudoLabeling(
        labels=np.asarray(payload["labels"], dtype=np.int64),
        names={int(k): v for k, v in payload["names"].items()},
    )


@dataclass
class Episode:
    """An episode directory resolved into memory."""

    regions: list[SpeechRegion]
    embeddings: EmbeddingSet
    script_path: Optional[Path]
    asr_path: Optional[Path]
    root: Path


def write_episode(
    root: Path | str,
    regions: Sequence[SpeechRegion],
    matrix: np.ndarray,
    script_path: Optional[str] = None,
    asr_path: Optional[str] = None,
) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    write_embeddings(matrix, root / "embeddings.npy")
    manifest = {
        "regions": [[r.interval.start, r.interval.end] for r in regions],
        "embeddings": "embeddings.npy",
    }
    if script_path is not None:
        manifest["script"] = script_path
    if asr_path is not None:
        manifest["asr"] = asr_path
    (root / "episode.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )


def read_episode(root: Path | str, subsegment_length: float = 1.0) -> Episode:
    root = Path(root)
    manifest_path = root / "episode.json"
    if not manifest_path.exists():
        raise InvalidInput(f"no episode.json under {root}")
    manifest = json.loads(manifest_path.read_text())
    regions = [
        SpeechRegion(TimeInterval(float(a), float(b))) for a, b in manifest["regions"]
    ]
    validate_regions(regions)
    matrix = read_embeddings(root / manifest["embeddings"])
    segs = subsegment(regions, subsegment_length)
    embeddings = EmbeddingSet(matrix=matrix, subsegments=segs)
    script = root / manifest["script"] if "script" in manifest else None
    asr = root / manifest["asr"] if "asr" in manifest else None
    return Episode(
        regions=regions,
        embeddings=embeddings,
        script_path=script,
        asr_path=asr,
        root=root,
    )
