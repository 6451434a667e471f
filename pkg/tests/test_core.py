import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from scriptdiar.core import (
    InvalidInput,
    PseudoLabeling,
    SpeakerTimeline,
    SpeechRegion,
    TimeInterval,
    Turn,
    normalize_name,
    project_labels,
    read_rttm,
    subsegment,
    write_rttm,
)


def region(a, b):
    return SpeechRegion(TimeInterval(a, b))


def spans(segs):
    return [(s.interval.start, s.interval.end) for s in segs]


class TestTimeInterval:
    def test_rejects_empty(self):
        with pytest.raises(InvalidInput):
            TimeInterval(1.0, 1.0)

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidInput):
            TimeInterval(0.0, math.inf)

    def test_overlap(self):
        assert TimeInterval(0, 2).overlap(TimeInterval(1, 3)) == pytest.approx(1.0)
        assert TimeInterval(0, 1).overlap(TimeInterval(2, 3)) == 0.0


class TestSubsegment:
    def test_exact_tiling(self):
        assert spans(subsegment([region(0.0, 2.0)], 1.0)) == [(0.0, 1.0), (1.0, 2.0)]

    def test_remainder_kept(self):
        assert spans(subsegment([region(0.0, 2.5)], 1.0)) == [
            (0.0, 1.0),
            (1.0, 2.0),
            (2.0, 2.5),
        ]

    def test_short_region_single_subsegment(self):
        assert spans(subsegment([region(3.0, 3.4)], 1.0)) == [(3.0, 3.4)]

    def test_empty_input(self):
        assert subsegment([], 1.0) == []

    def test_rejects_non_positive_length(self):
        with pytest.raises(InvalidInput):
            subsegment([region(0, 1)], 0.0)

    def test_rejects_overlapping_regions(self):
        with pytest.raises(InvalidInput):
            subsegment([region(0, 2), region(1.5, 3)], 1.0)

    def test_rows_are_global_chronological(self):
        segs = subsegment([region(0, 2.2), region(5, 6.1)], 1.0)
        assert [s.row for s in segs] == list(range(len(segs)))
        starts = [s.interval.start for s in segs]
        assert starts == sorted(starts)

    @given(
        st.lists(
            st.tuples(
                st.floats(0, 100, allow_nan=False), st.floats(0.05, 20, allow_nan=False)
            ),
            min_size=0,
            max_size=6,
        ),
        st.floats(0.1, 3.0),
    )
    def test_lossless_tiling(self, raw, length):
        # build sorted, disjoint regions from (gap, duration) pairs
        t, regions = 0.0, []
        for gap, dur in raw:
            t += gap + 0.01
            regions.append(region(t, t + dur))
            t += dur
        segs = subsegment(regions, length)
        total = sum(s.interval.duration for s in segs)
        assert total == pytest.approx(
            sum(r.interval.duration for r in regions), abs=1e-9
        )
        by_region = {}
        for s in segs:
            by_region.setdefault(s.region_index, []).append(s)
        for ri, group in by_region.items():
            assert group[0].interval.start == pytest.approx(regions[ri].interval.start)
            assert group[-1].interval.end == pytest.approx(regions[ri].interval.end)
            for a, b in zip(group, group[1:]):
                assert a.interval.end == pytest.approx(b.interval.start, abs=1e-9)


class TestProjectLabels:
    def segs(self):
        return subsegment([region(0.0, 1.0)], 1.0)

    def test_full_overlap(self):
        tl = SpeakerTimeline([Turn(TimeInterval(0.0, 1.0), "ANNA")])
        p = project_labels(tl, self.segs(), 0.5)
        assert list(p.labels) == [1]
        assert p.names == {1: "ANNA"}

    def test_insufficient_overlap(self):
        tl = SpeakerTimeline([Turn(TimeInterval(0.0, 0.3), "ANNA")])
        p = project_labels(tl, self.segs(), 0.5)
        assert list(p.labels) == [0]
        assert p.names == {}

    def test_max_overlap_wins(self):
        tl = SpeakerTimeline(
            [
                Turn(TimeInterval(0.0, 0.4), "ANNA"),
                Turn(TimeInterval(0.4, 1.0), "BEN"),
            ]
        )
        p = project_labels(tl, self.segs(), 0.5)
        assert p.names[p.labels[0]] == "BEN"

    def test_empty_timeline(self):
        p = project_labels(SpeakerTimeline([]), self.segs(), 0.5)
        assert list(p.labels) == [0]

    def test_idempotent(self):
        tl = SpeakerTimeline(
            [Turn(TimeInterval(0, 0.9), "a"), Turn(TimeInterval(1.2, 2.0), "b")]
        )
        segs = subsegment([region(0, 2.0)], 1.0)
        p1 = project_labels(tl, segs, 0.5)
        p2 = project_labels(tl, segs, 0.5)
        assert np.array_equal(p1.labels, p2.labels)
        assert p1.names == p2.names

    def test_name_normalization(self):
        tl = SpeakerTimeline(
            [
                Turn(TimeInterval(0, 1), "  anna  smith "),
                Turn(TimeInterval(1, 2), "ANNA   SMITH"),
            ]
        )
        segs = subsegment([region(0, 2)], 1.0)
        p = project_labels(tl, segs, 0.5)
        assert p.k_prime == 1
        assert p.names == {1: "ANNA SMITH"}

    def test_k_prime_bounded_by_distinct_names(self):
        tl = SpeakerTimeline(
            [Turn(TimeInterval(i, i + 1.0), f"S{i % 3}") for i in range(6)]
        )
        segs = subsegment([region(0, 6)], 1.0)
        p = project_labels(tl, segs, 0.5)
        assert p.k_prime <= 3
        assert int((p.labels > 0).sum()) <= len(segs)


class TestPseudoLabeling:
    def test_rejects_mismatched_names(self):
        with pytest.raises(InvalidInput):
            PseudoLabeling(labels=np.array([0, 1, 2]), names={1: "A"})

    def test_rejects_non_contiguous_ids(self):
        with pytest.raises(InvalidInput):
            PseudoLabeling(labels=np.array([0, 2]), names={2: "A"})


def test_normalize_name():
    assert normalize_name("  bob\tthe   builder ") == "BOB THE BUILDER"


def test_rttm_round_trip(tmp_path):
    tl = SpeakerTimeline(
        [Turn(TimeInterval(0.0, 1.5), "A"), Turn(TimeInterval(2.25, 4.0), "B")]
    )
    path = tmp_path / "x.rttm"
    write_rttm(tl, "ep0", path)
    text = path.read_text()
    assert "SPEAKER ep0 1 0.000 1.500 <NA> <NA> A <NA> <NA>" in text
    back = read_rttm(path)
    assert [(t.interval.start, t.interval.end, t.speaker) for t in back.turns] == [
        (0.0, 1.5, "A"),
        (2.25, 4.0, "B"),
    ]
