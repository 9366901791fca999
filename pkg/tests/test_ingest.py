import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perception_relevance.errors import DuplicateId, FormatError, InvalidSpec, UnknownEgoId
from perception_relevance.ingest import (
    ALL_ORDERED,
    FixtureSpec,
    SingleEgo,
    TrackRecord,
    frames,
    load_track_arrays,
    pairs,
    parse_meta,
    parse_tracks,
    synth_fixture,
    to_object_state,
    write_tracks,
)

HEADER = "frame,id,x,y,width,height,xVelocity,yVelocity\n"


def parse(text, path="t.csv"):
    return list(parse_tracks(io.StringIO(text), path))


def test_parse_minimal_and_extra_columns():
    recs = parse("id,frame,x,y,width,height,xVelocity,yVelocity,laneId\n7,3,1.5,2,4.5,1.8,30,-0.5,2\n")
    assert recs == [TrackRecord(3, 7, 1.5, 2.0, 4.5, 1.8, 30.0, -0.5)]
    assert recs[0].line == 2


def test_parse_tolerates_bom_and_blank_lines():
    recs = parse("\ufeff" + HEADER + "\n1,1,0,0,1,1,0,0\n\n")
    assert len(recs) == 1


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("", 1, "no header"),
        ("frame,id,x,y\n1,1,0,0\n", 1, "width"),
        (HEADER + "1,1,0,0,1,1,0,0\n1,2,zero,0,1,1,0,0\n", 3, "non-numeric"),
        (HEADER + "1,1,0,0,1,1,0,nan\n", 2, "non-finite"),
        (HEADER + "1,1,0,0,-4.5,1,0,0\n", 2, "dimensions"),
        (HEADER + "-1,1,0,0,4.5,1,0,0\n", 2, "negative frame"),
        (HEADER + "1,1,0,0\n", 2, "fields"),
    ],
)
def test_format_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(FormatError) as exc:
        parse(text)
    assert exc.value.line == line
    assert fragment in str(exc.value)
    assert str(exc.value).startswith(f"t.csv:{line}:")


def test_duplicate_id_in_frame():
    text = HEADER + "1,1,0,0,1,1,0,0\n1,2,5,0,1,1,0,0\n1,1,9,0,1,1,0,0\n"
    with pytest.raises(DuplicateId) as exc:
        frames(parse(text))
    assert exc.value.line == 4
    with pytest.raises(DuplicateId) as exc:
        load_track_arrays(io.StringIO(text))
    assert exc.value.line == 4


def test_meta():
    assert parse_meta(io.StringIO("id,frameRate,speedLimit\n1,25,-1\n")).frame_rate == 25.0
    with pytest.raises(FormatError):
        parse_meta(io.StringIO("id,speedLimit\n1,-1\n"))
    with pytest.raises(FormatError):
        parse_meta(io.StringIO("frameRate\n0\n"))


@pytest.mark.parametrize(
    "rec, centre, radius",
    [
        (TrackRecord(1, 1, 10, 20, 4, 2, 30, 0), (12, 21), math.sqrt(5)),
        (TrackRecord(1, 1, 0, 0, 6, 8, 0, 0), (3, 4), 5.0),
    ],
)
def test_to_object_state(rec, centre, radius):
    s = to_object_state(rec)
    assert s.r.as_tuple() == pytest.approx(centre)
    assert s.s == pytest.approx(radius)
    assert s.v.as_tuple() == (rec.vx, rec.vy)


def test_frames_and_pairs():
    recs = [TrackRecord(2, 5, 0, 0, 1, 1, 0, 0), TrackRecord(1, 3, 0, 0, 1, 1, 0, 0), TrackRecord(2, 4, 9, 0, 1, 1, 0, 0)]
    grouped = frames(recs)
    assert [f for f, _ in grouped] == [1, 2]
    assert [s.id for s in grouped[1][1]] == [4, 5]
    states = grouped[1][1] + [to_object_state(TrackRecord(2, 9, 30, 0, 1, 1, 0, 0))]
    assert len(pairs(states, ALL_ORDERED)) == 6
    one = pairs(states, SingleEgo(5))
    assert [(p.ego.id, p.ooi.id) for p in one] == [(5, 4), (5, 9)]
    with pytest.raises(UnknownEgoId):
        pairs(states, SingleEgo(77))
    assert pairs(states[:1]) == []


def test_columnar_load_sorted():
    text = HEADER + "2,1,0,0,2,2,1,0\n1,2,0,0,2,2,0,0\n1,1,4,0,2,2,0,0\n"
    arr = load_track_arrays(io.StringIO(text))
    assert arr.frame.tolist() == [1, 1, 2]
    assert arr.id.tolist() == [1, 2, 1]
    assert arr.cx.tolist() == [5.0, 1.0, 1.0]
    uniq, starts = arr.frame_slices()
    assert uniq.tolist() == [1, 2] and starts.tolist() == [0, 2, 3]


@pytest.mark.parametrize("kind", ["following", "leading", "oncoming", "receding", "merge"])
def test_two_object_fixtures_place_gap(kind):
    recs = synth_fixture(FixtureSpec(kind, speed=30, gap=42.0, frames=3))
    assert len(recs) == 6
    (_, states), *_ = frames(recs)
    ego, obj = states
    if kind == "merge":
        assert ego.r.x - obj.r.x - 4.5 == pytest.approx(42.0)
    else:
        assert circle_gap(ego, obj) == pytest.approx(42.0)


def circle_gap(a, b):
    return math.dist(a.r.as_tuple(), b.r.as_tuple()) - a.s - b.s


def test_fixture_validation():
    with pytest.raises(InvalidSpec):
        FixtureSpec("parade")
    with pytest.raises(InvalidSpec):
        FixtureSpec("following", gap=-1)
    with pytest.raises(InvalidSpec):
        synth_fixture(FixtureSpec("following", speed=40, frames=500))


def test_mixed_fixture_exact_and_deterministic():
    spec = FixtureSpec("mixed", boxes=3000)
    a = synth_fixture(spec, seed=4)
    assert len(a) == 3000
    assert a == synth_fixture(spec, seed=4)
    assert a != synth_fixture(spec, seed=5)
    frames(a)  # no duplicates


@pytest.mark.parametrize("kind", ["following", "merge", "mixed"])
def test_round_trip(kind):
    recs = synth_fixture(FixtureSpec(kind, frames=4, boxes=2000), seed=1)
    buf = io.StringIO()
    write_tracks(recs, buf)
    assert parse(buf.getvalue()) == recs


finite = st.floats(-1e6, 1e6, allow_nan=False)
positive = st.floats(1e-3, 100)
record = st.builds(
    TrackRecord, st.integers(0, 10**6), st.integers(-(10**9), 10**9), finite, finite, positive, positive, finite, finite
)


@settings(max_examples=60)
@given(st.lists(record, max_size=20))
def test_round_trip_arbitrary(recs):
    buf = io.StringIO()
    write_tracks(recs, buf)
    assert parse(buf.getvalue()) == recs
