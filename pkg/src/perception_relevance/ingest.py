"""highD-style track files: parsing, grouping into frames, synthetic fixtures.

Boxes are given by their upper-left corner ``(x, y)`` and extents
``(width, height)`` along x and y. The y axis points down as in the image
frame; nothing downstream cares because only relative geometry is used.
"""

from __future__ import annotations

import csv
import math
from array import array
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .errors import DuplicateId, FormatError, InvalidSpec, UnknownEgoId
from .geometry import Vector2
from .scenarios import ObjectState, PairState

REQUIRED_COLUMNS = ("frame", "id", "x", "y", "width", "height", "xVelocity", "yVelocity")
SEGMENT_LENGTH = 420.0
FRAME_RATE = 25.0


@dataclass(frozen=True, slots=True)
class TrackRecord:
    frame: int
    id: int
    x: float
    y: float
    width: float
    height: float
    vx: float
    vy: float
    line: int | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.frame < 0:
            raise ValueError("frame must be >= 0")
        if not (self.width > 0 and self.height > 0):
            raise ValueError("box dimensions must be positive")


@dataclass(frozen=True)
class RecordingMeta:
    frame_rate: float
    segment_length_hint: float | None = None

    def __post_init__(self) -> None:
        if not (self.frame_rate > 0 and math.isfinite(self.frame_rate)):
            raise ValueError("frame_rate must be positive")


# ---------------------------------------------------------------------------
# parsing


def _header(reader, path: str | None) -> dict[str, int]:
    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        cols = {name.strip().lstrip("\ufeff"): i for i, name in enumerate(row)}
        missing = [c for c in REQUIRED_COLUMNS if c not in cols]
        if missing:
            raise FormatError(f"header lacks column(s) {', '.join(missing)}", reader.line_num, path)
        return cols
    raise FormatError("empty input: no header line", 1, path)


def parse_tracks(stream: IO[str], path: str | None = None) -> Iterator[TrackRecord]:
    """Yield records in file order; unknown columns are ignored."""
    reader = csv.reader(stream)
    cols = _header(reader, path)
    idx = [cols[c] for c in REQUIRED_COLUMNS]
    need = max(idx) + 1
    i_frame, i_id, i_x, i_y, i_w, i_h, i_vx, i_vy = idx
    for row in reader:
        line = reader.line_num
        if len(row) < need:
            if not row or all(not c.strip() for c in row):
                continue
            raise FormatError(f"expected at least {need} fields, got {len(row)}", line, path)
        try:
            frame = int(row[i_frame])
            oid = int(row[i_id])
            vals = (
                float(row[i_x]), float(row[i_y]), float(row[i_w]),
                float(row[i_h]), float(row[i_vx]), float(row[i_vy]),
            )
        except ValueError as exc:
            raise FormatError(f"non-numeric field ({exc})", line, path) from None
        if not all(math.isfinite(v) for v in vals):
            raise FormatError("non-finite numeric field", line, path)
        if frame < 0:
            raise FormatError(f"negative frame number {frame}", line, path)
        if vals[2] <= 0 or vals[3] <= 0:
            raise FormatError(f"box dimensions must be positive, got {vals[2]} x {vals[3]}", line, path)
        yield TrackRecord(frame, oid, *vals, line=line)


def parse_meta(stream: IO[str], path: str | None = None) -> RecordingMeta:
    """Read ``frameRate`` from a recording-meta CSV (first data row)."""
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        raise FormatError("empty input: no header line", 1, path)
    cols = {name.strip().lstrip("\ufeff"): i for i, name in enumerate(header)}
    if "frameRate" not in cols:
        raise FormatError("header lacks column frameRate", 1, path)
    for row in reader:
        if not row:
            continue
        try:
            rate = float(row[cols["frameRate"]])
        except (ValueError, IndexError):
            raise FormatError("frameRate is not a number", reader.line_num, path) from None
        if not rate > 0:
            raise FormatError("frameRate must be positive", reader.line_num, path)
        return RecordingMeta(rate)
    raise FormatError("no data row", reader.line_num + 1, path)


def to_object_state(rec: TrackRecord) -> ObjectState:
    """Box centre, velocity and circumscribed radius (half diagonal)."""
    return ObjectState(
        rec.id,
        Vector2(rec.x + rec.width / 2, rec.y + rec.height / 2),
        Vector2(rec.vx, rec.vy),
        0.5 * math.hypot(rec.width, rec.height),
    )


def frames(records: Iterable[TrackRecord]) -> list[tuple[int, list[ObjectState]]]:
    """Group by frame (ascending), states sorted by id within a frame."""
    grouped: dict[int, dict[int, TrackRecord]] = {}
    for rec in records:
        bucket = grouped.setdefault(rec.frame, {})
        if rec.id in bucket:
            raise DuplicateId(f"id {rec.id} appears twice in frame {rec.frame}", rec.line)
        bucket[rec.id] = rec
    return [
        (f, [to_object_state(grouped[f][i]) for i in sorted(grouped[f])])
        for f in sorted(grouped)
    ]


ALL_ORDERED = "all"


@dataclass(frozen=True)
class SingleEgo:
    id: int


def pairs(frame_states: Sequence[ObjectState], ego_selection: str | SingleEgo = ALL_ORDERED) -> list[PairState]:
    if isinstance(ego_selection, SingleEgo):
        egos = [s for s in frame_states if s.id == ego_selection.id]
        if not egos:
            raise UnknownEgoId(f"ego id {ego_selection.id} not present")
        ego = egos[0]
        return [PairState(ego, o) for o in frame_states if o is not ego]
    if ego_selection != ALL_ORDERED:
        raise ValueError(f"unknown ego selection {ego_selection!r}")
    return [PairState(e, o) for e in frame_states for o in frame_states if o is not e]


# ---------------------------------------------------------------------------
# columnar loading for batch analysis


@dataclass
class TrackArrays:
    """All records as columns, sorted by frame then id."""

    frame: np.ndarray
    id: np.ndarray
    cx: np.ndarray
    cy: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    s: np.ndarray

    def __len__(self) -> int:
        return len(self.frame)

    def frame_slices(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique frames and the start offsets of their rows (plus the end)."""
        uniq, starts = np.unique(self.frame, return_index=True)
        return uniq, np.append(starts, len(self.frame))


def load_track_arrays(stream: IO[str], path: str | None = None) -> TrackArrays:
    cols = {k: array("d") for k in ("x", "y", "w", "h", "vx", "vy")}
    fr, ids, lines = array("q"), array("q"), array("q")
    for r in parse_tracks(stream, path):
        fr.append(r.frame)
        ids.append(r.id)
        lines.append(r.line)
        cols["x"].append(r.x)
        cols["y"].append(r.y)
        cols["w"].append(r.width)
        cols["h"].append(r.height)
        cols["vx"].append(r.vx)
        cols["vy"].append(r.vy)
    f = np.frombuffer(fr, dtype=np.int64) if len(fr) else np.zeros(0, np.int64)
    i = np.frombuffer(ids, dtype=np.int64) if len(ids) else np.zeros(0, np.int64)
    ln = np.frombuffer(lines, dtype=np.int64) if len(lines) else np.zeros(0, np.int64)
    c = {k: (np.frombuffer(v, dtype=float) if len(v) else np.zeros(0)) for k, v in cols.items()}
    order = np.lexsort((i, f))
    f, i, ln = f[order], i[order], ln[order]
    dup = np.flatnonzero((f[1:] == f[:-1]) & (i[1:] == i[:-1]))
    if dup.size:
        k = dup[0]
        raise DuplicateId(f"id {i[k]} appears twice in frame {f[k]}", int(max(ln[k], ln[k + 1])), path)
    w, h = c["w"][order], c["h"][order]
    return TrackArrays(
        frame=f, id=i,
        cx=c["x"][order] + w / 2, cy=c["y"][order] + h / 2,
        vx=c["vx"][order], vy=c["vy"][order],
        s=0.5 * np.hypot(w, h),
    )


# ---------------------------------------------------------------------------
# writing and synthetic fixtures


def write_tracks(records: Iterable[TrackRecord], stream: IO[str]) -> None:
    stream.write(",".join(REQUIRED_COLUMNS) + "\n")
    for r in records:
        stream.write(f"{r.frame},{r.id},{r.x!r},{r.y!r},{r.width!r},{r.height!r},{r.vx!r},{r.vy!r}\n")


FIXTURE_KINDS = ("following", "leading", "oncoming", "receding", "merge", "mixed")
CAR = (4.5, 1.8)
LANE_WIDTH = 3.75
# lane centres (image y grows downwards): upper carriageway drives towards
# -x, lower towards +x; the first lane listed is the slow, right-hand lane
UPPER_LANES = (9.9, 13.65, 17.4)
LOWER_LANES = (29.4, 25.65, 21.9)


@dataclass(frozen=True)
class FixtureSpec:
    """Synthetic recording request.

    Two-object kinds place the ego (id 1) and the object (id 2) so that
    ``gap`` is the gap between their circumscribed circles, or the
    longitudinal gap for ``merge``. ``mixed`` generates multi-lane traffic
    in both directions with exactly ``boxes`` records.
    """

    kind: str
    speed: float = 30.0
    speed2: float | None = None
    gap: float = 30.0
    lateral_speed: float = 1.0
    frames: int = 1
    boxes: int = 348_000
    frame_rate: float = FRAME_RATE

    def __post_init__(self) -> None:
        if self.kind not in FIXTURE_KINDS:
            raise InvalidSpec(f"unknown fixture kind {self.kind!r}; choose from {', '.join(FIXTURE_KINDS)}")
        if self.speed < 0 or (self.speed2 is not None and self.speed2 < 0) or self.lateral_speed < 0:
            raise InvalidSpec("speeds must be >= 0")
        if self.gap < 0:
            raise InvalidSpec("gap must be >= 0")
        if self.frames < 1 or self.boxes < 1 or not self.frame_rate > 0:
            raise InvalidSpec("frames, boxes and frame_rate must be positive")


def _box(frame: int, oid: int, cx: float, cy: float, size, vx: float, vy: float) -> TrackRecord:
    w, h = size
    return TrackRecord(frame, oid, cx - w / 2, cy - h / 2, w, h, vx, vy)


def _two_objects(spec: FixtureSpec) -> list[TrackRecord]:
    v1 = spec.speed
    v2 = spec.speed if spec.speed2 is None else spec.speed2
    s = 0.5 * math.hypot(*CAR)
    span = spec.gap + 2 * s
    y = LOWER_LANES[1]
    x0 = 60.0
    # (x, y, vx, vy) of ego and object
    ego, obj = {
        "following": ((x0, y, v1, 0.0), (x0 + span, y, v2, 0.0)),
        "leading": ((x0 + span, y, v1, 0.0), (x0, y, v2, 0.0)),
        "oncoming": ((x0, y, v1, 0.0), (x0 + span, y, -v2, 0.0)),
        "receding": ((x0, y, -v1, 0.0), (x0 + span, y, v2, 0.0)),
        "merge": ((x0 + spec.gap + CAR[0], y - LANE_WIDTH, v1, spec.lateral_speed), (x0, y, v2, 0.0)),
    }[spec.kind]
    out = []
    dt = 1.0 / spec.frame_rate
    for k in range(spec.frames):
        t = k * dt
        for oid, (x, yy, vx, vy) in ((1, ego), (2, obj)):
            cx, cy = x + vx * t, yy + vy * t
            if not (0.0 <= cx <= SEGMENT_LENGTH):
                raise InvalidSpec(f"object {oid} leaves the {SEGMENT_LENGTH:g} m segment in frame {k}")
            out.append(_box(k + 1, oid, cx, cy, CAR, vx, vy))
    return out


def _mixed(spec: FixtureSpec, seed: int) -> list[TrackRecord]:
    rng = np.random.default_rng(seed)
    rate = spec.frame_rate
    lanes = []
    base = spec.speed
    for direction, centres in ((-1.0, UPPER_LANES), (1.0, LOWER_LANES)):
        for rank, yc in enumerate(centres):
            speed = base * (0.78, 1.0, 1.2)[rank] * rng.uniform(0.95, 1.05)
            lanes.append((direction, yc, speed, rank))
    # enough simulated time for the requested number of boxes, with margin
    per_lane = [SEGMENT_LENGTH / (sp * 2.6) for _, _, sp, _ in lanes]
    duration = spec.boxes / (sum(per_lane) * rate) * 1.5 + 30.0

    vehicles = []  # (entry time, lane index, length, width, weave params)
    for li, (direction, yc, speed, rank) in enumerate(lanes):
        t = -SEGMENT_LENGTH / speed
        prev_len = 0.0
        while t < duration:
            truck = rng.random() < (0.35 if rank == 0 else 0.03)
            length = rng.uniform(12.0, 18.0) if truck else rng.uniform(4.0, 5.2)
            width = 2.5 if truck else rng.uniform(1.7, 2.05)
            amp = rng.uniform(0.0, 0.25)
            period = rng.uniform(6.0, 14.0)
            phase = rng.uniform(0, 2 * math.pi)
            min_head = (prev_len + length) / 2 / speed + 0.6
            t += min_head + rng.exponential(1.7)
            vehicles.append((t, li, length, width, amp, period, phase))
            prev_len = length

    n_frames = int(duration * rate)
    rows = []
    for vid, (t_in, li, length, width, amp, period, phase) in enumerate(vehicles, start=1):
        direction, yc, speed, _ = lanes[li]
        t_out = t_in + SEGMENT_LENGTH / speed
        k0 = max(1, math.ceil(t_in * rate))
        k1 = min(n_frames, math.floor(t_out * rate))
        if k1 < k0:
            continue
        k = np.arange(k0, k1 + 1)
        t = k / rate
        xc = (t - t_in) * speed
        if direction < 0:
            xc = SEGMENT_LENGTH - xc
        om = 2 * math.pi / period
        yc_t = yc + amp * np.sin(om * t + phase)
        vy = amp * om * np.cos(om * t + phase)
        rows.append((k, np.full(k.size, vid), np.round(xc - length / 2, 2), np.round(yc_t - width / 2, 2),
                     np.full(k.size, round(length, 2)), np.full(k.size, round(width, 2)),
                     np.full(k.size, round(direction * speed, 2)), np.round(vy, 2)))
    cols = [np.concatenate([r[j] for r in rows]) for j in range(8)]
    order = np.lexsort((cols[1], cols[0]))
    cols = [c[order] for c in cols]
    if len(cols[0]) < spec.boxes:
        raise InvalidSpec("generated traffic too sparse for the requested box count")
    cols = [c[: spec.boxes] for c in cols]
    # highD lists tracks id-major
    order = np.lexsort((cols[0], cols[1]))
    f, i, x, y, w, h, vx, vy = (c[order] for c in cols)
    return [
        TrackRecord(int(f[j]), int(i[j]), float(x[j]), float(y[j]), float(w[j]), float(h[j]), float(vx[j]), float(vy[j]))
        for j in range(len(f))
    ]


def synth_fixture(spec: FixtureSpec, seed: int = 0) -> list[TrackRecord]:
    """Deterministic synthetic records on a 420 m segment."""
    if spec.kind == "mixed":
        return _mixed(spec, seed)
    return _two_objects(spec)
