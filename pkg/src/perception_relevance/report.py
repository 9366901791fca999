"""Batch analysis of a recording: per-pair table, distance ECDFs, summary."""

from __future__ import annotations

import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .baselines import BaselineThresholds, baseline_arrays
from .ecdf import Ecdf, ecdf_build, write_ecdf_csv
from .errors import InvalidParams, UnknownEgoId
from .ingest import ALL_ORDERED, SingleEgo, TrackArrays, load_track_arrays, parse_meta
from .relevance import PAPER_PARAMS, CapabilityParams, FormulaFidelity, evaluate_arrays
from .scenarios import CONSTRAINING
from .svgplot import plot_ecdf_svg

DEFAULT_STRIDE = 25
SCENARIO_NAMES = tuple(s.value for s in CONSTRAINING)
CATEGORIES = ("all", "relevant", *SCENARIO_NAMES, "headway", "headway_relevant", "ttc")
PLOTTED = ("all", "relevant", *SCENARIO_NAMES, "headway", "ttc")
PAIR_COLUMNS = (
    "frame", "ego_id", "ooi_id", "distance_m", "gap_m", "scenarios",
    *(f"dmin_{s}" for s in SCENARIO_NAMES),
    "relevant", "overlap", "ttc_s", "ttc_relevant", "headway_m", "headway_relevant",
)


@dataclass(frozen=True)
class RunConfig:
    tracks: Path
    out: Path
    meta: Path | None = None
    params: CapabilityParams = PAPER_PARAMS
    thresholds: BaselineThresholds = BaselineThresholds()
    fidelity: FormulaFidelity = FormulaFidelity.CORRECTED
    ego_selection: str | SingleEgo = ALL_ORDERED
    frame_stride: int | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        if self.frame_stride is not None and self.frame_stride < 1:
            raise ValueError("frame stride must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


def load_params(text: str, source: str = "params") -> tuple[CapabilityParams, BaselineThresholds]:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    cap_keys = {f.name for f in fields(CapabilityParams)}
    thr_keys = {f.name for f in fields(BaselineThresholds)}
    cap: dict[str, float] = {}
    thr: dict[str, float] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip()
        if not sep:
            raise InvalidParams(f"{source}:{n}: expected 'key = value'")
        try:
            num = float(val.strip())
        except ValueError:
            raise InvalidParams(f"{source}:{n}: value of {key} is not a number") from None
        if key in cap_keys:
            cap[key] = num
        elif key in thr_keys:
            thr[key] = num
        else:
            raise InvalidParams(f"{source}:{n}: unknown key {key!r}")
    return CapabilityParams(**cap), BaselineThresholds(**thr)


# ---------------------------------------------------------------------------
# per-frame work


@dataclass
class _Chunk:
    rows: str = ""
    samples: dict = field(default_factory=lambda: {c: [] for c in CATEGORIES})
    hypothesized: np.ndarray = field(default_factory=lambda: np.zeros(len(CONSTRAINING), dtype=np.int64))
    pairs: int = 0
    overlaps: int = 0


def _num(x: np.ndarray, digits: int = 4) -> list[str]:
    return ["" if v != v else f"{v:.{digits}f}" for v in x.tolist()]


def _frame_pairs(n: int, ego_index: int | None) -> tuple[np.ndarray, np.ndarray]:
    if ego_index is None:
        i, j = np.nonzero(~np.eye(n, dtype=bool))
        return i, j
    j = np.array([k for k in range(n) if k != ego_index], dtype=int)
    return np.full(j.size, ego_index), j


def _analyze_frames(args) -> _Chunk:
    cols, frame_ids, bounds, ego_id, p, thr, fidelity = args
    cx, cy, vx, vy, s, ids = cols
    out = _Chunk()
    buf = io.StringIO()
    for f, lo, hi in zip(frame_ids, bounds[:-1], bounds[1:]):
        fid = ids[lo:hi]
        ego_index = None
        if ego_id is not None:
            hit = np.flatnonzero(fid == ego_id)
            if hit.size == 0:
                continue
            ego_index = int(hit[0])
        i, j = _frame_pairs(hi - lo, ego_index)
        if i.size == 0:
            continue
        i, j = i + lo, j + lo
        r1 = np.column_stack([cx[i], cy[i]])
        v1 = np.column_stack([vx[i], vy[i]])
        r2 = np.column_stack([cx[j], cy[j]])
        v2 = np.column_stack([vx[j], vy[j]])
        res = evaluate_arrays(r1, v1, s[i], r2, v2, s[j], p, fidelity)
        base = baseline_arrays(r1, v1, s[i], r2, v2, s[j], thr)

        trig = res.triggered
        dist = res.distance
        smp = out.samples
        smp["all"].append(dist)
        smp["relevant"].append(dist[res.relevant])
        for k, name in enumerate(SCENARIO_NAMES):
            smp[name].append(dist[trig[:, k]])
        smp["headway"].append(base.headway_m)
        smp["headway_relevant"].append(dist[base.headway_relevant])
        smp["ttc"].append(dist[base.ttc_relevant])
        out.hypothesized += res.hypothesized.sum(axis=0)
        out.pairs += int(i.size)
        out.overlaps += int(res.overlap.sum())

        names = ["|".join(n for n, m in zip(SCENARIO_NAMES, row) if m) for row in res.hypothesized.tolist()]
        dcols = [_num(res.d_min[:, k], 3) for k in range(len(CONSTRAINING))]
        ttc = ["inf" if v == np.inf else f"{v:.4f}" for v in base.ttc_s.tolist()]
        table = zip(
            ids[i].tolist(), ids[j].tolist(), _num(dist), _num(res.gap0), names, *dcols,
            res.relevant.astype(int).tolist(), res.overlap.astype(int).tolist(), ttc,
            base.ttc_relevant.astype(int).tolist(), _num(base.headway_m),
            base.headway_relevant.astype(int).tolist(),
        )
        prefix = f"{int(f)},"
        buf.write("".join(prefix + ",".join(map(str, row)) + "\n" for row in table))
    out.rows = buf.getvalue()
    out.samples = {
        c: (np.concatenate(v) if v else np.zeros(0)) for c, v in out.samples.items()
    }
    return out


@dataclass
class RunSummary:
    frames_total: int
    frames_analyzed: int
    stride: int
    pairs: int
    overlaps: int
    counts: dict
    hypothesized: dict
    samples: dict

    def to_text(self, config: RunConfig) -> str:
        p, t = config.params, config.thresholds
        lines = [
            f"tracks = {Path(config.tracks).name}",
            f"fidelity = {FormulaFidelity(config.fidelity).value}",
            f"ego = {config.ego_selection.id if isinstance(config.ego_selection, SingleEgo) else 'all'}",
            f"frame_stride = {self.stride}",
            f"frames_total = {self.frames_total}",
            f"frames_analyzed = {self.frames_analyzed}",
            f"pairs = {self.pairs}",
            f"overlapping_pairs = {self.overlaps}",
        ]
        for f in fields(CapabilityParams):
            lines.append(f"param.{f.name} = {getattr(p, f.name)!r}")
        for f in fields(BaselineThresholds):
            lines.append(f"param.{f.name} = {getattr(t, f.name)!r}")
        for name in SCENARIO_NAMES:
            lines.append(f"hypothesized.{name} = {self.hypothesized[name]}")
        for c in CATEGORIES:
            lines.append(f"count.{c} = {self.counts[c]}")
        for c in CATEGORIES:
            v = self.samples[c]
            if len(v):
                q = np.quantile(v, [0.5, 0.9, 1.0])
                lines.append(f"distance_m.{c} = median {q[0]:.3f}, p90 {q[1]:.3f}, max {q[2]:.3f}")
        return "\n".join(lines) + "\n"


def run_frames(data: TrackArrays, config: RunConfig, stride: int) -> tuple[str, RunSummary]:
    uniq, bounds = data.frame_slices()
    pick = np.arange(0, len(uniq), stride)
    ego_id = None
    if isinstance(config.ego_selection, SingleEgo):
        ego_id = config.ego_selection.id
        if not np.any(data.id == ego_id):
            raise UnknownEgoId(f"ego id {ego_id} does not occur in the recording", path=str(config.tracks))
    cols = (data.cx, data.cy, data.vx, data.vy, data.s, data.id)
    fidelity = FormulaFidelity(config.fidelity)

    def job(sel: np.ndarray):
        # rows of the selected frames, re-based so the worker gets compact arrays
        starts, ends = bounds[sel], bounds[sel + 1]
        take = np.concatenate([np.arange(a, b) for a, b in zip(starts, ends)]) if sel.size else np.zeros(0, int)
        local = np.concatenate([[0], np.cumsum(ends - starts)])
        sub = tuple(c[take] for c in cols)
        return (sub, uniq[sel], local, ego_id, config.params, config.thresholds, fidelity)

    n_jobs = 1 if config.workers == 1 else min(len(pick), config.workers * 4) or 1
    parts = np.array_split(pick, n_jobs)
    jobs = [job(part) for part in parts]
    if config.workers == 1:
        chunks = [_analyze_frames(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            chunks = list(pool.map(_analyze_frames, jobs))

    samples = {c: np.concatenate([ch.samples[c] for ch in chunks]) for c in CATEGORIES}
    hyp = sum((ch.hypothesized for ch in chunks), np.zeros(len(CONSTRAINING), dtype=np.int64))
    summary = RunSummary(
        frames_total=len(uniq),
        frames_analyzed=len(pick),
        stride=stride,
        pairs=sum(ch.pairs for ch in chunks),
        overlaps=sum(ch.overlaps for ch in chunks),
        counts={c: int(samples[c].size) for c in CATEGORIES},
        hypothesized={n: int(h) for n, h in zip(SCENARIO_NAMES, hyp)},
        samples=samples,
    )
    return "".join(ch.rows for ch in chunks), summary


def analyze(config: RunConfig) -> RunSummary:
    """Run the whole pipeline and write ``pairs.csv``, ``ecdf_<category>.csv``,
    ``summary.txt`` and ``ecdf.svg`` into ``config.out``."""
    tracks = str(config.tracks)
    stride = config.frame_stride
    if stride is None:
        stride = DEFAULT_STRIDE
        if config.meta is not None:
            with open(config.meta, encoding="utf-8", newline="") as fh:
                meta = parse_meta(fh, str(config.meta))
            stride = max(1, int(round(meta.frame_rate)))
    with open(tracks, encoding="utf-8", newline="") as fh:
        data = load_track_arrays(fh, tracks)
    rows, summary = run_frames(data, config, stride)

    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "pairs.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(PAIR_COLUMNS) + "\n")
        fh.write(rows)
    curves: list[tuple[str, Ecdf]] = []
    for c in CATEGORIES:
        v = summary.samples[c]
        e = ecdf_build(v) if v.size else None
        with open(out / f"ecdf_{c}.csv", "w", encoding="utf-8", newline="") as fh:
            write_ecdf_csv(e, fh)
        if e is not None and c in PLOTTED:
            curves.append((c, e))
    svg = plot_ecdf_svg(curves, title=f"ECDF of distances ({Path(tracks).name})", allow_empty=True)
    (out / "ecdf.svg").write_text(svg, encoding="utf-8")
    (out / "summary.txt").write_text(summary.to_text(config), encoding="utf-8")
    return summary


def dominance_fraction(lower: np.ndarray, upper: np.ndarray, levels: np.ndarray | None = None) -> float:
    """Share of matched quantile levels at which ``lower`` lies at or below ``upper``."""
    if levels is None:
        levels = np.linspace(0.01, 0.99, 99)
    lo = ecdf_build(lower).quantile(levels)
    hi = ecdf_build(upper).quantile(levels)
    return float(np.mean(lo <= hi))


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)
