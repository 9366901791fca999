"""Command line: ``analyze``, ``certify`` and ``synth``.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from typing import Sequence

from .certify import certify_conservative
from .errors import DataError, InvalidParams, InvalidSpec, RelevanceError
from .ingest import ALL_ORDERED, FIXTURE_KINDS, FixtureSpec, SingleEgo, synth_fixture, write_tracks
from .relevance import PAPER_PARAMS, FormulaFidelity
from .report import RunConfig, analyze, load_params

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits with 2 by default
        raise _UsageError(f"{self.prog}: error: {message}")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _ego(text: str):
    if text == "all":
        return ALL_ORDERED
    try:
        return SingleEgo(int(text))
    except ValueError:
        raise argparse.ArgumentTypeError("expected 'all' or an integer id") from None


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="perception-relevance", description="Worst-case perception relevance of traffic participants.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="evaluate every sampled frame of a highD-style recording")
    a.add_argument("--tracks", required=True, type=Path)
    a.add_argument("--meta", type=Path, help="recording meta CSV; its frameRate sets the default stride")
    a.add_argument("--params", type=Path, help="flat 'key = value' parameter file")
    a.add_argument("--fidelity", choices=[f.value for f in FormulaFidelity], default="corrected")
    a.add_argument("--ego", type=_ego, default=ALL_ORDERED, help="'all' (default) or a track id")
    a.add_argument("--stride", type=_positive_int, help="analyse every n-th frame (default: 1 Hz)")
    a.add_argument("--out", type=Path, default=Path("out"))
    a.add_argument("--workers", type=_positive_int, default=1)

    c = sub.add_parser("certify", help="sample sub-worst-case behaviour against the closed forms")
    c.add_argument("--samples", type=_nonneg_int, default=10_000)
    c.add_argument("--seed", type=int, default=42)
    c.add_argument("--fidelity", choices=[f.value for f in FormulaFidelity], default="corrected")
    c.add_argument("--params", type=Path)
    c.add_argument("--dt", type=float, default=1e-3)
    c.add_argument("--workers", type=_positive_int, default=1)
    c.add_argument("--out", type=Path, help="also write the report to this file")

    s = sub.add_parser("synth", help="write a synthetic highD-style tracks file")
    s.add_argument("--kind", required=True, choices=FIXTURE_KINDS)
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--speed", type=float, default=30.0)
    s.add_argument("--speed2", type=float)
    s.add_argument("--gap", type=float, default=30.0)
    s.add_argument("--lateral-speed", type=float, default=1.0)
    s.add_argument("--frames", type=_positive_int, default=1)
    s.add_argument("--boxes", type=_positive_int, default=348_000)
    return ap


def _read_params(path: Path | None):
    if path is None:
        return PAPER_PARAMS, None
    return load_params(path.read_text(encoding="utf-8"), str(path))


def _cmd_analyze(ns) -> int:
    params, thresholds = _read_params(ns.params)
    kw = {} if thresholds is None else {"thresholds": thresholds}
    cfg = RunConfig(
        tracks=ns.tracks, out=ns.out, meta=ns.meta, params=params,
        fidelity=FormulaFidelity(ns.fidelity), ego_selection=ns.ego,
        frame_stride=ns.stride, workers=ns.workers, **kw,
    )
    t0 = time.perf_counter()
    summary = analyze(cfg)
    print(
        f"analysed {summary.frames_analyzed}/{summary.frames_total} frames, {summary.pairs} pairs, "
        f"{summary.counts['relevant']} relevant; outputs in {ns.out} ({time.perf_counter() - t0:.1f} s)"
    )
    return EXIT_OK


def _cmd_certify(ns) -> int:
    params, _ = _read_params(ns.params)
    rep = certify_conservative(ns.samples, ns.seed, params, FormulaFidelity(ns.fidelity), ns.dt, ns.workers)
    text = f"seed = {ns.seed}\nfidelity = {ns.fidelity}\n" + rep.to_text()
    sys.stdout.write(text)
    for v in rep.examples:
        sys.stdout.write(
            f"violation sample={v.index} scenario={v.scenario.value} d_min={v.d_min:.3f} "
            f"final_gap={v.final_gap:.3f} min_gap={v.min_gap:.3f}\n"
        )
    if ns.out is not None:
        ns.out.write_text(text, encoding="utf-8")
    return EXIT_OK


def _cmd_synth(ns) -> int:
    spec = FixtureSpec(
        kind=ns.kind, speed=ns.speed, speed2=ns.speed2, gap=ns.gap,
        lateral_speed=ns.lateral_speed, frames=ns.frames, boxes=ns.boxes,
    )
    recs = synth_fixture(spec, ns.seed)
    with open(ns.out, "w", encoding="utf-8", newline="") as fh:
        write_tracks(recs, fh)
    print(f"wrote {len(recs)} records to {ns.out}")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    handler = {"analyze": _cmd_analyze, "certify": _cmd_certify, "synth": _cmd_synth}[ns.command]
    try:
        return handler(ns)
    except InvalidSpec as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, InvalidParams, OSError, RelevanceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
