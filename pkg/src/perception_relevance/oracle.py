"""Brute-force rollout of piecewise-constant acceleration profiles.

The simulator knows nothing about the closed forms; it only integrates the
phases it is given and measures the gap between the two vehicles. Phase
ends are located by stepping at ``dt`` and refining the crossing with a
bracketing root finder, so termination lands well inside one step of the
analytic time.

Each step uses the exact constant-acceleration update
``p += v*dt + a*dt**2/2; v += a*dt``. A semi-implicit update
(velocity first) drifts by ``a*T*dt/2`` over a horizon ``T``, which is too
much for the long closing phases that some criteria chain together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidProfile, NotApplicable
from .geometry import DISTANCE_EPS, VELOCITY_EPS, Vector2, radial_braking_accel
from .relevance import PAPER_PARAMS, CapabilityParams, merge_geometry
from .scenarios import FunctionalScenario, ObjectState, PairState, enumerate_hypotheses

SC = FunctionalScenario
Vec = tuple[float, float]

DT_MIN, DT_MAX = 1e-5, 1e-2
MAX_HORIZON = 3600.0
_CHUNK = 65536
_EPS_V = 1e-12


# ---------------------------------------------------------------------------
# profile vocabulary


@dataclass(frozen=True)
class Duration:
    seconds: float


@dataclass(frozen=True)
class AtTime:
    """Run until an absolute time (zero length if already past)."""

    t: float


@dataclass(frozen=True)
class AfterPhase:
    """Run until ``delay`` seconds after phase ``phase`` of ``vehicle`` ended
    (0 = ego, 1 = object)."""

    vehicle: int
    phase: int
    delay: float = 0.0


@dataclass(frozen=True)
class SpeedReaches:
    """Run until the velocity component along ``axis`` has risen to ``target``."""

    axis: Vec
    target: float


@dataclass(frozen=True)
class _SwitchCurve:
    # bang-bang switching: ends when sign * (q + vq|vq|/(2 accel)) >= 0
    axis: Vec
    origin: Vec
    accel: float
    sign: float


@dataclass(frozen=True)
class FirstOf:
    conditions: tuple

    def __init__(self, *conditions) -> None:
        object.__setattr__(self, "conditions", tuple(conditions))


Until = Union[Duration, AtTime, AfterPhase, SpeedReaches, FirstOf, _SwitchCurve, None]


@dataclass(frozen=True)
class Phase:
    accel: Vec
    until: Until = None


@dataclass(frozen=True)
class BrakeToStop:
    """Decelerate at ``magnitude`` until the velocity along ``axis`` is zero."""

    axis: Vec
    magnitude: float


@dataclass(frozen=True)
class MergeOnto:
    """Time-optimal bang-bang manoeuvre onto the line through ``origin``
    perpendicular to ``axis``, arriving there with zero velocity along it."""

    axis: Vec
    origin: Vec
    magnitude: float


Step = Union[Phase, BrakeToStop, MergeOnto]


@dataclass(frozen=True)
class PhaseProfile:
    phases: tuple[Step, ...] = ()

    def __init__(self, *phases: Step) -> None:
        object.__setattr__(self, "phases", tuple(phases))

    def check(self, a_max: float) -> None:
        for k, ph in enumerate(self.phases):
            mag = math.hypot(*ph.accel) if isinstance(ph, Phase) else ph.magnitude
            if not math.isfinite(mag) or mag > a_max * (1 + 1e-9):
                raise InvalidProfile(f"phase {k}: acceleration {mag:.6g} exceeds a_max = {a_max}")
            if not isinstance(ph, Phase) and mag <= 0:
                raise InvalidProfile(f"phase {k}: magnitude must be positive")

    def references(self) -> set[int]:
        out = set()
        for ph in self.phases:
            if isinstance(ph, Phase):
                for c in _flatten(ph.until):
                    if isinstance(c, AfterPhase):
                        out.add(c.vehicle)
        return out


def _flatten(cond) -> list:
    if cond is None:
        return []
    if isinstance(cond, FirstOf):
        return [c for sub in cond.conditions for c in _flatten(sub)]
    return [cond]


# ---------------------------------------------------------------------------
# simulation


@dataclass
class _Track:
    starts: list = field(default_factory=list)  # segment start times
    p: list = field(default_factory=list)
    v: list = field(default_factory=list)
    a: list = field(default_factory=list)
    phase_ends: list = field(default_factory=list)
    completion: float | None = 0.0

    def add(self, t0: float, p, v, a) -> None:
        self.starts.append(t0)
        self.p.append(np.asarray(p, float))
        self.v.append(np.asarray(v, float))
        self.a.append(np.asarray(a, float))

    def arrays(self):
        return np.array(self.starts), np.array(self.p), np.array(self.v), np.array(self.a)


def _state_fn(cond) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Event function of a state-based condition; the phase ends at its first
    non-negative value. ``p`` and ``v`` are ``(k, 2)`` arrays."""
    if isinstance(cond, SpeedReaches):
        ax = np.asarray(cond.axis, float)
        return lambda p, v: v @ ax - cond.target
    if isinstance(cond, _SwitchCurve):
        ax = np.asarray(cond.axis, float)
        org = np.asarray(cond.origin, float)

        def f(p, v):
            q = (p - org) @ ax
            vq = v @ ax
            return cond.sign * (q + vq * np.abs(vq) / (2.0 * cond.accel))

        return f
    raise TypeError(f"not a state condition: {cond!r}")


class _Sim:
    def __init__(self, dt: float, t_cap: float) -> None:
        self.dt = dt
        self.t_cap = t_cap
        self.tracks: dict[int, _Track] = {}
        self.events: list[tuple[float, int, int, str]] = []

    def time_bound(self, cond, t0: float) -> float:
        bound = math.inf
        for c in _flatten(cond):
            if isinstance(c, Duration):
                bound = min(bound, t0 + max(0.0, c.seconds))
            elif isinstance(c, AtTime):
                bound = min(bound, max(t0, c.t))
            elif isinstance(c, AfterPhase):
                tr = self.tracks.get(c.vehicle)
                if tr is None or c.phase >= len(tr.phase_ends):
                    raise InvalidProfile(f"phase reference {c} is not resolvable")
                end = tr.phase_ends[c.phase]
                if end is not None:  # otherwise the referenced phase outlasts the cap
                    bound = min(bound, max(t0, end + c.delay))
        return bound

    def run_phase(self, track: _Track, t0: float, p0, v0, a, cond) -> tuple[float, np.ndarray, np.ndarray, bool]:
        """Integrate one constant-acceleration phase; returns end time, end
        state and whether the phase met its own end condition."""
        a = np.asarray(a, float)
        bound = self.time_bound(cond, t0)
        t_end = min(bound, self.t_cap)
        done = bound <= self.t_cap
        fns = [_state_fn(c) for c in _flatten(cond) if isinstance(c, (SpeedReaches, _SwitchCurve))]
        if fns:
            hit = self._locate(p0, v0, a, fns, t_end - t0)
            if hit is not None:
                t_end, done = t0 + hit, True
        track.add(t0, p0, v0, a)
        tau = t_end - t0
        return t_end, p0 + v0 * tau + 0.5 * a * tau * tau, v0 + a * tau, done

    def _locate(self, p0, v0, a, fns, span: float) -> float | None:
        def state(tau):
            tau = np.atleast_1d(tau)[:, None]
            return p0 + v0 * tau + 0.5 * a * tau * tau, v0 + a * tau

        p, v = state(0.0)
        if any(f(p, v)[0] >= 0 for f in fns):
            return 0.0
        dt = self.dt
        n_total = int(math.ceil(span / dt))
        # step the state with the exact per-step update, chunk by chunk
        ps, vs = p0.copy(), v0.copy()
        k0 = 0
        chunk = 256
        while k0 < n_total:
            k1 = min(n_total, k0 + chunk)
            chunk = min(2 * chunk, _CHUNK)
            steps = np.arange(1, k1 - k0 + 1, dtype=float)[:, None] * dt
            p_chunk = ps + vs * steps + 0.5 * a * steps * steps
            v_chunk = vs + a * steps
            taus = k0 * dt + steps[:, 0]
            if k1 == n_total:
                # last sample sits exactly at the bound
                taus[-1] = span
                p_chunk[-1], v_chunk[-1] = (x[0] for x in state(span))
            for_hit = None
            for f in fns:
                vals = f(p_chunk, v_chunk)
                idx = np.flatnonzero(vals >= 0)
                if idx.size:
                    j = idx[0]
                    lo = taus[j - 1] if j > 0 else k0 * dt
                    hi = taus[j]
                    g = lambda t, f=f: float(f(*state(t))[0])  # noqa: E731
                    if g(lo) >= 0:  # stepped state lagged the analytic one
                        root = lo
                    elif g(hi) == 0:
                        root = hi
                    else:
                        root = brentq(g, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps)
                    for_hit = root if for_hit is None else min(for_hit, root)
            if for_hit is not None:
                return for_hit
            ps, vs = p_chunk[-1].copy(), v_chunk[-1].copy()
            k0 = k1
        return None

    def simulate(self, vid: int, obj: ObjectState, profile: PhaseProfile) -> _Track:
        track = _Track()
        self.tracks[vid] = track
        t = 0.0
        p = np.array(obj.r.as_tuple(), float)
        v = np.array(obj.v.as_tuple(), float)
        complete = True
        for k, step in enumerate(profile.phases):
            for ph in self._expand(step, p, v):
                t, p, v, done = self.run_phase(track, t, p, v, ph.accel, ph.until)
                if not done:
                    complete = False
            track.phase_ends.append(t if complete else None)
            self.events.append((t, vid, k, type(step).__name__))
        track.add(t, p, v, (0.0, 0.0))
        track.completion = t if complete else None
        return track

    @staticmethod
    def _expand(step: Step, p: np.ndarray, v: np.ndarray) -> list[Phase]:
        if isinstance(step, Phase):
            return [step]
        ax = np.asarray(step.axis, float)
        ax = ax / np.linalg.norm(ax)
        mag = step.magnitude
        if isinstance(step, BrakeToStop):
            u = float(v @ ax)
            if abs(u) <= _EPS_V:
                return []
            d = math.copysign(1.0, u)
            return [Phase(tuple(-d * mag * ax), SpeedReaches(tuple(-d * ax), 0.0))]
        # MergeOnto
        q = float((p - np.asarray(step.origin, float)) @ ax)
        vq = float(v @ ax)
        s = q + vq * abs(vq) / (2 * mag)
        if abs(s) <= 1e-12 and abs(vq) <= _EPS_V:
            return []
        d = -math.copysign(1.0, s) if s != 0 else -math.copysign(1.0, vq)
        out = []
        if s != 0:
            out.append(Phase(tuple(d * mag * ax), _SwitchCurve(tuple(ax), step.origin, mag, d)))
        out.append(Phase(tuple(-d * mag * ax), SpeedReaches(tuple(-d * ax), 0.0)))
        return out


def _positions(track: _Track, t: np.ndarray) -> np.ndarray:
    """Positions at the sorted times ``t``."""
    starts, p, v, a = track.arrays()
    cuts = np.searchsorted(t, starts, side="left")
    cuts[0] = 0
    out = np.empty((len(t), 2))
    for k in range(len(starts)):
        lo = cuts[k]
        hi = cuts[k + 1] if k + 1 < len(starts) else len(t)
        if hi <= lo:
            continue
        tau = (t[lo:hi] - starts[k])[:, None]
        out[lo:hi] = p[k] + v[k] * tau + 0.5 * a[k] * tau * tau
    return out


def _velocity_at(track: _Track, t: float) -> np.ndarray:
    starts, p, v, a = track.arrays()
    i = max(0, int(np.searchsorted(starts, t, side="right")) - 1)
    return v[i] + a[i] * (t - starts[i])


@dataclass
class RolloutResult:
    min_gap: float
    t_at_min: float
    t: np.ndarray
    gap: np.ndarray
    final_gap: float
    horizon: float
    phase_ends: tuple[tuple[float | None, ...], tuple[float | None, ...]]
    final_positions: tuple[Vec, Vec]
    final_velocities: tuple[Vec, Vec]

    @property
    def trace(self) -> np.ndarray:
        return np.column_stack([self.t, self.gap])


def rollout(
    pair: PairState,
    profiles: Sequence[PhaseProfile],
    dt: float = 1e-4,
    horizon: float | None = None,
    *,
    gap_axis: Vec | None = None,
    a_max: float | None = PAPER_PARAMS.a_max,
) -> RolloutResult:
    """Simulate both vehicles and sample the gap.

    ``horizon=None`` runs until every vehicle with a finite profile has
    completed it. With ``gap_axis`` the signed gap
    ``(r2 - r1) . axis - s1 - s2`` is measured (one-dimensional
    manoeuvres that may pass through each other), otherwise the Euclidean
    gap.
    """
    if not (DT_MIN <= dt <= DT_MAX):
        raise ValueError(f"dt must lie in [{DT_MIN}, {DT_MAX}], got {dt}")
    if horizon is not None and not (horizon >= 0 and math.isfinite(horizon)):
        raise ValueError("horizon must be finite and >= 0")
    if len(profiles) != 2:
        raise ValueError("need one profile per vehicle")
    if a_max is not None:
        for prof in profiles:
            prof.check(a_max)
    refs = [profiles[0].references() - {0}, profiles[1].references() - {1}]
    if refs[0] and refs[1]:
        raise InvalidProfile("profiles reference each other")
    order = (1, 0) if refs[0] else (0, 1)

    sim = _Sim(dt, horizon if horizon is not None else MAX_HORIZON)
    objs = (pair.ego, pair.ooi)
    for vid in order:
        sim.simulate(vid, objs[vid], profiles[vid])
    tracks = (sim.tracks[0], sim.tracks[1])

    if horizon is None:
        done = [tr.completion for tr in tracks if tr.completion is not None]
        if not done:
            raise InvalidProfile("no vehicle profile terminates; give an explicit horizon")
        horizon = max(done)

    grid = np.arange(0.0, horizon, dt)
    ev = [e[0] for e in sim.events if e[0] <= horizon]
    t = np.unique(np.concatenate([grid, np.asarray(ev, float), [horizon]]))
    r1 = _positions(tracks[0], t)
    r2 = _positions(tracks[1], t)
    if gap_axis is None:
        d = r2 - r1
        gap = np.hypot(d[:, 0], d[:, 1]) - pair.ego.s - pair.ooi.s
    else:
        ax = np.asarray(gap_axis, float)
        gap = (r2 - r1) @ (ax / np.linalg.norm(ax)) - pair.ego.s - pair.ooi.s
    i = int(np.argmin(gap))
    return RolloutResult(
        min_gap=float(gap[i]),
        t_at_min=float(t[i]),
        t=t,
        gap=gap,
        final_gap=float(gap[-1]),
        horizon=float(horizon),
        phase_ends=(tuple(tracks[0].phase_ends), tuple(tracks[1].phase_ends)),
        final_positions=(tuple(r1[-1]), tuple(r2[-1])),
        final_velocities=(tuple(_velocity_at(tracks[0], horizon)), tuple(_velocity_at(tracks[1], horizon))),
    )


# ---------------------------------------------------------------------------
# designated worst cases


@dataclass(frozen=True)
class WorstCase:
    """Profiles realising a criterion's worst case.

    ``pair`` may differ from the input pair: radial criteria only consider
    the velocity components along the connecting line.
    """

    pair: PairState
    profiles: tuple[PhaseProfile, PhaseProfile]
    gap_axis: Vec


def _radial_pair(pair: PairState) -> tuple[PairState, np.ndarray]:
    d0 = np.array(pair.d0.as_tuple())
    e = d0 / np.linalg.norm(d0)

    def proj(o: ObjectState) -> ObjectState:
        u = float(np.dot(o.v.as_tuple(), e))
        return ObjectState(o.id, o.r, Vector2(*(u * e)), o.s)

    return PairState(proj(pair.ego), proj(pair.ooi)), e


def worst_case_profile(
    scenario: FunctionalScenario, pair: PairState, p: CapabilityParams = PAPER_PARAMS
) -> WorstCase:
    scenario = FunctionalScenario(scenario)
    if pair.distance <= DISTANCE_EPS:
        raise NotApplicable("ego and object positions coincide")
    if scenario not in enumerate_hypotheses(pair):
        raise NotApplicable(f"{scenario} is not hypothesised for this pair")
    a = p.a_max
    if scenario is SC.TXT:
        return _merge_profile(pair, p)

    rp, e = _radial_pair(pair)
    et = tuple(e)
    neg = tuple(-e)
    a1rb = radial_braking_accel(pair.ego.v, pair.d0, p.a1_b)
    a2rb = radial_braking_accel(pair.ooi.v, pair.d0, p.a2_b)
    if scenario is SC.RTA:
        ego = PhaseProfile(Phase(tuple(a * e), Duration(p.t1_r)), BrakeToStop(et, a1rb))
        ooi = PhaseProfile(BrakeToStop(et, a))
    elif scenario is SC.RAT_PLUS:
        ego = PhaseProfile(BrakeToStop(et, a))
        ooi = PhaseProfile(Phase(tuple(-a * e), Duration(p.t2_r)), BrakeToStop(et, a2rb))
    elif scenario is SC.RAT_MINUS:
        v2r = abs(float(np.dot(pair.ooi.v.as_tuple(), e)))
        ego = PhaseProfile(Phase(tuple(-p.a1_g * e), SpeedReaches(neg, v2r)), BrakeToStop(et, a))
        ooi = PhaseProfile(Phase(tuple(-a * e), AfterPhase(0, 0, p.t2_r)), BrakeToStop(et, a2rb))
    else:  # RTT, RAA
        if a1rb <= 0:
            raise NotApplicable("ego cannot brake along the connecting line")
        ego = PhaseProfile(Phase(tuple(a * e), Duration(p.t1_r)), BrakeToStop(et, a1rb))
        ooi = PhaseProfile(Phase(tuple(-a * e), None))
    for prof in (ego, ooi):
        for st in prof.phases:
            if isinstance(st, BrakeToStop) and st.magnitude <= 0:
                raise NotApplicable("vehicle cannot brake along the connecting line")
    return WorstCase(rp, (ego, ooi), et)


def _merge_frame(pair: PairState):
    """Object heading, unit normal pointing from its path to the ego side,
    object speed."""
    rel = np.subtract(pair.ego.r.as_tuple(), pair.ooi.r.as_tuple())
    q0, vq0, x_long, vl0, v2s, ok = merge_geometry(
        rel[0], rel[1], pair.ego.v.x, pair.ego.v.y, pair.ooi.v.x, pair.ooi.v.y
    )
    if not ok or x_long <= 0:
        raise NotApplicable("merge hypothesis does not apply")
    par = np.array(pair.ooi.v.as_tuple()) / float(v2s)
    perp = np.array([-par[1], par[0]])
    y = float(rel @ perp)
    if abs(y) > DISTANCE_EPS:
        side = math.copysign(1.0, y)
    else:
        side = -1.0 if float(np.dot(pair.ego.v.as_tuple(), perp)) > VELOCITY_EPS else 1.0
    return par, side * perp, float(v2s)


def _merge_profile(pair: PairState, p: CapabilityParams) -> WorstCase:
    a, g = p.a_max, p.a1_g
    par, n, v2s = _merge_frame(pair)
    n_t, par_t = tuple(n), tuple(par)
    ego = PhaseProfile(
        Phase(tuple(a * n), FirstOf(Duration(p.t1_r), SpeedReaches(n_t, 0.0))),
        Phase((0.0, 0.0), AtTime(p.t1_r)),
        MergeOnto(n_t, pair.ooi.r.as_tuple(), g),
        Phase(tuple(g * par), SpeedReaches(par_t, v2s)),
        BrakeToStop(par_t, a),
    )
    ooi = PhaseProfile(
        Phase(tuple(a * par), AfterPhase(0, 3, p.t2_r)),
        BrakeToStop(par_t, p.a2_b),
    )
    return WorstCase(pair, (ego, ooi), tuple(-par))


def rollout_worst_case(
    scenario: FunctionalScenario, pair: PairState, p: CapabilityParams = PAPER_PARAMS, dt: float = 1e-4
) -> RolloutResult:
    wc = worst_case_profile(scenario, pair, p)
    return rollout(wc.pair, wc.profiles, dt, gap_axis=wc.gap_axis, a_max=p.a_max)
