"""Worst-case minimum distances per functional scenario and the pair verdict.

All ``min_distance_*`` functions accept floats or numpy arrays (element-wise
evaluation); the per-frame batch evaluator relies on that. Speeds passed to
the radial criteria are magnitudes of radial components, gaps are centre
distances minus both size radii.

Sign conventions for the radial one-dimensional model: positive position
along the connecting line points from ego to object, "towards" speeds are
positive when the vehicle closes the gap.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import DegenerateGeometry, InvalidParams, NotApplicable
from .geometry import DISTANCE_EPS, VELOCITY_EPS, lane_frame
from .scenarios import CONSTRAINING, FunctionalScenario, PairState, radial_masks, sign_class

SC = FunctionalScenario


class FormulaFidelity(str, enum.Enum):
    """Which variant of the printed closed forms to evaluate.

    ``CORRECTED`` evaluates the kinematically consistent forms that the
    rollout oracle reproduces; ``PAPER_LITERAL`` keeps the typeset formulas
    (missing square in the oncoming case, the lane-change timing and final
    parameters of the merge case) for side-by-side comparison.
    """

    CORRECTED = "corrected"
    PAPER_LITERAL = "literal"


@dataclass(frozen=True)
class CapabilityParams:
    """Reaction times [s] and accelerations [m/s^2] behind every criterion.

    Defaults: 10 m/s^2 friction limit, 7 m/s^2 guaranteed braking for both
    vehicles, 0.5 m/s^2 guaranteed ego acceleration, 1.5 s reaction time.
    """

    a_max: float = 10.0
    a1_b: float = 7.0
    a2_b: float = 7.0
    a1_g: float = 0.5
    t1_r: float = 1.5
    t2_r: float = 1.5

    def __post_init__(self) -> None:
        for name in ("a_max", "a1_b", "a2_b", "a1_g"):
            val = getattr(self, name)
            if not np.isfinite(val) or val <= 0:
                raise InvalidParams(f"{name} must be a positive finite acceleration, got {val}")
        for name in ("t1_r", "t2_r"):
            val = getattr(self, name)
            if not np.isfinite(val) or val < 0:
                raise InvalidParams(f"{name} must be a finite non-negative time, got {val}")
        for name in ("a1_b", "a2_b", "a1_g"):
            if getattr(self, name) > self.a_max:
                raise InvalidParams(f"{name} exceeds a_max ({getattr(self, name)} > {self.a_max})")

    def swapped(self) -> CapabilityParams:
        """Exchange the roles of ego and object (reaction time and braking)."""
        return replace(self, t1_r=self.t2_r, a1_b=self.a2_b, t2_r=self.t1_r, a2_b=self.a1_b)


PAPER_PARAMS = CapabilityParams()


# ---------------------------------------------------------------------------
# kinematic primitives


def const_accel_position(r0, v0, a, t):
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be >= 0")
    return r0 + v0 * t + 0.5 * a * t * t


def const_accel_velocity(v0, a, t):
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be >= 0")
    return v0 + a * t


def braking_distance(v, a_b):
    if np.any(np.asarray(v) < 0):
        raise ValueError("v must be >= 0")
    if np.any(np.asarray(a_b) <= 0):
        raise ValueError("a_b must be > 0")
    return v * v / (2.0 * a_b)


def _div(num, den):
    """``num / den`` where a zero denominator yields +-inf (or 0 for 0/0)."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den != 0, num / np.where(den != 0, den, 1.0), np.sign(num) * np.inf)
    out = np.where((den == 0) & (num == 0), 0.0, out)
    return out[()] if out.ndim == 0 else out


def _check_brake(a_rb, cap: float, name: str) -> None:
    a = np.asarray(a_rb)
    if np.any(~np.isfinite(a)) or np.any(a <= 0):
        raise InvalidParams(f"{name} must be a positive acceleration")
    if np.any(a > cap * (1 + 1e-12)):
        raise InvalidParams(f"{name} exceeds the vehicle's braking capability {cap}")


def _check_speeds(*speeds) -> None:
    for v in speeds:
        if np.any(np.asarray(v) < 0):
            raise ValueError("radial speed magnitudes must be >= 0")


# ---------------------------------------------------------------------------
# unchecked closed forms (shared by scalar API and batch evaluation)


def _follow(gap0, v_lead, v_rear, a_rb, t_r, a_max):
    # Rear vehicle accelerates at a_max during t_r then brakes at a_rb to a
    # stop; the lead vehicle brakes at a_max. Gap once both are at rest.
    w = v_rear + t_r * a_max
    return (
        gap0
        + v_lead * v_lead / (2.0 * a_max)
        - v_rear * t_r
        - 0.5 * a_max * t_r * t_r
        - _div(w * w, 2.0 * a_rb)
    )


def _oncoming(gap0, u1, u2, a1rb, p: CapabilityParams, fidelity: FormulaFidelity):
    # u1, u2: signed speeds towards each other (negative = moving apart).
    a, tr = p.a_max, p.t1_r
    w = u1 + tr * a
    if fidelity is FormulaFidelity.PAPER_LITERAL:
        tb = tr + _div(w, a1rb)
        return gap0 - u1 * tr - 0.5 * a * tr * tr - _div(w * w, 2.0 * a1rb) - u2 * tb - 0.5 * a * tb
    tb = tr + _div(np.abs(w), a1rb)
    with np.errstate(invalid="ignore"):
        d = (
            gap0
            - u1 * tr
            - 0.5 * a * tr * tr
            - _div(w * np.abs(w), 2.0 * a1rb)
            - u2 * tb
            - 0.5 * a * tb * tb
        )
    # ego cannot brake along the line at all: it never comes to rest there
    return np.where(np.isnan(d), -np.inf, d)[()]


def _accelerate_then_follow(gap0, v1, v2, a2_rb, p: CapabilityParams, hold=0.0):
    """Ego (ahead, slower) keeps its speed for ``hold``, then accelerates at
    ``a1_g`` up to the object's speed while the object closes in at
    ``a_max``; afterwards the follower case with the object as rear vehicle.
    """
    g, a = p.a1_g, p.a_max
    t_acc = np.maximum(0.0, (v2 - v1) / g)
    t_d = hold + t_acc
    gap_d = gap0 + v1 * t_d + 0.5 * g * t_acc * t_acc - v2 * t_d - 0.5 * a * t_d * t_d
    v2_d = v2 + a * t_d
    return _follow(gap_d, v2, v2_d, a2_rb, p.t2_r, a)


def time_to_rest_at_origin(x, v, accel):
    """Minimum time for a double integrator with ``|u| <= accel`` to reach
    position 0 with velocity 0 from ``(x, v)`` (bang-bang control)."""
    s = x + v * np.abs(v) / (2.0 * accel)
    above = (v + 2.0 * np.sqrt(np.maximum(0.0, 0.5 * v * v + accel * x))) / accel
    below = (-v + 2.0 * np.sqrt(np.maximum(0.0, 0.5 * v * v - accel * x))) / accel
    return np.where(s > 0, above, np.where(s < 0, below, np.abs(v) / accel))[()]


def _merge(q0, vq0, gap_l0, vl0, v2, p: CapabilityParams, fidelity: FormulaFidelity):
    """Lane-frame merge criterion.

    ``q0`` lateral offset of the ego from the object's path (>= 0),
    ``vq0`` lateral ego speed (<= 0 means towards the path), ``gap_l0``
    longitudinal gap (ego ahead), ``vl0`` ego longitudinal speed and ``v2``
    object speed along its path.
    """
    a, g, tr = p.a_max, p.a1_g, p.t1_r
    t_lat = np.where(vq0 < 0, np.minimum(tr, -vq0 / a), 0.0)
    r_s = q0 + vq0 * t_lat + 0.5 * a * t_lat * t_lat
    v_s = vq0 + a * t_lat
    if fidelity is FormulaFidelity.PAPER_LITERAL:
        t_c = v_s / a + np.sqrt(np.maximum(r_s, 0.0) / g)
        t_h = t_c - v_s / g
        t_d = tr + t_h + np.maximum(0.0, (v2 - vl0) / g)
        gap_d = gap_l0 + (vl0 - v2) * t_d + 0.5 * (g - a) * t_d * t_d
        v2_d = v2 + a * t_d
        w = v2_d + tr * a
        return (gap_d + v2 * v2 / (2 * a) - v2_d * tr - 0.5 * a * tr * tr - w * w / (2 * g))[()]
    t_h = time_to_rest_at_origin(r_s, v_s, g)
    return _accelerate_then_follow(gap_l0, vl0, v2, p.a2_b, p, hold=tr + t_h)


def merge_geometry(rel_x, rel_y, v1x, v1y, v2x, v2y):
    """Lane-frame quantities for the merge hypothesis (element-wise).

    ``rel`` is ego position minus object position. Returns
    ``(q0, vq0, x_long, vl0, v2_speed, applicable)`` where ``applicable``
    encodes the merge gating (ego lateral velocity not pointing away from
    the object's path) and a defined object heading.
    """
    v2s = np.hypot(v2x, v2y)
    moving = v2s > VELOCITY_EPS
    safe = np.where(moving, v2s, 1.0)
    px, py = v2x / safe, v2y / safe
    nx, ny = -py, px
    y = rel_x * nx + rel_y * ny
    x_long = rel_x * px + rel_y * py
    v_perp = v1x * nx + v1y * ny
    vl0 = v1x * px + v1y * py
    on_path = np.abs(y) <= DISTANCE_EPS
    side = np.where(on_path, np.where(v_perp > VELOCITY_EPS, -1.0, 1.0), np.sign(y))
    q0 = side * y
    vq = side * v_perp
    applicable = moving & (vq <= VELOCITY_EPS)
    return q0, np.minimum(vq, 0.0), x_long, vl0, v2s, applicable


# ---------------------------------------------------------------------------
# public scalar criteria


def min_distance_rta(gap0, v1r, v2r, a1rb, p: CapabilityParams = PAPER_PARAMS):
    """Ego follows the object: gap left after both have braked to a stop."""
    _check_speeds(v1r, v2r)
    _check_brake(a1rb, p.a1_b, "a1rb")
    return _follow(gap0, v2r, v1r, a1rb, p.t1_r, p.a_max)


def min_distance_rat_plus(gap0, v1r, v2r, a2rb, p: CapabilityParams = PAPER_PARAMS):
    """Object follows the ego at adequate ego speed (roles of the follow case swapped)."""
    _check_speeds(v1r, v2r)
    _check_brake(a2rb, p.a2_b, "a2rb")
    return _follow(gap0, v1r, v2r, a2rb, p.t2_r, p.a_max)


def min_distance_rat_minus(gap0, v1r, v2r, a2rb, p: CapabilityParams = PAPER_PARAMS):
    """Object follows an ego that still has to speed up to the object's speed."""
    _check_speeds(v1r, v2r)
    _check_brake(a2rb, p.a2_b, "a2rb")
    return _accelerate_then_follow(gap0, v1r, v2r, a2rb, p)


def min_distance_rtt(
    gap0, v1r, v2r, a1rb, p: CapabilityParams = PAPER_PARAMS,
    fidelity: FormulaFidelity = FormulaFidelity.CORRECTED,
):
    """Both approach: gap at the instant the ego has braked to a standstill
    while the object keeps accelerating towards it."""
    _check_speeds(v1r, v2r)
    _check_brake(a1rb, p.a1_b, "a1rb")
    return _oncoming(gap0, v1r, v2r, a1rb, p, FormulaFidelity(fidelity))


def min_distance_raa(
    gap0, v1r, v2r, a1rb, p: CapabilityParams = PAPER_PARAMS,
    fidelity: FormulaFidelity = FormulaFidelity.CORRECTED,
):
    """Both recede: the oncoming criterion with the speeds entered negative."""
    _check_speeds(v1r, v2r)
    _check_brake(a1rb, p.a1_b, "a1rb")
    return _oncoming(gap0, -np.asarray(v1r), -np.asarray(v2r), a1rb, p, FormulaFidelity(fidelity))


def min_distance_txt(
    pair: PairState, p: CapabilityParams = PAPER_PARAMS,
    fidelity: FormulaFidelity = FormulaFidelity.CORRECTED,
) -> float:
    """Merge in front of an approaching object.

    Raises :class:`NotApplicable` when the object has no heading or the ego
    drifts away from the object's path.
    """
    try:
        lane_frame(pair.ooi.v)
    except DegenerateGeometry as exc:
        raise NotApplicable(str(exc)) from exc
    rel = pair.ego.r - pair.ooi.r
    q0, vq0, x_long, vl0, v2s, ok = merge_geometry(
        rel.x, rel.y, pair.ego.v.x, pair.ego.v.y, pair.ooi.v.x, pair.ooi.v.y
    )
    if not ok:
        raise NotApplicable("ego lateral motion points away from the object's path")
    if x_long <= 0:
        raise NotApplicable("object is not approaching the ego along its path")
    gap_l0 = x_long - pair.ego.s - pair.ooi.s
    return float(_merge(q0, vq0, gap_l0, vl0, v2s, p, FormulaFidelity(fidelity)))


# ---------------------------------------------------------------------------
# verdicts


@dataclass(frozen=True)
class HypothesisResult:
    scenario: FunctionalScenario
    d_min: float
    triggered: bool


@dataclass(frozen=True)
class RelevanceVerdict:
    entries: tuple[HypothesisResult, ...]
    relevant: bool
    overlap: bool = False

    def __post_init__(self) -> None:
        seen = [e.scenario for e in self.entries]
        if len(seen) != len(set(seen)):
            raise ValueError("duplicate scenario in verdict")

    def get(self, scenario: FunctionalScenario) -> HypothesisResult | None:
        for e in self.entries:
            if e.scenario == scenario:
                return e
        return None


@dataclass
class BatchResult:
    """Column arrays for a batch of pairs; ``d_min`` has one column per
    entry of :data:`CONSTRAINING` and holds NaN where a hypothesis was not
    raised or does not apply."""

    distance: np.ndarray
    gap0: np.ndarray
    hypothesized: np.ndarray  # bool (n, 6)
    d_min: np.ndarray  # float (n, 6)
    overlap: np.ndarray
    relevant: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        with np.errstate(invalid="ignore"):
            trig = self.d_min <= 0
        self.relevant = self.overlap | trig.any(axis=1)

    @property
    def triggered(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return self.d_min <= 0


def evaluate_arrays(
    r1: np.ndarray, v1: np.ndarray, s1: np.ndarray,
    r2: np.ndarray, v2: np.ndarray, s2: np.ndarray,
    p: CapabilityParams = PAPER_PARAMS,
    fidelity: FormulaFidelity = FormulaFidelity.CORRECTED,
) -> BatchResult:
    """Evaluate many ego/object pairs at once.

    Positions and velocities are ``(n, 2)`` arrays, sizes ``(n,)``.
    """
    fidelity = FormulaFidelity(fidelity)
    r1, v1, r2, v2 = (np.asarray(x, dtype=float).reshape(-1, 2) for x in (r1, v1, r2, v2))
    s1 = np.asarray(s1, dtype=float).reshape(-1)
    s2 = np.asarray(s2, dtype=float).reshape(-1)
    n = len(r1)

    d = r2 - r1
    dist = np.hypot(d[:, 0], d[:, 1])
    gap0 = dist - s1 - s2
    degenerate = dist <= DISTANCE_EPS
    overlap = degenerate | (gap0 <= 0)
    safe = np.where(degenerate, 1.0, dist)

    p1 = np.einsum("ij,ij->i", d, v1)
    p2 = np.einsum("ij,ij->i", d, v2)
    sp1 = np.hypot(v1[:, 0], v1[:, 1])
    sp2 = np.hypot(v2[:, 0], v2[:, 1])
    c1 = sign_class(p1, dist * sp1)
    c2 = sign_class(p2, dist * sp2)
    rta, rat, rtt, raa = radial_masks(c1, c2)

    rel = r1 - r2
    q0, vq0, x_long, vl0, v2s, merge_ok = merge_geometry(
        rel[:, 0], rel[:, 1], v1[:, 0], v1[:, 1], v2[:, 0], v2[:, 1]
    )
    txt = (c2 < 0) & (sp2 > VELOCITY_EPS)

    hyp = np.zeros((n, len(CONSTRAINING)), dtype=bool)
    hyp[:, 0] = rta
    hyp[:, 1] = rat
    hyp[:, 2] = rat
    hyp[:, 3] = rtt
    hyp[:, 4] = raa
    hyp[:, 5] = txt
    hyp &= ~degenerate[:, None]

    v1r = np.abs(p1) / safe
    v2r = np.abs(p2) / safe
    with np.errstate(invalid="ignore", divide="ignore"):
        a1rb = np.where(sp1 < VELOCITY_EPS, p.a1_b, p.a1_b * np.minimum(1.0, v1r / np.where(sp1 > 0, sp1, 1.0)))
        a2rb = np.where(sp2 < VELOCITY_EPS, p.a2_b, p.a2_b * np.minimum(1.0, v2r / np.where(sp2 > 0, sp2, 1.0)))

    dmin = np.full((n, len(CONSTRAINING)), np.nan)
    live = ~overlap
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        cols = (
            _follow(gap0, v2r, v1r, a1rb, p.t1_r, p.a_max),
            _follow(gap0, v1r, v2r, a2rb, p.t2_r, p.a_max),
            _accelerate_then_follow(gap0, v1r, v2r, a2rb, p),
            _oncoming(gap0, v1r, v2r, a1rb, p, fidelity),
            _oncoming(gap0, -v1r, -v2r, a1rb, p, fidelity),
            _merge(q0, vq0, x_long - s1 - s2, vl0, v2s, p, fidelity),
        )
    for k, col in enumerate(cols):
        mask = hyp[:, k] & live
        if k == 5:
            mask &= merge_ok & (x_long > 0)
        dmin[mask, k] = np.broadcast_to(col, (n,))[mask]
    return BatchResult(distance=dist, gap0=gap0, hypothesized=hyp, d_min=dmin, overlap=overlap)


def evaluate_pair(
    pair: PairState, p: CapabilityParams = PAPER_PARAMS,
    fidelity: FormulaFidelity = FormulaFidelity.CORRECTED,
) -> RelevanceVerdict:
    """Superpose all applicable hypotheses into one verdict.

    Overlapping objects (non-positive gap) are relevant without evaluating
    any criterion. Hypotheses that turn out not applicable are omitted.
    """
    e, o = pair.ego, pair.ooi
    res = evaluate_arrays(
        [e.r.as_tuple()], [e.v.as_tuple()], [e.s],
        [o.r.as_tuple()], [o.v.as_tuple()], [o.s],
        p, fidelity,
    )
    if res.overlap[0]:
        return RelevanceVerdict(entries=(), relevant=True, overlap=True)
    entries = []
    for k, scenario in enumerate(CONSTRAINING):
        val = res.d_min[0, k]
        if np.isnan(val):
            continue
        entries.append(HypothesisResult(scenario, float(val), bool(val <= 0)))
    return RelevanceVerdict(entries=tuple(entries), relevant=any(x.triggered for x in entries))


def scenario_names(mask_row: Sequence[bool]) -> str:
    return "|".join(s.value for s, m in zip(CONSTRAINING, mask_row) if m)


# ---------------------------------------------------------------------------
# onset distances


def canonical_pair(
    scenario: FunctionalScenario, gap0: float, v_ego: float, v_ooi: float,
    s_ego: float = 0.0, s_ooi: float = 0.0, lateral_offset: float = 3.75, lateral_speed: float = 0.0,
) -> PairState:
    """Straight-road pair realising ``scenario`` at initial gap ``gap0``.

    Radial scenarios put both vehicles on one line; for the merge scenario
    the object drives along x and the ego is ``gap0`` ahead (longitudinal
    gap) in the neighbouring lane, drifting towards it at ``lateral_speed``.
    """
    from .geometry import Vector2
    from .scenarios import ObjectState

    scenario = FunctionalScenario(scenario)
    span = gap0 + s_ego + s_ooi
    if scenario is SC.TXT:
        ego = ObjectState(1, Vector2(span, lateral_offset), Vector2(v_ego, -lateral_speed), s_ego)
        ooi = ObjectState(2, Vector2(0.0, 0.0), Vector2(v_ooi, 0.0), s_ooi)
        return PairState(ego, ooi)
    sign_ego, sign_ooi = {
        SC.RTA: (1, 1), SC.RAT_PLUS: (-1, -1), SC.RAT_MINUS: (-1, -1), SC.RTT: (1, -1), SC.RAA: (-1, 1),
    }[scenario]
    ego = ObjectState(1, Vector2(0.0, 0.0), Vector2(sign_ego * v_ego, 0.0), s_ego)
    ooi = ObjectState(2, Vector2(span, 0.0), Vector2(sign_ooi * v_ooi, 0.0), s_ooi)
    return PairState(ego, ooi)


def onset_gap(
    scenario: FunctionalScenario, v_ego: float, v_ooi: float, p: CapabilityParams = PAPER_PARAMS,
    fidelity: FormulaFidelity = FormulaFidelity.CORRECTED, **geometry,
) -> float:
    """Largest initial gap at which ``scenario`` still triggers, found by
    bisection on the verdict of the canonical pair (0 if it never does)."""
    from scipy.optimize import brentq

    scenario = FunctionalScenario(scenario)

    def d(g: float) -> float:
        entry = evaluate_pair(canonical_pair(scenario, g, v_ego, v_ooi, **geometry), p, fidelity).get(scenario)
        if entry is None:
            raise NotApplicable(f"{scenario} not hypothesised for the canonical pair")
        return entry.d_min

    lo = 1e-3
    if d(lo) > 0:
        return 0.0
    hi = 100.0
    while d(hi) <= 0:
        hi *= 2
        if hi > 1e9:
            return math.inf
    return float(brentq(d, lo, hi, xtol=1e-9))
