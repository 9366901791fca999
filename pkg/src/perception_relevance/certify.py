"""Empirical conservativeness check: sampled admissible behaviour never ends
up closer than the closed-form worst case predicts.

For each sample a pair is drawn for one scenario, the designated worst case
is rolled out, and then a randomly weakened version of it: adversarial
accelerations are scaled down, reaction phases shortened and the
guaranteed responses made stronger. Both the gap at the end of the
worst-case horizon and the smallest gap seen along the way are compared
with the closed form.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .geometry import Vector2
from .oracle import (
    AtTime,
    BrakeToStop,
    Duration,
    FirstOf,
    MergeOnto,
    Phase,
    PhaseProfile,
    SpeedReaches,
    rollout,
    worst_case_profile,
)
from .relevance import PAPER_PARAMS, CapabilityParams, FormulaFidelity, evaluate_pair
from .scenarios import CONSTRAINING, FunctionalScenario, ObjectState, PairState

SC = FunctionalScenario
TOLERANCE = 1e-3
MAX_SPEED = 45.0
MAX_LATERAL_SPEED = 4.0


@dataclass(frozen=True)
class Violation:
    index: int
    scenario: FunctionalScenario
    d_min: float
    final_gap: float
    min_gap: float
    margin: float


@dataclass
class CertificationReport:
    samples: int = 0
    evaluated: int = 0
    violations: int = 0
    worst_margin: float = math.inf
    worst_final_margin: float = math.inf
    per_scenario: dict = field(default_factory=dict)
    examples: list = field(default_factory=list)

    def merge(self, other: CertificationReport) -> CertificationReport:
        out = CertificationReport(
            samples=self.samples + other.samples,
            evaluated=self.evaluated + other.evaluated,
            violations=self.violations + other.violations,
            worst_margin=min(self.worst_margin, other.worst_margin),
            worst_final_margin=min(self.worst_final_margin, other.worst_final_margin),
            per_scenario=dict(self.per_scenario),
            examples=sorted(self.examples + other.examples, key=lambda v: v.index)[:10],
        )
        for k, (n, bad) in other.per_scenario.items():
            n0, b0 = out.per_scenario.get(k, (0, 0))
            out.per_scenario[k] = (n0 + n, b0 + bad)
        return out

    def to_text(self) -> str:
        lines = [
            f"samples = {self.samples}",
            f"evaluated = {self.evaluated}",
            f"violations = {self.violations}",
            f"worst_margin_m = {self.worst_margin:.6f}",
            f"worst_final_margin_m = {self.worst_final_margin:.6f}",
        ]
        for sc in CONSTRAINING:
            n, bad = self.per_scenario.get(sc.value, (0, 0))
            lines.append(f"scenario.{sc.value} = {n} samples, {bad} violations")
        return "\n".join(lines) + "\n"


def _rng(seed: int, index: int) -> np.random.Generator:
    # one independent stream per sample: results do not depend on batching
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _unit(theta: float) -> np.ndarray:
    return np.array([math.cos(theta), math.sin(theta)])


def sample_pair(scenario: FunctionalScenario, rng: np.random.Generator) -> PairState:
    """Random pair for which ``scenario`` is hypothesised."""
    s1, s2 = rng.uniform(0.5, 8.0, size=2)
    origin = rng.uniform(-500, 500, size=2)
    e = _unit(rng.uniform(0, 2 * math.pi))
    t = np.array([-e[1], e[0]])
    if scenario is SC.TXT:
        v2 = rng.uniform(10.0, MAX_SPEED)
        x = rng.uniform(s1 + s2 + 0.5, 300.0)
        y = rng.uniform(-12.0, 12.0)
        lat = -math.copysign(rng.uniform(0.0, MAX_LATERAL_SPEED), y)
        r2 = origin
        r1 = r2 + x * e + y * t
        v1 = rng.uniform(0.0, MAX_SPEED) * e + lat * t
        return PairState(
            ObjectState(1, Vector2(*r1), Vector2(*v1), s1),
            ObjectState(2, Vector2(*r2), Vector2(*(v2 * e)), s2),
        )
    gap0 = rng.uniform(0.5, 400.0)
    r1 = origin
    r2 = r1 + (gap0 + s1 + s2) * e
    u1, u2 = rng.uniform(0.0, MAX_SPEED, size=2)
    sign1, sign2 = {
        SC.RTA: (1, 1),
        SC.RAT_PLUS: (-1, -1),
        SC.RAT_MINUS: (-1, -1),
        SC.RTT: (1, -1),
        SC.RAA: (-1, 1),
    }[scenario]
    w1, w2 = rng.uniform(-8.0, 8.0, size=2)
    v1 = sign1 * u1 * e + w1 * t
    v2 = sign2 * u2 * e + w2 * t
    return PairState(
        ObjectState(1, Vector2(*r1), Vector2(*v1), s1),
        ObjectState(2, Vector2(*r2), Vector2(*v2), s2),
    )


def _weakened(wc, scenario: FunctionalScenario, worst, p: CapabilityParams, rng: np.random.Generator):
    """Sub-worst-case profiles: same structure, adversarial accelerations
    scaled by U[0, 1], reaction phases shortened to 80-100 %, guaranteed
    responses strengthened by up to the friction limit."""
    a = p.a_max
    adv = lambda: rng.uniform(0.0, 1.0)  # noqa: E731
    jit = lambda: rng.uniform(0.8, 1.0)  # noqa: E731
    resp = lambda base: base * rng.uniform(1.0, a / base)  # noqa: E731
    ego_w, ooi_w = wc.profiles
    ends_ego = worst.phase_ends[0]

    if scenario is SC.RTA:
        acc, brake = ego_w.phases
        ego = PhaseProfile(
            Phase(tuple(np.multiply(acc.accel, adv())), Duration(p.t1_r * jit())),
            BrakeToStop(brake.axis, resp(brake.magnitude)),
        )
        (ob,) = ooi_w.phases
        ooi = PhaseProfile(BrakeToStop(ob.axis, max(1e-3, a * adv())))
    elif scenario is SC.RAT_PLUS:
        (eb,) = ego_w.phases
        ego = PhaseProfile(BrakeToStop(eb.axis, max(1e-3, a * adv())))
        acc, brake = ooi_w.phases
        ooi = PhaseProfile(
            Phase(tuple(np.multiply(acc.accel, adv())), Duration(p.t2_r * jit())),
            BrakeToStop(brake.axis, resp(brake.magnitude)),
        )
    elif scenario is SC.RAT_MINUS:
        acc, eb = ego_w.phases
        t_d = ends_ego[0]
        ego = PhaseProfile(
            Phase(tuple(np.multiply(acc.accel, resp(p.a1_g) / p.a1_g)), acc.until),
            Phase((0.0, 0.0), AtTime(t_d)),
            BrakeToStop(eb.axis, max(1e-3, a * adv())),
        )
        oacc, ob = ooi_w.phases
        ooi = PhaseProfile(
            Phase(tuple(np.multiply(oacc.accel, adv())), AtTime(t_d + p.t2_r * jit())),
            BrakeToStop(ob.axis, resp(ob.magnitude)),
        )
    elif scenario in (SC.RTT, SC.RAA):
        acc, brake = ego_w.phases
        k = adv()
        t_r = p.t1_r * jit()
        u1 = float(np.dot(wc.pair.ego.v.as_tuple(), brake.axis))
        # stronger braking only helps while the ego still closes in; braking
        # out of a retreat sooner would shorten the retreat
        closing = u1 + k * p.a_max * t_r >= 0
        ego = PhaseProfile(
            Phase(tuple(np.multiply(acc.accel, k)), Duration(t_r)),
            BrakeToStop(brake.axis, resp(brake.magnitude) if closing else brake.magnitude),
        )
        (oacc,) = ooi_w.phases
        ooi = PhaseProfile(Phase(tuple(np.multiply(oacc.accel, adv())), None))
    else:  # TXT
        lat, hold, merge, lon, eb = ego_w.phases
        t_r = p.t1_r * jit()
        n = np.asarray(merge.axis)
        t_d = ends_ego[3]
        g_lat, g_lon = resp(p.a1_g), resp(p.a1_g)
        ego = PhaseProfile(
            Phase(lat.accel, FirstOf(Duration(t_r), SpeedReaches(tuple(n), 0.0))),
            Phase((0.0, 0.0), AtTime(t_r)),
            MergeOnto(merge.axis, merge.origin, g_lat),
            Phase(tuple(np.multiply(lon.accel, g_lon / p.a1_g)), lon.until),
            Phase((0.0, 0.0), AtTime(t_d)),
            BrakeToStop(eb.axis, max(1e-3, a * adv())),
        )
        oacc, ob = ooi_w.phases
        ooi = PhaseProfile(
            Phase(tuple(np.multiply(oacc.accel, adv())), AtTime(t_d + p.t2_r * jit())),
            BrakeToStop(ob.axis, resp(ob.magnitude)),
        )
    return ego, ooi


def certify_sample(
    index: int,
    seed: int,
    p: CapabilityParams = PAPER_PARAMS,
    fidelity: FormulaFidelity = FormulaFidelity.CORRECTED,
    dt: float = 1e-3,
    scenario: FunctionalScenario | None = None,
    pair: PairState | None = None,
) -> tuple[FunctionalScenario, tuple[float, float] | None, Violation | None]:
    """Run one sample; returns ``(scenario, margins, violation)`` where
    ``margins`` is ``(overall, at_horizon)``, or ``None`` when the drawn pair
    yields no closed-form value."""
    rng = _rng(seed, index)
    if scenario is None:
        scenario = CONSTRAINING[int(rng.integers(len(CONSTRAINING)))]
    if pair is None:
        pair = sample_pair(scenario, rng)
    entry = evaluate_pair(pair, p, fidelity).get(scenario)
    if entry is None or not math.isfinite(entry.d_min):
        return scenario, None, None
    wc = worst_case_profile(scenario, pair, p)
    worst = rollout(wc.pair, wc.profiles, dt, gap_axis=wc.gap_axis, a_max=p.a_max)
    profiles = _weakened(wc, scenario, worst, p, rng)
    sample = rollout(wc.pair, profiles, dt, horizon=worst.horizon, gap_axis=wc.gap_axis, a_max=p.a_max)
    d = entry.d_min
    final = sample.final_gap - d
    margin = min(final, sample.min_gap - min(float(worst.gap[0]), d))
    bad = None
    if margin < -TOLERANCE:
        bad = Violation(index, scenario, d, sample.final_gap, sample.min_gap, margin)
    return scenario, (margin, final), bad


def _run_range(args) -> CertificationReport:
    start, stop, seed, p, fidelity, dt = args
    rep = CertificationReport()
    for i in range(start, stop):
        scenario, margins, bad = certify_sample(i, seed, p, fidelity, dt)
        rep.samples += 1
        n, b = rep.per_scenario.get(scenario.value, (0, 0))
        if margins is not None:
            rep.evaluated += 1
            rep.worst_margin = min(rep.worst_margin, margins[0])
            rep.worst_final_margin = min(rep.worst_final_margin, margins[1])
            n += 1
        if bad is not None:
            rep.violations += 1
            b += 1
            if len(rep.examples) < 10:
                rep.examples.append(bad)
        rep.per_scenario[scenario.value] = (n, b)
    return rep


def certify_conservative(
    n_samples: int,
    seed: int,
    p: CapabilityParams = PAPER_PARAMS,
    fidelity: FormulaFidelity = FormulaFidelity.CORRECTED,
    dt: float = 1e-3,
    workers: int = 1,
) -> CertificationReport:
    """Sample ``n_samples`` random pairs/behaviours and count violations.

    Sample ``i`` always uses the same random stream, so the report is
    independent of ``workers``.
    """
    if n_samples < 0:
        raise ValueError("n_samples must be >= 0")
    fidelity = FormulaFidelity(fidelity)
    if workers <= 1 or n_samples < 2:
        return _run_range((0, n_samples, seed, p, fidelity, dt))
    bounds = np.linspace(0, n_samples, min(workers * 4, n_samples) + 1).astype(int)
    jobs = [(int(a), int(b), seed, p, fidelity, dt) for a, b in zip(bounds[:-1], bounds[1:])]
    total = CertificationReport()
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for rep in pool.map(_run_range, jobs):
            total = total.merge(rep)
    return total
