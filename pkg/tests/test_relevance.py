import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from perception_relevance.errors import InvalidParams, NotApplicable
from perception_relevance.geometry import Vector2
from perception_relevance.relevance import (
    PAPER_PARAMS,
    CapabilityParams,
    FormulaFidelity,
    braking_distance,
    canonical_pair,
    const_accel_position,
    const_accel_velocity,
    evaluate_arrays,
    evaluate_pair,
    min_distance_raa,
    min_distance_rat_minus,
    min_distance_rat_plus,
    min_distance_rta,
    min_distance_rtt,
    min_distance_txt,
    onset_gap,
    time_to_rest_at_origin,
)
from perception_relevance.scenarios import FunctionalScenario as SC, ObjectState, PairState

P = PAPER_PARAMS
LIT = FormulaFidelity.PAPER_LITERAL
NO_LATENCY = dataclasses.replace(P, t1_r=0.0, t2_r=0.0)

speed = st.floats(0, 60)
gap = st.floats(0, 500)


def obj(i, r, v, s=0.0):
    return ObjectState(i, Vector2(*r), Vector2(*v), s)


# --- parameters -----------------------------------------------------------


def test_default_parameters():
    assert (P.a_max, P.a1_b, P.a2_b, P.a1_g, P.t1_r, P.t2_r) == (10.0, 7.0, 7.0, 0.5, 1.5, 1.5)


@pytest.mark.parametrize(
    "kw",
    [dict(a_max=0), dict(a1_b=-1), dict(a1_g=0), dict(a1_b=11), dict(a2_b=10.5), dict(t1_r=-0.1), dict(a_max=math.nan)],
)
def test_invalid_parameters(kw):
    with pytest.raises(InvalidParams):
        CapabilityParams(**kw)


def test_swapped_exchanges_roles():
    p = CapabilityParams(a1_b=6, a2_b=5, t1_r=1.0, t2_r=2.0)
    q = p.swapped()
    assert (q.a1_b, q.a2_b, q.t1_r, q.t2_r) == (5, 6, 2.0, 1.0)


# --- primitives -----------------------------------------------------------


@pytest.mark.parametrize("args, expected", [((0, 10, 0, 2), 20), ((5, 0, 2, 3), 14), ((0, 0, 0, 7), 0)])
def test_const_accel_position(args, expected):
    assert const_accel_position(*args) == pytest.approx(expected)


@pytest.mark.parametrize("args, expected", [((10, -2, 5), 0), ((0, 10, 1.5), 15), ((33.3, 0, 100), 33.3)])
def test_const_accel_velocity(args, expected):
    assert const_accel_velocity(*args) == pytest.approx(expected)


@pytest.mark.parametrize("args, expected", [((0, 7), 0), ((14, 7), 14), ((30, 10), 45)])
def test_braking_distance(args, expected):
    assert braking_distance(*args) == pytest.approx(expected)


def test_primitive_preconditions():
    with pytest.raises(ValueError):
        const_accel_position(0, 1, 1, -1)
    with pytest.raises(ValueError):
        braking_distance(-1, 7)
    with pytest.raises(ValueError):
        braking_distance(1, 0)


# --- closed forms: worked values ------------------------------------------
# The non-trivial values below were produced by rolling out the designated
# worst-case manoeuvres with the time-stepped simulator (dt = 1e-4 s).


def test_following_example():
    assert min_distance_rta(95, 30, 20, 7, P) == pytest.approx(-85.893, abs=1e-3)


def test_following_trivial_reduction():
    assert min_distance_rta(100, 0, 0, 7, NO_LATENCY) == pytest.approx(100)


def test_following_boundary_centre_distance():
    # with 2.5 m radii each, the boundary sits at a centre distance of 177.55 m
    g = onset_gap(SC.RTA, 33.33, 33.33)
    assert g == pytest.approx(172.5426, abs=1e-3)
    assert g + 5.0 == pytest.approx(177.55, abs=0.01)
    assert min_distance_rta(g, 33.33, 33.33, 7, P) == pytest.approx(0.0, abs=1e-6)


def test_rat_plus_example_and_role_swap():
    assert min_distance_rat_plus(45, 30, 35, 7, P) == pytest.approx(-152.32, abs=1e-2)
    assert min_distance_rat_plus(12.0, 0, 0, 7, NO_LATENCY) == pytest.approx(12.0)
    p = CapabilityParams(a1_b=6, a2_b=5, t1_r=1.0, t2_r=2.0)
    assert min_distance_rat_plus(80, 20, 25, 4, p) == pytest.approx(min_distance_rta(80, 25, 20, 4, p.swapped()))


def test_rat_minus_example_and_clamp():
    assert min_distance_rat_minus(95, 30, 31, 7, P) == pytest.approx(-276.84, abs=1e-2)
    # ego already faster: no acceleration phase, desired speed is the object's
    assert min_distance_rat_minus(95, 31, 30, 7, P) == pytest.approx(min_distance_rat_plus(95, 30, 30, 7, P))
    assert min_distance_rat_minus(1e6, 20, 40, 7, P) > 0


def test_rtt_example_and_literal_relation():
    assert min_distance_rtt(195, 30, 30, 7, P) == pytest.approx(-558.06, abs=1e-2)
    assert min_distance_rtt(40, 0, 0, 7, NO_LATENCY) == pytest.approx(40)
    assert min_distance_rtt(195, 30, 30, 7, P) <= min_distance_rtt(195, 30, 30, 7, P, LIT)


def test_raa_frozen_value_and_zero_speed_identity():
    assert min_distance_raa(50, 30, 30, 7, P) == pytest.approx(142.7551, abs=1e-3)
    assert min_distance_raa(50, 0, 0, 7, P) == pytest.approx(min_distance_rtt(50, 0, 0, 7, P))


def test_raa_receding_fast_enough_is_not_relevant():
    # boundary speed found by bisection; beyond it the pair stays clear
    from scipy.optimize import brentq

    v_star = brentq(lambda v: min_distance_raa(50, v, v, 7, P), 0, 30)
    assert v_star == pytest.approx(3.8775, abs=1e-3)
    vs = np.linspace(v_star + 1e-3, 60, 200)
    assert np.all(min_distance_raa(50, vs, vs, 7, P) > 0)
    assert np.all(np.diff(min_distance_raa(50, vs, vs, 7, P)) > 0)


@pytest.mark.parametrize(
    "fn",
    [min_distance_rta, min_distance_rat_plus, min_distance_rat_minus, min_distance_rtt, min_distance_raa],
)
def test_invalid_braking_rejected(fn):
    with pytest.raises(InvalidParams):
        fn(10, 1, 1, 0.0, P)
    with pytest.raises(InvalidParams):
        fn(10, 1, 1, 7.5, P)
    with pytest.raises(ValueError):
        fn(10, -1, 1, 7, P)


# --- merge criterion -------------------------------------------------------


def test_merge_frozen_value():
    pair = PairState(obj(1, (80, 3.5), (30, -1)), obj(2, (0, 0), (31, 0)))
    assert min_distance_txt(pair) == pytest.approx(-1725.5809, abs=1e-3)
    assert min_distance_txt(pair, fidelity=LIT) == pytest.approx(-11712.4235, abs=1e-3)


def test_merge_on_path_reduces_to_rat_minus():
    pair = PairState(obj(1, (80, 0), (30, 0)), obj(2, (0, 0), (31, 0)))
    p0 = dataclasses.replace(P, t1_r=0.0)
    assert min_distance_txt(pair, p0) == pytest.approx(min_distance_rat_minus(80, 30, 31, 7, p0))
    # with latency the ego simply holds its speed for t1_r first
    t_d = P.t1_r + (31 - 30) / P.a1_g
    gap_d = 80 + 30 * t_d + 0.5 * P.a1_g * (t_d - P.t1_r) ** 2 - 31 * t_d - 0.5 * P.a_max * t_d**2
    expected = min_distance_rat_plus(gap_d, 31, 31 + P.a_max * t_d, 7, P)
    # the follower case above uses the object's speed at t_d as its initial speed
    assert min_distance_txt(pair) == pytest.approx(expected)


def test_merge_gating():
    drifting_away = PairState(obj(1, (80, 3.5), (30, 1)), obj(2, (0, 0), (31, 0)))
    with pytest.raises(NotApplicable):
        min_distance_txt(drifting_away)
    standing = PairState(obj(1, (80, 3.5), (30, -1)), obj(2, (0, 0), (0, 0)))
    with pytest.raises(NotApplicable):
        min_distance_txt(standing)


def test_merge_side_symmetry():
    left = PairState(obj(1, (80, 3.5), (30, -1)), obj(2, (0, 0), (31, 0)))
    right = PairState(obj(1, (80, -3.5), (30, 1)), obj(2, (0, 0), (31, 0)))
    assert min_distance_txt(left) == pytest.approx(min_distance_txt(right))


@pytest.mark.parametrize(
    "x, v, expected",
    [(0.0, 0.0, 0.0), (2.0, 0.0, 4.0), (-2.0, 0.0, 4.0), (0.0, -2.0, 2 + 2 * math.sqrt(2))],
)
def test_time_to_rest_at_origin(x, v, expected):
    # unit acceleration: from rest over 2 m takes 2*sqrt(2) each half
    assert time_to_rest_at_origin(x, v, 1.0) == pytest.approx(expected if x == 0 else 2 * math.sqrt(abs(x)))


@given(st.floats(0, 20), st.floats(-5, 0), st.floats(0.1, 10))
def test_time_to_rest_is_the_printed_expression_when_not_overshooting(r, v, g):
    if r + v * abs(v) / (2 * g) <= 0:
        return
    t_c = (v + math.sqrt(v * v / 2 + g * r)) / g
    assert time_to_rest_at_origin(r, v, g) == pytest.approx(2 * t_c - v / g)


# --- properties ------------------------------------------------------------


@given(gap, speed, speed, st.floats(0.1, 7), st.floats(0.1, 100))
def test_gap_enters_with_unit_coefficient(g, v1, v2, a, dg):
    for fn in (min_distance_rta, min_distance_rat_plus, min_distance_rat_minus, min_distance_rtt, min_distance_raa):
        d0 = fn(g, v1, v2, a, P)
        assert fn(g + dg, v1, v2, a, P) - d0 == pytest.approx(dg, rel=1e-6, abs=1e-6)


@given(gap, speed, speed, speed, st.floats(0.1, 7))
def test_following_monotone_in_speeds(g, v1, v2, dv, a):
    base = min_distance_rta(g, v1, v2, a, P)
    assert min_distance_rta(g, v1 + dv, v2, a, P) <= base + 1e-9
    assert min_distance_rta(g, v1, v2 + dv, a, P) >= base - 1e-9


@given(gap, speed, speed, st.floats(0.1, 7), st.floats(0, 3), st.floats(0, 1))
def test_non_increasing_in_reaction_time(g, v1, v2, a, t, dt):
    p = dataclasses.replace(P, t1_r=t, t2_r=t)
    q = dataclasses.replace(P, t1_r=t + dt, t2_r=t + dt)
    for fn in (min_distance_rta, min_distance_rat_plus, min_distance_rat_minus, min_distance_rtt):
        assert fn(g, v1, v2, a, q) <= fn(g, v1, v2, a, p) + 1e-6


@given(gap, speed, speed, st.floats(0.1, 7))
def test_raa_is_rtt_with_flipped_speeds_literal(g, v1, v2, a):
    # the literal sign flip applied to the printed expression
    w = -v1 + P.t1_r * P.a_max
    tb = P.t1_r + w / a
    expected = g + v1 * P.t1_r - 0.5 * P.a_max * P.t1_r**2 - w * w / (2 * a) + v2 * tb - 0.5 * P.a_max * tb
    assert min_distance_raa(g, v1, v2, a, P, LIT) == pytest.approx(expected, rel=1e-9, abs=1e-6)


@given(gap, speed, speed, st.floats(0.1, 7))
def test_vectorised_matches_scalar(g, v1, v2, a):
    arr = np.array([g, g + 1])
    for fn in (min_distance_rta, min_distance_rat_minus, min_distance_rtt):
        got = fn(arr, v1, v2, a, P)
        assert got[0] == pytest.approx(fn(g, v1, v2, a, P))


# --- verdicts --------------------------------------------------------------


@pytest.mark.parametrize("v", [22.0, 33.0, 41.0])
def test_far_apart_not_relevant(v):
    ego = obj(1, (0, 0), (v, 0), 2.5)
    # along the road; a pure side-by-side offset leaves no radial braking
    for other in (obj(2, (10_000, 0), (v, 0), 2.5), obj(2, (-10_000, 0), (v, 0), 2.5)):
        verdict = evaluate_pair(PairState(ego, other))
        assert not verdict.relevant
        assert all(e.d_min > 0 for e in verdict.entries)


def test_follower_at_short_gap_is_relevant():
    pair = PairState(obj(1, (0, 0), (30, 0), 2.4), obj(2, (30 + 4.8, 0), (30, 0), 2.4))
    v = evaluate_pair(pair)
    assert v.relevant and v.get(SC.RTA).triggered


def test_overlap_relevant_by_fiat():
    v = evaluate_pair(PairState(obj(1, (0, 0), (30, 0), 2.0), obj(2, (3, 0), (30, 0), 2.0)))
    assert v.relevant and v.overlap and v.entries == ()
    v = evaluate_pair(PairState(obj(1, (0, 0), (30, 0)), obj(2, (0, 0), (30, 0))))
    assert v.relevant and v.overlap


def test_orthogonal_ego_cannot_brake_along_line():
    # no velocity component along the connecting line: the oncoming case
    # has no finite stopping point
    v = evaluate_pair(PairState(obj(1, (0, 0), (0, 20)), obj(2, (100, 0), (-30, 0))))
    assert v.get(SC.RTT).d_min == -math.inf
    assert v.relevant


def test_verdict_entries_follow_hypotheses():
    v = evaluate_pair(PairState(obj(1, (0, 0), (-20, 0)), obj(2, (50, 0), (-30, 0))))
    assert [e.scenario for e in v.entries] == [SC.RAT_PLUS, SC.RAT_MINUS, SC.TXT]
    assert v.relevant == any(e.triggered for e in v.entries)


@given(
    st.lists(
        st.tuples(*[st.floats(-300, 300)] * 2, *[st.floats(-40, 40)] * 4, st.floats(0, 5), st.floats(0, 5)),
        min_size=1, max_size=20,
    )
)
def test_batch_matches_pairwise(rows):
    a = np.array(rows, dtype=float)
    r1 = np.zeros((len(a), 2))
    r2 = a[:, :2]
    v1, v2 = a[:, 2:4], a[:, 4:6]
    res = evaluate_arrays(r1, v1, a[:, 6], r2, v2, a[:, 7])
    for k in range(len(a)):
        pair = PairState(obj(1, (0, 0), v1[k], a[k, 6]), obj(2, r2[k], v2[k], a[k, 7]))
        verdict = evaluate_pair(pair)
        assert bool(res.relevant[k]) == verdict.relevant
        for e in verdict.entries:
            col = list(SC).index(e.scenario)
            assert res.d_min[k, col] == pytest.approx(e.d_min)


@pytest.mark.parametrize("scenario", [SC.RTA, SC.RAT_PLUS, SC.RAT_MINUS, SC.RTT, SC.TXT])
def test_canonical_pairs_raise_their_scenario(scenario):
    pair = canonical_pair(scenario, 50.0, 20.0, 25.0, 2.0, 2.0)
    assert evaluate_pair(pair).get(scenario) is not None
    if scenario is not SC.TXT:  # merge pairs take a longitudinal gap
        assert pair.gap0 == pytest.approx(50.0)
