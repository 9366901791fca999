import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from perception_relevance.errors import DegenerateGeometry
from perception_relevance.geometry import Vector2
from perception_relevance.scenarios import (
    FunctionalScenario as SC,
    ObjectState,
    PairState,
    classify_radial,
    classify_tangential,
    enumerate_hypotheses,
    radial_masks,
    sign_class,
)

RAT = {SC.RAT_PLUS, SC.RAT_MINUS}


def pair(d0=(10, 0), v1=(0, 0), v2=(0, 0), r1=(0, 0), s=(0.0, 0.0)) -> PairState:
    r1v = Vector2(*r1)
    return PairState(
        ObjectState("ego", r1v, Vector2(*v1), s[0]),
        ObjectState("ooi", r1v + Vector2(*d0), Vector2(*v2), s[1]),
    )


def test_pair_derived_fields():
    p = pair(d0=(3, 4), s=(1.0, 0.5))
    assert p.d0 == Vector2(3, 4)
    assert p.gap0 == pytest.approx(3.5)
    assert p.distance == pytest.approx(5.0)


def test_object_state_rejects_negative_size():
    with pytest.raises(ValueError):
        ObjectState(1, Vector2(0, 0), Vector2(0, 0), -0.1)


@pytest.mark.parametrize(
    "v1, v2, expected",
    [
        ((5, 0), (8, 0), {SC.RTA}),
        ((5, 0), (-8, 0), {SC.RTT}),
        ((0, 3), (-8, 0), {SC.RTT} | RAT),
        ((-5, 0), (-8, 0), RAT),
        ((-5, 0), (8, 0), {SC.RAA}),
    ],
)
def test_classify_radial(v1, v2, expected):
    assert classify_radial(pair(v1=v1, v2=v2)) == expected


def test_zero_expansion_matches_neighbourhood_union():
    # p1 = 0 must yield the union of the classes of both strict neighbours
    base = classify_radial(pair(v1=(0, 3), v2=(-8, 0)))
    plus = classify_radial(pair(v1=(1e-3, 3), v2=(-8, 0)))
    minus = classify_radial(pair(v1=(-1e-3, 3), v2=(-8, 0)))
    assert base == plus | minus


@pytest.mark.parametrize(
    "v2, expected",
    [((-1, 0), SC.TXT), ((1, 0), SC.TXA), ((0, 5), SC.TXA)],
)
def test_classify_tangential(v2, expected):
    assert classify_tangential(pair(v2=v2)) is expected


def test_enumerate_examples():
    assert enumerate_hypotheses(pair(v1=(5, 0), v2=(8, 0))) == [SC.RTA]
    assert enumerate_hypotheses(pair(v1=(-5, 0), v2=(-8, 0))) == [SC.RAT_PLUS, SC.RAT_MINUS, SC.TXT]
    assert enumerate_hypotheses(pair()) == [SC.RTA, SC.RAT_PLUS, SC.RAT_MINUS, SC.RTT, SC.RAA]


def test_degenerate_pair():
    p = pair(d0=(0, 0))
    for fn in (classify_radial, classify_tangential, enumerate_hypotheses):
        with pytest.raises(DegenerateGeometry):
            fn(p)


def test_txa_never_listed_and_order_stable():
    ranks = [s.rank for s in SC]
    assert ranks == sorted(ranks)
    for v2 in [(1, 0), (0, 1), (0, 0)]:
        assert SC.TXA not in enumerate_hypotheses(pair(v1=(1, 1), v2=v2))


def test_sign_class_vectorised():
    p = np.array([1.0, -1.0, 0.0, 1e-12])
    assert sign_class(p, np.ones(4)).tolist() == [1, -1, 0, 0]
    rta, rat, rtt, raa = radial_masks(np.array([1, -1, 0]), np.array([1, -1, 0]))
    assert rta.tolist() == [True, False, True]
    assert raa.tolist() == [False, False, True]


comp = st.floats(-60, 60, allow_nan=False)
pos = st.floats(-500, 500, allow_nan=False)


@given(pos, pos, comp, comp, comp, comp)
def test_strict_signs_partition(dx, dy, v1x, v1y, v2x, v2y):
    p = pair(d0=(dx, dy), v1=(v1x, v1y), v2=(v2x, v2y))
    assume(p.distance > 1e-3)
    d = p.d0
    for v in (p.ego.v, p.ooi.v):
        assume(abs(d.dot(v)) > 1e-6 * max(1.0, d.norm() * v.norm()))
    radial = classify_radial(p)
    branches = [radial == {SC.RTA}, radial == RAT, radial == {SC.RTT}, radial == {SC.RAA}]
    assert sum(branches) == 1
    assert classify_tangential(p) in (SC.TXT, SC.TXA)


@given(pos, pos, comp, comp, comp, comp, st.floats(0, 2 * math.pi), pos, pos, st.floats(0.01, 100))
def test_rigid_motion_and_velocity_scaling_invariance(dx, dy, v1x, v1y, v2x, v2y, th, tx, ty, k):
    p = pair(d0=(dx, dy), v1=(v1x, v1y), v2=(v2x, v2y))
    assume(p.distance > 1e-3)
    d = p.d0
    for v in (p.ego.v, p.ooi.v):
        # stay clear of the absolute floor of the zero band
        assume(v.norm() == 0 or (v.norm() > 1e-3 and abs(d.dot(v)) > 1e-6 * d.norm() * v.norm()))
    c, s = math.cos(th), math.sin(th)

    def tf(v):
        return (c * v[0] - s * v[1], s * v[0] + c * v[1])

    q = pair(d0=tf((dx, dy)), v1=tf((k * v1x, k * v1y)), v2=tf((k * v2x, k * v2y)), r1=(tx, ty))
    assert enumerate_hypotheses(q) == enumerate_hypotheses(p)


@given(pos, pos, comp, comp, comp, comp)
def test_zero_expansion_is_superset_of_neighbours(dx, dy, v1x, v1y, v2x, v2y):
    p = pair(d0=(dx, dy), v1=(v1x, v1y), v2=(v2x, v2y))
    assume(p.distance > 1e-3)
    # project the ego velocity onto the normal of d0: p1 becomes exactly 0
    n = Vector2(-dy, dx) * (1 / p.distance)
    v1 = n * p.ego.v.dot(n)
    z = pair(d0=(dx, dy), v1=v1.as_tuple(), v2=(v2x, v2y))
    found = classify_radial(z)
    e = p.d0 * (1 / p.distance)
    for eps in (1e-2, -1e-2):
        nb = pair(d0=(dx, dy), v1=(v1 + e * eps).as_tuple(), v2=(v2x, v2y))
        assert classify_radial(nb) <= found
