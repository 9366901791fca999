"""Functional-scenario hypotheses for an ego/object pair.

Radial hypotheses depend on the signs of ``d0 . v1`` and ``d0 . v2``; the
tangential one on whether the object heads towards the ego. A sign that is
numerically zero is treated as *both* signs, which can only add hypotheses.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Hashable

import numpy as np

from .errors import DegenerateGeometry
from .geometry import DISTANCE_EPS, Vector2, connecting_vector

SIGN_RTOL = 1e-9


class FunctionalScenario(str, enum.Enum):
    RTA = "RTA"
    RAT_PLUS = "RATplus"
    RAT_MINUS = "RATminus"
    RTT = "RTT"
    RAA = "RAA"
    TXT = "TXT"
    TXA = "TXA"

    @property
    def rank(self) -> int:
        return _ORDER[self]

    def __str__(self) -> str:
        return self.value


_ORDER = {s: i for i, s in enumerate(FunctionalScenario)}

# Hypotheses that can produce a relevance requirement, in output order.
CONSTRAINING = (
    FunctionalScenario.RTA,
    FunctionalScenario.RAT_PLUS,
    FunctionalScenario.RAT_MINUS,
    FunctionalScenario.RTT,
    FunctionalScenario.RAA,
    FunctionalScenario.TXT,
)
RADIAL = CONSTRAINING[:5]


@dataclass(frozen=True, slots=True)
class ObjectState:
    id: Hashable
    r: Vector2
    v: Vector2
    s: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.s) or self.s < 0:
            raise ValueError(f"size radius must be finite and >= 0, got {self.s}")


@dataclass(frozen=True)
class PairState:
    ego: ObjectState
    ooi: ObjectState
    d0: Vector2 = field(init=False)
    gap0: float = field(init=False)

    def __post_init__(self) -> None:
        d0 = connecting_vector(self.ego.r, self.ooi.r)
        object.__setattr__(self, "d0", d0)
        object.__setattr__(self, "gap0", d0.norm() - self.ego.s - self.ooi.s)

    @property
    def distance(self) -> float:
        return self.d0.norm()


def sign_class(p, scale):
    """Three-way sign of ``p`` with a scale-aware zero band.

    Works element-wise on arrays. ``scale`` is ``|d0| * |v|``.
    """
    tol = SIGN_RTOL * np.maximum(1.0, scale)
    return np.where(p > tol, 1, np.where(p < -tol, -1, 0))


def radial_masks(s1, s2):
    """Applicability masks ``(RTA, RAT, RTT, RAA)`` from sign classes.

    ``s1`` is the sign of ``d0 . v1`` (positive: ego towards object),
    ``s2`` the sign of ``d0 . v2`` (positive: object moving away).
    """
    ego_towards = s1 >= 0
    ego_away = s1 <= 0
    ooi_towards = s2 <= 0
    ooi_away = s2 >= 0
    return (
        ego_towards & ooi_away,
        ego_away & ooi_towards,
        ego_towards & ooi_towards,
        ego_away & ooi_away,
    )


def _check(pair: PairState) -> None:
    if pair.distance <= DISTANCE_EPS:
        raise DegenerateGeometry("ego and object positions coincide")


def _signs(pair: PairState) -> tuple[int, int]:
    d0 = pair.d0
    dn = d0.norm()
    s1 = int(sign_class(d0.dot(pair.ego.v), dn * pair.ego.v.norm()))
    s2 = int(sign_class(d0.dot(pair.ooi.v), dn * pair.ooi.v.norm()))
    return s1, s2


def classify_radial(pair: PairState) -> set[FunctionalScenario]:
    _check(pair)
    rta, rat, rtt, raa = radial_masks(*_signs(pair))
    out = set()
    if rta:
        out.add(FunctionalScenario.RTA)
    if rat:
        out.update((FunctionalScenario.RAT_PLUS, FunctionalScenario.RAT_MINUS))
    if rtt:
        out.add(FunctionalScenario.RTT)
    if raa:
        out.add(FunctionalScenario.RAA)
    return out


def classify_tangential(pair: PairState) -> FunctionalScenario:
    """T.XT when the object heads towards the ego, T.XA otherwise (zero included)."""
    _check(pair)
    _, s2 = _signs(pair)
    return FunctionalScenario.TXT if s2 < 0 else FunctionalScenario.TXA


def enumerate_hypotheses(pair: PairState) -> list[FunctionalScenario]:
    found = classify_radial(pair)
    found.add(classify_tangential(pair))
    found.discard(FunctionalScenario.TXA)
    return sorted(found, key=lambda s: s.rank)
