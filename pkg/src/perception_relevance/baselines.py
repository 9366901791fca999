"""Simple distance/time thresholds used as comparison baselines."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry, InvalidParams
from .geometry import DISTANCE_EPS
from .scenarios import PairState, sign_class


@dataclass(frozen=True)
class BaselineThresholds:
    headway_s: float = 2.0
    ttc_s: float = 4.0

    def __post_init__(self) -> None:
        if not self.headway_s > 0 or not self.ttc_s > 0:
            raise InvalidParams("baseline thresholds must be positive")


def headway_distance(v_ego, thresholds: BaselineThresholds | float = BaselineThresholds()):
    """Distance covered at the current ego speed within the headway time."""
    if np.any(np.asarray(v_ego) < 0):
        raise ValueError("speed must be >= 0")
    h = thresholds.headway_s if isinstance(thresholds, BaselineThresholds) else float(thresholds)
    return v_ego * h


def ttc_from_closing(gap0, closing_speed):
    """Gap divided by closing speed; infinite when not closing, 0 once overlapping."""
    gap0 = np.asarray(gap0, dtype=float)
    closing = np.asarray(closing_speed, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ttc = np.where(closing > 0, np.maximum(gap0, 0.0) / np.where(closing > 0, closing, 1.0), np.inf)
    ttc = np.where(gap0 <= 0, 0.0, ttc)
    return ttc[()] if ttc.ndim == 0 else ttc


@dataclass(frozen=True)
class BaselineFlags:
    headway_relevant: np.ndarray
    ttc_relevant: np.ndarray
    headway_m: np.ndarray
    ttc_s: np.ndarray


def baseline_arrays(r1, v1, s1, r2, v2, s2, thresholds: BaselineThresholds = BaselineThresholds()) -> BaselineFlags:
    """Headway and TTC flags for many pairs (``(n, 2)`` arrays).

    Headway flags an object when the ego is heading towards it and the gap
    is below the headway distance; TTC uses the radial closing speed.
    """
    r1, v1, r2, v2 = (np.asarray(x, dtype=float).reshape(-1, 2) for x in (r1, v1, r2, v2))
    d = r2 - r1
    dist = np.hypot(d[:, 0], d[:, 1])
    gap0 = dist - np.asarray(s1, dtype=float).reshape(-1) - np.asarray(s2, dtype=float).reshape(-1)
    safe = np.where(dist > 0, dist, 1.0)
    p1 = np.einsum("ij,ij->i", d, v1)
    p2 = np.einsum("ij,ij->i", d, v2)
    speed = np.hypot(v1[:, 0], v1[:, 1])
    closing = np.where(dist > 0, (p1 - p2) / safe, 0.0)
    ttc = ttc_from_closing(gap0, closing)
    hw = headway_distance(speed, thresholds)
    towards = sign_class(p1, dist * speed) > 0
    return BaselineFlags(
        headway_relevant=(gap0 <= 0) | (towards & (gap0 <= hw)),
        ttc_relevant=ttc <= thresholds.ttc_s,
        headway_m=hw,
        ttc_s=np.atleast_1d(ttc),
    )


def time_to_collision(pair: PairState) -> float:
    """Radial constant-velocity TTC of a pair (``inf`` when not closing)."""
    dist = pair.distance
    if dist <= DISTANCE_EPS:
        raise DegenerateGeometry("ego and object positions coincide")
    closing = (pair.d0.dot(pair.ego.v) - pair.d0.dot(pair.ooi.v)) / dist
    return float(ttc_from_closing(pair.gap0, closing))


def baseline_flags(pair: PairState, thresholds: BaselineThresholds = BaselineThresholds()) -> tuple[bool, bool]:
    """``(headway_relevant, ttc_relevant)`` for a single pair."""
    if pair.distance <= DISTANCE_EPS:
        raise DegenerateGeometry("ego and object positions coincide")
    e, o = pair.ego, pair.ooi
    f = baseline_arrays(
        [e.r.as_tuple()], [e.v.as_tuple()], [e.s], [o.r.as_tuple()], [o.v.as_tuple()], [o.s], thresholds
    )
    return bool(f.headway_relevant[0]), bool(f.ttc_relevant[0])
