"""Planar kinematic projections used by the scenario criteria.

Everything here is coordinate free: results depend only on the relative
geometry of the two objects, so any fixed world frame (including the
image-style frame of highD with a downward y axis) can be used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateGeometry

DISTANCE_EPS = 1e-6  # m
VELOCITY_EPS = 1e-6  # m/s


@dataclass(frozen=True, slots=True)
class Vector2:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite vector component: ({self.x}, {self.y})")

    def __add__(self, other: Vector2) -> Vector2:
        return Vector2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: Vector2) -> Vector2:
        return Vector2(self.x - other.x, self.y - other.y)

    def __mul__(self, k: float) -> Vector2:
        return Vector2(self.x * k, self.y * k)

    __rmul__ = __mul__

    def __neg__(self) -> Vector2:
        return Vector2(-self.x, -self.y)

    def dot(self, other: Vector2) -> float:
        return self.x * other.x + self.y * other.y

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def rotated90(self) -> Vector2:
        """Counter-clockwise rotation by a quarter turn."""
        return Vector2(-self.y, self.x)

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


ZERO = Vector2(0.0, 0.0)


@dataclass(frozen=True, slots=True)
class LaneFrame:
    """Hypothetical lane aligned with the current heading of an object."""

    parallel: Vector2
    perpendicular: Vector2

    def __post_init__(self) -> None:
        if abs(self.parallel.norm() - 1.0) > 1e-12 or abs(self.perpendicular.norm() - 1.0) > 1e-12:
            raise ValueError("lane frame axes must be unit vectors")
        if self.perpendicular != self.parallel.rotated90():
            raise ValueError("perpendicular axis must be the parallel axis rotated by +90 degrees")


def connecting_vector(r1: Vector2, r2: Vector2) -> Vector2:
    """Vector pointing from the ego position ``r1`` to the object position ``r2``."""
    return r2 - r1


def radial_distance(d: Vector2) -> float:
    return d.norm()


def _unit(d: Vector2) -> Vector2:
    n = d.norm()
    if n <= DISTANCE_EPS:
        raise DegenerateGeometry(f"connecting vector too short (|d| = {n:.3g} m)")
    return Vector2(d.x / n, d.y / n)


def radial_speed(v: Vector2, d: Vector2) -> float:
    """Magnitude of the component of ``v`` along ``d``.

    The sense of motion (towards or away) is deliberately dropped; the
    scenario classification supplies it.
    """
    return abs(v.dot(_unit(d)))


def radial_braking_accel(v: Vector2, d: Vector2, a_b: float) -> float:
    """Share of the braking capability ``a_b`` acting along ``d``.

    Scales ``a_b`` by the cosine between the velocity and the connecting
    line. For a (near) standing vehicle the full ``a_b`` is returned; the
    braking distance it would multiply is zero anyway.
    """
    if a_b <= 0:
        raise ValueError("a_b must be positive")
    vr = radial_speed(v, d)
    speed = v.norm()
    if speed < VELOCITY_EPS:
        return a_b
    return a_b * min(1.0, vr / speed)


def lane_frame(v2: Vector2) -> LaneFrame:
    speed = v2.norm()
    if speed <= VELOCITY_EPS:
        raise DegenerateGeometry("object is (nearly) at rest; no heading to build a lane from")
    par = Vector2(v2.x / speed, v2.y / speed)
    # renormalise so that the unit-length invariant holds to 1e-12
    par = Vector2(par.x / par.norm(), par.y / par.norm())
    return LaneFrame(par, par.rotated90())


def decompose(v: Vector2, frame: LaneFrame) -> tuple[float, float]:
    """Return ``(perpendicular, parallel)`` components of ``v`` in ``frame``."""
    return v.dot(frame.perpendicular), v.dot(frame.parallel)
