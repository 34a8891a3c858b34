"""Kinematics for aerial and ground robots plus same-team safety checks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .arena import Kind, RegionKind, RobotSpec, WorldMap
from .errors import NumericInputError

Vec = tuple[float, float]


@dataclass(frozen=True)
class UavState:
    position: Vec
    velocity: Vec = (0.0, 0.0)


@dataclass(frozen=True)
class UgvState:
    position: Vec
    heading: float = 0.0
    v_lin: float = 0.0
    v_ang: float = 0.0


@dataclass(frozen=True)
class SafetyReport:
    pairs: tuple[tuple[str, str, float], ...]
    all_safe: bool

    @property
    def offenders(self) -> set[str]:
        out = set()
        for a, b, h in self.pairs:
            if not h > 0.0:
                out.update((a, b))
        return out


def _check_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise NumericInputError(f"non-finite input {v!r}")


def clamp_norm(x: float, y: float, limit: float) -> Vec:
    n = math.hypot(x, y)
    if n > limit:
        s = limit / n
        return x * s, y * s
    return x, y


def wrap_angle(theta: float) -> float:
    """Map an angle into (-pi, pi]."""
    out = math.remainder(theta, 2.0 * math.pi)
    return math.pi if out <= -math.pi else out


def integrate_uav(state: UavState, accel: Sequence[float], dt: float, spec: RobotSpec) -> UavState:
    """Constant-acceleration step; acceleration is capped at ``spec.a_max``
    and the resulting velocity at ``spec.v_max``."""
    (x, y), (vx, vy) = state.position, state.velocity
    _check_finite(x, y, vx, vy, accel[0], accel[1], dt)
    if not dt > 0:
        raise NumericInputError(f"dt must be positive, got {dt!r}")
    ax, ay = clamp_norm(float(accel[0]), float(accel[1]), spec.a_max)
    half = 0.5 * dt * dt
    pos = (x + vx * dt + ax * half, y + vy * dt + ay * half)
    vel = clamp_norm(vx + ax * dt, vy + ay * dt, spec.v_max)
    return UavState(pos, vel)


def _clamp(v: float, lo: float, hi: float) -> float:
    return lo if v < lo else hi if v > hi else v


def clamp_ugv_command(current: UgvState, requested: Sequence[float], spec: RobotSpec) -> tuple[float, float]:
    """Restrict a (linear, angular) request to +-a_max around the current
    command and to the robot's absolute speed limits."""
    v_req, w_req = float(requested[0]), float(requested[1])
    lin_lo = max(current.v_lin - spec.a_max, -spec.v_max)
    lin_hi = min(current.v_lin + spec.a_max, spec.v_max)
    ang_lo = max(current.v_ang - spec.a_max, -spec.angular_max)
    ang_hi = min(current.v_ang + spec.a_max, spec.angular_max)
    return _clamp(v_req, lin_lo, lin_hi), _clamp(w_req, ang_lo, ang_hi)


def integrate_ugv(state: UgvState, cmd: Sequence[float], dt: float, terrain_factor: float = 1.0) -> UgvState:
    """Unicycle step; the heading is updated before the displacement."""
    v_lin, v_ang = float(cmd[0]), float(cmd[1])
    x, y = state.position
    _check_finite(x, y, state.heading, v_lin, v_ang, dt, terrain_factor)
    if not dt > 0:
        raise NumericInputError(f"dt must be positive, got {dt!r}")
    heading = wrap_angle(state.heading + v_ang * dt)
    step = terrain_factor * v_lin * dt
    return UgvState((x + step * math.cos(heading), y + step * math.sin(heading)), heading, v_lin, v_ang)


def pairwise_safety(positions: Sequence[tuple[str, Sequence[float]]], rho: float) -> SafetyReport:
    """Safety margins h = |x_i - x_j|^2 - rho^2 over every unordered pair.

    Callers pass one team at a time.
    """
    pairs = []
    rho2 = rho * rho
    for a in range(len(positions)):
        ida, pa = positions[a]
        for b in range(a + 1, len(positions)):
            idb, pb = positions[b]
            dx, dy = pa[0] - pb[0], pa[1] - pb[1]
            pairs.append((ida, idb, dx * dx + dy * dy - rho2))
    return SafetyReport(tuple(pairs), all(h > 0.0 for _, _, h in pairs))


def position_allowed(world: WorldMap, kind: Kind, p: Sequence[float]) -> bool:
    if not world.in_bounds(p):
        return False
    blocked = RegionKind.NOFLY if kind is Kind.UAV else RegionKind.BUILDING
    return not world.inside_any(p, blocked)


def resolve_position(world: WorldMap, kind: Kind, proposed: Sequence[float], previous: Sequence[float]):
    """Return ``proposed`` if the robot may occupy it, else ``previous``."""
    return proposed if position_allowed(world, Kind(kind), proposed) else previous


@dataclass(frozen=True)
class JointState:
    """Kinematic state of the whole roster, indexed like ``Scenario.roster``.

    ``velocities`` are planar velocities: the integrated velocity for UAVs
    and the realised displacement rate for UGVs.
    """

    positions: tuple[Vec, ...]
    velocities: tuple[Vec, ...]
    headings: tuple[float, ...]
    v_lin: tuple[float, ...]
    v_ang: tuple[float, ...]
    active: tuple[bool, ...]

    @classmethod
    def at_rest(cls, positions: Sequence[Vec], headings: Sequence[float] | None = None) -> "JointState":
        n = len(positions)
        return cls(
            positions=tuple((float(p[0]), float(p[1])) for p in positions),
            velocities=((0.0, 0.0),) * n,
            headings=tuple(headings) if headings is not None else (0.0,) * n,
            v_lin=(0.0,) * n,
            v_ang=(0.0,) * n,
            active=(True,) * n,
        )
