"""Masked local observations.

Layout for robot ``i`` (``N`` robots, ``N_t`` spots of interest)::

    [x, y, vx, vy]
    + for every other robot j in roster order:  [flag, dx, dy, dvx, dvy]
    + criminals only, for every SoI:            [distance]

``dx, dy`` is the displacement from ``i`` to ``j`` and ``dvx, dvy`` the
velocity of ``j`` relative to ``i``.  A slot whose flag is 0 is all zeros.
With ``perception.relative == "scalar"`` the displacement pair collapses to a
single distance, so each slot has 4 entries.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .arena import RegionKind, RobotSpec, Scenario, Team, WorldMap
from .motion import JointState


def visible(observer_position: Sequence[float], observer: RobotSpec, target_position: Sequence[float],
            world: WorldMap, hidden_rule: str = "target") -> bool:
    """True iff the target is within the observer's perception radius and
    not hidden.  Under ``hidden_rule="observer"`` an observer standing in a
    hidden region is blind instead."""
    d = math.hypot(target_position[0] - observer_position[0], target_position[1] - observer_position[1])
    if d > observer.perception_radius:
        return False
    masked = observer_position if hidden_rule == "observer" else target_position
    return not world.inside_any(masked, RegionKind.HIDDEN)


def slot_width(scenario: Scenario) -> int:
    return 4 if scenario.perception.relative == "scalar" else 5


def observation_dim(scenario: Scenario, robot_id: str) -> int:
    i = scenario.index_of(robot_id)
    n = len(scenario.roster)
    extra = len(scenario.map.sois) if scenario.roster[i].team is Team.CRIMINAL else 0
    return 4 + slot_width(scenario) * (n - 1) + extra


def hidden_flags(scenario: Scenario, state: JointState) -> list[bool]:
    hidden = scenario.map.regions_of(RegionKind.HIDDEN)
    if not hidden:
        return [False] * len(state.positions)
    return [any(h.contains(p) for h in hidden) for p in state.positions]


def _observe(scenario: Scenario, state: JointState, i: int, hidden: list[bool]) -> np.ndarray:
    spec = scenario.roster[i]
    (x, y), (vx, vy) = state.positions[i], state.velocities[i]
    scalar = scenario.perception.relative == "scalar"
    observer_rule = scenario.perception.hidden_rule == "observer"
    radius = spec.perception_radius
    out = [x, y, vx, vy]
    for j in range(len(state.positions)):
        if j == i:
            continue
        (xj, yj), (vxj, vyj) = state.positions[j], state.velocities[j]
        dx, dy = xj - x, yj - y
        d = math.hypot(dx, dy)
        masked = hidden[i] if observer_rule else hidden[j]
        if state.active[j] and d <= radius and not masked:
            if scalar:
                out.extend((1.0, d, vxj - vx, vyj - vy))
            else:
                out.extend((1.0, dx, dy, vxj - vx, vyj - vy))
        else:
            out.extend((0.0, 0.0, 0.0, 0.0) if scalar else (0.0, 0.0, 0.0, 0.0, 0.0))
    if spec.team is Team.CRIMINAL:
        out.extend(math.hypot(sx - x, sy - y) for sx, sy in scenario.map.sois)
    return np.array(out, dtype=np.float64)


def build_observation(state: JointState, robot_id: str, scenario: Scenario) -> np.ndarray:
    i = scenario.index_of(robot_id)
    return _observe(scenario, state, i, hidden_flags(scenario, state))


def build_observations(state: JointState, scenario: Scenario) -> list[np.ndarray]:
    """Observations of every robot, in roster order."""
    hidden = hidden_flags(scenario, state)
    return [_observe(scenario, state, i, hidden) for i in range(len(scenario.roster))]


def visibility_flags(obs: np.ndarray, scenario: Scenario) -> np.ndarray:
    """Extract the per-slot visibility flags from an observation vector."""
    w = slot_width(scenario)
    n = len(scenario.roster) - 1
    return obs[4:4 + w * n:w].copy()


def observation_scale(scenario: Scenario, robot_id: str) -> np.ndarray:
    """Fixed per-entry divisors that bring observations to order one.

    Positions and distances are divided by the arena diagonal, velocities by
    the fastest robot's top speed.
    """
    i = scenario.index_of(robot_id)
    diag = scenario.map.diagonal
    vmax = max(r.v_max for r in scenario.roster)
    scale = [diag, diag, vmax, vmax]
    n = len(scenario.roster)
    slot = [1.0, diag, vmax, vmax] if scenario.perception.relative == "scalar" else [1.0, diag, diag, vmax, vmax]
    scale += slot * (n - 1)
    if scenario.roster[i].team is Team.CRIMINAL:
        scale += [diag] * len(scenario.map.sois)
    return np.array(scale, dtype=np.float64)
