"""Rewards, capture and arrival predicates, discounted returns.

Every robot's reward splits into an objective part (distance shaping, event
bonuses, same-team safety penalty) and a position part that penalises
operating where the robot is handicapped (UGV on lawn, hugging a region it
may not enter).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .arena import Kind, RegionKind, RewardConfig, RobotSpec, Scenario, Team, WorldMap, distance_to_boundary
from .motion import JointState, pairwise_safety
from .perception import hidden_flags


def _sees(p, radius, q, masked):
    # same predicate as perception.visible with the hidden test precomputed
    return not masked and math.hypot(q[0] - p[0], q[1] - p[1]) <= radius


@dataclass(frozen=True)
class RewardBreakdown:
    shaping: float = 0.0
    event: float = 0.0
    safety: float = 0.0
    position_part: float = 0.0
    objective_part: float = field(init=False)
    total: float = field(init=False)

    def __post_init__(self):
        objective = self.shaping + self.event + self.safety
        object.__setattr__(self, "objective_part", objective)
        object.__setattr__(self, "total", objective + self.position_part)


@dataclass(frozen=True)
class StepOutcome:
    captures: tuple[tuple[str, frozenset[str]], ...] = ()
    arrivals: tuple[tuple[str, int], ...] = ()
    terminal: bool = False
    # true when the horizon alone ended the episode
    truncated: bool = False


def shaping_reward(self_position: Sequence[float], visible_opponents: Sequence[Sequence[float]],
                   lam: float, fallback_distance: float = 0.0) -> float:
    """``lam`` times the distance to the nearest visible opponent."""
    if not visible_opponents:
        return lam * fallback_distance
    x, y = self_position
    return lam * min(math.hypot(p[0] - x, p[1] - y) for p in visible_opponents)


def position_reward(world: WorldMap, spec: RobotSpec, position: Sequence[float], cfg: RewardConfig) -> float:
    """Non-positive penalty for standing where the robot is handicapped."""
    penalty = 0.0
    if spec.kind is Kind.UGV and world.inside_any(position, RegionKind.LAWN):
        penalty -= cfg.lawn_penalty
    if cfg.edge_margin > 0.0 and _near_forbidden(world, spec.kind, position, cfg.edge_margin):
        penalty -= cfg.edge_penalty
    return penalty


def _near_forbidden(world: WorldMap, kind: Kind, p: Sequence[float], margin: float) -> bool:
    x, y = p
    if min(x, world.width - x, y, world.height - y) <= margin:
        return True
    blocked = RegionKind.NOFLY if kind is Kind.UAV else RegionKind.BUILDING
    for region in world.regions:
        if region.kind is not blocked:
            continue
        x0, y0, x1, y1 = region.bbox
        if x < x0 - margin or x > x1 + margin or y < y0 - margin or y > y1 + margin:
            continue
        if region.contains(p) or distance_to_boundary(p, region.polygon) <= margin:
            return True
    return False


def check_capture(criminal: Sequence[float], police: Sequence[tuple[str, Sequence[float]]],
                  distance: float, min_capturers: int) -> frozenset[str] | None:
    """Police within ``distance`` (inclusive) of the criminal, if there are
    at least ``min_capturers`` of them."""
    cx, cy = criminal
    near = frozenset(pid for pid, p in police if math.hypot(p[0] - cx, p[1] - cy) <= distance)
    return near if len(near) >= min_capturers else None


def check_soi_arrival(criminal: Sequence[float], sois: Sequence[Sequence[float]], distance: float) -> int | None:
    cx, cy = criminal
    for k, s in enumerate(sois):
        if math.hypot(s[0] - cx, s[1] - cy) <= distance:
            return k
    return None


def discounted_return(rewards: Sequence[float], gamma: float) -> float:
    total = 0.0
    for r in reversed(rewards):
        total = r + gamma * total
    return total


def step_outcome(state: JointState, scenario: Scenario, step: int) -> StepOutcome:
    """Events after ``step`` (0-based) has been integrated into ``state``."""
    roster = scenario.roster
    police = [(roster[i].id, state.positions[i]) for i in scenario.team_indices(Team.POLICE)
              if state.active[i]]
    captures, arrivals = [], []
    remaining = 0
    for i in scenario.team_indices(Team.CRIMINAL):
        if not state.active[i]:
            continue
        caught = check_capture(state.positions[i], police, scenario.capture_distance, scenario.min_capturers)
        if caught is not None:
            captures.append((roster[i].id, caught))
            continue
        remaining += 1
        k = check_soi_arrival(state.positions[i], scenario.map.sois, scenario.capture_distance)
        if k is not None:
            arrivals.append((roster[i].id, k))
    all_caught = remaining == 0 and not scenario.sticky_capture
    event_end = bool(arrivals) or all_caught
    horizon_end = step + 1 >= scenario.horizon
    return StepOutcome(tuple(captures), tuple(arrivals), event_end or horizon_end,
                       horizon_end and not event_end)


def step_rewards(state: JointState, outcome: StepOutcome, scenario: Scenario) -> list[RewardBreakdown]:
    """Per-robot rewards for the step that produced ``state`` and ``outcome``."""
    roster, world, cfg = scenario.roster, scenario.map, scenario.reward
    n = len(roster)
    ids = [r.id for r in roster]
    rule = scenario.perception.hidden_rule

    event = [0.0] * n
    index = {rid: i for i, rid in enumerate(ids)}
    police_idx = scenario.team_indices(Team.POLICE)
    for crim, capturers in outcome.captures:
        event[index[crim]] -= cfg.capture_bonus
        for pid in capturers:
            event[index[pid]] += cfg.capture_bonus
    for crim, _ in outcome.arrivals:
        event[index[crim]] += cfg.soi_bonus
        for p in police_idx:
            event[p] -= cfg.soi_bonus

    offenders: set[str] = set()
    for team in (Team.POLICE, Team.CRIMINAL):
        members = [i for i in scenario.team_indices(team) if state.active[i]]
        if len(members) < 2:
            continue
        rho = max(roster[i].safe_radius for i in members)
        offenders |= pairwise_safety([(ids[i], state.positions[i]) for i in members], rho).offenders

    hidden = hidden_flags(scenario, state)
    observer_rule = rule == "observer"
    out = []
    for i, spec in enumerate(roster):
        if not state.active[i]:
            # removed from play: no shaping, position or safety terms
            out.append(RewardBreakdown(event=event[i]))
            continue
        opponents = [state.positions[j] for j in range(n)
                     if roster[j].team is not spec.team and state.active[j]
                     and _sees(state.positions[i], spec.perception_radius, state.positions[j],
                               hidden[i] if observer_rule else hidden[j])]
        shaping = shaping_reward(state.positions[i], opponents, scenario.lambda_for(spec.team), world.diagonal)
        safety = -cfg.safety_penalty if spec.id in offenders else 0.0
        position = position_reward(world, spec, state.positions[i], cfg) if cfg.position_enabled else 0.0
        out.append(RewardBreakdown(shaping=shaping, event=event[i], safety=safety, position_part=position))
    return out
