"""Static world model: regions, spots of interest, stations, robot roster.

Scenarios are written as YAML documents.  All coordinates in a document are
given in a *configured* frame whose lower-left arena corner is ``map.origin``;
internally everything is translated so the arena is ``[0, width] x [0, height]``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import yaml

from .errors import DegenerateMapError, MissingTargetError, SchemaError, ValidationError

Point = tuple[float, float]

_EPS = 1e-12


class RegionKind(str, enum.Enum):
    HIDDEN = "hidden"
    NOFLY = "nofly"
    BUILDING = "building"
    LAWN = "lawn"


class Team(str, enum.Enum):
    POLICE = "police"
    CRIMINAL = "criminal"


class Kind(str, enum.Enum):
    UAV = "uav"
    UGV = "ugv"


class Mode(str, enum.Enum):
    AIR = "air"
    GROUND = "ground"


_MODE_KINDS = {
    Mode.AIR: (RegionKind.NOFLY,),
    Mode.GROUND: (RegionKind.BUILDING, RegionKind.LAWN, RegionKind.HIDDEN),
}


# ---------------------------------------------------------------------------
# planar geometry
# ---------------------------------------------------------------------------

def _on_segment(px, py, ax, ay, bx, by):
    cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    scale = max(abs(bx - ax), abs(by - ay), 1.0)
    if abs(cross) > _EPS * scale * scale:
        return False
    return (min(ax, bx) - _EPS <= px <= max(ax, bx) + _EPS
            and min(ay, by) - _EPS <= py <= max(ay, by) + _EPS)


def point_in_polygon(p: Sequence[float], polygon: Sequence[Point]) -> bool:
    """Crossing-number test; points on an edge count as inside."""
    px, py = p[0], p[1]
    inside = False
    n = len(polygon)
    ax, ay = polygon[n - 1]
    for i in range(n):
        bx, by = polygon[i]
        if _on_segment(px, py, ax, ay, bx, by):
            return True
        if (ay > py) != (by > py):
            x_cross = ax + (py - ay) * (bx - ax) / (by - ay)
            if px < x_cross:
                inside = not inside
        ax, ay = bx, by
    return inside


def _segments_intersect(p1, p2, p3, p4):
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if abs(v) <= _EPS:
            return 0
        return 1 if v > 0 else -1

    o1, o2 = orient(p1, p2, p3), orient(p1, p2, p4)
    o3, o4 = orient(p3, p4, p1), orient(p3, p4, p2)
    if o1 != o2 and o3 != o4:
        return True
    return ((o1 == 0 and _on_segment(*p3, *p1, *p2))
            or (o2 == 0 and _on_segment(*p4, *p1, *p2))
            or (o3 == 0 and _on_segment(*p1, *p3, *p4))
            or (o4 == 0 and _on_segment(*p2, *p3, *p4)))


def polygon_is_simple(polygon: Sequence[Point]) -> bool:
    n = len(polygon)
    if n < 3:
        return False
    area2 = sum(polygon[i][0] * polygon[(i + 1) % n][1] - polygon[(i + 1) % n][0] * polygon[i][1]
                for i in range(n))
    if abs(area2) <= _EPS:
        return False
    edges = [(polygon[i], polygon[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                # adjacent edges share one vertex; reject if they fold back
                a, b = edges[i]
                c, d = edges[j]
                shared, other_i, other_j = (b, a, d) if j == i + 1 else (a, b, c)
                if (_on_segment(*other_j, *shared, *other_i)
                        or _on_segment(*other_i, *shared, *other_j)):
                    return False
                continue
            if _segments_intersect(*edges[i], *edges[j]):
                return False
    return True


def distance_to_boundary(p: Sequence[float], polygon: Sequence[Point]) -> float:
    """Euclidean distance from ``p`` to the closest edge of ``polygon``."""
    px, py = p[0], p[1]
    best = math.inf
    n = len(polygon)
    ax, ay = polygon[n - 1]
    for i in range(n):
        bx, by = polygon[i]
        dx, dy = bx - ax, by - ay
        seg2 = dx * dx + dy * dy
        t = 0.0 if seg2 == 0.0 else max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / seg2))
        ex, ey = ax + t * dx - px, ay + t * dy - py
        best = min(best, ex * ex + ey * ey)
        ax, ay = bx, by
    return math.sqrt(best)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Region:
    kind: RegionKind
    polygon: tuple[Point, ...]
    bbox: tuple[float, float, float, float] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        xs = [v[0] for v in self.polygon]
        ys = [v[1] for v in self.polygon]
        object.__setattr__(self, "bbox", (min(xs), min(ys), max(xs), max(ys)))

    def contains(self, p: Sequence[float]) -> bool:
        x0, y0, x1, y1 = self.bbox
        if p[0] < x0 - _EPS or p[0] > x1 + _EPS or p[1] < y0 - _EPS or p[1] > y1 + _EPS:
            return False
        return point_in_polygon(p, self.polygon)


@dataclass(frozen=True)
class WorldMap:
    width: float
    height: float
    regions: tuple[Region, ...] = ()
    sois: tuple[Point, ...] = ()
    stations: tuple[Point, ...] = ()
    origin: Point = (0.0, 0.0)

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def in_bounds(self, p: Sequence[float]) -> bool:
        return 0.0 <= p[0] <= self.width and 0.0 <= p[1] <= self.height

    def regions_of(self, *kinds: RegionKind) -> tuple[Region, ...]:
        return tuple(r for r in self.regions if r.kind in kinds)

    def inside_any(self, p: Sequence[float], kind: RegionKind) -> bool:
        return any(r.kind is kind and r.contains(p) for r in self.regions)


@dataclass(frozen=True)
class RobotSpec:
    """Capability profile of one robot.

    For UGVs ``a_max`` is the per-step bound on the change of the commanded
    linear and angular velocity, not an acceleration in m/s^2.
    """

    id: str
    team: Team
    kind: Kind
    v_max: float
    a_max: float
    perception_radius: float
    safe_radius: float = 0.5
    angular_max: float = 1.0


# robot presets: (kind, v_max, a_max, perception radius)
PRESETS: dict[str, tuple[Kind, float, float, float]] = {
    "firefly": (Kind.UAV, 5.0, 1.0, 30.0),
    "iris": (Kind.UAV, 7.0, 2.0, 30.0),
    "husky": (Kind.UGV, 1.0, 0.1, 15.0),
}


@dataclass(frozen=True)
class RewardConfig:
    # None means "derive from the scenario's shaping lambda"
    lambda_police: float | None = None
    lambda_criminal: float | None = None
    capture_bonus: float = 10.0
    soi_bonus: float = 10.0
    lawn_penalty: float = 0.5
    safety_penalty: float = 1.0
    edge_penalty: float = 1.0
    edge_margin: float = 0.5
    position_enabled: bool = True


@dataclass(frozen=True)
class TrainConfig:
    batch: int = 256
    capacity: int = 100_000
    tau: float = 0.01
    lr_critic: float = 1e-3
    lr_policy: float = 1e-4
    noise_start: float = 0.3
    noise_end: float = 0.05
    episodes: int = 1000
    learn_police: bool = True
    learn_criminal: bool = True
    hidden: tuple[int, ...] = (64, 64)
    update_every: int = 1
    warmup: int = 0
    grad_clip: float = 0.0
    checkpoint_every: int = 0
    optimizer: str = "sgd"          # "sgd" or "adam"


@dataclass(frozen=True)
class PerceptionConfig:
    relative: str = "vector"        # "vector" or "scalar"
    hidden_rule: str = "target"     # "target" or "observer"


@dataclass(frozen=True)
class Scenario:
    map: WorldMap
    roster: tuple[RobotSpec, ...]
    horizon: int = 400
    dt: float = 0.1
    capture_distance: float = 1.0
    min_capturers: int = 2
    gamma: float = 0.95
    shaping_lambda: float = 0.1
    seed: int = 0
    sticky_capture: bool = False
    lawn_factor: float = 0.3
    reward: RewardConfig = RewardConfig()
    train: TrainConfig = TrainConfig()
    perception: PerceptionConfig = PerceptionConfig()

    def index_of(self, robot_id: str) -> int:
        for i, spec in enumerate(self.roster):
            if spec.id == robot_id:
                return i
        raise KeyError(f"unknown robot id {robot_id!r}")

    def team_indices(self, team: Team) -> list[int]:
        return [i for i, s in enumerate(self.roster) if s.team is team]

    def lambda_for(self, team: Team) -> float:
        if team is Team.POLICE:
            lam = self.reward.lambda_police
            return -self.shaping_lambda if lam is None else lam
        lam = self.reward.lambda_criminal
        return self.shaping_lambda if lam is None else lam


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def classify_point(world: WorldMap, p: Sequence[float], mode: Mode) -> frozenset[RegionKind]:
    """Region kinds containing ``p`` that matter for the given movement mode."""
    kinds = _MODE_KINDS[Mode(mode)]
    return frozenset(r.kind for r in world.regions if r.kind in kinds and r.contains(p))


def sample_criminal_start(world: WorldMap, rng, tries: int = 1000) -> Point:
    """Uniform rejection sample of a ground spot outside every building."""
    buildings = world.regions_of(RegionKind.BUILDING)
    for _ in range(tries):
        x, y = rng.uniform(0.0, world.width), rng.uniform(0.0, world.height)
        p = (float(x), float(y))
        if not any(b.contains(p) for b in buildings):
            return p
    raise DegenerateMapError(f"no free ground found in {tries} samples")


def nearest_soi_distance(world: WorldMap, p: Sequence[float]) -> float:
    if not world.sois:
        raise MissingTargetError("map has no spots of interest")
    return min(math.hypot(p[0] - s[0], p[1] - s[1]) for s in world.sois)


# ---------------------------------------------------------------------------
# scenario documents
# ---------------------------------------------------------------------------

_TOP_KEYS = {"version", "map", "robots", "episode", "train", "reward", "perception"}
_MAP_KEYS = {"width", "height", "origin", "frame", "regions", "sois", "stations"}
_REGION_KEYS = {"kind", "polygon"}
_ROBOT_KEYS = {"id", "team", "kind", "preset", "v_max", "a_max", "perception_radius",
               "safe_radius", "angular_max"}
_EPISODE_KEYS = {"horizon", "dt", "capture_distance", "min_capturers", "sticky_capture",
                 "lawn_factor"}
_TRAIN_SCALARS = {"gamma", "lambda", "seed"}
_TRAIN_KEYS = _TRAIN_SCALARS | {f.name for f in fields(TrainConfig)}
_REWARD_KEYS = {f.name for f in fields(RewardConfig)}
_PERCEPTION_KEYS = {f.name for f in fields(PerceptionConfig)}


def _section(doc: Mapping, name: str, allowed: set[str], required: bool = False) -> dict:
    raw = doc.get(name.rsplit(".", 1)[-1])
    if raw is None:
        if required:
            raise SchemaError(name, "missing required section")
        return {}
    if not isinstance(raw, Mapping):
        raise SchemaError(name, "expected a mapping")
    for key in raw:
        if key not in allowed:
            raise SchemaError(f"{name}.{key}", "unknown key")
    return dict(raw)


def _number(value, key, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(key, f"expected a number, got {value!r}")
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise SchemaError(key, f"expected an integer, got {value!r}")
        return int(value)
    out = float(value)
    if not math.isfinite(out):
        raise SchemaError(key, "must be finite")
    return out


def _flag(value, key):
    if not isinstance(value, bool):
        raise SchemaError(key, f"expected true/false, got {value!r}")
    return value


def _point(value, key) -> Point:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise SchemaError(key, "expected a 2-element [x, y] list")
    return (_number(value[0], f"{key}[0]"), _number(value[1], f"{key}[1]"))


def _points(value, key) -> list[Point]:
    if value is None:
        return []
    if not isinstance(value, (list, tuple)):
        raise SchemaError(key, "expected a list of points")
    return [_point(v, f"{key}[{i}]") for i, v in enumerate(value)]


def _enum(enum_cls, value, key):
    try:
        return enum_cls(str(value).lower())
    except ValueError:
        allowed = ", ".join(e.value for e in enum_cls)
        raise SchemaError(key, f"expected one of {{{allowed}}}, got {value!r}") from None


def _parse_robot(raw, i) -> RobotSpec:
    key = f"robots[{i}]"
    if not isinstance(raw, Mapping):
        raise SchemaError(key, "expected a mapping")
    for k in raw:
        if k not in _ROBOT_KEYS:
            raise SchemaError(f"{key}.{k}", "unknown key")
    values: dict[str, Any] = {}
    if "preset" in raw:
        preset = str(raw["preset"]).lower()
        if preset not in PRESETS:
            raise SchemaError(f"{key}.preset", f"unknown preset {raw['preset']!r}")
        kind, v_max, a_max, radius = PRESETS[preset]
        values.update(kind=kind, v_max=v_max, a_max=a_max, perception_radius=radius)
    for req in ("id", "team"):
        if req not in raw:
            raise SchemaError(f"{key}.{req}", "missing required key")
    values["id"] = str(raw["id"])
    values["team"] = _enum(Team, raw["team"], f"{key}.team")
    if "kind" in raw:
        values["kind"] = _enum(Kind, raw["kind"], f"{key}.kind")
    for name in ("v_max", "a_max", "perception_radius", "safe_radius", "angular_max"):
        if name in raw:
            values[name] = _number(raw[name], f"{key}.{name}")
    for req in ("kind", "v_max", "a_max", "perception_radius"):
        if req not in values:
            raise SchemaError(f"{key}.{req}", "missing required key (no preset given)")
    return RobotSpec(**values)


def _shift(p: Point, origin: Point) -> Point:
    return (p[0] - origin[0], p[1] - origin[1])


def parse_scenario(doc: Mapping) -> Scenario:
    """Build a validated :class:`Scenario` from an already-decoded mapping."""
    if not isinstance(doc, Mapping):
        raise SchemaError("<root>", "document must be a mapping")
    for key in doc:
        if key not in _TOP_KEYS:
            raise SchemaError(str(key), "unknown key")
    if doc.get("version", 1) != 1:
        raise SchemaError("version", f"unsupported version {doc['version']!r}")

    m = _section(doc, "map", _MAP_KEYS, required=True)
    for req in ("width", "height"):
        if req not in m:
            raise SchemaError(f"map.{req}", "missing required key")
    origin = _point(m.get("origin", (0.0, 0.0)), "map.origin")
    frame = m.get("frame", "configured")
    if frame not in ("configured", "internal"):
        raise SchemaError("map.frame", "expected 'configured' or 'internal'")
    shift = (0.0, 0.0) if frame == "internal" else origin

    regions = []
    raw_regions = m.get("regions") or []
    if not isinstance(raw_regions, list):
        raise SchemaError("map.regions", "expected a list")
    for i, r in enumerate(raw_regions):
        key = f"map.regions[{i}]"
        if not isinstance(r, Mapping):
            raise SchemaError(key, "expected a mapping")
        for k in r:
            if k not in _REGION_KEYS:
                raise SchemaError(f"{key}.{k}", "unknown key")
        if "kind" not in r or "polygon" not in r:
            raise SchemaError(key, "region needs 'kind' and 'polygon'")
        kind = _enum(RegionKind, r["kind"], f"{key}.kind")
        poly = tuple(_shift(p, shift) for p in _points(r["polygon"], f"{key}.polygon"))
        regions.append(Region(kind, poly))

    world = WorldMap(
        width=_number(m["width"], "map.width"),
        height=_number(m["height"], "map.height"),
        regions=tuple(regions),
        sois=tuple(_shift(p, shift) for p in _points(m.get("sois"), "map.sois")),
        stations=tuple(_shift(p, shift) for p in _points(m.get("stations"), "map.stations")),
        origin=origin,
    )

    raw_robots = doc.get("robots")
    if not isinstance(raw_robots, list):
        raise SchemaError("robots", "expected a list of robots")
    roster = tuple(_parse_robot(r, i) for i, r in enumerate(raw_robots))

    ep = _section(doc, "episode", _EPISODE_KEYS)
    tr = _section(doc, "train", _TRAIN_KEYS)
    rw = _section(doc, "reward", _REWARD_KEYS)
    pc = _section(doc, "perception", _PERCEPTION_KEYS)

    train_values: dict[str, Any] = {}
    for f in fields(TrainConfig):
        if f.name not in tr:
            continue
        key = f"train.{f.name}"
        if f.name == "optimizer":
            if tr[f.name] not in ("sgd", "adam"):
                raise SchemaError(key, "expected 'sgd' or 'adam'")
            train_values[f.name] = tr[f.name]
        elif f.name == "hidden":
            if not isinstance(tr[f.name], list) or not tr[f.name]:
                raise SchemaError(key, "expected a non-empty list of layer widths")
            train_values[f.name] = tuple(_number(v, key, int) for v in tr[f.name])
        elif f.type in ("bool",):
            train_values[f.name] = _flag(tr[f.name], key)
        elif f.type == "int":
            train_values[f.name] = _number(tr[f.name], key, int)
        else:
            train_values[f.name] = _number(tr[f.name], key)

    reward_values: dict[str, Any] = {}
    for f in fields(RewardConfig):
        if f.name not in rw:
            continue
        key = f"reward.{f.name}"
        if f.name == "position_enabled":
            reward_values[f.name] = _flag(rw[f.name], key)
        elif rw[f.name] is None and f.name.startswith("lambda"):
            reward_values[f.name] = None
        else:
            reward_values[f.name] = _number(rw[f.name], key)

    perception_values = {}
    for name, allowed in (("relative", ("vector", "scalar")), ("hidden_rule", ("target", "observer"))):
        if name in pc:
            if pc[name] not in allowed:
                raise SchemaError(f"perception.{name}", f"expected one of {allowed}")
            perception_values[name] = pc[name]

    scenario = Scenario(
        map=world,
        roster=roster,
        horizon=_number(ep.get("horizon", 400), "episode.horizon", int),
        dt=_number(ep.get("dt", 0.1), "episode.dt"),
        capture_distance=_number(ep.get("capture_distance", 1.0), "episode.capture_distance"),
        min_capturers=_number(ep.get("min_capturers", 2), "episode.min_capturers", int),
        sticky_capture=_flag(ep.get("sticky_capture", False), "episode.sticky_capture"),
        lawn_factor=_number(ep.get("lawn_factor", 0.3), "episode.lawn_factor"),
        gamma=_number(tr.get("gamma", 0.95), "train.gamma"),
        shaping_lambda=_number(tr.get("lambda", 0.1), "train.lambda"),
        seed=_number(tr.get("seed", 0), "train.seed", int),
        reward=RewardConfig(**reward_values),
        train=TrainConfig(**train_values),
        perception=PerceptionConfig(**perception_values),
    )
    validate_scenario(scenario)
    return scenario


def validate_scenario(s: Scenario) -> None:
    """Raise :class:`ValidationError` naming the first broken invariant."""
    w = s.map
    if not (w.width > 0 and w.height > 0):
        raise ValidationError("map-size", "width and height must be positive")
    for i, r in enumerate(w.regions):
        if not polygon_is_simple(r.polygon):
            raise ValidationError("polygon-simple", f"region {i} polygon is not simple")
        for v in r.polygon:
            if not w.in_bounds(v):
                raise ValidationError("in-arena", f"region {i} vertex {v} outside the arena")
    for p in w.sois:
        if not w.in_bounds(p):
            raise ValidationError("in-arena", f"SoI {p} outside the arena")
        if w.inside_any(p, RegionKind.BUILDING):
            raise ValidationError("soi-not-in-building", f"SoI {p} lies inside a building")
    for p in w.stations:
        if not w.in_bounds(p):
            raise ValidationError("in-arena", f"station {p} outside the arena")
        if w.inside_any(p, RegionKind.BUILDING) or w.inside_any(p, RegionKind.HIDDEN):
            raise ValidationError("station-placement", f"station {p} inside a building or hidden region")
    if s.horizon < 1:
        raise ValidationError("horizon", "horizon must be >= 1")
    if not s.dt > 0:
        raise ValidationError("dt", "dt must be positive")
    if not s.capture_distance > 0:
        raise ValidationError("capture-distance", "capture_distance must be positive")
    if s.min_capturers < 1:
        raise ValidationError("min-capturers", "min_capturers must be >= 1")
    if not 0.0 <= s.gamma <= 1.0:
        raise ValidationError("gamma", "gamma must lie in [0, 1]")
    if not 0.0 < s.lawn_factor <= 1.0:
        raise ValidationError("lawn-factor", "lawn_factor must lie in (0, 1]")
    ids = [r.id for r in s.roster]
    if len(set(ids)) != len(ids):
        raise ValidationError("unique-ids", "robot ids must be unique")
    teams = {r.team for r in s.roster}
    if Team.POLICE not in teams or Team.CRIMINAL not in teams:
        raise ValidationError("teams", "roster needs at least one police and one criminal robot")
    for r in s.roster:
        if not (r.v_max > 0 and r.a_max > 0 and r.perception_radius > 0 and r.safe_radius >= 0
                and r.angular_max > 0):
            raise ValidationError("robot-params", f"robot {r.id!r} has a non-positive capability")
    t = s.train
    if t.batch < 1 or t.capacity < t.batch or t.update_every < 1 or t.episodes < 0:
        raise ValidationError("train-sizes", "need batch >= 1, capacity >= batch, update_every >= 1")
    if not 0.0 <= t.tau <= 1.0:
        raise ValidationError("tau", "tau must lie in [0, 1]")


def load_scenario(source: str | Mapping) -> Scenario:
    """Parse a YAML scenario document (text) or an already-decoded mapping."""
    if isinstance(source, Mapping):
        return parse_scenario(source)
    try:
        doc = yaml.safe_load(source)
    except yaml.YAMLError as exc:
        raise SchemaError("<document>", f"not valid YAML: {exc}") from None
    return parse_scenario(doc)


def read_scenario(path: str | Path) -> Scenario:
    return load_scenario(Path(path).read_text())


def scenario_to_dict(s: Scenario) -> dict:
    """Inverse of :func:`parse_scenario`; coordinates stay in the internal frame."""
    w = s.map
    robots = []
    for r in s.roster:
        robots.append({
            "id": r.id, "team": r.team.value, "kind": r.kind.value,
            "v_max": r.v_max, "a_max": r.a_max, "perception_radius": r.perception_radius,
            "safe_radius": r.safe_radius, "angular_max": r.angular_max,
        })
    train = {"gamma": s.gamma, "lambda": s.shaping_lambda, "seed": s.seed}
    for f in fields(TrainConfig):
        v = getattr(s.train, f.name)
        train[f.name] = list(v) if isinstance(v, tuple) else v
    return {
        "version": 1,
        "map": {
            "width": w.width, "height": w.height,
            "origin": list(w.origin), "frame": "internal",
            "regions": [{"kind": r.kind.value, "polygon": [list(v) for v in r.polygon]}
                        for r in w.regions],
            "sois": [list(p) for p in w.sois],
            "stations": [list(p) for p in w.stations],
        },
        "robots": robots,
        "episode": {
            "horizon": s.horizon, "dt": s.dt, "capture_distance": s.capture_distance,
            "min_capturers": s.min_capturers, "sticky_capture": s.sticky_capture,
            "lawn_factor": s.lawn_factor,
        },
        "train": train,
        "reward": {f.name: getattr(s.reward, f.name) for f in fields(RewardConfig)},
        "perception": {f.name: getattr(s.perception, f.name) for f in fields(PerceptionConfig)},
    }


def serialize_scenario(s: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(s), sort_keys=False)


def ablate_proficiency(s: Scenario) -> Scenario:
    """Baseline without proficiency awareness.

    Position rewards are switched off and every robot gets the same
    perception radius (the roster mean).
    """
    radius = sum(r.perception_radius for r in s.roster) / len(s.roster)
    roster = tuple(replace(r, perception_radius=radius) for r in s.roster)
    return replace(s, roster=roster, reward=replace(s.reward, position_enabled=False))


def flatten(d: Mapping, prefix: str = "") -> dict[str, Any]:
    """Dotted-key view of a nested config, used for config diffs."""
    out: dict[str, Any] = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, Mapping):
            out.update(flatten(v, key + "."))
        elif isinstance(v, list) and v and all(isinstance(x, Mapping) for x in v):
            for i, x in enumerate(v):
                out.update(flatten(x, f"{key}[{i}]."))
        else:
            out[key] = v
    return out


def config_diff(a: Scenario, b: Scenario) -> list[tuple[str, Any, Any]]:
    fa, fb = flatten(scenario_to_dict(a)), flatten(scenario_to_dict(b))
    keys = sorted(set(fa) | set(fb))
    return [(k, fa.get(k), fb.get(k)) for k in keys if fa.get(k) != fb.get(k)]


def roster_ids(s: Scenario) -> list[str]:
    return [r.id for r in s.roster]


def stations_for(world: WorldMap, n: int, rng) -> list[Point]:
    """Assign ``n`` police to stations.

    Stations are used in order when there are at least as many police as
    stations; otherwise a random subset is drawn each call.
    """
    if not world.stations:
        raise MissingTargetError("map has no police stations")
    k = len(world.stations)
    if k > n:
        return [world.stations[int(i)] for i in rng.permutation(k)[:n]]
    return [world.stations[i % k] for i in range(n)]
