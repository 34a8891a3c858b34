"""Heterogeneous police/criminal pursuit-evasion arena with a
centralised-critic actor-critic trainer."""

from .arena import (Kind, Region, RegionKind, RobotSpec, Scenario, Team, WorldMap, ablate_proficiency,
                    load_scenario, read_scenario, serialize_scenario)
from .engine import EpisodeResult, Metrics, evaluate, run_episode, train

__version__ = "0.1.0"

__all__ = [
    "EpisodeResult", "Kind", "Metrics", "Region", "RegionKind", "RobotSpec", "Scenario", "Team",
    "WorldMap", "ablate_proficiency", "evaluate", "load_scenario", "read_scenario", "run_episode",
    "serialize_scenario", "train",
]
