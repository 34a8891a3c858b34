import copy
from pathlib import Path

import pytest

from pursuit_arena.arena import load_scenario

SCENARIOS = Path(__file__).resolve().parents[1] / "src" / "pursuit_arena" / "scenarios"

BASE_DOC = {
    "map": {
        "width": 20,
        "height": 20,
        "regions": [],
        "sois": [[18, 18]],
        "stations": [[1, 1], [1, 19]],
    },
    "robots": [
        {"id": "p1", "team": "police", "preset": "firefly"},
        {"id": "p2", "team": "police", "preset": "husky"},
        {"id": "c1", "team": "criminal", "kind": "ugv", "v_max": 1.0, "a_max": 0.1, "perception_radius": 10},
    ],
    "episode": {"horizon": 20, "dt": 0.1},
    "train": {"episodes": 2, "batch": 8, "capacity": 64, "hidden": [8], "seed": 3},
}


def make_doc(**sections):
    """Deep copy of the base document with top-level sections merged in."""
    doc = copy.deepcopy(BASE_DOC)
    for key, value in sections.items():
        if isinstance(value, dict) and isinstance(doc.get(key), dict):
            doc[key].update(value)
        else:
            doc[key] = value
    return doc


def make_scenario(**sections):
    return load_scenario(make_doc(**sections))


@pytest.fixture
def scenario():
    return make_scenario()


@pytest.fixture
def demo_path():
    return SCENARIOS / "demo.yaml"


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
