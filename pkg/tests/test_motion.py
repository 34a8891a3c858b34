"""Tests for UAV/UGV kinematics, position resolution and the safety margin."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pursuit_arena.arena import PRESETS, Kind, Region, RegionKind, RobotSpec, Team, WorldMap
from pursuit_arena.errors import NumericInputError
from pursuit_arena.motion import (UavState, UgvState, clamp_ugv_command, integrate_uav, integrate_ugv,
                                  pairwise_safety, position_allowed, resolve_position, wrap_angle)


def preset(name, team=Team.POLICE):
    kind, v, a, r = PRESETS[name]
    return RobotSpec(name, team, kind, v, a, r)


FIREFLY, IRIS, HUSKY = preset("firefly"), preset("iris"), preset("husky")

finite = st.floats(-50, 50, allow_nan=False)


def uav_oracle(pos, vel, acc, dt, spec):
    """Direct transcription of the constant-acceleration update with caps."""
    ax, ay = acc
    na = math.sqrt(ax * ax + ay * ay)
    if na > spec.a_max:
        ax, ay = ax * spec.a_max / na, ay * spec.a_max / na
    x = pos[0] + vel[0] * dt + 0.5 * ax * dt ** 2
    y = pos[1] + vel[1] * dt + 0.5 * ay * dt ** 2
    vx, vy = vel[0] + ax * dt, vel[1] + ay * dt
    nv = math.sqrt(vx * vx + vy * vy)
    if nv > spec.v_max:
        vx, vy = vx * spec.v_max / nv, vy * spec.v_max / nv
    return (x, y), (vx, vy)


class TestIntegrateUav:
    def test_uniform_motion(self):
        out = integrate_uav(UavState((0, 0), (1, 0)), (0, 0), 0.5, FIREFLY)
        assert out.position == (0.5, 0.0)

    def test_from_rest_with_acceleration(self):
        spec = RobotSpec("u", Team.POLICE, Kind.UAV, 5.0, 2.0, 10.0)
        out = integrate_uav(UavState((0, 0), (0, 0)), (2, 0), 1.0, spec)
        assert out.position == (1.0, 0.0)
        assert out.velocity == (2.0, 0.0)

    def test_rest_stays_at_rest(self):
        out = integrate_uav(UavState((3, 4)), (0, 0), 0.7, IRIS)
        assert out.position == (3.0, 4.0)

    def test_acceleration_clamped(self):
        out = integrate_uav(UavState((0, 0)), (10, 0), 1.0, FIREFLY)
        assert out.velocity == (1.0, 0.0)

    @settings(max_examples=300, deadline=None)
    @given(px=finite, py=finite, vx=st.floats(-5, 5), vy=st.floats(-5, 5), ax=finite, ay=finite,
           dt=st.floats(0.01, 1.0), which=st.sampled_from([FIREFLY, IRIS]))
    def test_matches_oracle_and_caps_speed(self, px, py, vx, vy, ax, ay, dt, which):
        v0 = (vx, vy)
        if math.hypot(vx, vy) > which.v_max:
            s = which.v_max / math.hypot(vx, vy)
            v0 = (vx * s, vy * s)
        out = integrate_uav(UavState((px, py), v0), (ax, ay), dt, which)
        pos, vel = uav_oracle((px, py), v0, (ax, ay), dt, which)
        assert out.position == pytest.approx(pos, abs=1e-12)
        assert out.velocity == pytest.approx(vel, abs=1e-12)
        assert math.hypot(*out.velocity) <= which.v_max + 1e-12

    @pytest.mark.parametrize("bad", [math.nan, math.inf])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(NumericInputError):
            integrate_uav(UavState((0, 0)), (bad, 0), 0.1, FIREFLY)

    def test_bad_dt(self):
        with pytest.raises(NumericInputError):
            integrate_uav(UavState((0, 0)), (0, 0), 0.0, FIREFLY)


class TestUgvCommands:
    def test_delta_clamp(self):
        v, _ = clamp_ugv_command(UgvState((0, 0), v_lin=0.5), (0.7, 0.0), HUSKY)
        assert v == pytest.approx(0.6)

    def test_inside_interval_unchanged(self):
        assert clamp_ugv_command(UgvState((0, 0), v_lin=0.5), (0.55, 0.02), HUSKY) == (0.55, 0.02)

    def test_husky_speed_cap(self):
        v, _ = clamp_ugv_command(UgvState((0, 0), v_lin=0.95), (1.2, 0.0), HUSKY)
        assert v == 1.0

    @settings(max_examples=300, deadline=None)
    @given(v0=st.floats(-1, 1), w0=st.floats(-1, 1), v=finite, w=finite)
    def test_deltas_and_caps(self, v0, w0, v, w):
        lin, ang = clamp_ugv_command(UgvState((0, 0), v_lin=v0, v_ang=w0), (v, w), HUSKY)
        assert abs(lin - v0) <= HUSKY.a_max + 1e-12
        assert abs(ang - w0) <= HUSKY.a_max + 1e-12
        assert abs(lin) <= HUSKY.v_max
        assert abs(ang) <= HUSKY.angular_max


class TestIntegrateUgv:
    def test_straight_line(self):
        out = integrate_ugv(UgvState((0, 0)), (1.0, 0.0), 1.0)
        assert out.position == pytest.approx((1.0, 0.0))

    def test_heading_updated_first(self):
        out = integrate_ugv(UgvState((0, 0)), (1.0, math.pi), 1.0, 0.5)
        assert out.heading == pytest.approx(math.pi)
        assert out.position == pytest.approx((-0.5, 0.0), abs=1e-12)

    @given(h=st.floats(-3, 3), v=st.floats(-1, 1), w=st.floats(-1, 1), f=st.floats(0.05, 1.0))
    def test_displacement_linear_in_terrain_factor(self, h, v, w, f):
        base = integrate_ugv(UgvState((1, 2), heading=h), (v, w), 0.1, 1.0)
        slow = integrate_ugv(UgvState((1, 2), heading=h), (v, w), 0.1, f)
        assert slow.position[0] - 1 == pytest.approx(f * (base.position[0] - 1), abs=1e-12)
        assert slow.position[1] - 2 == pytest.approx(f * (base.position[1] - 2), abs=1e-12)

    @given(theta=st.floats(-100, 100))
    def test_wrap_angle_range(self, theta):
        w = wrap_angle(theta)
        assert -math.pi < w <= math.pi
        assert math.cos(w) == pytest.approx(math.cos(theta), abs=1e-9)


def safety_oracle(points, rho):
    out = []
    for (a, pa), (b, pb) in itertools.combinations(points, 2):
        out.append((a, b, (pa[0] - pb[0]) ** 2 + (pa[1] - pb[1]) ** 2 - rho ** 2))
    return out


class TestPairwiseSafety:
    def test_hand_value(self):
        r = pairwise_safety([("i", (0, 0)), ("j", (3, 4))], 1.0)
        assert r.pairs == (("i", "j", 24.0),)
        assert r.all_safe

    def test_boundary_is_unsafe(self):
        r = pairwise_safety([("i", (1, 1)), ("j", (1, 1))], 0.0)
        assert r.pairs[0][2] == 0.0
        assert not r.all_safe
        assert r.offenders == {"i", "j"}

    def test_single_robot(self):
        assert pairwise_safety([("solo", (0, 0))], 5.0).all_safe

    @settings(max_examples=200, deadline=None)
    @given(pts=st.lists(st.tuples(st.integers(-5, 5), st.integers(-5, 5)), min_size=0, max_size=6),
           rho=st.integers(0, 4))
    def test_matches_oracle_on_integer_grid(self, pts, rho):
        # integer coordinates hit h == 0 exactly
        named = [(f"r{k}", (float(x), float(y))) for k, (x, y) in enumerate(pts)]
        r = pairwise_safety(named, float(rho))
        expected = safety_oracle(named, rho)
        assert list(r.pairs) == expected
        assert r.all_safe == all(h > 0 for _, _, h in expected)


class TestResolvePosition:
    WORLD = WorldMap(20, 20, regions=(
        Region(RegionKind.BUILDING, ((5, 5), (10, 5), (10, 10), (5, 10))),
        Region(RegionKind.NOFLY, ((12, 12), (16, 12), (16, 16), (12, 16))),
    ))

    def test_ugv_blocked_by_building(self):
        assert resolve_position(self.WORLD, Kind.UGV, (7, 7), (1, 1)) == (1, 1)

    def test_uav_free_space(self):
        assert resolve_position(self.WORLD, Kind.UAV, (7, 7), (1, 1)) == (7, 7)

    def test_uav_blocked_by_nofly(self):
        assert resolve_position(self.WORLD, Kind.UAV, (14, 14), (1, 1)) == (1, 1)

    def test_out_of_arena(self):
        assert not position_allowed(self.WORLD, Kind.UAV, (-0.1, 3))

    @given(x=st.floats(0, 20), y=st.floats(0, 20), kind=st.sampled_from([Kind.UAV, Kind.UGV]))
    def test_idempotent(self, x, y, kind):
        once = resolve_position(self.WORLD, kind, (x, y), (0.0, 0.0))
        assert resolve_position(self.WORLD, kind, once, (0.0, 0.0)) == once


class TestRandomRollout:
    def test_speed_caps_never_exceeded(self):
        """Preset speed caps hold over a long random command sequence."""
        rng = np.random.default_rng(4)
        uav = {"firefly": UavState((0, 0)), "iris": UavState((0, 0))}
        ugv = UgvState((0, 0))
        for _ in range(2000):
            for name, spec in (("firefly", FIREFLY), ("iris", IRIS)):
                uav[name] = integrate_uav(uav[name], rng.uniform(-10, 10, 2), 0.1, spec)
                assert math.hypot(*uav[name].velocity) <= spec.v_max + 1e-12
            cmd = clamp_ugv_command(ugv, rng.uniform(-3, 3, 2), HUSKY)
            nxt = integrate_ugv(ugv, cmd, 0.1)
            assert abs(nxt.v_lin) <= 1.0
            ugv = nxt
