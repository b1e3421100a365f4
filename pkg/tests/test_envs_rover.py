"""Rover dynamics, U-corridor constraint geometry, default policy, and
initializers."""

import math

import numpy as np
import pytest

from cfharm.envs import RoverConfig, RoverEnv


@pytest.fixture(scope="module")
def env():
    return RoverEnv()


class TestDynamics:
    def test_rest_is_fixed_point(self, env):
        s = np.array([[3.0, 2.0, 1.0, 0.0, 0.5]])
        ns = env.transition(s, np.zeros((1, 2)), env.zero_noise(1))
        np.testing.assert_allclose(ns, s, atol=1e-15)

    def test_accel_clamps_to_one(self, env):
        # commanded 2 m/s^2 clamps to 1; v = 0.5 after dt = 0.5 (rho = 1)
        s = np.array([[0.0, 5.0, 0.0, 0.0, 1.0]])
        ns = env.transition(s, np.array([[2.0, 0.0]]), env.zero_noise(1))
        assert ns[0, 3] == pytest.approx(0.5)

    def test_friction_circle_projection(self, env):
        # oracle: after clipping, (a_long/a_max)^2 + (a_lat/a_lat_max)^2 <= rho^2
        rng = np.random.default_rng(0)
        a_long = rng.uniform(-3, 3, size=200)
        a_lat = rng.uniform(-3, 3, size=200)
        rho = np.full(200, 0.3)
        cl, cl_lat = env.clip_friction_circle(a_long, a_lat, rho)
        lhs = (cl / env.cfg.a_max) ** 2 + (cl_lat / env.cfg.a_lat_max) ** 2
        assert np.all(lhs <= rho**2 + 1e-9)
        # inside the circle the command passes through unchanged
        small_l, small_lat = env.clip_friction_circle(
            np.array([0.1]), np.array([0.1]), np.array([0.9])
        )
        assert small_l[0] == 0.1 and small_lat[0] == 0.1

    def test_friction_limits_acceleration_step(self, env):
        # rho = 0.3 straight-line braking saturates at 0.3 m/s^2
        s = np.array([[0.0, 5.0, 0.0, 0.0, 0.3]])
        ns = env.transition(s, np.array([[1.0, 0.0]]), env.zero_noise(1))
        assert ns[0, 3] == pytest.approx(0.3 * env.cfg.dt)

    def test_speed_and_wheel_clamps_hold(self, env):
        rng = np.random.default_rng(1)
        s = env.sample_init(100, rng, "wide")
        for _ in range(30):
            a = rng.uniform(-3, 3, size=(100, 2))
            s = env.transition(s, a, env.draw_noise(rng, 100))
            assert np.all(np.abs(s[:, 3]) <= env.cfg.v_max + 1e-12)

    def test_determinism(self, env):
        rng = np.random.default_rng(2)
        s = env.sample_init(5, rng, "wide")
        a = rng.normal(size=(5, 2))
        xi = env.draw_noise(rng, 5)
        np.testing.assert_array_equal(env.transition(s, a, xi), env.transition(s, a, xi))


class TestConstraint:
    def test_interior_negative(self, env):
        # mid-corridor on leg 1
        s = np.array([[0.0, 5.0, 0.0, 0.0, 1.0]])
        assert env.constraint(s)[0] == pytest.approx(-(2.0 - 0.5))

    def test_zero_on_violation_surface(self, env):
        # the footprint touches the wall when the center is half_width -
        # footprint_radius = 1.5 m off the centerline
        s = np.array([[1.5, 5.0, 0.0, 0.0, 1.0]])
        assert env.constraint(s)[0] == pytest.approx(0.0, abs=1e-12)

    def test_known_penetration_depth(self, env):
        # closed-form distance: 0.2 m past the violation surface
        s = np.array([[1.7, 5.0, 0.0, 0.0, 1.0]])
        assert env.constraint(s)[0] == pytest.approx(0.2)
        # and on the bend: radial distance from the arc centerline
        c = env.cfg
        ang = 0.3
        p = env._center + (c.bend_radius + 1.7) * np.array([math.cos(ang), math.sin(ang)])
        s = np.array([[p[0], p[1], 0.0, 0.0, 1.0]])
        assert env.constraint(s)[0] == pytest.approx(0.2)

    def test_continuity_probe(self, env):
        # |g(s) - g(s + d)| <= L ||d|| with L = 1 (distance function)
        rng = np.random.default_rng(3)
        s = env.sample_init(200, rng, "wide")
        g0 = env.constraint(s)
        for _ in range(5):
            d = rng.normal(size=(200, 2)) * 0.01
            s2 = s.copy()
            s2[:, :2] += d
            g1 = env.constraint(s2)
            assert np.all(np.abs(g1 - g0) <= np.linalg.norm(d, axis=1) + 1e-12)
            g0, s = g1, s2

    def test_goal_arclength_consistency(self, env):
        # walking the centerline by construction gives matching projections
        u = np.linspace(0.2, env.total_len - 0.2, 50)
        pts, _ = env.centerline_point(u)
        d, u_back, _ = env.centerline_project(pts)
        np.testing.assert_allclose(d, 0.0, atol=1e-9)
        np.testing.assert_allclose(u_back, u, atol=1e-9)


class TestDefaultPolicy:
    def test_rest_on_centerline_aligned(self, env):
        pts, t_goal = env.centerline_point(np.array([5.0]))
        s = np.array([[pts[0, 0], pts[0, 1], t_goal[0], 0.0, 1.0]])
        a = env.default_policy(s)
        np.testing.assert_allclose(a, [[0.0, 0.0]], atol=1e-12)

    def test_full_braking_at_speed(self, env):
        s = np.array([[0.0, 5.0, 0.5 * math.pi, 1.0, 1.0]])
        assert env.default_policy(s)[0, 0] == pytest.approx(-1.0)
        s[0, 3] = -1.0
        assert env.default_policy(s)[0, 0] == pytest.approx(1.0)

    def test_steers_toward_centerline(self, env):
        # geometric sign oracle: simulating the steering law must shrink the
        # lateral offset while the rover still moves
        s = np.array([[-1.0, 5.0, -0.5 * math.pi, 1.0, 1.0]])  # 1 m left of leg 1
        d0 = env.centerline_project(s[:, :2])[0][0]
        for _ in range(3):
            a = env.default_policy(s)
            a[:, 0] = 0.0  # isolate steering
            s = env.transition(s, a, env.zero_noise(1))
        d1 = env.centerline_project(s[:, :2])[0][0]
        assert d1 < d0

    def test_braking_settles_without_oscillation(self, env):
        s = np.array([[0.0, 5.0, -0.5 * math.pi, 0.3, 1.0]])
        for _ in range(4):
            s = env.transition(s, env.default_policy(s), env.zero_noise(1))
        assert abs(s[0, 3]) < 1e-12


class TestInit:
    def test_feasible_velocity_exactly_zero(self, env):
        s = env.sample_init(500, np.random.default_rng(4), "feasible")
        assert np.all(s[:, 3] == 0.0)

    def test_all_samples_collision_free(self, env):
        rng = np.random.default_rng(5)
        for regime in ("feasible", "wide"):
            s = env.sample_init(2000, rng, regime)
            assert np.all(env.constraint(s) <= 0.0)

    def test_feasible_heading_within_half_pi(self, env):
        s = env.sample_init(500, np.random.default_rng(6), "feasible")
        _, _, t_goal = env.centerline_project(s[:, :2])
        diff = np.abs((s[:, 2] - t_goal + math.pi) % (2 * math.pi) - math.pi)
        assert np.all(diff <= 0.5 * math.pi + 1e-9)

    def test_friction_range(self, env):
        s = env.sample_init(500, np.random.default_rng(7), "wide")
        assert np.all((s[:, 4] >= 0.3) & (s[:, 4] <= 1.0))

    def test_unknown_regime(self, env):
        with pytest.raises(ValueError):
            env.sample_init(1, np.random.default_rng(0), "bogus")


class TestGoal:
    def test_success_needs_position_and_speed(self, env):
        assert env.is_success(np.array([[0.2, 0.2, 0.0, 0.05, 1.0]]))[0]
        assert not env.is_success(np.array([[0.2, 0.2, 0.0, 0.5, 1.0]]))[0]
        assert not env.is_success(np.array([[1.0, 1.0, 0.0, 0.0, 1.0]]))[0]

    def test_reward_rewards_progress_toward_goal(self, env):
        s = np.array([[0.0, 5.0, -0.5 * math.pi, 1.0, 1.0]])
        ns = env.transition(s, np.zeros((1, 2)), env.zero_noise(1))
        r_fwd = env.reward(s, np.zeros((1, 2)), ns)[0]
        s2 = np.array([[0.0, 5.0, 0.5 * math.pi, 1.0, 1.0]])
        ns2 = env.transition(s2, np.zeros((1, 2)), env.zero_noise(1))
        r_bwd = env.reward(s2, np.zeros((1, 2)), ns2)[0]
        assert r_fwd > 0 > r_bwd
