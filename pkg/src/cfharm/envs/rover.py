"""Rover navigating a U-shaped corridor with uncertain road friction.

Kinematic bicycle model with a circular footprint.  The corridor is two
parallel straight legs joined by a semicircular bend; the constraint is
the signed distance of the center of mass to the corridor walls, offset
by the footprint radius so g = 0 exactly when the footprint touches a
wall.  Longitudinal and lateral acceleration are jointly clipped to the
friction circle; the friction coefficient is resampled per episode from
U[0.3, 1.0] and perturbed each step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["RoverConfig", "RoverEnv"]

TWO_PI = 2.0 * math.pi


def _wrap(theta: np.ndarray) -> np.ndarray:
    return (theta + math.pi) % TWO_PI - math.pi


@dataclass
class RoverConfig:
    dt: float = 0.5
    horizon: int = 100
    wheelbase: float = 0.5
    footprint_radius: float = 0.5
    a_max: float = 1.0  # m/s^2, longitudinal command limit
    a_lat_max: float = 1.0  # m/s^2, lateral normalization of the friction circle
    wheel_max: float = 0.5  # rad
    v_max: float = 1.0  # m/s
    rho_min: float = 0.3
    rho_max: float = 1.0
    # U-corridor geometry
    leg_len: float = 10.0
    bend_radius: float = 4.0
    half_width: float = 2.0
    goal_radius: float = 0.5
    goal_speed: float = 0.1
    # process / observation noise scales (artifact choices)
    sigma_accel: float = 0.05
    sigma_wheel: float = 0.02
    sigma_rho_dyn: float = 0.02
    sigma_obs_xy: float = 0.02
    sigma_obs_theta: float = 0.01
    sigma_obs_v: float = 0.02
    sigma_obs_rho: float = 0.05
    # default-policy steering gains
    k_lat: float = 0.5
    k_head: float = 1.0
    # reward shaping
    progress_weight: float = 1.0
    step_cost: float = 0.02
    goal_bonus: float = 10.0
    # wide-initialization ranges (calibrated against the kernel oracle)
    wide_offset_max: float = 1.45
    wide_speed_max: float = 1.0


class RoverEnv:
    """State layout: [x, y, heading, v, rho].  Noise layout (8 standard
    normals): [accel, wheel, rho_dyn, obs_x, obs_y, obs_theta, obs_v,
    obs_rho]."""

    name = "rover"
    state_dim = 5
    obs_dim = 6
    action_dim = 2
    noise_dim = 8

    def __init__(self, config: RoverConfig | None = None):
        self.cfg = config or RoverConfig()
        c = self.cfg
        self.horizon = c.horizon
        self.dt = c.dt
        self._margin = c.half_width - c.footprint_radius
        self._arc_len = math.pi * c.bend_radius
        self.total_len = 2.0 * c.leg_len + self._arc_len
        self._center = np.array([c.bend_radius, c.leg_len])

    # -- corridor geometry ---------------------------------------------------

    def centerline_project(self, pts: np.ndarray):
        """Project points onto the corridor centerline.

        Returns (distance, arclength-from-goal, travel-direction angle)
        where the travel direction points toward the goal (decreasing
        arclength).
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        c = self.cfg
        x, y = pts[:, 0], pts[:, 1]
        yc = np.clip(y, 0.0, c.leg_len)

        # leg 1 (goal leg): centerline x = 0
        d1 = np.hypot(x, y - yc)
        u1 = yc
        t1 = np.full_like(x, -0.5 * math.pi)  # toward goal = -y

        # leg 2: centerline x = 2 * bend_radius
        x2 = 2.0 * c.bend_radius
        d2 = np.hypot(x - x2, y - yc)
        u2 = c.leg_len + self._arc_len + (c.leg_len - yc)
        t2 = np.full_like(x, 0.5 * math.pi)  # toward goal = +y then around

        # bend: upper semicircle around (bend_radius, leg_len)
        vx = x - self._center[0]
        vy = y - self._center[1]
        r = np.hypot(vx, vy)
        ang = np.arctan2(vy, vx)
        on_arc = (ang >= 0.0) & (ang <= math.pi)
        d3 = np.where(on_arc, np.abs(r - c.bend_radius), np.inf)
        u3 = c.leg_len + c.bend_radius * (math.pi - ang)
        # increasing-u tangent on the arc is (sin ang, -cos ang); travel
        # direction toward the goal is its opposite.
        t3 = np.arctan2(np.cos(ang), -np.sin(ang))

        d = np.stack([d1, d3, d2])
        u = np.stack([u1, u3, u2])
        t = np.stack([t1, t3, t2])
        pick = np.argmin(d, axis=0)
        cols = np.arange(pts.shape[0])
        return d[pick, cols], u[pick, cols], t[pick, cols]

    def centerline_point(self, u: np.ndarray):
        """Inverse of the arclength coordinate: point and travel direction."""
        u = np.atleast_1d(np.asarray(u, dtype=np.float64))
        c = self.cfg
        pts = np.empty((u.size, 2))
        head = np.empty(u.size)
        leg1 = u <= c.leg_len
        pts[leg1, 0] = 0.0
        pts[leg1, 1] = u[leg1]
        head[leg1] = -0.5 * math.pi
        on_arc = (~leg1) & (u <= c.leg_len + self._arc_len)
        ang = math.pi - (u[on_arc] - c.leg_len) / c.bend_radius
        pts[on_arc, 0] = self._center[0] + c.bend_radius * np.cos(ang)
        pts[on_arc, 1] = self._center[1] + c.bend_radius * np.sin(ang)
        head[on_arc] = np.arctan2(np.cos(ang), -np.sin(ang))
        leg2 = u > c.leg_len + self._arc_len
        pts[leg2, 0] = 2.0 * c.bend_radius
        pts[leg2, 1] = c.leg_len - (u[leg2] - c.leg_len - self._arc_len)
        head[leg2] = 0.5 * math.pi
        return pts, head

    # -- SCM interface ---------------------------------------------------------

    def constraint(self, states: np.ndarray) -> np.ndarray:
        d, _, _ = self.centerline_project(states[:, :2])
        return d - self._margin

    def clip_friction_circle(self, a_long, a_lat, rho):
        """Radially project (a_long, a_lat) onto the friction circle."""
        c = self.cfg
        norm = np.sqrt((a_long / c.a_max) ** 2 + (a_lat / c.a_lat_max) ** 2)
        scale = np.where(norm > rho, rho / np.maximum(norm, 1e-12), 1.0)
        return a_long * scale, a_lat * scale

    def transition(self, states, actions, noise):
        c = self.cfg
        x, y, th, v, rho = states.T
        a_cmd = np.clip(actions[:, 0] + c.sigma_accel * noise[:, 0], -c.a_max, c.a_max)
        delta = np.clip(actions[:, 1] + c.sigma_wheel * noise[:, 1], -c.wheel_max, c.wheel_max)
        rho_eff = np.clip(rho + c.sigma_rho_dyn * noise[:, 2], c.rho_min, c.rho_max)

        omega = v * np.tan(delta) / c.wheelbase
        a_lat = v * omega
        a_long, a_lat = self.clip_friction_circle(a_cmd, a_lat, rho_eff)
        omega = np.where(np.abs(v) > 1e-9, a_lat / np.where(np.abs(v) > 1e-9, v, 1.0), omega)

        out = np.empty_like(states)
        out[:, 0] = x + v * np.cos(th) * c.dt
        out[:, 1] = y + v * np.sin(th) * c.dt
        out[:, 2] = _wrap(th + omega * c.dt)
        out[:, 3] = np.clip(v + a_long * c.dt, -c.v_max, c.v_max)
        out[:, 4] = rho
        return out

    def observe(self, states, noise):
        c = self.cfg
        th = states[:, 2] + c.sigma_obs_theta * noise[:, 5]
        obs = np.empty((states.shape[0], self.obs_dim))
        obs[:, 0] = (states[:, 0] + c.sigma_obs_xy * noise[:, 3] - c.bend_radius) / c.leg_len
        obs[:, 1] = (states[:, 1] + c.sigma_obs_xy * noise[:, 4] - 0.5 * c.leg_len) / c.leg_len
        obs[:, 2] = np.cos(th)
        obs[:, 3] = np.sin(th)
        obs[:, 4] = states[:, 3] + c.sigma_obs_v * noise[:, 6]
        obs[:, 5] = states[:, 4] + c.sigma_obs_rho * noise[:, 7]
        return obs

    def reward(self, states, actions, next_states):
        c = self.cfg
        _, u0, _ = self.centerline_project(states[:, :2])
        _, u1, _ = self.centerline_project(next_states[:, :2])
        progress = np.clip(u0 - u1, -2.0 * c.v_max * c.dt, 2.0 * c.v_max * c.dt)
        return (
            c.progress_weight * progress
            - c.step_cost
            + c.goal_bonus * self.is_success(next_states)
        )

    def is_success(self, states) -> np.ndarray:
        c = self.cfg
        return (np.hypot(states[:, 0], states[:, 1]) <= c.goal_radius) & (
            np.abs(states[:, 3]) <= c.goal_speed
        )

    def default_policy(self, states) -> np.ndarray:
        """Maximum-deceleration braking while steering toward the centerline."""
        c = self.cfg
        v = states[:, 3]
        accel = -np.clip(v / c.dt, -c.a_max, c.a_max)
        _, u, t_goal = self.centerline_project(states[:, :2])
        cp, _ = self.centerline_point(u)
        off = states[:, :2] - cp
        # signed lateral offset, positive to the left of the travel direction
        e = np.cos(t_goal) * off[:, 1] - np.sin(t_goal) * off[:, 0]
        head_err = _wrap(states[:, 2] - t_goal)
        delta = np.clip(-(c.k_lat * e + c.k_head * np.sin(head_err)), -c.wheel_max, c.wheel_max)
        return np.stack([accel, delta], axis=1)

    def draw_noise(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.standard_normal((n, self.noise_dim))

    def zero_noise(self, n: int) -> np.ndarray:
        return np.zeros((n, self.noise_dim))

    def sample_init(self, n: int, rng: np.random.Generator, regime: str = "feasible"):
        c = self.cfg
        states = np.empty((n, self.state_dim))
        if regime == "feasible":
            u = rng.uniform(1.0, self.total_len - 0.5, size=n)
            pts, t_goal = self.centerline_point(u)
            states[:, 0] = pts[:, 0]
            states[:, 1] = pts[:, 1]
            states[:, 2] = _wrap(t_goal + rng.uniform(-0.5 * math.pi, 0.5 * math.pi, size=n))
            states[:, 3] = 0.0
        elif regime == "wide":
            u = rng.uniform(0.5, self.total_len, size=n)
            pts, t_goal = self.centerline_point(u)
            off = rng.uniform(-c.wide_offset_max, c.wide_offset_max, size=n)
            # left normal of the travel direction
            nx = -np.sin(t_goal)
            ny = np.cos(t_goal)
            states[:, 0] = pts[:, 0] + off * nx
            states[:, 1] = pts[:, 1] + off * ny
            states[:, 2] = rng.uniform(-math.pi, math.pi, size=n)
            states[:, 3] = rng.uniform(-c.wide_speed_max, c.wide_speed_max, size=n)
        else:
            raise ValueError(f"unknown init regime {regime!r}")
        states[:, 4] = rng.uniform(c.rho_min, c.rho_max, size=n)
        return states
