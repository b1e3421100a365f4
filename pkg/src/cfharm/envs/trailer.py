"""Tractor-trailer parking in an occupancy-grid lot.

On-axle hitch kinematics with a per-episode random (and unobserved)
trailer wheelbase.  Speed-proportional Gaussian noise perturbs the joint
angle, yawrate and lateral velocity, so the rig is exactly deterministic
at rest.  The agent observes its own motion state, the target spot in the
tractor frame, and a 32-ray lidar with distance-proportional uniform
noise.  The constraint is the footprint penetration depth into occupied
cells, scaled by (1 + v^2/2) when violating to penalize impact energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .grid import OccupancyGrid

__all__ = ["TrailerConfig", "TrailerEnv", "default_parking_grid"]

TWO_PI = 2.0 * math.pi


def _wrap(theta):
    return (theta + math.pi) % TWO_PI - math.pi


def _wrap_axis(theta):
    """Wrap to [-pi/2, pi/2): alignment with an undirected axis."""
    return (theta + 0.5 * math.pi) % math.pi - 0.5 * math.pi


@dataclass
class TrailerConfig:
    dt: float = 0.5
    horizon: int = 300
    tractor_wheelbase: float = 3.5
    trailer_wheelbase_mean: float = 8.0
    trailer_wheelbase_std: float = 0.5
    trailer_wheelbase_range: tuple[float, float] = (6.0, 10.0)
    a_max: float = 2.0  # m/s^2
    wheel_rate_max: float = 1.0  # rad/s
    wheel_max: float = 0.6  # rad
    joint_max: float = 1.2  # rad, jackknife clamp
    v_min: float = -2.0
    v_max: float = 5.0
    # footprint rectangles (length x width); tractor from -0.5 to +3.5 of
    # the rear axle, trailer from +0.5 to -7.5 of the hitch
    tractor_size: tuple[float, float] = (4.0, 2.0)
    tractor_back: float = 0.5
    trailer_size: tuple[float, float] = (8.0, 2.5)
    trailer_front: float = 0.5
    footprint_step: float = 0.4
    # raycasting
    n_rays: int = 32
    max_range: float = 20.0
    # noise scales (per unit speed for the process terms)
    sigma_joint: float = 0.01
    sigma_yaw: float = 0.01
    sigma_lat: float = 0.02
    sigma_obs_v: float = 0.02
    sigma_obs_wheel: float = 0.01
    sigma_obs_joint: float = 0.01
    sigma_obs_pos: float = 0.05
    sigma_obs_align: float = 0.01
    sigma_ray: float = 0.02  # uniform, proportional to distance
    # task
    goal_pos_tol: float = 0.5
    goal_yaw_tol: float = 0.2
    goal_speed_tol: float = 0.1
    progress_weight: float = 1.0
    align_weight: float = 0.5
    step_cost: float = 0.02
    goal_bonus: float = 20.0
    # initialization (calibrated against the kernel oracle)
    feasible_pos_spread: float = 2.0
    feasible_yaw_spread: float = 0.4
    wide_pos_spread: float = 6.0
    wide_yaw_spread: float = 1.2
    wide_speed_range: tuple[float, float] = (-1.5, 3.0)
    init_max_tries: int = 200


def default_parking_grid() -> OccupancyGrid:
    text = resources.files("cfharm.data").joinpath("parking_default.grid").read_text()
    return OccupancyGrid.from_text(text)


class TrailerEnv:
    """State layout: [x, y, yaw, joint, v, wheel, trailer_wheelbase,
    spot_index].  The wheelbase and spot index are part of the state for
    replay determinism; neither is observed (the wheelbase is the hidden
    variable, the spot enters the observation only through the relative
    pose).  Noise layout (41): [joint, yaw, lateral] process normals,
    [v, wheel, joint, dx, dy, align] observation normals, then 32 uniform
    ray draws in [-1, 1].
    """

    name = "trailer"
    state_dim = 8
    action_dim = 2
    noise_dim = 41

    def __init__(self, config: TrailerConfig | None = None, grid: OccupancyGrid | None = None):
        self.cfg = config or TrailerConfig()
        self.grid = grid if grid is not None else default_parking_grid()
        if not self.grid.spots:
            raise ValueError("grid defines no parking spots")
        c = self.cfg
        self.horizon = c.horizon
        self.dt = c.dt
        self.obs_dim = 8 + 2 * c.n_rays
        self._tractor_pts = self._rect_boundary(
            -c.tractor_back, c.tractor_size[0] - c.tractor_back, c.tractor_size[1]
        )
        self._trailer_pts = self._rect_boundary(
            c.trailer_front - c.trailer_size[0], c.trailer_front, c.trailer_size[1]
        )
        self._ray_angles = TWO_PI * np.arange(c.n_rays) / c.n_rays
        self._spot_xy = np.array([[s.x, s.y] for s in self.grid.spots])
        self._spot_yaw = np.array([s.yaw for s in self.grid.spots])

    def _rect_boundary(self, lo: float, hi: float, width: float) -> np.ndarray:
        """Boundary sample points of a body-frame rectangle, (k, 2)."""
        step = self.cfg.footprint_step
        half_w = width / 2.0
        xs = np.arange(lo, hi + 1e-9, step)
        ys = np.arange(-half_w, half_w + 1e-9, step)
        top = np.stack([xs, np.full_like(xs, half_w)], axis=1)
        bot = np.stack([xs, np.full_like(xs, -half_w)], axis=1)
        left = np.stack([np.full_like(ys, lo), ys], axis=1)
        right = np.stack([np.full_like(ys, hi), ys], axis=1)
        return np.unique(np.concatenate([top, bot, left, right]), axis=0)

    # -- geometry ----------------------------------------------------------------

    def footprint_points(self, states: np.ndarray) -> np.ndarray:
        """World-frame footprint boundary points, (n, k, 2)."""
        x, y, yaw, joint = states[:, 0], states[:, 1], states[:, 2], states[:, 3]
        tyaw = yaw - joint
        pts = []
        for body_pts, ang in ((self._tractor_pts, yaw), (self._trailer_pts, tyaw)):
            ca, sa = np.cos(ang), np.sin(ang)
            px = x[:, None] + ca[:, None] * body_pts[:, 0] - sa[:, None] * body_pts[:, 1]
            py = y[:, None] + sa[:, None] * body_pts[:, 0] + ca[:, None] * body_pts[:, 1]
            pts.append(np.stack([px, py], axis=2))
        return np.concatenate(pts, axis=1)

    def penetration(self, states: np.ndarray) -> np.ndarray:
        """Signed penetration depth of the rig footprint (<= 0 when free)."""
        pts = self.footprint_points(states)
        return -self.grid.signed_distance(pts).min(axis=1)

    def trailer_center(self, states: np.ndarray) -> np.ndarray:
        c = self.cfg
        tyaw = states[:, 2] - states[:, 3]
        mid = c.trailer_front - c.trailer_size[0] / 2.0
        return states[:, :2] + mid * np.stack([np.cos(tyaw), np.sin(tyaw)], axis=1)

    # -- SCM interface -------------------------------------------------------------

    def constraint(self, states: np.ndarray) -> np.ndarray:
        d = self.penetration(states)
        v = states[:, 4]
        return np.where(d <= 0.0, d, d * (1.0 + 0.5 * v * v))

    def transition(self, states, actions, noise):
        c = self.cfg
        x, y, yaw, joint, v, wheel = (states[:, i] for i in range(6))
        lt = states[:, 6]
        a = np.clip(actions[:, 0], -c.a_max, c.a_max)
        wr = np.clip(actions[:, 1], -c.wheel_rate_max, c.wheel_rate_max)
        sp = np.abs(v)

        omega = v * np.tan(wheel) / c.tractor_wheelbase + c.sigma_yaw * sp * noise[:, 1]
        joint_rate = omega - v * np.sin(joint) / lt + c.sigma_joint * sp * noise[:, 0]

        out = states.copy()
        out[:, 0] = x + (v * np.cos(yaw) - c.sigma_lat * sp * noise[:, 2] * np.sin(yaw)) * c.dt
        out[:, 1] = y + (v * np.sin(yaw) + c.sigma_lat * sp * noise[:, 2] * np.cos(yaw)) * c.dt
        out[:, 2] = _wrap(yaw + omega * c.dt)
        out[:, 3] = np.clip(_wrap(joint + joint_rate * c.dt), -c.joint_max, c.joint_max)
        out[:, 4] = np.clip(v + a * c.dt, c.v_min, c.v_max)
        out[:, 5] = np.clip(wheel + wr * c.dt, -c.wheel_max, c.wheel_max)
        return out

    def observe(self, states, noise):
        c = self.cfg
        n = states.shape[0]
        x, y, yaw, joint, v, wheel = (states[:, i] for i in range(6))
        spot_idx = states[:, 7].astype(np.int64)
        sx = self._spot_xy[spot_idx, 0]
        sy = self._spot_xy[spot_idx, 1]
        syaw = self._spot_yaw[spot_idx]

        obs = np.empty((n, self.obs_dim))
        obs[:, 0] = (v + c.sigma_obs_v * noise[:, 3]) / c.v_max
        obs[:, 1] = (wheel + c.sigma_obs_wheel * noise[:, 4]) / c.wheel_max
        jn = joint + c.sigma_obs_joint * noise[:, 5]
        obs[:, 2] = np.cos(jn)
        obs[:, 3] = np.sin(jn)
        # target spot in the tractor frame
        dx = sx - x + c.sigma_obs_pos * noise[:, 6]
        dy = sy - y + c.sigma_obs_pos * noise[:, 7]
        ca, sa = np.cos(yaw), np.sin(yaw)
        obs[:, 4] = (ca * dx + sa * dy) / c.max_range
        obs[:, 5] = (-sa * dx + ca * dy) / c.max_range
        align = _wrap_axis(syaw - (yaw - joint)) + c.sigma_obs_align * noise[:, 8]
        obs[:, 6] = np.cos(align)
        obs[:, 7] = np.sin(align)

        origins = np.stack(
            [
                np.clip(x, 0.0, self.grid.extent[0] - 1e-6),
                np.clip(y, 0.0, self.grid.extent[1] - 1e-6),
            ],
            axis=1,
        )
        dist = self.grid.raycast(origins, yaw[:, None] + self._ray_angles[None, :], c.max_range)
        dist = dist * (1.0 + c.sigma_ray * noise[:, 9:])
        obs[:, 8 : 8 + c.n_rays] = dist / c.max_range
        # closing speed of each (static) hit point relative to the agent
        obs[:, 8 + c.n_rays :] = -(v[:, None] * np.cos(self._ray_angles)[None, :]) / c.v_max
        return obs

    def ray_relative_velocity(self, states: np.ndarray) -> np.ndarray:
        """Per-ray velocity of the hit point relative to the agent (static grid)."""
        v = states[:, 4]
        return -(v[:, None] * np.cos(self._ray_angles)[None, :])

    def reward(self, states, actions, next_states):
        c = self.cfg
        spot_idx = states[:, 7].astype(np.int64)
        target = self._spot_xy[spot_idx]
        syaw = self._spot_yaw[spot_idx]
        d0 = np.linalg.norm(self.trailer_center(states) - target, axis=1)
        d1 = np.linalg.norm(self.trailer_center(next_states) - target, axis=1)
        a0 = np.abs(_wrap_axis(syaw - (states[:, 2] - states[:, 3])))
        a1 = np.abs(_wrap_axis(syaw - (next_states[:, 2] - next_states[:, 3])))
        progress = np.clip(d0 - d1, -2.0 * c.v_max * c.dt, 2.0 * c.v_max * c.dt)
        return (
            c.progress_weight * progress
            + c.align_weight * (a0 - a1)
            - c.step_cost
            + c.goal_bonus * self.is_success(next_states)
        )

    def is_success(self, states) -> np.ndarray:
        c = self.cfg
        spot_idx = states[:, 7].astype(np.int64)
        target = self._spot_xy[spot_idx]
        syaw = self._spot_yaw[spot_idx]
        pos_err = np.linalg.norm(self.trailer_center(states) - target, axis=1)
        yaw_err = np.abs(_wrap_axis(syaw - (states[:, 2] - states[:, 3])))
        return (
            (pos_err <= c.goal_pos_tol)
            & (yaw_err <= c.goal_yaw_tol)
            & (np.abs(states[:, 4]) <= c.goal_speed_tol)
        )

    def default_policy(self, states) -> np.ndarray:
        """Maximum deceleration, holding the current wheel angle."""
        c = self.cfg
        v = states[:, 4]
        accel = -np.clip(v / c.dt, -c.a_max, c.a_max)
        return np.stack([accel, np.zeros_like(accel)], axis=1)

    def draw_noise(self, rng: np.random.Generator, n: int) -> np.ndarray:
        noise = np.empty((n, self.noise_dim))
        noise[:, :9] = rng.standard_normal((n, 9))
        noise[:, 9:] = rng.uniform(-1.0, 1.0, size=(n, self.cfg.n_rays))
        return noise

    def zero_noise(self, n: int) -> np.ndarray:
        return np.zeros((n, self.noise_dim))

    def sample_init(self, n: int, rng: np.random.Generator, regime: str = "feasible"):
        c = self.cfg
        if regime == "feasible":
            pos_spread, yaw_spread = c.feasible_pos_spread, c.feasible_yaw_spread
        elif regime == "wide":
            pos_spread, yaw_spread = c.wide_pos_spread, c.wide_yaw_spread
        else:
            raise ValueError(f"unknown init regime {regime!r}")
        out = np.empty((n, self.state_dim))
        filled = 0
        for _ in range(c.init_max_tries):
            if filled >= n:
                break
            m = n - filled
            cand = np.empty((m, self.state_dim))
            spot_idx = rng.integers(0, len(self.grid.spots), size=m)
            syaw = self._spot_yaw[spot_idx]
            tyaw = syaw + rng.uniform(-yaw_spread, yaw_spread, size=m)
            tyaw = np.where(rng.random(m) < 0.5, tyaw, _wrap(tyaw + math.pi))
            center = self._spot_xy[spot_idx] + rng.uniform(
                -pos_spread, pos_spread, size=(m, 2)
            )
            joint = rng.uniform(-0.3, 0.3, size=m)
            yaw = _wrap(tyaw + joint)
            mid = c.trailer_front - c.trailer_size[0] / 2.0
            cand[:, 0] = center[:, 0] - mid * np.cos(tyaw)
            cand[:, 1] = center[:, 1] - mid * np.sin(tyaw)
            cand[:, 2] = yaw
            cand[:, 3] = joint
            if regime == "feasible":
                cand[:, 4] = 0.0
                cand[:, 5] = rng.uniform(-0.1, 0.1, size=m)
            else:
                cand[:, 4] = rng.uniform(*c.wide_speed_range, size=m)
                cand[:, 5] = rng.uniform(-c.wheel_max, c.wheel_max, size=m)
            cand[:, 6] = np.clip(
                rng.normal(c.trailer_wheelbase_mean, c.trailer_wheelbase_std, size=m),
                *c.trailer_wheelbase_range,
            )
            cand[:, 7] = spot_idx
            inside = (
                (cand[:, 0] > 1.0)
                & (cand[:, 0] < self.grid.extent[0] - 1.0)
                & (cand[:, 1] > 1.0)
                & (cand[:, 1] < self.grid.extent[1] - 1.0)
            )
            ok = inside & (self.constraint(cand) <= 0.0)
            k = min(int(ok.sum()), n - filled)
            if k:
                out[filled : filled + k] = cand[ok][:k]
                filled += k
        if filled < n:
            raise RuntimeError(
                f"could not sample {n} collision-free initial states "
                f"in {c.init_max_tries} rounds"
            )
        return out
