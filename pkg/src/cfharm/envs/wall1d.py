"""One-dimensional point mass approaching a wall.

Tiny environment used to exercise shielding and counterfactual machinery
with hand-checkable numbers: a point accelerates along a line, the
constraint is penetration past a wall, and the default policy is maximum
braking.  With ``sigma_accel = 0`` the dynamics are exactly deterministic
and the braking value function has a closed form (see
:meth:`Wall1dEnv.mu_constraint_value`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Wall1dConfig", "Wall1dEnv"]


@dataclass
class Wall1dConfig:
    dt: float = 0.5
    horizon: int = 40
    a_max: float = 1.0
    v_max: float = 2.0
    wall_x: float = 5.0
    goal_x: float = 4.0
    goal_tol: float = 0.25
    goal_speed: float = 0.1
    sigma_accel: float = 0.05
    sigma_obs: float = 0.01
    init_x_range: tuple[float, float] = (0.0, 3.0)
    wide_x_range: tuple[float, float] = (0.0, 4.5)
    wide_v_range: tuple[float, float] = (-1.0, 2.0)


class Wall1dEnv:
    """State layout: [x, v].  Noise layout (3 standard normals):
    [accel, obs_x, obs_v]."""

    name = "wall1d"
    state_dim = 2
    obs_dim = 2
    action_dim = 1
    noise_dim = 3

    def __init__(self, config: Wall1dConfig | None = None):
        self.cfg = config or Wall1dConfig()
        self.horizon = self.cfg.horizon
        self.dt = self.cfg.dt

    def constraint(self, states) -> np.ndarray:
        return states[:, 0] - self.cfg.wall_x

    def transition(self, states, actions, noise):
        c = self.cfg
        a = np.clip(actions[:, 0] + c.sigma_accel * noise[:, 0], -c.a_max, c.a_max)
        out = np.empty_like(states)
        out[:, 0] = states[:, 0] + states[:, 1] * c.dt
        out[:, 1] = np.clip(states[:, 1] + a * c.dt, -c.v_max, c.v_max)
        return out

    def observe(self, states, noise):
        c = self.cfg
        obs = np.empty((states.shape[0], 2))
        obs[:, 0] = states[:, 0] - c.goal_x + c.sigma_obs * noise[:, 1]
        obs[:, 1] = states[:, 1] + c.sigma_obs * noise[:, 2]
        return obs

    def reward(self, states, actions, next_states):
        c = self.cfg
        d0 = np.abs(states[:, 0] - c.goal_x)
        d1 = np.abs(next_states[:, 0] - c.goal_x)
        return (d0 - d1) - 0.01 + 5.0 * self.is_success(next_states)

    def is_success(self, states) -> np.ndarray:
        c = self.cfg
        return (np.abs(states[:, 0] - c.goal_x) <= c.goal_tol) & (
            np.abs(states[:, 1]) <= c.goal_speed
        )

    def default_policy(self, states) -> np.ndarray:
        c = self.cfg
        return -np.clip(states[:, 1:2] / c.dt, -c.a_max, c.a_max)

    def draw_noise(self, rng, n):
        return rng.standard_normal((n, self.noise_dim))

    def zero_noise(self, n):
        return np.zeros((n, self.noise_dim))

    def sample_init(self, n, rng, regime="feasible"):
        c = self.cfg
        states = np.empty((n, 2))
        if regime == "feasible":
            states[:, 0] = rng.uniform(*c.init_x_range, size=n)
            states[:, 1] = 0.0
        elif regime == "wide":
            states[:, 0] = rng.uniform(*c.wide_x_range, size=n)
            states[:, 1] = rng.uniform(*c.wide_v_range, size=n)
        else:
            raise ValueError(f"unknown init regime {regime!r}")
        return states

    def mu_constraint_value(self, states: np.ndarray, gamma: float) -> np.ndarray:
        """Exact max-form braking value under noise-free dynamics.

        Rolls the deterministic braking trajectory and returns
        ``max_t gamma^t g(s_t)`` including the current state.  Exact for
        ``sigma_accel = 0`` and used as the analytic critic in shield
        tests.
        """
        c = self.cfg
        s = np.array(states, dtype=np.float64, copy=True)
        best = self.constraint(s)
        disc = 1.0
        # braking zeroes any admissible speed within v_max / (a_max * dt)
        # steps; a few extra iterations cover the clamps exactly
        steps = int(np.ceil(c.v_max / (c.a_max * c.dt))) + 2
        zero = np.zeros((s.shape[0], self.noise_dim))
        for _ in range(steps):
            s = self.transition(s, self.default_policy(s), zero)
            disc *= gamma
            best = np.maximum(best, disc * self.constraint(s))
        return best
