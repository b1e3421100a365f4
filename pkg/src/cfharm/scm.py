"""Structural-causal-model environment core.

Every environment is a deterministic transition function ``f(s, a, xi)``
plus a deterministic observation function ``obs(s, xi)``; all randomness
enters through the exogenous draw ``xi`` recorded per transition.  Storing
the raw draws makes every transition replayable bit-exactly (the twin
model), which is what counterfactual rollouts rely on.

Environments implement the following batched interface (arrays carry a
leading environment axis):

    state_dim, obs_dim, action_dim, noise_dim, horizon, dt
    sample_init(n, rng, regime) -> (n, S)
    draw_noise(rng, n)          -> (n, Xi)     raw standard draws
    transition(s, a, xi)        -> (n, S)      deterministic
    observe(s, xi)              -> (n, O)      deterministic
    constraint(s)               -> (n,)        g(s); > 0 means violation
    reward(s, a, s_next)        -> (n,)
    is_success(s)               -> (n,) bool   terminal success test
    default_policy(s)           -> (n, A)      the safe fallback
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "EnvState",
    "TrajectoryBatch",
    "EpisodeStats",
    "EnvPool",
    "step_recorded",
    "replay_step",
    "rollout",
]


@dataclass
class EnvState:
    """Single-environment state: physical vector, step counter, done flag."""

    x: np.ndarray
    step: int = 0
    done: bool = False

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        if not np.all(np.isfinite(self.x)):
            raise ValueError("non-finite state component")
        if self.step < 0:
            raise ValueError("negative step counter")


@dataclass
class TrajectoryBatch:
    """Rollout storage for E environments over M steps.

    ``dones[e, t]`` marks transitions that ended an episode; the state at
    t+1 in that lane is a fresh reset.  ``final_*`` hold the state/obs the
    batch left each environment in (used for window-end bootstraps).
    """

    states: np.ndarray  # (E, M, S)
    obs: np.ndarray  # (E, M, O)
    actions: np.ndarray  # (E, M, A)
    log_probs: np.ndarray  # (E, M)
    rewards: np.ndarray  # (E, M)
    g: np.ndarray  # (E, M) constraint at s_t
    noise: np.ndarray  # (E, M, Xi)
    dones: np.ndarray  # (E, M) bool
    final_states: np.ndarray  # (E, S)
    final_obs: np.ndarray  # (E, O)

    @property
    def n_envs(self) -> int:
        return self.states.shape[0]

    @property
    def n_steps(self) -> int:
        return self.states.shape[1]

    @property
    def cont(self) -> np.ndarray:
        return ~self.dones


@dataclass
class EpisodeStats:
    """Per-episode records completed during one collection window."""

    violated: list[bool] = field(default_factory=list)
    success: list[bool] = field(default_factory=list)
    max_g: list[float] = field(default_factory=list)
    length: list[int] = field(default_factory=list)

    def merge(self, other: "EpisodeStats") -> None:
        self.violated += other.violated
        self.success += other.success
        self.max_g += other.max_g
        self.length += other.length

    @property
    def n(self) -> int:
        return len(self.violated)


def step_recorded(env, state: EnvState, action: np.ndarray, rng: np.random.Generator):
    """Step one environment, recording the exogenous draw.

    Returns ``(next_state, obs, noise_record, reward, g_next)``.  Replaying
    the returned record through :func:`replay_step` reproduces the outputs
    bit-exactly.
    """
    if state.done:
        raise RuntimeError("cannot step a done state")
    noise = env.draw_noise(rng, 1)[0]
    next_state, obs, reward, g_next = _apply(env, state.x, action, noise)
    done = bool(env.is_success(next_state[None])[0]) or state.step + 1 >= env.horizon
    return (
        EnvState(next_state, step=state.step + 1, done=done),
        obs,
        noise,
        reward,
        g_next,
    )


def replay_step(env, state: EnvState, action: np.ndarray, noise: np.ndarray):
    """Re-run one transition under a recorded (or counterfactual) draw."""
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != (env.noise_dim,):
        raise ValueError(
            f"noise record has shape {noise.shape}, expected ({env.noise_dim},)"
        )
    next_state, obs, reward, g_next = _apply(env, state.x, action, noise)
    done = bool(env.is_success(next_state[None])[0]) or state.step + 1 >= env.horizon
    return EnvState(next_state, step=state.step + 1, done=done), obs, reward, g_next


def _apply(env, x: np.ndarray, action: np.ndarray, noise: np.ndarray):
    s = np.asarray(x, dtype=np.float64)[None]
    a = np.asarray(action, dtype=np.float64)[None]
    xi = np.asarray(noise, dtype=np.float64)[None]
    s_next = env.transition(s, a, xi)
    obs = env.observe(s_next, xi)
    reward = env.reward(s, a, s_next)
    g_next = env.constraint(s_next)
    return s_next[0], obs[0], float(reward[0]), float(g_next[0])


class EnvPool:
    """Live state of E parallel environments across collection windows.

    Episodes that end inside a window are reset with the pool's init
    regime; completed-episode statistics are reported per window.
    """

    def __init__(self, env, n_envs: int, rng: np.random.Generator, regime: str = "feasible"):
        self.env = env
        self.n_envs = n_envs
        self.regime = regime
        self.states = env.sample_init(n_envs, rng, regime)
        self.obs = env.observe(self.states, env.draw_noise(rng, n_envs))
        self.steps = np.zeros(n_envs, dtype=np.int64)
        g0 = env.constraint(self.states)
        self.ep_max_g = g0.copy()

    def collect(self, policy_fn, n_steps: int, rng: np.random.Generator):
        """Roll all environments ``n_steps`` forward under ``policy_fn``.

        ``policy_fn(obs, states, rng) -> (actions, log_probs)``.
        """
        env = self.env
        e, m = self.n_envs, n_steps
        if m < 1:
            raise ValueError("n_steps must be >= 1")
        batch = TrajectoryBatch(
            states=np.empty((e, m, env.state_dim)),
            obs=np.empty((e, m, env.obs_dim)),
            actions=np.empty((e, m, env.action_dim)),
            log_probs=np.empty((e, m)),
            rewards=np.empty((e, m)),
            g=np.empty((e, m)),
            noise=np.empty((e, m, env.noise_dim)),
            dones=np.zeros((e, m), dtype=bool),
            final_states=np.empty((e, env.state_dim)),
            final_obs=np.empty((e, env.obs_dim)),
        )
        stats = EpisodeStats()
        for t in range(m):
            actions, log_probs = policy_fn(self.obs, self.states, rng)
            noise = env.draw_noise(rng, e)
            next_states = env.transition(self.states, actions, noise)
            next_obs = env.observe(next_states, noise)
            rewards = env.reward(self.states, actions, next_states)

            batch.states[:, t] = self.states
            batch.obs[:, t] = self.obs
            batch.actions[:, t] = actions
            batch.log_probs[:, t] = log_probs
            batch.rewards[:, t] = rewards
            batch.g[:, t] = env.constraint(self.states)
            batch.noise[:, t] = noise

            self.steps += 1
            g_next = env.constraint(next_states)
            self.ep_max_g = np.maximum(self.ep_max_g, g_next)
            success = env.is_success(next_states)
            done = success | (self.steps >= env.horizon)
            batch.dones[:, t] = done

            self.states = next_states
            self.obs = next_obs
            if np.any(done):
                idx = np.nonzero(done)[0]
                for i in idx:
                    stats.violated.append(bool(self.ep_max_g[i] > 0.0))
                    stats.success.append(bool(success[i]))
                    stats.max_g.append(float(self.ep_max_g[i]))
                    stats.length.append(int(self.steps[i]))
                fresh = env.sample_init(len(idx), rng, self.regime)
                fresh_obs = env.observe(fresh, env.draw_noise(rng, len(idx)))
                self.states[idx] = fresh
                self.obs[idx] = fresh_obs
                self.steps[idx] = 0
                self.ep_max_g[idx] = env.constraint(fresh)
        batch.final_states[:] = self.states
        batch.final_obs[:] = self.obs
        return batch, stats


def rollout(
    env,
    policy_fn,
    n_envs: int,
    n_steps: int,
    rng: np.random.Generator,
    regime: str = "feasible",
) -> TrajectoryBatch:
    """One-shot collection convenience over a fresh :class:`EnvPool`."""
    pool = EnvPool(env, n_envs, rng, regime)
    batch, _ = pool.collect(policy_fn, n_steps, rng)
    return batch
