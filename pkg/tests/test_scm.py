"""Recorded stepping, twin replay identity, and rollout determinism."""

import numpy as np
import pytest

from cfharm.envs import RoverEnv, TrailerEnv, Wall1dEnv
from cfharm.scm import EnvPool, EnvState, replay_step, rollout, step_recorded


def learner_stub(env, rng_seed=0):
    """A fixed stochastic policy over observations for rollout tests."""
    w = np.random.default_rng(rng_seed).normal(size=(env.obs_dim, env.action_dim)) * 0.1

    def policy(obs, states, rng):
        mean = np.tanh(obs @ w)
        a = mean + 0.1 * rng.standard_normal(mean.shape)
        return a, np.zeros(a.shape[0])

    return policy


def mu_policy(env):
    def policy(obs, states, rng):
        a = env.default_policy(states)
        return a, np.zeros(a.shape[0])

    return policy


@pytest.fixture(scope="module")
def envs():
    return [RoverEnv(), TrailerEnv(), Wall1dEnv()]


class TestStepRecorded:
    def test_rest_zero_noise_is_fixed_point(self):
        env = RoverEnv()
        s = np.array([1.0, 5.0, 0.3, 0.0, 0.8])

        class ZeroRng:
            def standard_normal(self, shape):
                return np.zeros(shape)

            def uniform(self, *a, **k):
                return np.zeros(k.get("size", a[-1] if a else 1))

        ns, _, _, _, _ = step_recorded(env, EnvState(s), np.zeros(2), ZeroRng())
        np.testing.assert_allclose(ns.x, s, atol=1e-15)

    def test_same_seed_identical(self, envs):
        for env in envs:
            s = env.sample_init(1, np.random.default_rng(3), "feasible")[0]
            a = np.full(env.action_dim, 0.2)
            out1 = step_recorded(env, EnvState(s), a, np.random.default_rng(7))
            out2 = step_recorded(env, EnvState(s), a, np.random.default_rng(7))
            np.testing.assert_array_equal(out1[0].x, out2[0].x)
            np.testing.assert_array_equal(out1[1], out2[1])
            np.testing.assert_array_equal(out1[2], out2[2])

    def test_rover_advances_half_meter(self):
        # hand-integrated bicycle step: x += v cos(0) dt = 1 * 0.5
        env = RoverEnv()
        s = EnvState(np.array([0.0, 5.0, 0.0, 1.0, 1.0]))
        ns, _, _, _ = replay_step(env, s, np.zeros(2), env.zero_noise(1)[0])
        assert ns.x[0] == pytest.approx(0.5)

    def test_stepping_done_state_raises(self):
        env = Wall1dEnv()
        st = EnvState(np.array([1.0, 0.0]), step=0, done=True)
        with pytest.raises(RuntimeError):
            step_recorded(env, st, np.zeros(1), np.random.default_rng(0))


class TestReplayStep:
    def test_twin_identity(self, envs):
        rng = np.random.default_rng(11)
        for env in envs:
            for _ in range(50):
                s = EnvState(env.sample_init(1, rng, "wide")[0])
                a = np.clip(rng.normal(size=env.action_dim), -1, 1)
                ns, obs, noise, r, g = step_recorded(env, s, a, rng)
                ns2, obs2, r2, g2 = replay_step(env, s, a, noise)
                assert ns.x.tobytes() == ns2.x.tobytes()
                assert obs.tobytes() == obs2.tobytes()
                assert r == r2 and g == g2

    def test_zero_noise_collapses_to_pure_dynamics(self):
        env = Wall1dEnv()
        s = EnvState(np.array([2.0, 1.0]))
        ns, _, _, _ = replay_step(env, s, np.array([0.5]), env.zero_noise(1)[0])
        # hand Euler: x' = 2 + 1*0.5, v' = 1 + 0.5*0.5
        np.testing.assert_allclose(ns.x, [2.5, 1.25])

    def test_counterfactual_action_replay(self):
        # replaying mu's action after recording pi's gives f(s, mu(s), xi)
        env = RoverEnv()
        rng = np.random.default_rng(5)
        s = EnvState(env.sample_init(1, rng, "wide")[0])
        a_pi = np.array([0.8, 0.3])
        _, _, noise, _, _ = step_recorded(env, s, a_pi, rng)
        a_mu = env.default_policy(s.x[None])[0]
        ns_cf, _, _, _ = replay_step(env, s, a_mu, noise)
        direct = env.transition(s.x[None], a_mu[None], noise[None])[0]
        assert ns_cf.x.tobytes() == direct.tobytes()

    def test_dimension_mismatch(self):
        env = Wall1dEnv()
        with pytest.raises(ValueError):
            replay_step(env, EnvState(np.zeros(2)), np.zeros(1), np.zeros(5))


class TestRollout:
    def test_minimal_shapes(self):
        env = Wall1dEnv()
        batch = rollout(env, mu_policy(env), 1, 1, np.random.default_rng(0))
        assert batch.states.shape == (1, 1, 2)
        assert batch.noise.shape == (1, 1, 3)

    def test_seeded_determinism(self, envs):
        for env in envs:
            b1 = rollout(env, learner_stub(env), 3, 10, np.random.default_rng(42), "wide")
            b2 = rollout(env, learner_stub(env), 3, 10, np.random.default_rng(42), "wide")
            for field in ("states", "obs", "actions", "rewards", "g", "noise", "dones"):
                assert getattr(b1, field).tobytes() == getattr(b2, field).tobytes()

    def test_rover_smoke_finite(self):
        env = RoverEnv()
        batch = rollout(env, learner_stub(env), 4, 24, np.random.default_rng(1), "wide")
        assert batch.states.shape == (4, 24, 5)
        assert np.all(np.isfinite(batch.rewards))
        assert np.all(np.isfinite(batch.g))
        assert np.all(np.isfinite(batch.obs))

    def test_full_episode_replay_reproduces_batch(self, envs):
        # byte-for-byte replay of every recorded transition
        rng = np.random.default_rng(9)
        for env in envs:
            pool = EnvPool(env, 2, rng, "wide")
            batch, _ = pool.collect(learner_stub(env), 15, rng)
            for e in range(2):
                step_in_ep = 0
                for t in range(15):
                    st = EnvState(batch.states[e, t], step=step_in_ep)
                    ns, obs, r, g_next = replay_step(
                        env, st, batch.actions[e, t], batch.noise[e, t]
                    )
                    assert r == batch.rewards[e, t]
                    if t + 1 < 15 and not batch.dones[e, t]:
                        assert ns.x.tobytes() == batch.states[e, t + 1].tobytes()
                        assert obs.tobytes() == batch.obs[e, t + 1].tobytes()
                        step_in_ep += 1
                    elif batch.dones[e, t]:
                        step_in_ep = 0

    def test_episode_boundaries_reset(self):
        env = Wall1dEnv()
        pool = EnvPool(env, 8, np.random.default_rng(2), "feasible")
        total = 0
        for _ in range(12):
            batch, stats = pool.collect(learner_stub(env), env.horizon, np.random.default_rng(3))
            total += stats.n
        assert total >= 8  # horizon forces episode turnover
        assert np.all(pool.steps < env.horizon)
