"""Estimator tests against brute-force oracles."""

import numpy as np
import pytest

from cfharm.estimators import (
    contraction_eta,
    discounted_tail_max,
    gae,
    harm_return,
    max_operator_exact,
    tdl_max,
)

GAMMA, LAM = 0.99, 0.95


def brute_tail_max(g, gamma):
    """Oracle: max_{tau >= t} gamma^(tau-t) g_tau by direct enumeration."""
    T = len(g)
    out = np.empty(T)
    for t in range(T):
        out[t] = max(gamma ** (tau - t) * g[tau] for tau in range(t, T))
    return out


class TestContractionEta:
    def test_lam_zero_collapses_to_gamma(self):
        assert contraction_eta(0.7, 0.0) == pytest.approx(0.7, abs=1e-15)

    def test_gamma_zero(self):
        assert contraction_eta(0.0, 0.5) == 0.0

    def test_matches_series_sum(self):
        # oracle: numerically sum lam^(k-1) gamma^k (1-lam) to machine precision
        total = 0.0
        for k in range(1, 20000):
            total += LAM ** (k - 1) * GAMMA**k * (1.0 - LAM)
        assert contraction_eta(GAMMA, LAM) == pytest.approx(total, abs=1e-12)
        assert contraction_eta(GAMMA, LAM) == pytest.approx(0.83193, abs=1e-5)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            contraction_eta(1.0, 0.5)
        with pytest.raises(ValueError):
            contraction_eta(0.5, 1.0)


class TestTdlMax:
    def test_zero_fixed_point(self):
        g = np.zeros(8)
        v = np.zeros(8)
        assert np.all(tdl_max(g, v, gamma=GAMMA, lam=LAM) == 0.0)

    def test_lam_zero_single_step_reduction(self):
        rng = np.random.default_rng(0)
        g = rng.normal(size=10)
        v = rng.normal(size=10)
        got = tdl_max(g, v, gamma=GAMMA, lam=0.0)
        want = np.maximum(g, GAMMA * v)
        np.testing.assert_allclose(got, want, atol=1e-15)

    def test_exact_tail_values_are_a_fixed_point(self):
        # with V set to the exact tail max, one application reproduces it
        rng = np.random.default_rng(1)
        g = rng.uniform(-1, 1, size=10)
        vstar = brute_tail_max(g, GAMMA)
        next_v = np.append(vstar[1:], 0.0)  # beyond the end nothing remains
        cont = np.ones(10, dtype=bool)
        cont[-1] = False  # finite sequence: last entry has no successor
        got = tdl_max(g, next_v, gamma=GAMMA, lam=LAM, cont=cont)
        np.testing.assert_allclose(got, vstar, atol=1e-12)

    def test_lower_bound_and_monotonicity(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            g = rng.normal(size=12)
            v = rng.normal(size=12)
            out = tdl_max(g, v, gamma=GAMMA, lam=LAM)
            assert np.all(out >= g)
            bumped = tdl_max(g + rng.uniform(0, 1, size=12), v, gamma=GAMMA, lam=LAM)
            g2 = g + rng.uniform(0, 1, size=12)
            out2 = tdl_max(np.maximum(g, g2), v, gamma=GAMMA, lam=LAM)
            assert np.all(out2 >= out - 1e-12)
            del bumped

    def test_batched_matches_loop(self):
        rng = np.random.default_rng(3)
        g = rng.normal(size=(5, 7))
        v = rng.normal(size=(5, 7))
        cont = rng.random((5, 7)) > 0.3
        full = tdl_max(g, v, gamma=GAMMA, lam=LAM, cont=cont)
        for i in range(5):
            row = tdl_max(g[i], v[i], gamma=GAMMA, lam=LAM, cont=cont[i])
            np.testing.assert_array_equal(full[i], row)

    def test_done_cut_blocks_leakage(self):
        g = np.array([-1.0, -1.0, -1.0])
        v = np.array([100.0, 100.0, 100.0])
        cont = np.array([True, False, True])
        out = tdl_max(g, v, gamma=GAMMA, lam=LAM, cont=cont)
        # position 1 ends its episode: exactly g there
        assert out[1] == -1.0
        # position 0 blends toward position 1's value, not the critic fiction
        assert out[0] == pytest.approx(
            max(-1.0, GAMMA * (LAM * -1.0 + (1 - LAM) * 100.0))
        )

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            tdl_max(np.zeros(3), np.zeros(4), gamma=GAMMA, lam=LAM)


class TestHarmReturn:
    def test_all_safe_gives_zeros(self):
        h = np.zeros(6)
        v = np.zeros(6)
        assert np.all(harm_return(h, v, gamma=GAMMA, lam=LAM) == 0.0)

    def test_single_state(self):
        out = harm_return(np.array([2.0]), np.array([0.0]), gamma=GAMMA, lam=LAM)
        assert out[0] == 2.0

    def test_hand_backward_recursion(self):
        # hand oracle at gamma=0.5: with lam=0 the blend is the critic only,
        # so [0, 3, 0] with an all-zero critic stays [0, 3, 0]
        h = np.array([0.0, 3.0, 0.0])
        v = np.zeros(3)
        out = harm_return(h, v, gamma=0.5, lam=0.0)
        np.testing.assert_allclose(out, [0.0, 3.0, 0.0])
        # with lam=0.8 the recursive term propagates the spike backward:
        # hand computation: vh2=0, vh1=3, vh0=max(0, 0.5*0.8*3)=1.2
        out = harm_return(h, v, gamma=0.5, lam=0.8)
        np.testing.assert_allclose(out, [1.2, 3.0, 0.0], atol=1e-15)

    def test_blend_sign_switch(self):
        h = np.array([0.0, 1.0])
        v = np.array([0.5, 0.5])
        plus = harm_return(h, v, gamma=0.9, lam=0.5, blend_sign=1.0)
        minus = harm_return(h, v, gamma=0.9, lam=0.5, blend_sign=-1.0)
        assert plus[0] == pytest.approx(max(0.0, 0.9 * (0.5 * 1.0 + 0.5 * 0.5)))
        assert minus[0] == pytest.approx(max(0.0, 0.9 * (0.5 * 1.0 - 0.5 * 0.5)))


class TestGae:
    def test_zeros(self):
        adv, ret = gae(np.zeros(5), np.zeros(5), np.zeros(5), gamma=GAMMA, lam=LAM)
        assert np.all(adv == 0.0) and np.all(ret == 0.0)

    def test_single_step_td_residual(self):
        r = np.array([1.5])
        v = np.array([0.3])
        nv = np.array([0.7])
        adv, _ = gae(r, v, nv, gamma=GAMMA, lam=LAM)
        assert adv[0] == pytest.approx(1.5 + GAMMA * 0.7 - 0.3)

    def test_definition_sum_oracle(self):
        rng = np.random.default_rng(4)
        T = 6
        r = rng.normal(size=T)
        values = rng.normal(size=T + 1)
        v, nv = values[:-1], values[1:]
        adv, ret = gae(r, v, nv, gamma=GAMMA, lam=LAM)
        # oracle: direct sum of (gamma*lam)^k * delta_{t+k}
        delta = r + GAMMA * nv - v
        for t in range(T):
            want = sum((GAMMA * LAM) ** (k - t) * delta[k] for k in range(t, T))
            assert abs(adv[t] - want) < 1e-12
        np.testing.assert_allclose(ret, adv + v, atol=1e-14)

    def test_done_stops_accumulation(self):
        r = np.array([0.0, 5.0])
        v = np.zeros(2)
        nv = np.array([10.0, 10.0])
        cont = np.array([False, True])
        adv, _ = gae(r, v, nv, gamma=GAMMA, lam=LAM, cont=cont)
        assert adv[0] == 0.0  # neither bootstrap nor the later reward leak back


class TestDiscountedTailMax:
    def test_matches_brute_force(self):
        rng = np.random.default_rng(5)
        g = rng.uniform(-1, 1, size=15)
        np.testing.assert_allclose(
            discounted_tail_max(g, gamma=GAMMA), brute_tail_max(g, GAMMA), atol=1e-13
        )

    def test_episode_restart(self):
        g = np.array([-1.0, 4.0, -1.0])
        cont = np.array([False, True, True])
        out = discounted_tail_max(g, gamma=0.5, cont=cont)
        assert out[0] == -1.0  # the later spike belongs to another episode
        assert out[1] == 4.0


class TestMaxOperatorExact:
    def test_fixed_point_is_tail_max_on_chain(self):
        # line chain with absorbing end; brute-force oracle over a long horizon
        rng = np.random.default_rng(6)
        n = 10
        g = rng.uniform(-1, 1, size=n)
        nxt = np.minimum(np.arange(n) + 1, n - 1)
        horizon = 3000
        oracle = np.empty(n)
        for s in range(n):
            best, cur, disc = -np.inf, s, 1.0
            for _ in range(horizon):
                best = max(best, disc * g[cur])
                cur = nxt[cur]
                disc *= GAMMA
            oracle[s] = best
        v = np.zeros(n)
        for _ in range(400):
            v = max_operator_exact(g, nxt, v, gamma=GAMMA, lam=LAM)
        np.testing.assert_allclose(v, oracle, atol=1e-10)

    def test_contraction_bound(self):
        rng = np.random.default_rng(7)
        n = 20
        nxt = (np.arange(n) + 1) % n
        eta = contraction_eta(GAMMA, LAM)
        for _ in range(50):
            g = rng.uniform(-1, 1, size=n)
            v1 = rng.uniform(-2, 2, size=n)
            v2 = rng.uniform(-2, 2, size=n)
            m1 = max_operator_exact(g, nxt, v1, gamma=GAMMA, lam=LAM)
            m2 = max_operator_exact(g, nxt, v2, gamma=GAMMA, lam=LAM)
            lhs = np.max(np.abs(m1 - m2))
            rhs = eta * np.max(np.abs(v1 - v2))
            assert lhs <= rhs + 1e-12
