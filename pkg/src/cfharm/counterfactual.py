"""N-step counterfactual inference and the constraint-formulation registry.

Counterfactual outcomes replay the recorded exogenous draws through the
default policy (the twin model): from each visited state the branch
``s~_{k+1} = f(s~_k, mu(s~_k), xi_recorded)`` is simulated for up to N
steps and summarized with the max-form recursive estimator seeded by the
default-policy constraint critic.  Windows truncate at episode boundaries
and at the end of the rollout buffer; the learner-side window estimate
uses the identical plan so that identical paths produce identical
estimates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimators import gae, tdl_max
from .scm import TrajectoryBatch

__all__ = [
    "Formulation",
    "FORMULATIONS",
    "window_plan",
    "windowed_max_estimate",
    "policy_window_outcomes",
    "counterfactual_outcomes",
    "counterfactual_inference",
    "harm_targets",
    "ccate_targets",
    "formulation_base",
    "aggregate_targets",
    "estimate_default_threshold",
]


# -- window bookkeeping ----------------------------------------------------------


def window_plan(dones: np.ndarray, n_steps: int, max_len: int | None = None):
    """Effective window length and cut cause for every (env, t).

    ``n_eff[e, t]`` counts the transitions available from t: at most
    ``n_steps``, stopping at the first episode end and at the end of the
    buffer.  ``cut_by_done[e, t]`` is True when the window ends because
    the episode ended (no bootstrap) rather than because data ran out
    (bootstrap with the critic).
    """
    dones = np.asarray(dones, dtype=bool)
    e, m = dones.shape
    n = n_steps if max_len is None else min(n_steps, max_len)
    # steps_to_done[e, t]: transitions from t up to and including the next
    # done, or m - t when the buffer ends first
    steps = np.empty((e, m), dtype=np.int64)
    nxt = np.full(e, m, dtype=np.int64)  # index of next done at or after t
    for t in range(m - 1, -1, -1):
        nxt = np.where(dones[:, t], t, nxt)
        steps[:, t] = np.minimum(nxt + 1, m) - t
    n_eff = np.minimum(steps, n)
    t_idx = np.arange(m)[None, :]
    end = t_idx + n_eff - 1
    cut_by_done = dones[np.arange(e)[:, None], end]
    return n_eff, cut_by_done


def windowed_max_estimate(
    g_win: np.ndarray,
    v_next_win: np.ndarray,
    v_seed: np.ndarray,
    n_eff: np.ndarray,
    cut_by_done: np.ndarray,
    *,
    gamma: float,
    lam: float,
) -> np.ndarray:
    """Backward max-form recursion over variable-length windows.

    Args:
        g_win: (B, N) constraint values along each window.
        v_next_win: (B, N) critic values at each window successor state.
        v_seed: (B,) critic value at the window-end state (ignored for
            windows cut by an episode end).
        n_eff: (B,) valid transition counts, in [1, N].
        cut_by_done: (B,) True where the window ends with the episode.

    Returns:
        (B,) estimates of the max-form value at the window start.
    """
    b, n = g_win.shape
    carry = np.where(cut_by_done, 0.0, v_seed).astype(np.float64)
    last = n_eff - 1
    for k in range(n - 1, -1, -1):
        blend = gamma * (lam * carry + (1.0 - lam) * v_next_win[:, k])
        val = np.maximum(g_win[:, k], blend)
        val = np.where((k == last) & cut_by_done, g_win[:, k], val)
        carry = np.where(k < n_eff, val, carry)
    return carry


# -- learner- and default-policy window outcomes ---------------------------------


def policy_window_outcomes(
    batch: TrajectoryBatch,
    v_all: np.ndarray,
    *,
    gamma: float,
    lam: float,
    n_steps: int,
) -> np.ndarray:
    """N-step max-form estimates of the learner's own constraint outcome.

    ``v_all`` holds the learner constraint critic at every stored
    observation plus the final one, shape (E, M+1).
    """
    e, m = batch.g.shape
    n_eff, cut = window_plan(batch.dones, n_steps, max_len=m)
    n = int(n_eff.max())
    eidx = np.arange(e)[:, None, None]
    k = np.arange(n)[None, None, :]
    pos = np.minimum(np.arange(m)[None, :, None] + k, m - 1)
    g_win = batch.g[eidx, pos].reshape(e * m, n)
    v_next = v_all[eidx, np.minimum(pos + 1, m)].reshape(e * m, n)
    end = np.minimum(np.arange(m)[None, :] + n_eff, m)
    v_seed = v_all[np.arange(e)[:, None], end].reshape(e * m)
    out = windowed_max_estimate(
        g_win,
        v_next,
        v_seed,
        n_eff.reshape(e * m),
        cut.reshape(e * m),
        gamma=gamma,
        lam=lam,
    )
    return out.reshape(e, m)


def counterfactual_outcomes(
    env,
    batch: TrajectoryBatch,
    v_mu_fn,
    *,
    gamma: float,
    lam: float,
    n_steps: int,
    mu_fn=None,
) -> np.ndarray:
    """Default-policy counterfactual outcome from every stored state.

    Replays the recorded noise through ``mu_fn`` (default: the
    environment's default policy) for up to ``n_steps`` transitions and
    returns the max-form estimate seeded with ``v_mu_fn`` at the branch
    end, shape (E, M).
    """
    if mu_fn is None:
        mu_fn = env.default_policy
    e, m = batch.g.shape
    n_eff_em, cut_em = window_plan(batch.dones, n_steps, max_len=m)
    n = int(n_eff_em.max())
    b = e * m
    n_eff = n_eff_em.reshape(b)
    cut = cut_em.reshape(b)

    s = batch.states.reshape(b, env.state_dim).copy()
    g_win = np.zeros((b, n))
    v_next = np.zeros((b, n))
    g_win[:, 0] = batch.g.reshape(b)

    eidx = np.repeat(np.arange(e), m)
    tidx = np.tile(np.arange(m), e)
    v_seed = np.zeros(b)
    for k in range(n):
        active = k < n_eff
        step = np.minimum(tidx + k, m - 1)
        noise = batch.noise[eidx, step]
        actions = mu_fn(s)
        s_next = env.transition(s, actions, noise)
        s = np.where(active[:, None], s_next, s)
        if k + 1 < n:
            nxt = np.minimum(tidx + k + 1, m - 1)
            g_next = env.constraint(s)
            write = active & (k + 1 < n_eff)
            g_win[write, k + 1] = g_next[write]
        # critic at the branch successor, observed under the twin noise
        obs = env.observe(s, noise)
        vals = v_mu_fn(obs)
        v_next[active, k] = vals[active]
        ended = active & (k + 1 == n_eff) & ~cut
        v_seed[ended] = vals[ended]
    return windowed_max_estimate(
        g_win, v_next, v_seed, n_eff, cut, gamma=gamma, lam=lam
    ).reshape(e, m)


def counterfactual_inference(
    env,
    start_state: np.ndarray,
    noise_window: np.ndarray,
    v_mu_fn,
    *,
    gamma: float,
    lam: float,
    mu_fn=None,
    cut_terminal: bool = False,
) -> float:
    """Single-window counterfactual outcome (Monte-Carlo friendly form).

    ``noise_window`` holds the N recorded (or sampled) draws to replay;
    its length sets the inference horizon.  With ``cut_terminal`` the
    window is treated as ending with the episode (no critic bootstrap).
    """
    noise_window = np.atleast_2d(np.asarray(noise_window, dtype=np.float64))
    n = noise_window.shape[0]
    if n < 1:
        raise ValueError("noise_window must contain at least one record")
    if noise_window.shape[1] != env.noise_dim:
        raise ValueError("noise record layout does not match the environment")
    if mu_fn is None:
        mu_fn = env.default_policy
    s = np.asarray(start_state, dtype=np.float64)[None]
    g_win = np.zeros((1, n))
    v_next = np.zeros((1, n))
    g_win[0, 0] = env.constraint(s)[0]
    v_seed = np.zeros(1)
    for k in range(n):
        s = env.transition(s, mu_fn(s), noise_window[k][None])
        if k + 1 < n:
            g_win[0, k + 1] = env.constraint(s)[0]
        vals = v_mu_fn(env.observe(s, noise_window[k][None]))
        v_next[0, k] = vals[0]
        if k + 1 == n:
            v_seed[0] = vals[0]
    return float(
        windowed_max_estimate(
            g_win,
            v_next,
            v_seed,
            np.array([n]),
            np.array([cut_terminal]),
            gamma=gamma,
            lam=lam,
        )[0]
    )


# -- harm and CCATE targets --------------------------------------------------------


def harm_targets(vhat_pi: np.ndarray, vhat_mu: np.ndarray) -> np.ndarray:
    """Per-state counterfactual harm: ReLU(Vhat_pi - ReLU(Vhat_mu)).

    The inner clip only compares violations (the learner is never asked to
    beat a safe default); the outer clip makes harm nonnegative.
    """
    vhat_pi = np.asarray(vhat_pi)
    vhat_mu = np.asarray(vhat_mu)
    if vhat_pi.shape != vhat_mu.shape:
        raise ValueError("misaligned harm inputs")
    return np.maximum(vhat_pi - np.maximum(vhat_mu, 0.0), 0.0)


def ccate_targets(vhat_pi: np.ndarray, v_mu_values: np.ndarray) -> np.ndarray:
    """Clipped treatment effect: Vhat_pi - ReLU(V_mu); may be negative."""
    vhat_pi = np.asarray(vhat_pi)
    v_mu_values = np.asarray(v_mu_values)
    if vhat_pi.shape != v_mu_values.shape:
        raise ValueError("misaligned CCATE inputs")
    return vhat_pi - np.maximum(v_mu_values, 0.0)


# -- formulation registry -----------------------------------------------------------


@dataclass(frozen=True)
class Formulation:
    """One entry of the constraint-formulation matrix.

    ``aggregation`` is "sum" (classic cumulative constraint) or "max"
    (worst discounted violation).  ``transform`` is applied to the raw
    per-state quantity before aggregation and must be monotone with
    f(0) = 0.  ``base`` names the per-state quantity: the raw constraint,
    the treatment effect, or counterfactual harm.
    """

    id: str
    init_regime: str
    aggregation: str
    transform: str
    base: str  # "g" | "ccate" | "harm"
    critic_loss: str  # "l2" | "bce"
    uses_threshold: bool = False

    @property
    def needs_counterfactual(self) -> bool:
        return self.base == "harm"

    @property
    def needs_v_g_pi(self) -> bool:
        return self.base != "g"

    @property
    def needs_v_g_mu(self) -> bool:
        return self.base in ("ccate", "harm")


FORMULATIONS: dict[str, Formulation] = {
    f.id: f
    for f in [
        Formulation("DBS", "feasible", "sum", "indicator", "g", "l2"),
        Formulation("IC", "feasible", "sum", "clip", "g", "l2"),
        Formulation("MC_0", "feasible", "max", "identity", "g", "l2"),
        Formulation("CC_0", "feasible", "max", "indicator", "g", "bce"),
        Formulation("MC", "wide", "max", "identity", "g", "l2", uses_threshold=True),
        Formulation("CC", "wide", "max", "indicator", "g", "bce", uses_threshold=True),
        Formulation("CCATE", "wide", "max", "identity", "ccate", "l2"),
        Formulation("CCATE_C", "wide", "max", "indicator", "ccate", "bce"),
        Formulation("HARM", "wide", "max", "identity", "harm", "l2"),
        Formulation("HARM_C", "wide", "max", "indicator", "harm", "bce"),
    ]
}

IC_CLIP_CAP = 1.0


def _apply_transform(raw: np.ndarray, transform: str) -> np.ndarray:
    if transform == "identity":
        return np.asarray(raw, dtype=np.float64)
    if transform == "indicator":
        return (np.asarray(raw) > 0.0).astype(np.float64)
    if transform == "clip":
        return np.clip(np.asarray(raw), 0.0, IC_CLIP_CAP)
    raise ValueError(f"unknown transform {transform!r}")


def formulation_base(
    form: Formulation,
    g: np.ndarray,
    *,
    harm: np.ndarray | None = None,
    ccate: np.ndarray | None = None,
) -> np.ndarray:
    """Per-state transformed quantity entering the constraint."""
    if form.base == "g":
        raw = g
    elif form.base == "harm":
        if harm is None:
            raise ValueError(f"{form.id} requires counterfactual harm values")
        raw = harm
    elif form.base == "ccate":
        if ccate is None:
            raise ValueError(f"{form.id} requires CCATE values")
        raw = ccate
    else:
        raise ValueError(f"unknown base {form.base!r}")
    return _apply_transform(raw, form.transform)


def aggregate_targets(
    form: Formulation,
    base: np.ndarray,
    v_c: np.ndarray,
    v_c_next: np.ndarray,
    cont: np.ndarray,
    *,
    gamma: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Constraint critic targets and actor constraint advantages.

    For max aggregation the target is the recursive max estimate and the
    advantage is (target - critic); for sum aggregation both come from
    GAE over the transformed cost stream.
    """
    if form.aggregation == "max":
        targets = tdl_max(base, v_c_next, gamma=gamma, lam=lam, cont=cont)
        return targets, targets - v_c
    if form.aggregation == "sum":
        adv, returns = gae(base, v_c, v_c_next, gamma=gamma, lam=lam, cont=cont)
        return returns, adv
    raise ValueError(f"unknown aggregation {form.aggregation!r}")


def estimate_default_threshold(
    env,
    n_episodes: int,
    rng: np.random.Generator,
    *,
    gamma: float,
    regime: str = "wide",
    transform: str = "identity",
    mu_fn=None,
) -> float:
    """Monte-Carlo estimate of the default policy's expected violation.

    Rolls ``mu`` from the initial distribution under fresh (marginal)
    noise and averages ``ReLU(max_t gamma^t z(s_t))`` over episodes, where
    z applies the formulation transform.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    if mu_fn is None:
        mu_fn = env.default_policy
    states = env.sample_init(n_episodes, rng, regime)
    best = _apply_transform(env.constraint(states), transform)
    disc = 1.0
    for _ in range(env.horizon):
        noise = env.draw_noise(rng, n_episodes)
        states = env.transition(states, mu_fn(states), noise)
        disc *= gamma
        best = np.maximum(best, disc * _apply_transform(env.constraint(states), transform))
    return float(np.mean(np.maximum(best, 0.0)))
