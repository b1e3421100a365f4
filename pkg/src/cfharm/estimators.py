"""Return estimators for constraint and reward streams.

The constraint stream uses a max-form value function
``V(s_t) = E[max_{tau >= t} gamma^(tau-t) g(s_tau)]`` estimated with a
recursive blend of rollout data and critic bootstraps,

    Vhat(s_t) = max{ g(s_t), gamma * (lam * Vhat(s_{t+1}) + (1-lam) * V(s_{t+1})) },

seeded at the window end with the critic value.  The reward stream uses
standard generalized advantage estimation.  Everything here is a pure
array transform: episode boundaries are communicated through a
continuation mask and never crossed.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "contraction_eta",
    "tdl_max",
    "harm_return",
    "gae",
    "discounted_tail_max",
    "max_operator_exact",
]


def contraction_eta(gamma: float, lam: float) -> float:
    """Contraction factor of the max-form recursive estimator.

    Closed form of ``sum_{k>=1} lam^(k-1) gamma^k (1-lam)``; strictly less
    than 1 for gamma, lam in [0, 1).
    """
    if not (0.0 <= gamma < 1.0):
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    if not (0.0 <= lam < 1.0):
        raise ValueError(f"lam must be in [0, 1), got {lam}")
    return gamma * (1.0 - lam) / (1.0 - gamma * lam)


def _check_lengths(*arrays: np.ndarray) -> None:
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise ValueError(f"sequence shape mismatch: {sorted(shapes)}")


def tdl_max(
    g: np.ndarray,
    next_values: np.ndarray,
    terminal_bootstrap: np.ndarray | float | None = None,
    *,
    gamma: float,
    lam: float,
    cont: np.ndarray | None = None,
) -> np.ndarray:
    """Backward max-form recursion over a window of T transitions.

    Args:
        g: constraint values ``g(s_t)``, shape (..., T).
        next_values: critic values ``V(s_{t+1})`` for each t, shape (..., T).
            The last entry is the critic at the window-end state.
        terminal_bootstrap: seed ``Vhat(s_T)``; defaults to
            ``next_values[..., -1]``.
        cont: continuation mask, shape (..., T).  ``cont[..., t]`` is False
            when transition t ends its episode; the recursion then cuts to
            ``Vhat(s_t) = g(s_t)`` and nothing leaks across the boundary.

    Returns:
        ``Vhat`` of shape (..., T) with ``Vhat >= g`` elementwise.
    """
    g = np.asarray(g, dtype=np.float64)
    next_values = np.asarray(next_values, dtype=np.float64)
    _check_lengths(g, next_values)
    T = g.shape[-1]
    if T == 0:
        raise ValueError("empty window")
    if cont is None:
        cont = np.ones(g.shape, dtype=bool)
    else:
        cont = np.asarray(cont, dtype=bool)
        _check_lengths(g, cont)

    if terminal_bootstrap is None:
        carry = next_values[..., -1]
    else:
        carry = np.broadcast_to(
            np.asarray(terminal_bootstrap, dtype=np.float64), g.shape[:-1]
        ).copy()

    out = np.empty_like(g)
    for t in range(T - 1, -1, -1):
        blend = gamma * (lam * carry + (1.0 - lam) * next_values[..., t])
        out[..., t] = np.where(cont[..., t], np.maximum(g[..., t], blend), g[..., t])
        carry = out[..., t]
    return out


def harm_return(
    h: np.ndarray,
    next_values: np.ndarray,
    terminal_bootstrap: np.ndarray | float | None = None,
    *,
    gamma: float,
    lam: float,
    cont: np.ndarray | None = None,
    blend_sign: float = 1.0,
) -> np.ndarray:
    """Max-form recursion over per-state harm values.

    Identical in structure to :func:`tdl_max` with the harm base in place
    of g.  ``blend_sign`` selects the sign of the (1-lam) critic term; the
    default ``+1.0`` is the convex blend (the ``-1.0`` variant breaks the
    contraction property and exists only for comparison).
    """
    if blend_sign == 1.0:
        return tdl_max(
            h, next_values, terminal_bootstrap, gamma=gamma, lam=lam, cont=cont
        )
    h = np.asarray(h, dtype=np.float64)
    next_values = np.asarray(next_values, dtype=np.float64)
    _check_lengths(h, next_values)
    T = h.shape[-1]
    if cont is None:
        cont = np.ones(h.shape, dtype=bool)
    carry = (
        next_values[..., -1]
        if terminal_bootstrap is None
        else np.broadcast_to(
            np.asarray(terminal_bootstrap, dtype=np.float64), h.shape[:-1]
        ).copy()
    )
    out = np.empty_like(h)
    for t in range(T - 1, -1, -1):
        blend = gamma * (lam * carry + blend_sign * (1.0 - lam) * next_values[..., t])
        out[..., t] = np.where(cont[..., t], np.maximum(h[..., t], blend), h[..., t])
        carry = out[..., t]
    return out


def gae(
    rewards: np.ndarray,
    values: np.ndarray,
    next_values: np.ndarray,
    *,
    gamma: float,
    lam: float,
    cont: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimation over a window of T transitions.

    Args:
        rewards: shape (..., T).
        values: critic values ``V(s_t)``, shape (..., T).
        next_values: critic values ``V(s_{t+1})``, shape (..., T).
        cont: continuation mask as in :func:`tdl_max`; a False entry zeroes
            the bootstrap and stops advantage accumulation at the boundary.

    Returns:
        (advantages, returns) with ``returns = advantages + values``.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    next_values = np.asarray(next_values, dtype=np.float64)
    _check_lengths(rewards, values, next_values)
    T = rewards.shape[-1]
    if cont is None:
        cont_f = np.ones(rewards.shape, dtype=np.float64)
    else:
        cont_f = np.asarray(cont, dtype=np.float64)
        _check_lengths(rewards, cont_f)

    adv = np.empty_like(rewards)
    carry = np.zeros(rewards.shape[:-1], dtype=np.float64)
    for t in range(T - 1, -1, -1):
        c = cont_f[..., t]
        delta = rewards[..., t] + gamma * next_values[..., t] * c - values[..., t]
        carry = delta + gamma * lam * c * carry
        adv[..., t] = carry
    return adv, adv + values


def discounted_tail_max(
    g: np.ndarray, *, gamma: float, cont: np.ndarray | None = None
) -> np.ndarray:
    """Realized suffix maxima ``max_{tau >= t} gamma^(tau-t) g(s_tau)``.

    Pure rollout quantity (no bootstrap); episode boundaries in ``cont``
    restart the suffix.
    """
    g = np.asarray(g, dtype=np.float64)
    T = g.shape[-1]
    if cont is None:
        cont = np.ones(g.shape, dtype=bool)
    out = np.empty_like(g)
    carry = np.full(g.shape[:-1], -np.inf)
    for t in range(T - 1, -1, -1):
        carry = np.where(cont[..., t], np.maximum(g[..., t], gamma * carry), g[..., t])
        out[..., t] = carry
    return out


def max_operator_exact(
    g: np.ndarray,
    next_idx: np.ndarray,
    values: np.ndarray,
    *,
    gamma: float,
    lam: float,
    tol: float = 1e-15,
    max_iter: int = 20000,
) -> np.ndarray:
    """Exact max-form operator on a finite deterministic state space.

    Solves the implicit system

        M(s) = max{ g(s), gamma * (lam * M(next(s)) + (1-lam) * V(next(s))) }

    by inner fixed-point iteration (contraction factor gamma*lam).  Used to
    verify the contraction and fixed-point properties without window
    truncation effects.

    Args:
        g: per-state constraint values, shape (..., S).
        next_idx: deterministic successor indices, shape (S,).
        values: bootstrap function V, shape (..., S).
    """
    g = np.asarray(g, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    next_idx = np.asarray(next_idx)
    base = gamma * (1.0 - lam) * values[..., next_idx]
    m = g.copy()
    for _ in range(max_iter):
        m_new = np.maximum(g, gamma * lam * m[..., next_idx] + base)
        delta = np.max(np.abs(m_new - m))
        m = m_new
        if delta < tol:
            break
    return m
