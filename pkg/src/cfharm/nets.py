"""Dense networks, diagonal-Gaussian policy math, Adam, and gradient clipping.

Parameters are plain float64 numpy arrays held in name -> array dicts so
that optimizer state, checkpoints and gradient checks can treat every
network uniformly.  Inference runs as direct numpy; losses are built as
:mod:`cfharm.autodiff` graphs via the ``apply`` methods.
"""

from __future__ import annotations

import math

import numpy as np

from .autodiff import Tensor

__all__ = [
    "Mlp",
    "orthogonal_init",
    "gaussian_sample",
    "gaussian_log_prob",
    "gaussian_entropy",
    "t_gaussian_log_prob",
    "t_gaussian_entropy",
    "Adam",
    "clip_global",
    "LOG_STD_MIN",
    "LOG_STD_MAX",
]

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0


def orthogonal_init(rng: np.random.Generator, n_in: int, n_out: int, gain: float) -> np.ndarray:
    """Orthogonal weight matrix of shape (n_in, n_out) scaled by ``gain``."""
    a = rng.standard_normal((max(n_in, n_out), min(n_in, n_out)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))  # fix the sign ambiguity of QR
    if n_in < n_out:
        q = q.T
    return np.ascontiguousarray(gain * q[:n_in, :n_out])


class Mlp:
    """Tanh MLP with a linear output layer.

    ``sizes`` is the full layer-width list, e.g. ``(6, 64, 64, 1)``.  The
    output layer is initialized at ``final_gain`` (small for actor means).
    """

    def __init__(
        self,
        sizes: tuple[int, ...],
        rng: np.random.Generator,
        prefix: str = "mlp",
        final_gain: float = 1.0,
    ):
        if len(sizes) < 3:
            raise ValueError("need at least one hidden layer")
        self.sizes = tuple(int(s) for s in sizes)
        self.prefix = prefix
        self.params: dict[str, np.ndarray] = {}
        n_layers = len(sizes) - 1
        for i in range(n_layers):
            gain = final_gain if i == n_layers - 1 else math.sqrt(2.0)
            self.params[f"{prefix}/w{i}"] = orthogonal_init(rng, sizes[i], sizes[i + 1], gain)
            self.params[f"{prefix}/b{i}"] = np.zeros(sizes[i + 1])
        self.n_layers = n_layers

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Fast inference forward pass (no graph)."""
        h = np.asarray(x, dtype=np.float64)
        if h.shape[-1] != self.sizes[0]:
            raise ValueError(
                f"{self.prefix}: expected input dim {self.sizes[0]}, got {h.shape[-1]}"
            )
        p = self.params
        for i in range(self.n_layers - 1):
            h = np.tanh(h @ p[f"{self.prefix}/w{i}"] + p[f"{self.prefix}/b{i}"])
        i = self.n_layers - 1
        return h @ p[f"{self.prefix}/w{i}"] + p[f"{self.prefix}/b{i}"]

    def apply(self, pmap: dict[str, Tensor], x) -> Tensor:
        """Graph-mode forward using tensors from ``pmap``."""
        h = x if isinstance(x, Tensor) else Tensor(x)
        if h.value.shape[-1] != self.sizes[0]:
            raise ValueError(
                f"{self.prefix}: expected input dim {self.sizes[0]}, got {h.value.shape[-1]}"
            )
        for i in range(self.n_layers - 1):
            h = (h @ pmap[f"{self.prefix}/w{i}"] + pmap[f"{self.prefix}/b{i}"]).tanh()
        i = self.n_layers - 1
        return h @ pmap[f"{self.prefix}/w{i}"] + pmap[f"{self.prefix}/b{i}"]


# -- diagonal Gaussian policy math -------------------------------------------

_LOG_2PI = math.log(2.0 * math.pi)


def gaussian_sample(
    mean: np.ndarray, log_std: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Sample actions and their log-densities from N(mean, exp(log_std)^2)."""
    z = rng.standard_normal(mean.shape)
    actions = mean + np.exp(log_std) * z
    return actions, gaussian_log_prob(mean, log_std, actions)


def gaussian_log_prob(mean: np.ndarray, log_std: np.ndarray, actions: np.ndarray) -> np.ndarray:
    d = mean.shape[-1]
    z = (actions - mean) * np.exp(-log_std)
    return -0.5 * np.sum(z * z, axis=-1) - np.sum(log_std) - 0.5 * d * _LOG_2PI


def gaussian_entropy(log_std: np.ndarray) -> float:
    d = log_std.size
    return float(np.sum(log_std) + 0.5 * d * (_LOG_2PI + 1.0))


def t_gaussian_log_prob(mean: Tensor, log_std: Tensor, actions: np.ndarray) -> Tensor:
    d = actions.shape[-1]
    z = (Tensor(actions) - mean) * (-log_std).exp()
    return z.square().sum(axis=-1) * (-0.5) - log_std.sum() - 0.5 * d * _LOG_2PI


def t_gaussian_entropy(log_std: Tensor) -> Tensor:
    d = log_std.value.size
    return log_std.sum() + 0.5 * d * (_LOG_2PI + 1.0)


# -- optimization -------------------------------------------------------------


class Adam:
    """Adam over a dict of parameter arrays; updates in place."""

    def __init__(
        self,
        params: dict[str, np.ndarray],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            if g.shape != self.params[k].shape:
                raise ValueError(f"gradient shape mismatch for {k}")
            m = self.m[k]
            v = self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            self.params[k] -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)

    def state_dict(self) -> dict:
        return {"t": self.t, "m": dict(self.m), "v": dict(self.v)}

    def load_state_dict(self, state: dict) -> None:
        self.t = int(state["t"])
        for k in self.m:
            self.m[k][...] = state["m"][k]
            self.v[k][...] = state["v"][k]


def clip_global(
    grads: dict[str, np.ndarray], max_norm: float = 1.0
) -> tuple[dict[str, np.ndarray], float]:
    """Rescale ``grads`` so their joint 2-norm is at most ``max_norm``."""
    sq = 0.0
    for g in grads.values():
        sq += float(np.sum(g * g))
    norm = math.sqrt(sq)
    if norm > max_norm:
        scale = max_norm / norm
        grads = {k: g * scale for k, g in grads.items()}
    return grads, norm
