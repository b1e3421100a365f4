"""Counterfactual-harm constrained policy optimization over SCM environments.

The package provides:

- :mod:`cfharm.scm` and :mod:`cfharm.envs` -- deterministic-transition
  environments with recorded exogenous noise and bit-exact replay;
- :mod:`cfharm.estimators` -- max-form TD(lambda) constraint estimators,
  harm returns, and GAE;
- :mod:`cfharm.counterfactual` -- N-step counterfactual inference and the
  registry of constraint formulations;
- :mod:`cfharm.trainer` -- PPO with Lagrange-multiplier constraint handling;
- :mod:`cfharm.evaluation` -- viability statistics (recall, discovery rate,
  success, probability of harm) and CDF curves;
- :mod:`cfharm.shield` -- explicit and implicit counterfactual shields;
- :mod:`cfharm.cli` -- train / eval / baseline / plot commands.
"""

from __future__ import annotations

from . import envs, estimators
from .scm import EnvState, EnvPool, TrajectoryBatch, replay_step, rollout, step_recorded

__version__ = "0.1.0"

__all__ = [
    "envs",
    "estimators",
    "EnvState",
    "EnvPool",
    "TrajectoryBatch",
    "replay_step",
    "rollout",
    "step_recorded",
    "__version__",
]
