"""Digital-twin identification and coupled control training for actuated ODE systems."""

__version__ = "0.1.0"

from .simcore import Environment, Trajectory, RolloutResult, rollout
from .envs import get_env

__all__ = [
    "Environment",
    "Trajectory",
    "RolloutResult",
    "rollout",
    "get_env",
    "__version__",
]
