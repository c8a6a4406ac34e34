"""No-regret learning in games with exponentially large action sets.

Randomized weighted majority over structured actions (Blotto allocations,
matroid bases, rankings), sampled through partition-function DPs, Glauber
dynamics and matching samplers, with brute-force oracles for checking.
"""

from .equilibrium import cce_gap, nash_gap, rounds_for_eps, self_play
from .errors import (ConfigError, DomainError, InvariantError, MonotonicityError,
                     ResourceGuardError, RwmError, UsageError, ValidationError)
from .learner import LearnerConfig, make_learner, regret, rwm_rate
from .piecewise import PiecewiseFn

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DomainError", "InvariantError", "LearnerConfig", "MonotonicityError",
    "PiecewiseFn", "ResourceGuardError", "RwmError", "UsageError", "ValidationError",
    "cce_gap", "make_learner", "nash_gap", "regret", "rounds_for_eps", "rwm_rate",
    "self_play",
]
