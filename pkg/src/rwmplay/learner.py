"""Approximate randomized-weighted-majority learners, one per player.

Each learner keeps the cumulative rewards of its components (battlefields,
vertices or edges) and each round samples an action whose law is within
``delta`` total variation of ``P(a) ∝ beta ** (-cumulative reward of a)``.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .dp_sampler import build_table, multi_resource_partition, multi_resource_sample, \
    partition_sample
from .duel import DuelSpec, exact_matching_sample, mcmc_matching_sample
from .errors import ValidationError
from .matroid import glauber_sample
from .matroid_games import CongestionSpec, SecuritySpec
from .resource_games import BlottoSpec, DiceSpec, MultiResourceSpec

log = logging.getLogger(__name__)

EXACT_DUEL_MAX_N = 8


def rwm_rate(N_log, T):
    """Learning rate and per-round sampling budget ``(beta, delta)``."""
    if T <= N_log:
        raise ValidationError(f"need T > N_log (got T={T}, N_log={N_log:.4g})")
    r = math.sqrt(N_log / T)
    return 1.0 - r, r


@dataclass
class LearnerConfig:
    horizon: int
    beta: float = None
    delta: float = None
    seed: int = 0
    mode: str = "auto"
    step_multiplier: float = 4.0
    mcmc_steps: int = None
    N_log: float = None

    def resolved(self, game, player):
        """Copy with ``beta``/``delta``/``N_log`` filled in from the game."""
        N_log = self.N_log if self.N_log is not None else game.N_log(player)
        beta, delta = self.beta, self.delta
        if beta is None or delta is None:
            b, d = rwm_rate(max(N_log, 1e-12), self.horizon)
            beta = b if beta is None else beta
            delta = d if delta is None else delta
        if not 0 < beta < 1:
            raise ValidationError(f"beta must lie in (0, 1), got {beta}")
        if not 0 < delta < 1:
            raise ValidationError(f"delta must lie in (0, 1), got {delta}")
        if beta < 0.5:
            log.warning("beta=%.3g is below 1/2; sampling still works but rates are untested", beta)
        return LearnerConfig(self.horizon, beta, delta, self.seed, self.mode,
                             self.step_multiplier, self.mcmc_steps, N_log)


class Learner:
    """Shared state: the game, the player index, the RNG and the reward state."""

    def __init__(self, game, player, config, rng=None):
        self.game = game
        self.player = player
        self.config = config.resolved(game, player)
        self.rng = rng if rng is not None else np.random.default_rng(config.seed)
        self.state = game.make_profile(player, self.config.beta)
        self.rounds = 0

    @property
    def beta(self):
        return self.config.beta

    @property
    def delta(self):
        return self.config.delta

    def play(self):
        raise NotImplementedError

    def observe(self, actions):
        """Fold in one round; only the opponents' actions matter."""
        self.game.observe(self.state, actions, self.player)
        self.rounds += 1


class ResourceLearner(Learner):
    """Blotto and dice: sequential sampling from partition-function tables.

    Tables are built with budget ``2 * delta / k`` so every prefix table is
    within ``delta / (2k)`` of exact, which bounds the sample's TV by ``delta``.
    """

    def table(self):
        k = self.state.k
        return build_table(self.state, min(2 * self.delta / k, 0.5), self.config.mode)

    def play(self):
        return tuple(partition_sample(self.table(), self.state, self.rng))


class MultiResourceLearner(Learner):
    def play(self):
        fns = multi_resource_partition(self.state)
        alloc = multi_resource_sample(self.state, self.rng, fns)
        return tuple(tuple(int(v) for v in row) for row in alloc)


class MatroidLearner(Learner):
    """Congestion and security players: Glauber dynamics under the vertex field.

    Rank-1 matroids are sampled exactly (one up-step from the empty set).
    """

    def play(self):
        M = self.game.matroid(self.player)
        fld = self.state.field(self.beta)
        if M.rank == 1:
            return (fld.sample_among(M.contract([]), self.rng),)
        log_range = self.game.L_max(self.player) * self.rounds * -math.log(self.beta)
        return glauber_sample(M, fld, self.delta, self.rng, self.config.step_multiplier,
                              log_range=log_range)


def default_mcmc_steps(n, delta, step_multiplier=4.0):
    """Heuristic transposition-chain length (no certified mixing bound)."""
    return int(math.ceil(step_multiplier * n * n * math.log(max(n, 2) / delta)))


class DuelLearner(Learner):
    """Ranking duels: exact permanent sampler for small ``n``, else Metropolis."""

    def play(self):
        W = self.state.log_w
        n = W.shape[0]
        if n <= EXACT_DUEL_MAX_N and self.config.mode not in ("approx", "approximate", "mcmc"):
            return exact_matching_sample(W, self.rng)
        steps = self.config.mcmc_steps or default_mcmc_steps(n, self.delta,
                                                             self.config.step_multiplier)
        return mcmc_matching_sample(W, steps, self.rng)


def make_learner(game, player, config, rng=None):
    if isinstance(game, (BlottoSpec, DiceSpec)):
        cls = ResourceLearner
    elif isinstance(game, MultiResourceSpec):
        cls = MultiResourceLearner
    elif isinstance(game, (CongestionSpec, SecuritySpec)):
        cls = MatroidLearner
    elif isinstance(game, DuelSpec):
        cls = DuelLearner
    else:
        raise ValidationError(f"no learner for {type(game).__name__}")
    return cls(game, player, config, rng)


def play_round(learner):
    return learner.play()


def observe(learner, actions):
    learner.observe(actions)
    return learner


@dataclass
class RegretLedger:
    """Realized rewards and the full joint-action history of one player."""

    player: int
    rewards: list = field(default_factory=list)
    history: list = field(default_factory=list)

    def record(self, actions, reward):
        self.history.append(tuple(actions))
        self.rewards.append(float(reward))

    @property
    def total(self):
        return float(sum(self.rewards))


def regret(ledger_or_history, game, player=None):
    """Best fixed action's total reward minus the realized total."""
    if isinstance(ledger_or_history, RegretLedger):
        history = ledger_or_history.history
        player = ledger_or_history.player if player is None else player
    else:
        history = ledger_or_history
    realized = float(sum(game.reward(joint, player) for joint in history))
    _, best = oracle.best_response(game, player, history)
    return best - realized


def regret_curve(history, game, player):
    """Running regret after each round (best value from the aggregated state)."""
    state = game.make_profile(player, 0.5)
    realized = 0.0
    out = np.empty(len(history))
    for t, joint in enumerate(history):
        realized += game.reward(joint, player)
        game.observe(state, joint, player)
        _, best = oracle.best_from_aggregate(game, player, state)
        out[t] = best - realized
    return out
