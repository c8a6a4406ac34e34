"""Self-play with approximate RWM learners and equilibrium certificates.

The empirical joint distribution of self-play is kept as the raw list of
per-round action tuples.  Its CCE gap for player ``i`` is the best fixed
deviation's average reward minus the realized average, i.e. regret over T.
"""

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .errors import ValidationError
from .learner import LearnerConfig, make_learner

REWARD_TOL = 1e-9


@dataclass
class PlayHistory:
    actions: list
    rewards: np.ndarray
    seeds: list
    config: dict = field(default_factory=dict)

    @property
    def T(self):
        return len(self.actions)

    def player_actions(self, i):
        return [joint[i] for joint in self.actions]


def _check_reward(game, i, r):
    bound = game.L_max(i)
    if abs(r) > bound + REWARD_TOL:
        raise ValidationError(f"player {i} reward {r} exceeds declared L_max {bound}")


def self_play(game, T, configs=None, seed=0):
    """Run ``T`` rounds with every player following approximate RWM.

    ``configs`` is one :class:`LearnerConfig` per player (or a single one
    shared by all); each player's RNG is spawned from ``seed``.
    """
    m = game.n_players
    if configs is None:
        configs = LearnerConfig(horizon=T)
    if isinstance(configs, LearnerConfig):
        configs = [configs] * m
    if len(configs) != m:
        raise ValidationError(f"need {m} learner configs, got {len(configs)}")
    children = np.random.SeedSequence(seed).spawn(m)
    learners = [make_learner(game, i, configs[i], np.random.default_rng(children[i]))
                for i in range(m)]
    actions = []
    rewards = np.zeros((T, m))
    for t in range(T):
        joint = tuple(lr.play() for lr in learners)
        for i in range(m):
            r = game.reward(joint, i)
            _check_reward(game, i, r)
            rewards[t, i] = r
        for lr in learners:
            lr.observe(joint)
        actions.append(joint)
    snapshot = {"game": game.to_dict(), "T": T, "seed": seed,
                "players": [{"beta": lr.beta, "delta": lr.delta, "N_log": lr.config.N_log,
                             "mode": lr.config.mode} for lr in learners]}
    seeds = [int(c.generate_state(1)[0]) for c in children]
    return PlayHistory(actions, rewards, seeds, snapshot)


def _actions_of(history):
    return history.actions if isinstance(history, PlayHistory) else list(history)


def cce_gap(history, game, player):
    """Best fixed deviation's average reward minus the realized average."""
    acts = _actions_of(history)
    T = len(acts)
    if T == 0:
        raise ValidationError("empty history")
    realized = float(sum(game.reward(joint, player) for joint in acts))
    _, best = oracle.best_response(game, player, acts)
    return (best - realized) / T


def _require_two_player_zero_sum(game):
    if game.n_players != 2 or not game.zero_sum:
        raise ValidationError("nash_gap needs a two-player zero-sum game")


def game_value_estimate(history, game):
    """Average realized reward of the first player."""
    acts = _actions_of(history)
    return float(np.mean([game.reward(joint, 0) for joint in acts]))


def nash_gap(history, game):
    """Exploitability of each player's average strategy, ``(eps_1, eps_2)``.

    Against the first player's mixture the second player's best response
    earns ``BR_2 / T``; since the game is zero-sum the first player's mixture
    is then worth ``-BR_2 / T``, short of the value estimate by
    ``BR_2 / T + v``.  Symmetrically ``eps_2 = BR_1 / T - v``.
    """
    _require_two_player_zero_sum(game)
    acts = _actions_of(history)
    T = len(acts)
    v = game_value_estimate(acts, game)
    _, br2 = oracle.best_response(game, 1, acts)
    _, br1 = oracle.best_response(game, 0, acts)
    return br2 / T + v, br1 / T - v


def rounds_for_eps(N_log, L_max, eps, eta, m, C=4.0):
    """Horizon and sampling budget for an ``eps``-CCE with probability ``1 - eta``."""
    if eps <= 0 or not 0 < eta < 1 or m < 1 or L_max <= 0:
        raise ValidationError("need eps > 0, eta in (0, 1), m >= 1 and L_max > 0")
    T = math.ceil(C * L_max ** 2 * eps ** -2 * (N_log + math.log(m / eta)))
    return int(T), eps / (C * L_max)


def marginal(history, player):
    """Empirical mixed strategy of ``player`` as ``{action: frequency}``."""
    acts = _actions_of(history)
    counts = Counter(oracle.as_key(joint[player]) for joint in acts)
    return {a: c / len(acts) for a, c in counts.items()}


@dataclass
class CCECertificate:
    game_hash: str
    T: int
    seeds: list
    per_player: list
    epsilon: float
    zero_sum: dict = None

    def to_dict(self):
        return {"game_hash": self.game_hash, "T": self.T, "seeds": self.seeds,
                "per_player": self.per_player, "epsilon": self.epsilon,
                "zero_sum": self.zero_sum}


def certify(history, game, marginal_files=None):
    """Gap of every player against exact best responses, plus zero-sum exploitability."""
    acts = _actions_of(history)
    T = len(acts)
    per_player = []
    for i in range(game.n_players):
        realized = float(sum(game.reward(joint, i) for joint in acts))
        a, best = oracle.best_response(game, i, acts)
        per_player.append({"gap": (best - realized) / T,
                           "best_response_action": oracle.as_key(a)})
    eps = max(p["gap"] for p in per_player)
    zs = None
    if game.n_players == 2 and game.zero_sum:
        e1, e2 = nash_gap(acts, game)
        zs = {"marginal_files": marginal_files, "exploitability": [e1, e2],
              "value_estimate": game_value_estimate(acts, game)}
    seeds = history.seeds if isinstance(history, PlayHistory) else []
    return CCECertificate(game.game_hash(), T, seeds, per_player, eps, zs)
