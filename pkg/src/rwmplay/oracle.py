"""Brute-force references: action enumeration, exact RWM laws, best responses.

The exact law here is computed from whole-action rewards summed over the
history, never from per-vertex or per-battlefield decompositions, so it is
an independent check of the samplers.
"""

import itertools
import math

import numpy as np
from scipy.optimize import linear_sum_assignment

from .duel import DuelSpec, all_rankings
from .errors import ResourceGuardError, ValidationError
from .matroid_games import CongestionSpec, SecuritySpec
from .resource_games import BlottoSpec, DiceSpec, MultiResourceSpec, log_compositions

ENUM_LIMIT = 10**5


def compositions(n, k):
    """All ordered ``k``-tuples of non-negative ints summing to ``n`` (stars and bars)."""
    out = []
    for bars in itertools.combinations(range(n + k - 1), k - 1):
        prev = -1
        parts = []
        for b in bars:
            parts.append(b - prev - 1)
            prev = b
        parts.append(n + k - 1 - prev - 1)
        out.append(tuple(parts))
    return out


def enumerate_actions(game, player, limit=ENUM_LIMIT):
    if isinstance(game, (BlottoSpec, DiceSpec)):
        n, k = game.n_items(player), game.n_fields(player)
        if log_compositions(n, k) > math.log(limit):
            raise ResourceGuardError(f"more than {limit} allocations")
        return compositions(n, k)
    if isinstance(game, MultiResourceSpec):
        if game.N_log(player) > math.log(limit):
            raise ResourceGuardError(f"more than {limit} allocations")
        per_type = [compositions(int(c), game.k) for c in game.counts[player]]
        return [tuple(zip(*cols)) for cols in itertools.product(*per_type)]
    if isinstance(game, (CongestionSpec, SecuritySpec)):
        return game.matroid(player).bases(limit)
    if isinstance(game, DuelSpec):
        if math.lgamma(game.n + 1) > math.log(limit):
            raise ResourceGuardError(f"more than {limit} rankings")
        return all_rankings(game.n)
    raise ValidationError(f"no enumerator for {type(game).__name__}")


def _with(actions, player, a):
    acts = list(actions)
    acts[player] = a
    return acts


def cumulative_rewards(game, player, history, actions=None):
    """Total reward of every enumerated action against the recorded opponents."""
    if actions is None:
        actions = enumerate_actions(game, player)
    tot = np.zeros(len(actions))
    for joint in history:
        for a_idx, a in enumerate(actions):
            tot[a_idx] += game.reward(_with(joint, player, a), player)
    return actions, tot


def exact_rwm_law(game, player, history, beta):
    """Actions and RWM probabilities ``∝ beta ** (-cumulative reward)``."""
    actions, tot = cumulative_rewards(game, player, history)
    lw = tot * -math.log(beta)
    p = np.exp(lw - lw.max())
    return actions, p / p.sum()


def tv_distance(p, q):
    """Total variation between a law ``p`` and counts or a law ``q``."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValidationError("laws must be aligned")
    return 0.5 * float(np.abs(p / p.sum() - q / q.sum()).sum())


def as_key(action):
    """Hashable, int-valued form of an action (tuple or nested tuple)."""
    a = np.asarray(action)
    if a.ndim == 2:
        return tuple(tuple(int(v) for v in row) for row in a)
    return tuple(int(v) for v in a)


def empirical_counts(samples, actions):
    index = {as_key(a): i for i, a in enumerate(actions)}
    counts = np.zeros(len(actions))
    for s in samples:
        key = as_key(s)
        if key not in index:
            raise ValidationError(f"sample {key} is not an enumerated action")
        counts[index[key]] += 1
    return counts


def aggregate(game, player, history, beta=0.5):
    """Per-component reward state of ``player`` after observing ``history``.

    ``beta`` only affects the weight view of the state, not the rewards.
    """
    state = game.make_profile(player, beta)
    for joint in history:
        game.observe(state, joint, player)
    return state


def _grid_best(rewards_by_field, n):
    """max sum_h R_h(x_h) s.t. sum x_h = n, each R_h a dense vector; O(n^2 k)."""
    k = len(rewards_by_field)
    best = np.full(n + 1, -np.inf)
    r0 = rewards_by_field[0]
    best[:len(r0)] = r0[:n + 1]
    choice = []
    for h in range(1, k):
        r = rewards_by_field[h]
        new = np.full(n + 1, -np.inf)
        arg = np.zeros(n + 1, dtype=np.int64)
        for y in range(n + 1):
            xs = np.arange(min(y, len(r) - 1) + 1)
            vals = r[xs] + best[y - xs]
            j = int(np.argmax(vals))
            new[y], arg[y] = vals[j], xs[j]
        choice.append(arg)
        best = new
    x = [0] * k
    y = n
    for h in range(k - 1, 0, -1):
        x[h] = int(choice[h - 1][y])
        y -= x[h]
    x[0] = y
    return tuple(x), float(best[n])


def _grid_best_multi(spec, player, state):
    """Best k x B allocation against aggregated multi-resource rewards."""
    k = spec.k
    shape = state.rewards.shape[1:]
    best = state.rewards[0].copy()
    args = []
    boxes = list(np.ndindex(*shape))
    for h in range(1, k):
        new = np.full(shape, -np.inf)
        arg = {}
        for y in boxes:
            for x in np.ndindex(*(c + 1 for c in y)):
                rest = tuple(a - b for a, b in zip(y, x))
                v = state.rewards[h][x] + best[rest]
                if v > new[y]:
                    new[y], arg[y] = v, x
        args.append(arg)
        best = new
    y = tuple(int(c) for c in spec.counts[player])
    value = float(best[y])
    alloc = [None] * k
    for h in range(k - 1, 0, -1):
        x = args[h - 1][y]
        alloc[h] = tuple(int(v) for v in x)
        y = tuple(a - b for a, b in zip(y, x))
    alloc[0] = tuple(int(v) for v in y)
    return tuple(alloc), value


def best_from_aggregate(game, player, state):
    """Best fixed action and its value read off an aggregated reward state."""
    if isinstance(game, (BlottoSpec, DiceSpec)):
        fields = [state.reward_dense(h) for h in range(state.k)]
        return _grid_best(fields, state.n)
    if isinstance(game, MultiResourceSpec):
        return _grid_best_multi(game, player, state)
    if isinstance(game, (CongestionSpec, SecuritySpec)):
        r = state.dense_rewards()
        S = game.matroid(player).greedy_basis(r)
        return S, state.basis_total(S)
    if isinstance(game, DuelSpec):
        R = state.rewards
        rows, cols = linear_sum_assignment(R, maximize=True)
        return tuple(int(c) + 1 for c in cols), float(R[rows, cols].sum())
    raise ValidationError(f"no best-response oracle for {type(game).__name__}")


def realized_value(game, player, history, action):
    """sum_t R_player(action, others at t), summed directly."""
    return float(sum(game.reward(_with(joint, player, action), player) for joint in history))


def best_response(game, player, history):
    """Best fixed action in hindsight and its exact total reward."""
    state = aggregate(game, player, history)
    action, _ = best_from_aggregate(game, player, state)
    return action, realized_value(game, player, history, action)


def brute_force_best_response(game, player, history):
    actions, tot = cumulative_rewards(game, player, history)
    j = int(np.argmax(tot))
    return actions[j], float(tot[j])
