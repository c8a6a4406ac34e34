"""Resource-allocation games: Colonel Blotto, dice, multi-resource Blotto.

Each player splits its items over battlefields (or faces).  Per-battlefield
rewards are monotone step functions of the player's own amount, so a round of
play adds a few steps to the player's :class:`LossProfile`.
"""

import math
from fractions import Fraction

import numpy as np

from .dp_sampler import LossProfile, MultiResourceProfile
from .errors import ValidationError
from .game import Game


def log_compositions(n, k):
    """ln of the number of ordered splits of ``n`` items into ``k`` parts."""
    return math.lgamma(n + k) - math.lgamma(n + 1) - math.lgamma(k)


def _check_allocation(x, n, k, who):
    x = tuple(int(v) for v in x)
    if len(x) != k:
        raise ValidationError(f"{who}: expected {k} entries, got {len(x)}")
    if min(x) < 0:
        raise ValidationError(f"{who}: negative amount in {x}")
    if sum(x) != n:
        raise ValidationError(f"{who}: amounts sum to {sum(x)}, expected {n}")
    return x


class BlottoSpec(Game):
    """Colonel Blotto with per-player weights and a strict tie precedence.

    ``weights`` is an ``m x k`` array (or a length-k vector shared by all).
    ``tie_order`` lists players from highest to lowest precedence; the
    default lets the lower index win ties.  Player ``i`` wins battlefield
    ``h`` iff it beats every other player on (amount, precedence).
    """

    family = "blotto"

    def __init__(self, troops, weights, tie_order=None, zero_sum=False):
        self.troops = [int(t) for t in troops]
        m = len(self.troops)
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim == 1:
            w = np.tile(w, (m, 1))
        if w.shape[0] != m or w.ndim != 2 or w.shape[1] < 1:
            raise ValidationError(f"weights must be (m={m}) x k, got shape {w.shape}")
        if np.any(w < 0):
            raise ValidationError("weights must be non-negative")
        if m < 1 or min(self.troops) < 0:
            raise ValidationError("need at least one player and non-negative troops")
        if tie_order is None:
            tie_order = list(range(m))
        if sorted(tie_order) != list(range(m)):
            raise ValidationError(f"tie_order must be a permutation of 0..{m - 1}")
        if zero_sum and m != 2:
            raise ValidationError("zero-sum Blotto needs exactly two players")
        self.weights = w
        self.k = w.shape[1]
        self.n_players = m
        self.tie_order = list(tie_order)
        self.rank = np.empty(m, dtype=np.int64)
        self.rank[self.tie_order] = np.arange(m)
        self.zero_sum = bool(zero_sum)

    def n_items(self, i):
        return self.troops[i]

    def n_fields(self, i):
        return self.k

    def validate_action(self, action, i):
        return _check_allocation(action, self.troops[i], self.k, f"player {i}")

    def thresholds(self, allocations, i):
        """Per battlefield, the largest own amount that still loses."""
        t = np.full(self.k, -1, dtype=np.int64)
        for j, xj in enumerate(allocations):
            if j == i:
                continue
            xj = np.asarray(xj, dtype=np.int64)
            t = np.maximum(t, xj - (1 if self.rank[i] < self.rank[j] else 0))
        return t

    def wins(self, allocations, i):
        return np.asarray(allocations[i], dtype=np.int64) > self.thresholds(allocations, i)

    def reward(self, actions, i):
        return blotto_reward(self, actions, i)

    def L_max(self, i):
        if self.zero_sum:
            return float(self.weights.max(axis=0).sum())
        return float(self.weights[i].sum())

    def N_log(self, i):
        return log_compositions(self.troops[i], self.k)

    def make_profile(self, i, beta):
        return LossProfile(self.troops[i], self.k, beta)

    def observe(self, profile, actions, i):
        blotto_observe(profile, self, actions, i)

    def to_dict(self):
        return {"type": "blotto", "troops": self.troops, "weights": self.weights.tolist(),
                "tie_order": self.tie_order, "zero_sum": self.zero_sum}


def blotto_reward(spec, allocations, i):
    """Reward of player ``i`` for one profile of allocations."""
    allocations = [spec.validate_action(x, j) for j, x in enumerate(allocations)]
    if spec.zero_sum:
        w1 = spec.weights[0] @ spec.wins(allocations, 0)
        w2 = spec.weights[1] @ spec.wins(allocations, 1)
        r1 = float(w1 - w2)
        return r1 if i == 0 else -r1
    return float(spec.weights[i] @ spec.wins(allocations, i))


def blotto_observe(profile, spec, allocations, i):
    """Add one round of Blotto rewards (against the others' play) to ``profile``."""
    t = spec.thresholds(allocations, i)
    for h in range(spec.k):
        w = spec.weights[i, h]
        if spec.zero_sum:
            v = spec.weights[1 - i, h]
            profile.add_step(h, 0, -v)
            profile.add_step(h, t[h] + 1, w + v)
        else:
            profile.add_step(h, t[h] + 1, w)
    profile.end_round()
    return profile


class DiceSpec(Game):
    """Dice game: each player spreads ``dots[i]`` over ``faces[i]`` faces.

    All dice are rolled; a player is rewarded iff its roll is strictly
    larger than every other roll.  Reward is the winning probability.
    """

    family = "dice"

    def __init__(self, dots, faces):
        self.dots = [int(d) for d in dots]
        self.faces = [int(f) for f in faces]
        if len(self.dots) != len(self.faces) or not self.dots:
            raise ValidationError("dots and faces need one entry per player")
        if min(self.faces) < 1 or min(self.dots) < 0:
            raise ValidationError("need faces >= 1 and dots >= 0")
        self.n_players = len(self.dots)

    def n_items(self, i):
        return self.dots[i]

    def n_fields(self, i):
        return self.faces[i]

    def validate_action(self, action, i):
        return _check_allocation(action, self.dots[i], self.faces[i], f"die {i}")

    def reward(self, actions, i):
        return dice_reward(self, actions, i)

    def L_max(self, i):
        return 1.0

    def N_log(self, i):
        return log_compositions(self.dots[i], self.faces[i])

    def make_profile(self, i, beta):
        return LossProfile(self.dots[i], self.faces[i], beta)

    def observe(self, profile, actions, i):
        dice_observe(profile, self, actions, i)

    def to_dict(self):
        return {"type": "dice", "dots": self.dots, "faces": self.faces}


def _beaten_fraction(die):
    """Step function x -> fraction of faces of ``die`` strictly below x.

    Returned as (positions, values): value ``values[j]`` holds on
    ``[positions[j], positions[j+1])`` and the function is 0 before
    ``positions[0]``.
    """
    faces = np.sort(np.asarray(die, dtype=np.int64))
    pos, counts = np.unique(faces + 1, return_counts=True)
    return pos, np.cumsum(counts) / len(faces)


def _step_eval(step, x):
    pos, val = step
    j = np.searchsorted(pos, x, side="right") - 1
    return np.where(j >= 0, val[np.maximum(j, 0)], 0.0)


def _step_product(a, b):
    pos = np.union1d(a[0], b[0])
    return pos, _step_eval(a, pos) * _step_eval(b, pos)


def opponent_beat_probability(spec, dice, i):
    """Step function: probability a roll of ``x`` beats every other die.

    Built from per-opponent sorted faces, multiplied pairwise in rounds
    (divide and conquer) so each product merges similar-sized pieces.
    """
    steps = [_beaten_fraction(d) for j, d in enumerate(dice) if j != i]
    if not steps:
        return np.array([0]), np.array([1.0])
    while len(steps) > 1:
        nxt = [_step_product(steps[j], steps[j + 1]) for j in range(0, len(steps) - 1, 2)]
        if len(steps) % 2:
            nxt.append(steps[-1])
        steps = nxt
    return steps[0]


def dice_reward(spec, dice, i):
    """Probability that player ``i`` rolls strictly higher than all others.

    Counts winning face tuples in exact integer arithmetic and divides once,
    so the result is the correctly rounded probability.
    """
    dice = [spec.validate_action(d, j) for j, d in enumerate(dice)]
    own = np.asarray(dice[i])
    wins = np.ones(len(own), dtype=object)
    total = len(own)
    for j, d in enumerate(dice):
        if j != i:
            below = np.searchsorted(np.sort(d), own, side="left")
            wins = wins * below.astype(object)
            total *= len(d)
    return float(Fraction(int(wins.sum()), total))


def dice_observe(profile, spec, dice, i):
    """Every face gains ``(1/k_i) * P[beat all others | face shows x]``."""
    pos, val = opponent_beat_probability(spec, dice, i)
    inc = np.diff(np.concatenate(([0.0], val))) / spec.faces[i]
    for h in range(spec.faces[i]):
        profile.add_steps(h, pos, inc)
    profile.end_round()
    return profile


def strength_blotto_field(spec, i, h, grid, allocations):
    """Built-in field rule: win iff weighted strength beats every opponent.

    Strength of amount vector ``x`` is ``coef[i] . x``; an exact tie goes to
    the lower player index.
    """
    s = grid @ spec.coef[i]
    win = np.ones(s.shape, dtype=bool)
    for j, xj in enumerate(allocations):
        if j == i:
            continue
        sj = float(np.dot(spec.coef[j], xj[h]))
        win &= (s > sj) | ((s == sj) & (i < j))
    return spec.field_weights[i, h] * win


class MultiResourceSpec(Game):
    """Blotto with ``B`` resource types per player.

    ``counts`` is ``m x B``; an action is a ``k x B`` integer matrix whose
    columns sum to ``counts[i]``.  ``field_reward(spec, i, h, grid, allocs)``
    returns player ``i``'s battlefield-``h`` reward for every amount vector
    in ``grid`` (shape ``(..., B)``) against the round's allocations; it must
    be non-decreasing in each coordinate.  The default rule compares
    weighted strengths ``coef[i] . x``.
    """

    family = "multi_resource"

    def __init__(self, counts, k, coef=None, field_weights=None, field_reward=None,
                 reward_bound=None):
        self.counts = np.asarray(counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.min() < 0:
            raise ValidationError("counts must be an m x B array of non-negative ints")
        m, B = self.counts.shape
        self.n_players = m
        self.B = B
        self.k = int(k)
        if self.k < 1:
            raise ValidationError("k must be >= 1")
        self.coef = np.ones((m, B)) if coef is None else np.asarray(coef, dtype=np.float64)
        fw = np.ones((m, self.k)) if field_weights is None else np.asarray(field_weights, float)
        if fw.ndim == 1:
            fw = np.tile(fw, (m, 1))
        self.field_weights = fw
        self.field_reward = field_reward or strength_blotto_field
        self._bound = reward_bound

    def validate_action(self, action, i):
        a = np.asarray(action, dtype=np.int64)
        if a.shape != (self.k, self.B):
            raise ValidationError(f"player {i}: allocation must be {self.k} x {self.B}")
        if a.min() < 0 or not np.array_equal(a.sum(axis=0), self.counts[i]):
            raise ValidationError(f"player {i}: column sums must equal {self.counts[i].tolist()}")
        return tuple(tuple(int(v) for v in row) for row in a)

    def reward(self, actions, i):
        return multi_resource_reward(self, actions, i)

    def L_max(self, i):
        if self._bound is not None:
            return float(self._bound)
        return float(self.field_weights[i].sum())

    def N_log(self, i):
        return float(sum(log_compositions(int(c), self.k) for c in self.counts[i]))

    def grid(self, i):
        shape = tuple(int(c) + 1 for c in self.counts[i])
        return np.stack(np.meshgrid(*[np.arange(s) for s in shape], indexing="ij"), axis=-1)

    def make_profile(self, i, beta):
        return MultiResourceProfile(self.counts[i], self.k, beta)

    def observe(self, profile, actions, i):
        multi_resource_observe(profile, self, actions, i)

    def to_dict(self):
        return {"type": "multi_resource", "counts": self.counts.tolist(), "k": self.k,
                "coef": self.coef.tolist(), "field_weights": self.field_weights.tolist()}


def multi_resource_reward(spec, allocations, i):
    """Sum over battlefields of the field rewards of player ``i``."""
    allocs = [np.asarray(spec.validate_action(a, j)) for j, a in enumerate(allocations)]
    total = 0.0
    for h in range(spec.k):
        total += float(spec.field_reward(spec, i, h, allocs[i][h][None, :], allocs)[0])
    return total


def multi_resource_observe(profile, spec, allocations, i):
    allocs = [np.asarray(a, dtype=np.int64) for a in allocations]
    grid = spec.grid(i)
    for h in range(spec.k):
        profile.add_reward(h, spec.field_reward(spec, i, h, grid, allocs))
    profile.end_round()
    return profile
