"""Ranking duels as perfect matchings under edge weights.

A ranking of ``n`` items is a permutation ``s`` with ``s[v] in 1..n`` the
value given to item ``v``; larger means ranked higher.  As a matching it
pairs row ``v`` with column ``s[v] - 1``.  RWM weights then factor over
edges, so sampling a ranking is sampling a perfect matching with
probability proportional to the product of its edge weights.
"""

import itertools
import math

import numpy as np
from scipy.optimize import linear_sum_assignment

from ._kernels import transposition_chain
from .errors import ResourceGuardError, ValidationError
from .game import Game

PERMANENT_MAX_N = 14
EXACT_SAMPLER_MAX_N = 12


class DuelSpec(Game):
    """Two players rank ``n`` items; an item ``x ~ mu`` is drawn and the
    player ranking it higher wins 1 (the other loses 1)."""

    family = "duel"
    zero_sum = True

    def __init__(self, mu):
        self.mu = np.asarray(mu, dtype=np.float64)
        if self.mu.ndim != 1 or self.mu.min() < 0 or not math.isclose(self.mu.sum(), 1.0):
            raise ValidationError("mu must be a probability vector")
        self.n = len(self.mu)
        self.n_players = 2

    def validate_action(self, action, i):
        s = tuple(int(v) for v in action)
        if sorted(s) != list(range(1, self.n + 1)):
            raise ValidationError(f"{s} is not a ranking of 1..{self.n}")
        return s

    def reward(self, actions, i):
        return duel_reward(self, actions[0], actions[1], i)

    def L_max(self, i):
        return 1.0

    def N_log(self, i):
        return math.lgamma(self.n + 1)

    def edge_rewards(self, t):
        """``n x n`` reward of giving item ``v`` value ``w`` against ranking ``t``."""
        w = np.arange(1, self.n + 1)[None, :]
        tv = np.asarray(t)[:, None]
        return self.mu[:, None] * np.sign(w - tv)

    def make_profile(self, i, beta):
        return EdgeWeightMatrix(self.n, beta)

    def observe(self, weights, actions, i):
        duel_observe(weights, actions[1 - i], self.mu)

    def to_dict(self):
        return {"type": "duel", "mu": self.mu.tolist()}


def duel_reward(spec, s, t, player=0):
    s = np.asarray(spec.validate_action(s, 0))
    t = np.asarray(spec.validate_action(t, 1))
    r1 = float(spec.mu @ np.sign(s - t))
    return r1 if player == 0 else -r1


class EdgeWeightMatrix:
    """Cumulative edge rewards ``R[v, w-1]`` and their RWM log-weights."""

    def __init__(self, n, beta):
        if not 0 < beta < 1:
            raise ValidationError(f"beta must lie in (0, 1), got {beta}")
        self.n = int(n)
        self.beta = float(beta)
        self.rewards = np.zeros((self.n, self.n))
        self.rounds_seen = 0

    @property
    def log_w(self):
        return self.rewards * -math.log(self.beta)

    def is_monotone(self):
        """Every row non-decreasing in the assigned value."""
        return bool(np.all(np.diff(self.rewards, axis=1) >= 0))


def duel_observe(weights, t, mu):
    """Edge ``(v, w)`` gains ``mu[v]`` if ``w > t[v]``, loses it if ``w < t[v]``."""
    mu = np.asarray(mu, dtype=np.float64)
    w = np.arange(1, weights.n + 1)[None, :]
    weights.rewards += mu[:, None] * np.sign(w - np.asarray(t)[:, None])
    weights.rounds_seen += 1
    return weights


def _suffix_table(log_w):
    """``suf[mask]`` = log permanent of the last ``|mask|`` rows on columns ``mask``."""
    n = log_w.shape[0]
    size = 1 << n
    pop = np.array([bin(m).count("1") for m in range(size)], dtype=np.int64)
    suf = np.full(size, -np.inf)
    suf[0] = 0.0
    masks = np.arange(size)
    for r in range(1, n + 1):
        layer = masks[pop == r]
        row = n - r
        acc = np.full(len(layer), -np.inf)
        for c in range(n):
            has = (layer >> c) & 1 == 1
            acc[has] = np.logaddexp(acc[has], suf[layer[has] ^ (1 << c)] + log_w[row, c])
        suf[layer] = acc
    return suf


def permanent(log_matrix):
    """log of the permanent of ``exp(log_matrix)`` by a subset DP (n <= 14)."""
    W = np.asarray(log_matrix, dtype=np.float64)
    n = W.shape[0]
    if W.shape != (n, n):
        raise ValidationError("permanent needs a square matrix")
    if n > PERMANENT_MAX_N:
        raise ResourceGuardError(f"permanent limited to n <= {PERMANENT_MAX_N}, got {n}")
    if n == 0:
        return 0.0
    return float(_suffix_table(W)[(1 << n) - 1])


def exact_matching_sample(log_w, rng, size=None):
    """Exact sample(s) of rankings with probability ∝ prod_v w(v, s[v]).

    Rows are assigned in order; row ``r`` takes column ``c`` with
    probability ∝ ``w(r, c) * perm(remaining minor)``.
    """
    W = np.asarray(log_w, dtype=np.float64)
    n = W.shape[0]
    if n > EXACT_SAMPLER_MAX_N:
        raise ResourceGuardError(f"exact sampler limited to n <= {EXACT_SAMPLER_MAX_N}")
    if np.any(np.all(np.isneginf(W), axis=1)):
        raise ValidationError("a row has no allowed column")
    suf = _suffix_table(W)
    full = (1 << n) - 1
    if not np.isfinite(suf[full]):
        raise ValidationError("no perfect matching has positive weight")
    m = 1 if size is None else int(size)
    mask = np.full(m, full, dtype=np.int64)
    out = np.zeros((m, n), dtype=np.int64)
    cols = np.arange(n)
    for r in range(n):
        bits = (mask[:, None] >> cols[None, :]) & 1 == 1
        rest = mask[:, None] ^ (1 << cols[None, :])
        logits = np.where(bits, W[r][None, :] + suf[np.where(bits, rest, 0)], -np.inf)
        c = np.argmax(logits + rng.gumbel(size=logits.shape), axis=1)
        out[:, r] = c + 1
        mask ^= 1 << c
    if size is None:
        return tuple(int(v) for v in out[0])
    return out


def _start_matching(W):
    rows, cols = linear_sum_assignment(np.where(np.isfinite(W), W, -1e300), maximize=True)
    return cols


def mcmc_matching_sample(log_w, steps, rng, replicas=None, start=None):
    """Metropolis chain over rankings with uniformly random transpositions.

    Each step holds with probability 1/2 (otherwise the chain is periodic
    under flat weights, as every transposition flips parity); else it swaps
    the values of two uniformly chosen items with acceptance
    ``min(1, w(new) / w(old))``.  Reversible for the edge-weight law, but no
    mixing bound is claimed.  Starts from a maximum-weight matching.
    """
    W = np.asarray(log_w, dtype=np.float64)
    n = W.shape[0]
    R = 1 if replicas is None else int(replicas)
    if start is None:
        start = _start_matching(W)
    else:
        start = np.asarray(start, dtype=np.int64) - 1
    sig = np.tile(np.asarray(start, dtype=np.int64), (R, 1))
    if n >= 2 and replicas is None:
        steps = int(steps)
        i = rng.integers(n, size=steps)
        j = (i + rng.integers(1, n, size=steps)) % n
        transposition_chain(W, sig[0], i, j, rng.random(steps))
    elif n >= 2:
        rows = np.arange(R)
        for _ in range(int(steps)):
            i = rng.integers(n, size=R)
            j = (i + rng.integers(1, n, size=R)) % n
            si, sj = sig[rows, i], sig[rows, j]
            d = W[i, sj] + W[j, si] - W[i, si] - W[j, sj]
            u = rng.random(R)
            # u < 1/2 holds; otherwise 2u - 1 is a fresh uniform for acceptance
            acc = (u >= 0.5) & (np.log(np.maximum(2.0 * u - 1.0, 1e-300)) < d)
            sig[rows[acc], i[acc]] = sj[acc]
            sig[rows[acc], j[acc]] = si[acc]
    out = sig + 1
    if replicas is None:
        return tuple(int(v) for v in out[0])
    return out


def all_rankings(n):
    return [tuple(c + 1 for c in p) for p in itertools.permutations(range(n))]


def matching_law(log_w):
    """All rankings and their exact probabilities (enumeration)."""
    W = np.asarray(log_w, dtype=np.float64)
    n = W.shape[0]
    perms = all_rankings(n)
    idx = np.array(perms, dtype=np.int64) - 1
    lw = W[np.arange(n)[None, :], idx].sum(axis=1)
    p = np.exp(lw - lw.max())
    return perms, p / p.sum()


def metropolis_kernel(log_w):
    """Exact transition matrix of the lazy transposition chain over all rankings."""
    W = np.asarray(log_w, dtype=np.float64)
    n = W.shape[0]
    perms = all_rankings(n)
    index = {p: a for a, p in enumerate(perms)}
    pairs = n * (n - 1) // 2
    K = np.zeros((len(perms), len(perms)))
    for a, p in enumerate(perms):
        lw = sum(W[v, p[v] - 1] for v in range(n))
        for i, j in itertools.combinations(range(n), 2):
            q = list(p)
            q[i], q[j] = q[j], q[i]
            lq = sum(W[v, q[v] - 1] for v in range(n))
            K[a, index[tuple(q)]] += 0.5 * min(1.0, math.exp(lq - lw)) / pairs
        K[a, a] += 1.0 - K[a].sum()
    return perms, K
