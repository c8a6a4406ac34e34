"""Partition functions and sequential sampling for resource-allocation actions.

An action is an ordered allocation ``x_0 + ... + x_{k-1} = n``.  Under RWM its
weight is ``prod_h g_h(x_h)`` where ``g_h(x) = exp(R_h(x) * ln(1/beta))`` and
``R_h`` is the cumulative reward of putting ``x`` items on battlefield ``h``.
The prefix partition function ``f_h(y)`` sums these weights over allocations of
``y`` items to battlefields ``0..h``; battlefields are then sampled from last to
first so every conditional law is ``g_h(x) f_{h-1}(u - x)``.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (DomainError, InvariantError, MonotonicityError,
                     ResourceGuardError, ValidationError)
from .piecewise import PiecewiseFn, approximate_fn, preprocess

log = logging.getLogger(__name__)

EXACT_MAX_CELLS = 10**6
GRID_MAX_CELLS = 10**6


class LossProfile:
    """Cumulative per-battlefield rewards of one player, stored as sparse steps.

    ``R_h(x) = sum of increments at breakpoints <= x``.  Identical breakpoints
    coalesce, so T rounds with the same threshold keep ``g_h`` two-piece.
    ``caps[h]`` restricts battlefield ``h`` to at most ``caps[h]`` items.
    """

    def __init__(self, n, k, beta, caps=None):
        n, k = int(n), int(k)
        if n < 0 or k < 1:
            raise ValidationError(f"need n >= 0 and k >= 1, got n={n}, k={k}")
        if not 0 < beta < 1:
            raise ValidationError(f"beta must lie in (0, 1), got {beta}")
        if caps is None:
            caps = [n] * k
        caps = [min(int(c), n) for c in caps]
        if len(caps) != k or min(caps) < 0:
            raise ValidationError("caps must be k non-negative integers")
        if sum(caps) < n:
            raise ValidationError(f"caps sum to {sum(caps)} < n={n}; no feasible allocation")
        self.n = n
        self.k = k
        self.beta = float(beta)
        self.caps = caps
        self.rounds_seen = 0
        self._steps = [{} for _ in range(k)]
        self._cache = [None] * k

    @property
    def log_rate(self):
        """ln(1/beta): the log weight gained per unit of reward."""
        return -math.log(self.beta)

    def add_step(self, h, x0, amount):
        """Reward ``amount`` for every ``x >= x0`` on battlefield ``h``."""
        x0 = max(int(x0), 0)
        if x0 > self.caps[h] or amount == 0:
            return
        d = self._steps[h]
        d[x0] = d.get(x0, 0.0) + float(amount)
        self._cache[h] = None

    def add_steps(self, h, positions, amounts):
        for x0, amt in zip(positions, amounts):
            self.add_step(h, x0, amt)

    def end_round(self):
        self.rounds_seen += 1

    def breakpoints(self, h):
        return sorted(self._steps[h])

    def reward_fn(self, h):
        """Cumulative reward R_h as (starts, ends, values) arrays on [0, cap_h]."""
        items = sorted(self._steps[h].items())
        pos = [p for p, _ in items]
        inc = [v for _, v in items]
        if not pos or pos[0] != 0:
            pos = [0] + pos
            inc = [0.0] + inc
        starts = np.asarray(pos, dtype=np.int64)
        values = np.cumsum(inc)
        ends = np.concatenate((starts[1:] - 1, [self.caps[h]]))
        return starts, ends, values

    def reward_dense(self, h):
        starts, ends, values = self.reward_fn(h)
        return np.repeat(values, ends - starts + 1)

    def g(self, h):
        """Weight function ``g_h = beta ** (-R_h)`` as a :class:`PiecewiseFn`."""
        if self._cache[h] is None:
            starts, ends, values = self.reward_fn(h)
            self._cache[h] = PiecewiseFn(starts, ends, values * self.log_rate)
        return self._cache[h]

    def log_weight(self, allocation):
        return float(sum(self.g(h).log_eval(x) for h, x in enumerate(allocation)))

    def copy(self):
        other = LossProfile(self.n, self.k, self.beta, self.caps)
        other.rounds_seen = self.rounds_seen
        other._steps = [dict(d) for d in self._steps]
        return other


class DenseLogFn:
    """Dense log-valued table on ``[0, domain_max]`` (exact partition functions)."""

    def __init__(self, logf):
        self.log_values = np.asarray(logf, dtype=np.float64)
        self.domain_max = len(self.log_values) - 1

    def log_eval(self, y):
        y = int(y)
        if y < 0 or y > self.domain_max:
            raise DomainError(f"y={y} outside [0, {self.domain_max}]")
        return float(self.log_values[y])

    def log_eval_many(self, ys):
        return self.log_values[np.asarray(ys, dtype=np.int64)]

    def __call__(self, y):
        return math.exp(self.log_eval(y))

    def dense_log(self):
        return self.log_values

    def to_piecewise(self):
        return PiecewiseFn.from_dense_log(self.log_values)


@dataclass
class PartitionTable:
    """Prefix partition functions; ``fns[h]`` covers battlefields ``0..h``."""

    mode: str
    fns: list
    delta: float = 0.0

    @property
    def k(self):
        return len(self.fns)

    def log_total(self, n):
        """log of the total RWM weight ``f_{k-1}(n)``."""
        return self.fns[-1].log_eval(n)

    def to_json(self):
        fns = [f if isinstance(f, PiecewiseFn) else f.to_piecewise() for f in self.fns]
        return {"mode": self.mode, "delta": self.delta, "tables": [f.to_json() for f in fns]}


def exact_partition(profile, max_cells=EXACT_MAX_CELLS):
    """Exact dense prefix partition functions, level by level.

    Each level is a direct convolution of the previous dense table with the
    piecewise ``g_h``, using window sums, in O(n * pieces(g_h)).
    """
    n, k = profile.n, profile.k
    if max_cells is not None and n * k > max_cells:
        raise ResourceGuardError(f"exact partition needs n*k = {n * k} > {max_cells} cells")
    g0 = profile.g(0)
    prev = g0.dense_log().copy()
    fns = [DenseLogFn(prev)]
    for h in range(1, k):
        g = profile.g(h)
        n_out = min(n, len(prev) - 1 + g.domain_max)
        prev = _kernels.exact_level(prev, g.starts, g.ends, g.log_values, n_out)
        fns.append(DenseLogFn(prev))
    return PartitionTable("exact", fns, 0.0)


def approx_partition(profile, delta):
    """Approximate prefix partition functions with one-sided error.

    Level 0 is the greedy approximation of ``g_0`` at accuracy ``delta/(4k)``.
    Level ``h`` runs the same greedy scan on the convolution of the previous
    approximate table with ``g_h``, queried through range sums.  Errors
    compound to at most ``h * delta / (4k)`` at level ``h``.
    """
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    n, k = profile.n, profile.k
    inner = delta / (4 * k)
    try:
        fhat = approximate_fn(profile.g(0), inner)
    except MonotonicityError as e:
        raise InvariantError(f"battlefield 0 weights are not monotone: {e}") from e
    fns = [fhat]
    slack = math.log1p(inner)
    for h in range(1, k):
        g = profile.g(h)
        if not g.monotone:
            raise InvariantError(f"battlefield {h} weights are not monotone")
        idx = preprocess(fhat)
        n_out = min(n, fhat.domain_max + g.domain_max)
        s, e, v, cnt, status, bad = _kernels.greedy_conv_approx(
            fhat.starts, fhat.ends, fhat.log_values, idx.leaf, idx.table,
            g.starts, g.ends, g.log_values, n_out, slack, 1e-9)
        if status != _kernels.OK:
            raise InvariantError(
                f"intermediate convolution at level {h} decreased near y={bad}; "
                "the loss profile is not monotone")
        fhat = PiecewiseFn(s[:cnt], e[:cnt], v[:cnt])
        fns.append(fhat)
    return PartitionTable("approximate", fns, float(delta))


# Approximate-DP operations run about 16x faster per counted unit than the
# exact window sums (measured on Blotto profiles, n = 1e4..1e6, k = 3).
APPROX_COST_SCALE = 1.0 / 16


def estimate_costs(profile, delta):
    """Rough operation counts (exact, approximate) used by :func:`select_mode`."""
    n, k = profile.n, profile.k
    gp = [profile.g(h).n_pieces for h in range(k)]
    exact = n * sum(gp)
    log_range = (k - 1) * math.log(n + 1) + sum(profile.g(h).log_range() for h in range(k))
    pieces = (log_range + 1.0) / (delta / (4 * k))
    lg = math.log2(n + 2)
    approx = sum(pieces * lg * p * math.log2(pieces + 2) for p in gp[1:]) + gp[0]
    return exact, approx * APPROX_COST_SCALE


def select_mode(profile, delta):
    """Pick the cheaper DP by the min(exact, approximate) runtime rule."""
    exact, approx = estimate_costs(profile, delta)
    return "exact" if exact <= approx else "approximate"


def build_table(profile, delta, mode="auto", max_cells=EXACT_MAX_CELLS):
    if mode == "auto":
        mode = select_mode(profile, delta)
        if mode == "exact" and profile.n * profile.k > max_cells:
            mode = "approximate"
    if mode == "exact":
        return exact_partition(profile, max_cells=max_cells)
    if mode in ("approx", "approximate"):
        return approx_partition(profile, delta)
    raise ValidationError(f"unknown DP mode {mode!r}")


def _categorical_log(rng, logw):
    """Index drawn with probability proportional to exp(logw)."""
    m = logw.max()
    if not np.isfinite(m):
        raise InvariantError("all conditional weights vanish")
    c = np.cumsum(np.exp(logw - m))
    return int(np.searchsorted(c, rng.random() * c[-1], side="right"))


def _kappa_pieces(g, f, u, lo, hi):
    """Pieces of ``i -> g(i) f(u - i)`` on ``[lo, hi]`` as (starts, ends, logs)."""
    ge = g.ends[(g.ends >= lo) & (g.ends < hi)]
    # f piece starting at a covers i <= u - a; a piece boundary in i-space
    fe = u - f.starts
    fe = fe[(fe >= lo) & (fe < hi)]
    ends = np.union1d(ge, fe)
    ends = np.append(ends, hi)
    starts = np.concatenate(([lo], ends[:-1] + 1))
    logs = (g.log_values[np.searchsorted(g.ends, starts)]
            + f.log_values[np.searchsorted(f.ends, u - starts)])
    return starts, ends, logs


def _conditional_pieces(table, profile, h, u):
    """Intervals of battlefield ``h``'s amount with ``u`` items left, and their log masses.

    Exact tables give one single-point interval per feasible amount.
    """
    g = profile.g(h)
    f = table.fns[h - 1]
    lo = max(0, u - f.domain_max)
    hi = min(u, g.domain_max)
    if lo > hi:
        raise InvariantError(f"no feasible amount for battlefield {h} with {u} left")
    if table.mode == "exact":
        xs = np.arange(lo, hi + 1)
        return xs, xs, g.log_eval_many(xs) + f.log_values[u - xs]
    s, e, logs = _kappa_pieces(g, f, u, lo, hi)
    return s, e, logs + np.log((e - s + 1).astype(np.float64))


def _check_table(table, profile):
    if table.k != profile.k:
        raise ValidationError("table and profile disagree on k")


def partition_sample(table, profile, rng):
    """Draw one allocation by sequential conditional sampling.

    Battlefields ``k-1, ..., 1`` are drawn in turn with probability
    proportional to ``g_h(x) f_{h-1}(u - x)`` (``u`` items left), and
    battlefield 0 takes the remainder.  With approximate tables an interval
    of the piecewise conditional weight is drawn first, then a uniform point.
    """
    _check_table(table, profile)
    k = profile.k
    out = [0] * k
    u = profile.n
    for h in range(k - 1, 0, -1):
        s, e, logs = _conditional_pieces(table, profile, h, u)
        j = _categorical_log(rng, logs)
        x = int(s[j]) if s[j] == e[j] else int(rng.integers(s[j], e[j] + 1))
        out[h] = x
        u -= x
    if u < 0 or u > profile.g(0).domain_max:
        raise InvariantError(f"remainder {u} does not fit battlefield 0")
    out[0] = int(u)
    return out


def partition_sample_many(table, profile, rng, size):
    """``size`` independent draws with the law of ``partition_sample``, as rows.

    Rows sharing the same remaining budget reuse one conditional.
    """
    _check_table(table, profile)
    k = profile.k
    out = np.zeros((size, k), dtype=np.int64)
    left = np.full(size, profile.n, dtype=np.int64)
    for h in range(k - 1, 0, -1):
        for u in np.unique(left):
            rows = np.flatnonzero(left == u)
            s, e, logs = _conditional_pieces(table, profile, h, int(u))
            m = logs.max()
            if not np.isfinite(m):
                raise InvariantError("all conditional weights vanish")
            c = np.cumsum(np.exp(logs - m))
            j = np.searchsorted(c, rng.random(rows.size) * c[-1], side="right")
            out[rows, h] = rng.integers(s[j], e[j] + 1)
        left -= out[:, h]
    if left.min() < 0 or left.max() > profile.g(0).domain_max:
        raise InvariantError("remainder does not fit battlefield 0")
    out[:, 0] = left
    return out


class MultiResourceProfile:
    """Dense cumulative rewards over the grid of multi-resource amounts.

    ``rewards[h]`` has shape ``(n_1+1, ..., n_B+1)``; entry ``x`` is the total
    reward so far for putting the amount vector ``x`` on battlefield ``h``.
    """

    def __init__(self, counts, k, beta, max_cells=GRID_MAX_CELLS):
        self.counts = tuple(int(c) for c in counts)
        if not self.counts or min(self.counts) < 0:
            raise ValidationError("need at least one resource type with count >= 0")
        if k < 1:
            raise ValidationError("k must be >= 1")
        if not 0 < beta < 1:
            raise ValidationError(f"beta must lie in (0, 1), got {beta}")
        self.shape = tuple(c + 1 for c in self.counts)
        cells = int(np.prod(self.shape))
        if max_cells is not None and cells > max_cells:
            raise ResourceGuardError(f"grid has {cells} > {max_cells} cells")
        self.k = int(k)
        self.beta = float(beta)
        self.rounds_seen = 0
        self.rewards = np.zeros((self.k,) + self.shape)

    @property
    def B(self):
        return len(self.counts)

    @property
    def log_rate(self):
        return -math.log(self.beta)

    def add_reward(self, h, grid_reward):
        self.rewards[h] += grid_reward

    def end_round(self):
        self.rounds_seen += 1

    def log_g(self, h):
        return self.rewards[h] * self.log_rate


def _grid_convolve_log(a, b):
    """log of the grid convolution of exp(a), exp(b), truncated to a's shape."""
    out = np.full(a.shape, -np.inf)
    for idx in np.ndindex(*a.shape):
        src = tuple(slice(0, s - i) for s, i in zip(a.shape, idx))
        dst = tuple(slice(i, None) for i in idx)
        np.logaddexp(out[dst], b[idx] + a[src], out=out[dst])
    return out


def multi_resource_partition(profile):
    """Exact prefix partition functions over the amount grid."""
    fns = [profile.log_g(0)]
    for h in range(1, profile.k):
        fns.append(_grid_convolve_log(fns[-1], profile.log_g(h)))
    return fns


def multi_resource_sample(profile, rng, fns=None):
    """Exact RWM allocation as a ``k x B`` matrix (rows sum to the counts)."""
    if fns is None:
        fns = multi_resource_partition(profile)
    k, B = profile.k, profile.B
    out = np.zeros((k, B), dtype=np.int64)
    u = np.array(profile.counts, dtype=np.int64)
    for h in range(k - 1, 0, -1):
        box = tuple(slice(0, c + 1) for c in u)
        lg = profile.log_g(h)[box]
        rev = tuple(slice(c, None, -1) if c > 0 else slice(0, 1) for c in u)
        lf = fns[h - 1][rev]
        logw = (lg + lf).ravel()
        j = _categorical_log(rng, logw)
        x = np.array(np.unravel_index(j, lg.shape), dtype=np.int64)
        out[h] = x
        u = u - x
    out[0] = u
    return out
