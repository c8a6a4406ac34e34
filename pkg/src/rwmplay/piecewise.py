"""Succinct piecewise-constant functions on integer intervals.

A :class:`PiecewiseFn` stores a strictly positive function on ``[0, n]`` as a
sorted list of ``(a, b, log_value)`` triples that tile the domain.  Values are
kept as natural logs so that products of many RWM weights neither overflow nor
underflow.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DomainError, MonotonicityError, UsageError

# relative slack tolerated before a "monotone" query is declared decreasing
MONOTONE_TOL = 1e-9
# float slack on the greedy threshold so exact ties f(b) = (1 + delta) f(a) count
TIE_TOL = 1e-12


class PiecewiseFn:
    """Immutable piecewise-constant positive function on ``[0, domain_max]``."""

    __slots__ = ("starts", "ends", "log_values", "domain_max", "monotone")

    def __init__(self, starts, ends, log_values):
        starts = np.ascontiguousarray(starts, dtype=np.int64)
        ends = np.ascontiguousarray(ends, dtype=np.int64)
        log_values = np.ascontiguousarray(log_values, dtype=np.float64)
        if not (starts.ndim == ends.ndim == log_values.ndim == 1):
            raise DomainError("piece arrays must be one-dimensional")
        if not (len(starts) == len(ends) == len(log_values)) or len(starts) == 0:
            raise DomainError("need at least one piece and matching array lengths")
        if starts[0] != 0:
            raise DomainError(f"first piece must start at 0, got {starts[0]}")
        if np.any(ends < starts):
            raise DomainError("every piece needs a <= b")
        if np.any(starts[1:] != ends[:-1] + 1):
            raise DomainError("pieces must be adjacent")
        if not np.all(np.isfinite(log_values)):
            raise DomainError("values must be strictly positive and finite")
        for arr in (starts, ends, log_values):
            arr.flags.writeable = False
        self.starts = starts
        self.ends = ends
        self.log_values = log_values
        self.domain_max = int(ends[-1])
        self.monotone = bool(np.all(np.diff(log_values) >= 0))

    # construction helpers
    @classmethod
    def constant(cls, n, value=1.0, log=False):
        lv = value if log else _checked_log(value)
        return cls([0], [n], [lv])

    @classmethod
    def from_pieces(cls, pieces, log=False):
        """Build from ``(a, b, value)`` triples; ``log=True`` means value is a log."""
        pieces = list(pieces)
        if not pieces:
            raise DomainError("empty piece list")
        a, b, v = zip(*pieces)
        lv = [float(x) for x in v] if log else [_checked_log(x) for x in v]
        return cls(a, b, lv)

    @classmethod
    def from_dense_log(cls, logf):
        """Compress a dense log vector, merging runs of identical values."""
        logf = np.asarray(logf, dtype=np.float64)
        if logf.size == 0:
            raise DomainError("empty dense vector")
        change = np.flatnonzero(logf[1:] != logf[:-1]) + 1
        starts = np.concatenate(([0], change))
        ends = np.concatenate((change - 1, [logf.size - 1]))
        return cls(starts, ends, logf[starts])

    # access
    def __len__(self):
        return len(self.starts)

    @property
    def n_pieces(self):
        return len(self.starts)

    def pieces(self):
        """List of ``(a, b, log_value)`` triples."""
        return [(int(a), int(b), float(v)) for a, b, v in
                zip(self.starts, self.ends, self.log_values)]

    def value_pieces(self):
        """List of ``(a, b, value)`` triples in linear space."""
        return [(a, b, math.exp(v)) for a, b, v in self.pieces()]

    def log_eval(self, x):
        x = int(x)
        if x < 0 or x > self.domain_max:
            raise DomainError(f"x={x} outside [0, {self.domain_max}]")
        return float(self.log_values[np.searchsorted(self.ends, x)])

    def log_eval_many(self, xs):
        xs = np.asarray(xs, dtype=np.int64)
        if xs.size and (xs.min() < 0 or xs.max() > self.domain_max):
            raise DomainError(f"points outside [0, {self.domain_max}]")
        return self.log_values[np.searchsorted(self.ends, xs)]

    def __call__(self, x):
        return math.exp(self.log_eval(x))

    def dense_log(self):
        return np.repeat(self.log_values, self.ends - self.starts + 1)

    def log_range(self):
        """log(max f / min f)."""
        return float(self.log_values.max() - self.log_values.min())

    # derived functions
    def restrict(self, m):
        """The same function on ``[0, m]`` with ``m <= domain_max``."""
        m = int(m)
        if m < 0 or m > self.domain_max:
            raise DomainError(f"cannot restrict [0, {self.domain_max}] to [0, {m}]")
        p = int(np.searchsorted(self.ends, m)) + 1
        ends = self.ends[:p].copy()
        ends[-1] = m
        return PiecewiseFn(self.starts[:p], ends, self.log_values[:p])

    def reflect(self, u):
        """The function ``x -> f(u - x)`` on ``[0, u]``; needs ``u <= domain_max``."""
        r = self.restrict(u)
        return PiecewiseFn(u - r.ends[::-1], u - r.starts[::-1], r.log_values[::-1])

    def power(self, s):
        """``f ** s`` (log values scaled by ``s``)."""
        return PiecewiseFn(self.starts, self.ends, self.log_values * float(s))

    def scale(self, log_c):
        """``exp(log_c) * f``."""
        return PiecewiseFn(self.starts, self.ends, self.log_values + float(log_c))

    # serialization
    def to_json(self):
        return [{"a": a, "b": b, "log_value": v} for a, b, v in self.pieces()]

    @classmethod
    def from_json(cls, data):
        return cls([d["a"] for d in data], [d["b"] for d in data],
                   [d["log_value"] for d in data])

    def __eq__(self, other):
        if not isinstance(other, PiecewiseFn):
            return NotImplemented
        return (np.array_equal(self.starts, other.starts)
                and np.array_equal(self.ends, other.ends)
                and np.array_equal(self.log_values, other.log_values))

    def __repr__(self):
        head = ", ".join(f"({a},{b},{math.exp(v):.4g})" for a, b, v in self.pieces()[:4])
        more = "" if self.n_pieces <= 4 else f", ... {self.n_pieces} pieces"
        return f"PiecewiseFn([{head}{more}], n={self.domain_max})"


def _checked_log(v):
    v = float(v)
    if not v > 0 or not math.isfinite(v):
        raise DomainError(f"value {v} is not strictly positive and finite")
    return math.log(v)


def eval(f, x):  # noqa: A001 - deliberate name, mirrors f(x)
    """Value of ``f`` at integer ``x``."""
    return f(x)


def piecewise_approximate(query, n, delta, log_query=False):
    """Greedy one-sided approximation of a monotone non-decreasing function.

    Starting from ``a = 0`` repeatedly find the largest ``b`` with
    ``f(b) <= (1 + delta) f(a)`` (galloping then bisection) and emit the piece
    ``(a, b, f(a))``.  The result satisfies ``(1 - delta) f <= fhat <= f``.

    ``query`` maps an int to ``f(x)`` (or to ``log f(x)`` if ``log_query``).
    """
    if not 0 < delta <= 1:
        raise DomainError(f"delta must lie in (0, 1], got {delta}")
    n = int(n)
    if n < 0:
        raise DomainError("n must be non-negative")

    def lq(x):
        v = query(x)
        if log_query:
            v = float(v)
            if not math.isfinite(v):
                raise DomainError(f"query({x}) is not a finite log value")
            return v
        return _checked_log(v)

    slack = math.log1p(delta) + TIE_TOL
    starts, ends, vals = [], [], []
    a = 0
    while a <= n:
        va = lq(a)
        thr = va + slack

        def probe(b):
            vb = lq(b)
            if vb < va - MONOTONE_TOL:
                raise MonotonicityError(
                    f"query decreased: f({b}) < f({a}) (log {vb:.12g} < {va:.12g})")
            return vb <= thr

        good, bad, step = a, n + 1, 1
        while good < n:
            b = min(a + step, n)
            if probe(b):
                good = b
                step *= 2
            else:
                bad = b
                break
        while bad - good > 1:
            mid = (good + bad) // 2
            if probe(mid):
                good = mid
            else:
                bad = mid
        starts.append(a)
        ends.append(good)
        vals.append(va)
        a = good + 1
    return PiecewiseFn(starts, ends, vals)


def approximate_fn(f, delta):
    """Greedy approximation applied directly to a succinct monotone ``f``.

    Gives the same pieces as ``piecewise_approximate(f, ...)`` but walks the
    pieces of ``f`` instead of querying points.
    """
    if not 0 < delta <= 1:
        raise DomainError(f"delta must lie in (0, 1], got {delta}")
    if not f.monotone:
        raise MonotonicityError("approximate_fn needs a non-decreasing function")
    slack = math.log1p(delta) + TIE_TOL
    lv = f.log_values
    starts, ends, vals = [], [], []
    a = 0
    p = 0
    while a <= f.domain_max:
        va = lv[p]
        # last piece whose value stays within the slack
        q = int(np.searchsorted(lv, va + slack, side="right")) - 1
        starts.append(a)
        ends.append(int(f.ends[q]))
        vals.append(va)
        a = int(f.ends[q]) + 1
        p = q + 1
    return PiecewiseFn(starts, ends, vals)


def pointwise_product(f, g):
    """Pointwise product ``f * g`` by merging breakpoints (log values add)."""
    if f.domain_max != g.domain_max:
        raise DomainError(f"domains differ: [0,{f.domain_max}] vs [0,{g.domain_max}]")
    ends = np.union1d(f.ends, g.ends)
    starts = np.concatenate(([0], ends[:-1] + 1))
    lv = (f.log_values[np.searchsorted(f.ends, starts)]
          + g.log_values[np.searchsorted(g.ends, starts)])
    return PiecewiseFn(starts, ends, lv)


@dataclass(frozen=True)
class RangeSumIndex:
    """A succinct function prepared for O(log p) range sums."""

    fn: PiecewiseFn
    leaf: np.ndarray
    table: np.ndarray

    def range_log_sum(self, lo, hi):
        """log of sum_{j=lo}^{hi} f(j), with f = 0 outside its domain."""
        f = self.fn
        return float(_kernels.range_logsum(f.starts, f.ends, f.log_values,
                                           self.leaf, self.table, int(lo), int(hi)))


def preprocess(f):
    """Per-piece aggregates ``log(value * length)`` plus a disjoint sparse table."""
    leaf = f.log_values + np.log((f.ends - f.starts + 1).astype(np.float64))
    return RangeSumIndex(f, leaf, _kernels.build_disjoint_table(leaf))


def _require_index(index):
    if not isinstance(index, RangeSumIndex):
        raise UsageError("convolution query needs a preprocessed function; call preprocess(f)")


def log_convolution_query(index, g, x):
    """log (f * g)(x) where ``index = preprocess(f)``."""
    _require_index(index)
    f = index.fn
    x = int(x)
    if x < 0 or x > f.domain_max + g.domain_max:
        raise DomainError(f"x={x} outside [0, {f.domain_max + g.domain_max}]")
    return float(_kernels.conv_query(f.starts, f.ends, f.log_values, index.leaf, index.table,
                                     g.starts, g.ends, g.log_values, x))


def convolution_query(index, g, x):
    """(f * g)(x) = sum_i f(i) g(x - i) where ``index = preprocess(f)``."""
    return math.exp(log_convolution_query(index, g, x))

