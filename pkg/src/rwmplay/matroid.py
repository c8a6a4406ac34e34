"""Matroids, external fields and the down-up (Glauber) walk on bases.

Elements of the ground set are ``0..n-1``; bases are sorted tuples.  A field
gives every element a positive weight ``exp(log_w[v])`` and induces the law
``P(B) ∝ prod_{v in B} w(v)`` on bases.
"""

import itertools
import math

import numpy as np

from ._kernels import drop_column, field_up_step
from .errors import ResourceGuardError, ValidationError

ENUM_LIMIT = 10**5
EXPLICIT_CUTOFF = 10**4


class Matroid:
    """Base class.  Subclasses define ``is_independent``; faster ``contract``
    and ``contract_masks`` are optional."""

    n = 0
    rank = 0

    def is_independent(self, S):
        raise NotImplementedError

    def contract(self, S):
        """Sorted array of ``e`` not in ``S`` such that ``S + e`` is a basis.

        ``S`` must be independent with ``rank - 1`` elements.  This default
        asks the independence oracle once per element.
        """
        S = list(S)
        inside = set(S)
        return np.array([e for e in range(self.n)
                         if e not in inside and self.is_independent(S + [e])], dtype=np.int64)

    def contract_masks(self, S_batch):
        """Row-wise boolean masks of ``contract`` for a batch of (rank-1)-sets."""
        out = np.zeros((len(S_batch), self.n), dtype=bool)
        for r, S in enumerate(S_batch):
            out[r, self.contract(S)] = True
        return out

    def is_basis(self, S):
        S = list(S)
        return len(set(S)) == len(S) == self.rank and all(0 <= e < self.n for e in S) \
            and self.is_independent(S)

    def check_basis(self, S):
        S = tuple(sorted(int(e) for e in S))
        if not self.is_basis(S):
            raise ValidationError(f"{S} is not a basis")
        return S

    def bases(self, limit=ENUM_LIMIT):
        if math.comb(self.n, self.rank) > 50 * limit:
            raise ResourceGuardError(f"C({self.n},{self.rank}) subsets is too many to filter")
        out = []
        for S in itertools.combinations(range(self.n), self.rank):
            if self.is_independent(S):
                out.append(S)
                if len(out) > limit:
                    raise ResourceGuardError(f"more than {limit} bases")
        return out

    def greedy_basis(self, log_w):
        """Maximum-weight basis by the matroid greedy algorithm."""
        order = np.argsort(-np.asarray(log_w), kind="stable")
        S = []
        for e in order:
            if len(S) == self.rank:
                break
            if self.is_independent(S + [int(e)]):
                S.append(int(e))
        return tuple(sorted(S))

    def log_count(self):
        """Natural log of an upper bound on the number of bases (rank * ln n)."""
        return self.rank * math.log(max(self.n, 1))

    def to_dict(self):
        raise NotImplementedError


class UniformMatroid(Matroid):
    """All ``k``-subsets of ``n`` elements."""

    def __init__(self, n, k):
        if not 0 <= k <= n:
            raise ValidationError(f"need 0 <= k <= n, got n={n}, k={k}")
        self.n, self.rank = int(n), int(k)

    def is_independent(self, S):
        return len(set(S)) == len(S) <= self.rank

    def contract(self, S):
        mask = np.ones(self.n, dtype=bool)
        mask[list(S)] = False
        return np.flatnonzero(mask)

    def contract_masks(self, S_batch):
        S_batch = np.asarray(S_batch, dtype=np.int64).reshape(len(S_batch), -1)
        out = np.ones((len(S_batch), self.n), dtype=bool)
        np.put_along_axis(out, S_batch, False, axis=1)
        return out

    def log_count(self):
        return math.log(math.comb(self.n, self.rank))

    def to_dict(self):
        return {"type": "uniform", "n": self.n, "k": self.rank}


class PartitionMatroid(Matroid):
    """Independent iff at most ``caps[b]`` elements from each block ``b``.

    ``blocks[v]`` is the block of element ``v``.
    """

    def __init__(self, blocks, caps):
        self.block = np.asarray(blocks, dtype=np.int64)
        self.caps = np.asarray(caps, dtype=np.int64)
        if self.block.min() < 0 or self.block.max() >= len(self.caps) or self.caps.min() < 0:
            raise ValidationError("block ids must index caps, caps must be >= 0")
        self.n = len(self.block)
        sizes = np.bincount(self.block, minlength=len(self.caps))
        self.full = np.minimum(sizes, self.caps)
        self.rank = int(self.full.sum())

    def is_independent(self, S):
        S = list(S)
        if len(set(S)) != len(S):
            return False
        counts = np.bincount(self.block[S], minlength=len(self.caps)) if S else 0
        return bool(np.all(counts <= self.caps))

    def contract(self, S):
        S = list(S)
        counts = np.bincount(self.block[S], minlength=len(self.caps)) if S else \
            np.zeros(len(self.caps), dtype=np.int64)
        open_blocks = counts < self.full
        mask = open_blocks[self.block]
        mask[S] = False
        return np.flatnonzero(mask)

    def contract_masks(self, S_batch):
        S_batch = np.asarray(S_batch, dtype=np.int64).reshape(len(S_batch), -1)
        R = len(S_batch)
        nb = len(self.caps)
        counts = np.zeros((R, nb), dtype=np.int64)
        np.add.at(counts, (np.repeat(np.arange(R), S_batch.shape[1]), self.block[S_batch].ravel()), 1)
        open_blocks = counts < self.full[None, :]
        out = open_blocks[:, self.block]
        np.put_along_axis(out, S_batch, False, axis=1)
        return out

    def log_count(self):
        sizes = np.bincount(self.block, minlength=len(self.caps))
        return float(sum(math.log(math.comb(int(s), int(c))) for s, c in zip(sizes, self.full)))

    def to_dict(self):
        return {"type": "partition", "blocks": self.block.tolist(), "caps": self.caps.tolist()}


class _DSU:
    def __init__(self, n):
        self.p = list(range(n))

    def find(self, x):
        while self.p[x] != x:
            self.p[x] = self.p[self.p[x]]
            x = self.p[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.p[ra] = rb
        return True


class GraphicMatroid(Matroid):
    """Edges of a multigraph; bases are spanning forests (spanning trees if
    the graph is connected)."""

    def __init__(self, n_vertices, edges):
        self.n_vertices = int(n_vertices)
        self.edges = [(int(u), int(v)) for u, v in edges]
        for u, v in self.edges:
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise ValidationError(f"edge ({u},{v}) has an unknown endpoint")
        self.n = len(self.edges)
        d = _DSU(self.n_vertices)
        self.rank = sum(d.union(u, v) for u, v in self.edges)

    def _forest(self, S):
        d = _DSU(self.n_vertices)
        for e in S:
            u, v = self.edges[e]
            if not d.union(u, v):
                return None
        return d

    def is_independent(self, S):
        S = list(S)
        return len(set(S)) == len(S) and self._forest(S) is not None

    def contract(self, S):
        d = self._forest(S)
        if d is None:
            raise ValidationError("contract needs an independent set")
        inside = set(S)
        return np.array([e for e, (u, v) in enumerate(self.edges)
                         if e not in inside and d.find(u) != d.find(v)], dtype=np.int64)

    def to_dict(self):
        return {"type": "graphic", "n_vertices": self.n_vertices, "edges": self.edges}


def matroid_from_dict(d):
    t = d["type"]
    if t == "uniform":
        return UniformMatroid(d["n"], d["k"])
    if t == "partition":
        return PartitionMatroid(d["blocks"], d["caps"])
    if t == "graphic":
        return GraphicMatroid(d["n_vertices"], d["edges"])
    raise ValidationError(f"unknown matroid type {t!r}")


class ExternalField:
    """Per-element positive weights stored as logs."""

    def __init__(self, log_w):
        self.log_w = np.asarray(log_w, dtype=np.float64)
        if self.log_w.ndim != 1 or not np.all(np.isfinite(self.log_w)):
            raise ValidationError("field log-weights must be a finite vector")

    @property
    def n(self):
        return len(self.log_w)

    def dense(self):
        return self.log_w

    def log_weight(self, S):
        return float(self.log_w[list(S)].sum())

    def log_range(self):
        return float(self.log_w.max() - self.log_w.min())

    def sample_among(self, candidates, rng):
        lw = self.log_w[candidates]
        p = np.exp(lw - lw.max())
        c = np.cumsum(p)
        return int(candidates[np.searchsorted(c, rng.random() * c[-1], side="right")])


class StructuredField(ExternalField):
    """Field given by a piecewise base over the element order plus a sparse
    overlay of per-element log corrections.

    For large candidate sets that are "everything except a few excluded
    elements" (uniform matroid contractions), draws are made by choosing a
    base piece by aggregate weight, then an element uniformly, with
    rejection for overlay and excluded elements.
    """

    def __init__(self, base, overlay=None):
        self.base = base
        self.overlay = dict(overlay or {})
        lw = base.dense_log().copy()
        for v, d in self.overlay.items():
            lw[v] += d
        super().__init__(lw)

    def sample_excluding(self, excluded, rng, max_tries=64):
        """Draw ``v`` with probability ∝ w(v) over all elements not in ``excluded``."""
        excluded = set(int(e) for e in excluded)
        b = self.base
        piece_lw = b.log_values + np.log((b.ends - b.starts + 1).astype(np.float64))
        ov = np.array(sorted(self.overlay), dtype=np.int64)
        ov_lw = self.log_w[ov] if len(ov) else np.empty(0)
        top = max(piece_lw.max(), ov_lw.max() if len(ov) else -np.inf)
        base_mass = np.exp(piece_lw - top)
        ov_mass = np.exp(ov_lw - top)
        cb = np.cumsum(base_mass)
        co = np.cumsum(ov_mass) if len(ov) else np.zeros(1)
        A, B = cb[-1], (co[-1] if len(ov) else 0.0)
        for _ in range(max_tries):
            u = rng.random() * (A + B)
            if u < A:
                j = int(np.searchsorted(cb, u, side="right"))
                v = int(rng.integers(b.starts[j], b.ends[j] + 1))
                if v in self.overlay:
                    continue
            else:
                v = int(ov[np.searchsorted(co, u - A, side="right")])
            if v not in excluded:
                return v
        cand = np.setdiff1d(np.arange(self.n), np.fromiter(excluded, dtype=np.int64))
        return self.sample_among(cand, rng)


def field_from_vertex_losses(losses, beta):
    """Field ``w(v) = beta ** loss(v)``."""
    if not 0 < beta < 1:
        raise ValidationError(f"beta must lie in (0, 1), got {beta}")
    return ExternalField(np.asarray(losses, dtype=np.float64) * math.log(beta))


def glauber_step(M, field, basis, rng, check=True):
    """One down-up move: drop a uniform element, re-add one ∝ w from the contraction."""
    if check:
        basis = M.check_basis(basis)
    basis = list(basis)
    if M.rank == 0:
        return ()
    drop = int(rng.integers(len(basis)))
    S = basis[:drop] + basis[drop + 1:]
    if isinstance(field, StructuredField) and isinstance(M, UniformMatroid) \
            and M.n > EXPLICIT_CUTOFF:
        e = field.sample_excluding(S, rng)
    else:
        e = field.sample_among(M.contract(S), rng)
    return tuple(sorted(S + [e]))


def glauber_steps(k, n, log_range, delta, step_multiplier=4.0):
    """Number of down-up moves: ``mult * k * ln((k ln n + log_range) / delta)``."""
    if not 0 < delta < 1:
        raise ValidationError(f"delta must lie in (0, 1), got {delta}")
    if k == 0:
        return 0
    inner = (k * math.log(max(n, 2)) + max(log_range, 0.0)) / delta
    return max(1, math.ceil(step_multiplier * k * math.log(max(inner, math.e))))


def glauber_sample(M, field, delta, rng, step_multiplier=4.0, log_range=None,
                   start=None, steps=None):
    """Approximate sample from the field law on bases of ``M``.

    Starts from the greedy max-weight basis; ``log_range`` is the log of
    the largest basis-weight ratio (default ``rank * field.log_range()``).
    """
    if log_range is None:
        log_range = M.rank * field.log_range()
    if steps is None:
        steps = glauber_steps(M.rank, M.n, log_range, delta, step_multiplier)
    basis = M.greedy_basis(field.dense()) if start is None else M.check_basis(start)
    for _ in range(steps):
        basis = glauber_step(M, field, basis, rng, check=False)
    return basis


def glauber_sample_many(M, field, steps, rng, replicas, start=None):
    """Run ``replicas`` independent chains for ``steps`` moves, vectorized.

    Up-steps draw from each row's contraction mask by inverse CDF.
    Returns an integer array ``replicas x rank`` of sorted bases.
    """
    k = M.rank
    if start is None:
        start = M.greedy_basis(field.dense())
    B = np.tile(np.asarray(sorted(start), dtype=np.int64), (replicas, 1))
    if k == 0:
        return B
    lw = np.ascontiguousarray(field.dense(), dtype=np.float64)
    for _ in range(steps):
        S = drop_column(B, rng.integers(k, size=replicas))
        mask = np.ascontiguousarray(M.contract_masks(S))
        B = field_up_step(S, mask, lw, rng.random(replicas))
    return B


def field_law(M, field, limit=ENUM_LIMIT):
    """Bases and their exact probabilities under the field."""
    bases = M.bases(limit)
    lw = np.array([field.log_weight(S) for S in bases])
    p = np.exp(lw - lw.max())
    return bases, p / p.sum()


def glauber_kernel(M, field, limit=ENUM_LIMIT):
    """Exact one-step transition matrix over the enumerated bases."""
    bases = M.bases(limit)
    index = {S: i for i, S in enumerate(bases)}
    K = np.zeros((len(bases), len(bases)))
    k = M.rank
    for i, Bs in enumerate(bases):
        for x in Bs:
            S = [e for e in Bs if e != x]
            cand = M.contract(S)
            lw = field.log_w[cand]
            p = np.exp(lw - lw.max())
            p /= p.sum()
            for e, pe in zip(cand, p):
                K[i, index[tuple(sorted(S + [int(e)]))]] += pe / k
    return bases, K
