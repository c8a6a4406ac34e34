"""Compiled inner loops for the piecewise algebra, the partition-function DP
and the single-chain ranking sampler.

Everything here works on natural-log values.  ``-inf`` encodes an exact zero.
The Python-facing wrappers live in :mod:`rwmplay.piecewise` and
:mod:`rwmplay.dp_sampler`; these functions assume validated inputs.
"""

import math

import numpy as np
from numba import njit

NEG_INF = -np.inf

# status codes returned by the greedy scan
OK = 0
NOT_MONOTONE = 1


@njit(cache=True)
def lae(a, b):
    """log(exp(a) + exp(b)) without overflow."""
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


@njit(cache=True)
def build_disjoint_table(leaf):
    """Disjoint sparse table for log-sum-exp range queries over ``leaf``.

    Row ``lev`` stores, inside every block of size ``2 << lev``, suffix sums of
    the left half and prefix sums of the right half.  Any range [l, r] with
    l < r is the combination of exactly two stored entries, so queries never
    subtract.
    """
    p = leaf.shape[0]
    size = 1
    while size < p:
        size *= 2
    levels = 1
    while (1 << levels) < size:
        levels += 1
    arr = np.full(size, NEG_INF)
    arr[:p] = leaf
    table = np.full((levels, size), NEG_INF)
    for lev in range(levels):
        half = 1 << lev
        mid = half
        while mid < size:
            acc = NEG_INF
            for i in range(mid - 1, mid - half - 1, -1):
                acc = lae(acc, arr[i])
                table[lev, i] = acc
            acc = NEG_INF
            for i in range(mid, mid + half):
                acc = lae(acc, arr[i])
                table[lev, i] = acc
            mid += 2 * half
    return table


@njit(cache=True)
def table_query(leaf, table, lo, hi):
    """log-sum over leaf[lo..hi] (inclusive piece indices)."""
    if lo > hi:
        return NEG_INF
    if lo == hi:
        return leaf[lo]
    x = lo ^ hi
    lev = 0
    while (x >> (lev + 1)) > 0:
        lev += 1
    return lae(table[lev, lo], table[lev, hi])


@njit(cache=True)
def range_logsum(starts, ends, logv, leaf, table, lo, hi):
    """log of sum_{j=lo}^{hi} f(j) for a succinct f, by piece overlap."""
    if lo < 0:
        lo = 0
    top = ends[ends.shape[0] - 1]
    if hi > top:
        hi = top
    if lo > hi:
        return NEG_INF
    pl = np.searchsorted(ends, lo)
    ph = np.searchsorted(ends, hi)
    if pl == ph:
        return logv[pl] + math.log(hi - lo + 1)
    left = logv[pl] + math.log(ends[pl] - lo + 1)
    right = logv[ph] + math.log(hi - starts[ph] + 1)
    mid = table_query(leaf, table, pl + 1, ph - 1)
    return lae(lae(left, mid), right)


@njit(cache=True)
def conv_query(fs, fe, fl, leaf, table, gs, ge, gl, x):
    """log (f * g)(x) = log sum_i f(i) g(x - i), iterating over the pieces of g."""
    res = NEG_INF
    for i in range(gs.shape[0]):
        a = gs[i]
        if a > x:
            break
        r = range_logsum(fs, fe, fl, leaf, table, x - ge[i], x - a)
        if r != NEG_INF:
            res = lae(res, gl[i] + r)
    return res


@njit(cache=True)
def greedy_conv_approx(fs, fe, fl, leaf, table, gs, ge, gl, n, log_slack, tol):
    """Greedy piecewise approximation of the convolution f * g on [0, n].

    For each left end ``a`` finds the largest ``b`` with
    (f*g)(b) <= (1 + delta) (f*g)(a) and emits the piece (a, b, (f*g)(a)).
    ``log_slack`` is log(1 + delta).  The search starts from the previous
    piece length and gallops outward, so smoothly varying piece lengths cost
    about two queries each.
    Returns (starts, ends, log_values, count, status, bad_point).
    """
    cap = n + 1
    out_s = np.empty(cap, dtype=np.int64)
    out_e = np.empty(cap, dtype=np.int64)
    out_v = np.empty(cap)
    count = 0
    a = 0
    length = 1
    while a <= n:
        va = conv_query(fs, fe, fl, leaf, table, gs, ge, gl, a)
        thr = va + log_slack
        floor = va - tol
        guess = a + length - 1
        if guess > n:
            guess = n
        # invariant: good is feasible, bad is infeasible (or n + 1)
        good = a
        bad = n + 1
        if guess > a:
            vg = conv_query(fs, fe, fl, leaf, table, gs, ge, gl, guess)
            if vg < floor:
                return out_s, out_e, out_v, count, NOT_MONOTONE, guess
            if vg <= thr:
                good = guess
            else:
                bad = guess
        if bad == n + 1:
            step = 1
            while good < n:
                b = good + step
                if b > n:
                    b = n
                vb = conv_query(fs, fe, fl, leaf, table, gs, ge, gl, b)
                if vb < floor:
                    return out_s, out_e, out_v, count, NOT_MONOTONE, b
                if vb <= thr:
                    good = b
                    step *= 2
                else:
                    bad = b
                    break
        else:
            step = 1
            while bad - good > 1:
                b = bad - step
                if b <= good:
                    break
                vb = conv_query(fs, fe, fl, leaf, table, gs, ge, gl, b)
                if vb < floor:
                    return out_s, out_e, out_v, count, NOT_MONOTONE, b
                if vb <= thr:
                    good = b
                    break
                bad = b
                step *= 2
        while bad - good > 1:
            mid = (good + bad) // 2
            vm = conv_query(fs, fe, fl, leaf, table, gs, ge, gl, mid)
            if vm < floor:
                return out_s, out_e, out_v, count, NOT_MONOTONE, mid
            if vm <= thr:
                good = mid
            else:
                bad = mid
        out_s[count] = a
        out_e[count] = good
        out_v[count] = va
        count += 1
        length = good - a + 1
        a = good + 1
    return out_s, out_e, out_v, count, OK, -1


@njit(cache=True)
def log_prefix(logf):
    """Running log-sum-exp of a dense log vector."""
    out = np.empty(logf.shape[0])
    acc = NEG_INF
    for i in range(logf.shape[0]):
        acc = lae(acc, logf[i])
        out[i] = acc
    return out


@njit(cache=True)
def exact_level(prev, gs, ge, gl, n_out):
    """One exact DP level: out(y) = sum_x g(x) prev(y - x), y in [0, n_out].

    ``prev`` is dense (log); ``g`` is succinct.  Window sums come from
    prefix sums of ``prev``.  Terms are rescaled by a per-y upper bound so the
    inner loop needs two exps and no logs.
    """
    pre = log_prefix(prev)
    top = prev.shape[0] - 1
    out = np.full(n_out + 1, NEG_INF)
    npieces = gs.shape[0]
    for y in range(n_out + 1):
        m = NEG_INF
        for i in range(npieces):
            a = gs[i]
            if a > y:
                break
            hi = y - a
            if hi > top:
                hi = top
            lo = y - ge[i]
            if lo > hi:
                continue
            v = gl[i] + pre[hi]
            if v > m:
                m = v
        if m == NEG_INF:
            continue
        s = 0.0
        for i in range(npieces):
            a = gs[i]
            if a > y:
                break
            hi = y - a
            if hi > top:
                hi = top
            lo = y - ge[i]
            if lo > hi:
                continue
            t = math.exp(gl[i] + pre[hi] - m)
            if lo > 0:
                below = pre[lo - 1]
                if below != NEG_INF:
                    t -= math.exp(gl[i] + below - m)
            if t > 0.0:
                s += t
        if s > 0.0:
            out[y] = m + math.log(s)
    return out


@njit(cache=True)
def transposition_chain(W, sig, I, J, U):
    """Single lazy Metropolis chain over rankings; ``sig`` is updated in place."""
    for t in range(I.shape[0]):
        u = U[t]
        if u < 0.5:
            continue
        i, j = I[t], J[t]
        si, sj = sig[i], sig[j]
        d = W[i, sj] + W[j, si] - W[i, si] - W[j, sj]
        if np.log(max(2.0 * u - 1.0, 1e-300)) < d:
            sig[i], sig[j] = sj, si
    return sig


@njit(cache=True)
def drop_column(B, drop):
    """Rows of ``B`` with column ``drop[r]`` removed (order kept)."""
    R, k = B.shape
    out = np.empty((R, k - 1), dtype=B.dtype)
    for r in range(R):
        c = 0
        for j in range(k):
            if j != drop[r]:
                out[r, c] = B[r, j]
                c += 1
    return out


@njit(cache=True)
def field_up_step(S, mask, lw, u):
    """Add to each row of ``S`` one allowed element drawn ∝ ``exp(lw)``; rows stay sorted."""
    R, km1 = S.shape
    n = lw.shape[0]
    out = np.empty((R, km1 + 1), dtype=S.dtype)
    w = np.empty(n)
    for r in range(R):
        top = -np.inf
        for e in range(n):
            if mask[r, e] and lw[e] > top:
                top = lw[e]
        total = 0.0
        for e in range(n):
            w[e] = math.exp(lw[e] - top) if mask[r, e] else 0.0
            total += w[e]
        target = u[r] * total
        pick = -1
        acc = 0.0
        for e in range(n):
            if w[e] > 0.0:
                pick = e
                acc += w[e]
                if acc > target:
                    break
        c = 0
        placed = False
        for j in range(km1):
            if not placed and pick < S[r, j]:
                out[r, c] = pick
                c += 1
                placed = True
            out[r, c] = S[r, j]
            c += 1
        if not placed:
            out[r, c] = pick
    return out
