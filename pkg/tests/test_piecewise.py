import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_convolution
from rwmplay.errors import DomainError, MonotonicityError, UsageError
from rwmplay.piecewise import (PiecewiseFn, approximate_fn, convolution_query, eval,
                               log_convolution_query, piecewise_approximate,
                               pointwise_product, preprocess)


def fn(*pieces):
    return PiecewiseFn.from_pieces(pieces)


@st.composite
def piecewise_fns(draw, max_n=60, max_pieces=6, monotone=False, n=None):
    if n is None:
        n = draw(st.integers(0, max_n))
    cuts = sorted(draw(st.sets(st.integers(1, max(n, 1)), max_size=min(max_pieces - 1, n))))
    cuts = [c for c in cuts if c <= n]
    starts = [0] + cuts
    ends = [c - 1 for c in cuts] + [n]
    vals = draw(st.lists(st.floats(-5, 5), min_size=len(starts), max_size=len(starts)))
    if monotone:
        vals = sorted(vals)
    return PiecewiseFn(starts, ends, vals)


# eval

def test_eval_constant():
    assert eval(fn((0, 9, 3.0)), 5) == pytest.approx(3.0, rel=1e-15)


def test_eval_on_piece_boundary():
    assert eval(fn((0, 1, 1.0), (2, 3, 4.0)), 2) == pytest.approx(4.0, rel=1e-15)


def test_eval_out_of_domain():
    with pytest.raises(DomainError):
        eval(fn((0, 1, 1.0), (2, 3, 4.0)), 7)
    with pytest.raises(DomainError):
        eval(fn((0, 1, 1.0)), -1)


# construction invariants

@pytest.mark.parametrize("starts,ends,vals", [
    ([1], [3], [0.0]),              # does not start at 0
    ([0, 3], [1, 4], [0.0, 0.0]),   # gap
    ([0, 1], [1, 3], [0.0, 0.0]),   # overlap
    ([0], [2], [math.inf]),         # non-finite log
    ([], [], []),
])
def test_rejects_bad_tilings(starts, ends, vals):
    with pytest.raises(DomainError):
        PiecewiseFn(starts, ends, vals)


def test_rejects_zero_value():
    with pytest.raises(DomainError):
        fn((0, 3, 0.0))


def test_immutable():
    f = fn((0, 3, 2.0))
    with pytest.raises(ValueError):
        f.log_values[0] = 1.0


def test_monotone_flag():
    assert fn((0, 1, 1.0), (2, 5, 3.0)).monotone
    assert not fn((0, 1, 3.0), (2, 5, 1.0)).monotone


def test_from_dense_log_merges_runs():
    f = PiecewiseFn.from_dense_log([0.0, 0.0, 1.0, 1.0, 1.0, 2.0])
    assert f.pieces() == [(0, 1, 0.0), (2, 4, 1.0), (5, 5, 2.0)]


def test_json_roundtrip():
    f = fn((0, 1, 1.5), (2, 7, 4.0))
    assert PiecewiseFn.from_json(f.to_json()) == f
    assert set(f.to_json()[0]) == {"a", "b", "log_value"}


def test_restrict_and_reflect():
    f = fn((0, 1, 1.0), (2, 3, 2.0), (4, 9, 8.0))
    r = f.restrict(5)
    assert r.domain_max == 5 and [r(x) for x in range(6)] == pytest.approx(
        [f(x) for x in range(6)])
    m = f.reflect(5)
    assert [m(x) for x in range(6)] == pytest.approx([f(5 - x) for x in range(6)])


@given(piecewise_fns())
def test_tiling_invariant_holds_for_generated(f):
    assert f.starts[0] == 0 and f.ends[-1] == f.domain_max
    assert np.all(f.starts[1:] == f.ends[:-1] + 1)
    assert f.dense_log().size == f.domain_max + 1


# piecewise_approximate

def test_approximate_constant_is_one_piece():
    f = piecewise_approximate(lambda x: 7.0, 1000, 0.5)
    assert f.value_pieces() == [(0, 1000, pytest.approx(7.0))]


def test_approximate_powers_of_two():
    # greedy rule: extend while f(b) <= 2 f(a); from a=0: f(1)=2 ok, f(2)=4 no
    f = piecewise_approximate(lambda x: 2.0 ** x, 7, 1.0)
    got = [(a, b, round(v, 9)) for a, b, v in f.value_pieces()]
    assert got == [(0, 1, 1.0), (2, 3, 4.0), (4, 5, 16.0), (6, 7, 64.0)]


def test_approximate_detects_decrease():
    with pytest.raises(MonotonicityError):
        piecewise_approximate(lambda x: 10.0 - x, 9, 0.1)


def test_approximate_log_query_matches_linear():
    a = piecewise_approximate(lambda x: 1.3 ** x, 50, 0.2)
    b = piecewise_approximate(lambda x: x * math.log(1.3), 50, 0.2, log_query=True)
    assert a.pieces() == [(s, e, pytest.approx(v)) for s, e, v in b.pieces()]


def test_approximate_bad_delta():
    with pytest.raises(DomainError):
        piecewise_approximate(lambda x: 1.0, 5, 0.0)
    with pytest.raises(DomainError):
        piecewise_approximate(lambda x: 1.0, 5, 1.5)


@settings(max_examples=60, deadline=None)
@given(piecewise_fns(max_n=400, max_pieces=12, monotone=True), st.sampled_from([0.05, 0.25, 0.5]))
def test_approximate_sandwich_and_piece_bound(f, delta):
    fh = piecewise_approximate(f, f.domain_max, delta)
    exact = f.dense_log()
    approx = fh.dense_log()
    assert np.all(approx <= exact + 1e-12)
    assert np.all(approx >= exact + math.log1p(-delta) - 1e-12)
    bound = math.ceil(f.log_range() / math.log1p(delta)) + 1
    assert fh.n_pieces <= bound


@settings(max_examples=60, deadline=None)
@given(piecewise_fns(max_n=300, max_pieces=10, monotone=True), st.sampled_from([0.1, 0.3, 1.0]))
def test_approximate_fn_equals_pointwise_greedy(f, delta):
    pointwise = piecewise_approximate(f.log_eval, f.domain_max, delta, log_query=True)
    assert approximate_fn(f, delta) == pointwise


def test_approximate_fn_exhaustive_random_steps(rng):
    n = 10_000
    cuts = np.sort(rng.choice(np.arange(1, n + 1), 40, replace=False))
    vals = np.cumsum(rng.uniform(0, 0.3, 41))
    f = PiecewiseFn(np.concatenate(([0], cuts)), np.concatenate((cuts - 1, [n])), vals)
    fh = approximate_fn(f, 0.25)
    ratio = np.exp(fh.dense_log() - f.dense_log())
    assert ratio.max() <= 1 + 1e-12
    assert ratio.min() >= 0.75 - 1e-12


# pointwise_product

def test_product_of_constants():
    p = pointwise_product(fn((0, 3, 2.0)), fn((0, 3, 5.0)))
    assert p.value_pieces() == [(0, 3, pytest.approx(10.0))]


def test_product_merges_pieces():
    p = pointwise_product(fn((0, 1, 1), (2, 3, 2)), fn((0, 2, 1), (3, 3, 4)))
    assert [(a, b, round(v, 12)) for a, b, v in p.value_pieces()] == [
        (0, 1, 1.0), (2, 2, 2.0), (3, 3, 8.0)]


@given(piecewise_fns(n=30))
def test_product_with_one_is_identity(f):
    p = pointwise_product(f, PiecewiseFn.constant(30))
    assert np.array_equal(p.dense_log(), f.dense_log())


@given(st.integers(0, 40).flatmap(lambda n: st.tuples(piecewise_fns(n=n), piecewise_fns(n=n))))
def test_product_log_additivity(pair):
    f, g = pair
    p = pointwise_product(f, g)
    assert np.array_equal(p.dense_log(), f.dense_log() + g.dense_log())
    assert p.n_pieces <= f.n_pieces + g.n_pieces


def test_product_domain_mismatch():
    with pytest.raises(DomainError):
        pointwise_product(fn((0, 3, 1.0)), fn((0, 4, 1.0)))


# convolution_query

def test_convolution_of_ones_counts_points():
    n = 25
    one = PiecewiseFn.constant(n)
    idx = preprocess(one)
    for x in range(n + 1):
        assert convolution_query(idx, one, x) == pytest.approx(x + 1, rel=1e-12)


def test_convolution_hand_example():
    f = fn((0, 1, 1), (2, 3, 2))
    g = fn((0, 3, 1))
    assert convolution_query(preprocess(f), g, 3) == pytest.approx(6.0, rel=1e-12)


def test_convolution_requires_preprocessing():
    f = fn((0, 3, 1))
    with pytest.raises(UsageError):
        convolution_query(f, f, 1)


def test_convolution_domain():
    f = fn((0, 3, 1))
    with pytest.raises(DomainError):
        log_convolution_query(preprocess(f), f, 7)


@settings(max_examples=40, deadline=None)
@given(piecewise_fns(max_n=80, max_pieces=8), piecewise_fns(max_n=80, max_pieces=8))
def test_convolution_matches_brute_force(f, g):
    idx = preprocess(f)
    for x in range(f.domain_max + g.domain_max + 1):
        want = brute_convolution(f, g, x)
        assert convolution_query(idx, g, x) == pytest.approx(want, rel=1e-9)


def test_convolution_large_random_against_brute(rng):
    n = 2000
    cuts = np.sort(rng.choice(np.arange(1, n + 1), 30, replace=False))
    f = PiecewiseFn(np.concatenate(([0], cuts)), np.concatenate((cuts - 1, [n])),
                    rng.uniform(-3, 3, 31))
    g = PiecewiseFn([0, 700], [699, n], [0.5, -1.0])
    idx = preprocess(f)
    fd, gd = np.exp(f.dense_log()), np.exp(g.dense_log())
    full = np.convolve(fd, gd)
    for x in rng.integers(0, 2 * n + 1, 200):
        assert convolution_query(idx, g, int(x)) == pytest.approx(full[x], rel=1e-9)


def test_range_sum_index():
    f = fn((0, 1, 1), (2, 3, 2), (4, 9, 0.5))
    idx = preprocess(f)
    assert math.exp(idx.range_log_sum(1, 5)) == pytest.approx(1 + 2 + 2 + 0.5 + 0.5)
    assert math.exp(idx.range_log_sum(-5, 100)) == pytest.approx(1 + 1 + 2 + 2 + 6 * 0.5)
    assert idx.range_log_sum(20, 30) == -math.inf
