import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import (compositions, empirical_tv, law_from_profile, random_monotone_profile,
                      reference_partition)
from rwmplay.dp_sampler import (LossProfile, MultiResourceProfile, approx_partition,
                                build_table, exact_partition, multi_resource_partition,
                                multi_resource_sample, partition_sample, partition_sample_many,
                                select_mode)
from rwmplay.errors import InvariantError, ResourceGuardError, ValidationError


def linear_loss_profile():
    """beta = 1/2, battlefield 0 loses one unit per item, battlefield 1 flat."""
    p = LossProfile(2, 2, 0.5)
    p.add_step(0, 1, -1.0)
    p.add_step(0, 2, -1.0)
    return p


# LossProfile

def test_profile_threshold_breakpoint():
    p = LossProfile(10, 1, 0.5)
    p.add_step(0, 3 + 1, 1.0)
    assert p.breakpoints(0) == [4]
    assert p.g(0).n_pieces == 2


def test_identical_thresholds_stay_two_piece():
    p = LossProfile(10, 1, 0.9)
    for _ in range(25):
        p.add_step(0, 4, 1.0)
        p.end_round()
    assert p.g(0).n_pieces == 2
    assert p.rounds_seen == 25
    assert p.g(0)(9) == pytest.approx(0.9 ** -25)


def test_distinct_thresholds_add_pieces():
    p = LossProfile(20, 1, 0.9)
    for t in range(1, 8):
        p.add_step(0, t, 1.0)
    assert p.g(0).n_pieces == 8


def test_profile_validation():
    with pytest.raises(ValidationError):
        LossProfile(5, 0, 0.5)
    with pytest.raises(ValidationError):
        LossProfile(5, 2, 1.0)
    with pytest.raises(ValidationError):
        LossProfile(5, 2, 0.5, caps=[1, 1])


# exact partition

def test_exact_counts_partitions():
    f = exact_partition(LossProfile(2, 2, 0.5))
    assert f.fns[1](2) == pytest.approx(3.0)


def test_exact_weighted_example():
    f = exact_partition(linear_loss_profile())
    assert f.fns[1](2) == pytest.approx(1.75, rel=1e-12)


def test_exact_single_battlefield_is_g():
    p = LossProfile(6, 1, 0.7)
    p.add_step(0, 2, 1.5)
    f = exact_partition(p)
    assert np.allclose(f.fns[0].dense_log(), p.g(0).dense_log())


def test_exact_guard():
    with pytest.raises(ResourceGuardError):
        exact_partition(LossProfile(10**6, 3, 0.9))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 120), st.integers(1, 5), st.integers(1, 5), st.floats(0.6, 0.95),
       st.integers(0, 2**31))
def test_exact_matches_linear_convolution(n, k, q, beta, seed):
    p = random_monotone_profile(np.random.default_rng(seed), n, k, q, beta)
    got = exact_partition(p)
    want = reference_partition(p)
    for fe, w in zip(got.fns, want):
        assert np.allclose(np.exp(fe.dense_log()), w, rtol=1e-9, atol=0)


def test_exact_with_caps():
    p = LossProfile(4, 2, 0.5, caps=[2, 4])
    f = exact_partition(p)
    # allocations of 4 with x0 <= 2: (0,4),(1,3),(2,2)
    assert f.fns[1](4) == pytest.approx(3.0)


# approximate partition

def test_approx_constant_losses_binomial():
    n, k, delta = 300, 3, 0.1
    p = LossProfile(n, k, 0.8)
    for h in range(k):
        p.add_step(h, 0, 2.0)  # constant reward c = 2 on every battlefield
    t = approx_partition(p, delta)
    for h, f in enumerate(t.fns):
        ys = np.arange(n + 1)
        count = np.array([math.comb(int(y) + h, h) for y in ys], dtype=float)
        exact = count * 0.8 ** (-2.0 * (h + 1))
        ratio = np.exp(f.dense_log()) / exact
        assert ratio.max() <= 1 + 1e-9 and ratio.min() >= 1 - delta
        assert f.n_pieces <= 2 * (k / delta) * math.log(n + 2) + 2


def test_approx_single_level_sandwich():
    p = LossProfile(50, 1, 0.6)
    for x in (5, 17, 33):
        p.add_step(0, x, 1.0)
    t = approx_partition(p, 0.5)
    ratio = np.exp(t.fns[0].dense_log() - p.g(0).dense_log())
    assert ratio.max() <= 1 and ratio.min() >= 1 - 0.5 / 4 - 1e-12


def test_approx_rejects_decreasing_profile():
    with pytest.raises(InvariantError):
        approx_partition(linear_loss_profile(), 0.1)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 400), st.integers(1, 5), st.integers(1, 5), st.floats(0.6, 0.95),
       st.integers(0, 2**31))
def test_approx_sandwich_per_level(n, k, q, beta, seed):
    delta = 0.1
    p = random_monotone_profile(np.random.default_rng(seed), n, k, q, beta)
    t = approx_partition(p, delta)
    want = reference_partition(p)
    for h, (fh, w) in enumerate(zip(t.fns, want)):
        assert fh.monotone
        ratio = np.exp(fh.dense_log()) / w
        assert ratio.max() <= 1 + 1e-9
        assert ratio.min() >= 1 - (h + 1) * delta / k - 1e-9


def test_mode_selection_prefers_exact_for_tiny_n():
    p = random_monotone_profile(np.random.default_rng(0), 30, 3, 3, 0.9)
    assert select_mode(p, 0.1) == "exact"
    assert build_table(p, 0.1).mode == "exact"


def test_build_table_unknown_mode():
    with pytest.raises(ValidationError):
        build_table(LossProfile(3, 2, 0.5), 0.1, mode="fft")


# partition_sample

def test_single_battlefield_is_forced(rng):
    p = LossProfile(7, 1, 0.5)
    t = exact_partition(p)
    assert all(partition_sample(t, p, rng) == [7] for _ in range(20))


def test_sample_weighted_example_law(rng):
    p = linear_loss_profile()
    t = exact_partition(p)
    # (x0, x1) with weights 0.5**x0: (0,2) 1, (1,1) 0.5, (2,0) 0.25
    acts = [(0, 2), (1, 1), (2, 0)]
    law = np.array([4, 2, 1]) / 7
    samples = partition_sample_many(t, p, rng, 100_000)
    assert empirical_tv(acts, law, samples) <= 0.02


def test_sample_uniform_over_fifteen(rng):
    p = LossProfile(4, 3, 0.5)
    acts = compositions(4, 3)
    assert len(acts) == 15
    for table in (exact_partition(p), approx_partition(p, 0.1)):
        samples = partition_sample_many(table, p, rng, 100_000)
        assert empirical_tv(acts, np.full(15, 1 / 15), samples) <= 0.03


def test_sample_sums_and_caps(rng):
    p = LossProfile(9, 3, 0.7, caps=[2, 9, 3])
    p.add_step(1, 4, 1.0)
    t = exact_partition(p)
    for _ in range(200):
        x = partition_sample(t, p, rng)
        assert sum(x) == 9 and x[0] <= 2 and x[2] <= 3 and min(x) >= 0


@pytest.mark.parametrize("mode", ["exact", "approx"])
def test_sample_law_random_profile(rng, mode):
    p = random_monotone_profile(rng, 8, 3, 3, 0.7, max_step=2.0)
    acts, law = law_from_profile(p)
    delta = 0.1
    table = exact_partition(p) if mode == "exact" else approx_partition(p, 2 * delta / 3)
    samples = partition_sample_many(table, p, rng, 40_000)
    noise = 3 * math.sqrt(len(acts) / 40_000)
    assert empirical_tv(acts, law, samples) <= noise + (0 if mode == "exact" else delta)


def test_sample_reproducible():
    p = random_monotone_profile(np.random.default_rng(3), 50, 4, 3, 0.8)
    t = approx_partition(p, 0.05)
    a = partition_sample_many(t, p, np.random.default_rng(9), 50)
    b = partition_sample_many(t, p, np.random.default_rng(9), 50)
    assert np.array_equal(a, b)


# multi-resource

def test_multi_resource_single_type_matches_exact(rng):
    p = random_monotone_profile(np.random.default_rng(1), 6, 3, 3, 0.7, max_step=1.5)
    mp = MultiResourceProfile([6], 3, 0.7)
    for h in range(3):
        r = np.zeros(7)
        for x0 in p.breakpoints(h):
            r[x0:] += p._steps[h][x0]
        mp.add_reward(h, r)
    fns = multi_resource_partition(mp)
    assert np.allclose(fns[-1], exact_partition(p).fns[-1].dense_log())
    acts, law = law_from_profile(p)
    samples = [multi_resource_sample(mp, rng, fns)[:, 0] for _ in range(30_000)]
    assert empirical_tv(acts, law, samples) <= 3 * math.sqrt(len(acts) / 30_000)


def test_multi_resource_two_types_uniform(rng):
    mp = MultiResourceProfile([1, 1], 2, 0.5)
    fns = multi_resource_partition(mp)
    acts = [((a, b), (1 - a, 1 - b)) for a in (0, 1) for b in (0, 1)]
    samples = [multi_resource_sample(mp, rng, fns) for _ in range(100_000)]
    tv = empirical_tv(acts, np.full(4, 0.25), samples)
    assert tv <= 0.02
    for s in samples[:100]:
        assert np.array_equal(s.sum(axis=0), [1, 1])


def test_multi_resource_single_field_forced(rng):
    mp = MultiResourceProfile([3, 2], 1, 0.5)
    assert np.array_equal(multi_resource_sample(mp, rng), [[3, 2]])


def test_multi_resource_guard():
    with pytest.raises(ResourceGuardError):
        MultiResourceProfile([999, 999, 9], 2, 0.5)
