"""The ten acceptance criteria, each at its stated tolerance.

Every test records a PASS/FAIL line (printed, and repeated in the pytest
terminal summary) with the measured value next to its threshold.
"""

import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import acceptance_line, random_monotone_profile
from rwmplay.cli import bench
from rwmplay.dp_sampler import approx_partition, exact_partition, partition_sample_many
from rwmplay.duel import (DuelSpec, exact_matching_sample, matching_law, mcmc_matching_sample,
                          metropolis_kernel)
from rwmplay.equilibrium import cce_gap, nash_gap, rounds_for_eps, self_play
from rwmplay.learner import LearnerConfig, regret
from rwmplay.matroid import (ExternalField, GraphicMatroid, PartitionMatroid, UniformMatroid,
                             field_law, glauber_kernel, glauber_sample_many, glauber_steps)
from rwmplay.matroid_games import CongestionSpec
from rwmplay.oracle import aggregate, empirical_counts, exact_rwm_law, tv_distance
from rwmplay.resource_games import BlottoSpec, DiceSpec, dice_reward

pytestmark = pytest.mark.slow


def random_split(rng, n, k):
    cuts = np.sort(rng.integers(0, n + 1, k - 1))
    return tuple(int(v) for v in np.diff(np.concatenate(([0], cuts, [n]))))


def regret_rate_runs(game, T, seeds):
    """Fraction of seeds in which both players' regret is within 3 L sqrt(T k ln n)."""
    good = 0
    worst = 0.0
    for seed in seeds:
        hist = self_play(game, T, seed=seed)
        ok = True
        for i in range(2):
            k, n = game.n_fields(i), game.n_items(i)
            bound = 3 * game.L_max(i) * math.sqrt(T * k * math.log(n))
            r = regret(hist.actions, game, i)
            worst = max(worst, r / bound)
            ok &= r <= bound
        good += ok
    return good, worst


def test_criterion_1_partition_sandwich():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    lo, hi = math.inf, -math.inf
    for _ in range(50):
        n, k, q = int(rng.integers(1, 2001)), int(rng.integers(1, 7)), int(rng.integers(1, 6))
        p = random_monotone_profile(rng, n, k, q, float(rng.uniform(0.6, 0.95)))
        approx, exact = approx_partition(p, 0.1), exact_partition(p)
        for fa, fe in zip(approx.fns, exact.fns):
            ratio = np.exp(fa.dense_log() - fe.dense_log())
            lo, hi = min(lo, ratio.min()), max(hi, ratio.max())
    secs = time.perf_counter() - t0
    ok = lo >= 0.9 and hi <= 1.1 and secs < 60
    acceptance_line(1, ok, f"ratio range [{lo:.4f}, {hi:.4f}] in {secs:.1f}s",
                    "[0.9, 1.1] in < 60s")
    assert ok


def test_criterion_2_dp_sampler_tv():
    # 3 fields give 66 allocations of 10 troops, 4 fields give 286; both must pass
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    beta = 0.7
    tvs = {}
    for k, size in ((3, 66), (4, 286)):
        game = BlottoSpec([10, 10], rng.uniform(0.5, 1.5, (2, k)))
        history = [[random_split(rng, 10, k), random_split(rng, 10, k)] for _ in range(3)]
        profile = aggregate(game, 0, history, beta)
        acts, law = exact_rwm_law(game, 0, history, beta)
        assert len(acts) == size
        for mode, table in (("approx", approx_partition(profile, 0.1)),
                            ("exact", exact_partition(profile))):
            samples = partition_sample_many(table, profile, rng, 200_000)
            tvs[mode, k] = tv_distance(law, empirical_counts(samples, acts))
    secs = time.perf_counter() - t0
    approx = max(tvs["approx", k] for k in (3, 4))
    exact = max(tvs["exact", k] for k in (3, 4))
    ok = approx <= 0.12 and exact <= 0.03 and secs < 120
    detail = "; ".join(f"k={k}: approx {tvs['approx', k]:.4f}, exact {tvs['exact', k]:.4f}"
                       for k in (3, 4))
    acceptance_line(2, ok, f"{detail} in {secs:.1f}s", "0.12 / 0.03 in < 120s")
    assert ok


def test_criterion_3_glauber_stationarity():
    rng = np.random.default_rng(303)
    t0 = time.perf_counter()
    matroids = [UniformMatroid(4, 2), UniformMatroid(6, 3),
                PartitionMatroid([0, 0, 0, 1, 1, 1], [1, 2])]
    worst = 0.0
    for M in matroids:
        for _ in range(20):
            fld = ExternalField(rng.uniform(0.0, 10.0, M.n))
            steps = glauber_steps(M.rank, M.n, M.rank * fld.log_range(), 0.05, 4.0)
            samples = glauber_sample_many(M, fld, steps, rng, 100_000)
            bases, law = field_law(M, fld)
            worst = max(worst, tv_distance(law, empirical_counts(samples, bases)))
    secs = time.perf_counter() - t0
    ok = worst <= 0.08 and secs < 300
    acceptance_line(3, ok, f"max TV {worst:.4f} over 60 fields in {secs:.1f}s", "0.08 in < 300s")
    assert ok


def test_criterion_4_detailed_balance():
    rng = np.random.default_rng(404)
    worst = 0.0
    matroids = [UniformMatroid(4, 2), UniformMatroid(6, 3), PartitionMatroid([0, 0, 1, 1, 1], [1, 2]),
                GraphicMatroid(4, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)])]
    for M in matroids:
        for _ in range(5):
            fld = ExternalField(rng.uniform(-3, 3, M.n))
            bases, K = glauber_kernel(M, fld)
            _, pi = field_law(M, fld)
            flow = pi[:, None] * K
            worst = max(worst, float(np.abs(flow - flow.T).max()))
    for n in (3, 4):
        for _ in range(5):
            W = rng.uniform(-2, 2, (n, n))
            _, K = metropolis_kernel(W)
            _, pi = matching_law(W)
            flow = pi[:, None] * K
            worst = max(worst, float(np.abs(flow - flow.T).max()))
    ok = worst <= 1e-9
    acceptance_line(4, ok, f"max |pi K - (pi K)^T| {worst:.2e}", "1e-9")
    assert ok


def test_criterion_5_regret_rate():
    t0 = time.perf_counter()
    game = BlottoSpec([20, 20], [1, 1, 1], zero_sum=True)
    good, worst = regret_rate_runs(game, 2000, range(20))
    secs = time.perf_counter() - t0
    ok = good >= 16 and secs < 300
    acceptance_line(5, ok, f"{good}/20 runs within bound (worst regret/bound {worst:.3f}) "
                    f"in {secs:.1f}s", ">= 16/20 in < 300s")
    assert ok


def test_criterion_6_eps_nash_certificate():
    t0 = time.perf_counter()
    game = BlottoSpec([5, 5], [1, 1], zero_sum=True)
    T, delta = rounds_for_eps(game.N_log(0), game.L_max(0), 0.3, 0.1, 2)
    hist = self_play(game, T, LearnerConfig(horizon=T, delta=delta), seed=0)
    e1, e2 = nash_gap(hist, game)
    secs = time.perf_counter() - t0
    ok = e1 <= 0.3 and e2 <= 0.3 and secs < 300
    acceptance_line(6, ok, f"nash_gap ({e1:.4f}, {e2:.4f}) at T={T}, delta={delta:.4f} "
                    f"in {secs:.1f}s", "0.3 each in < 300s")
    assert ok


def test_criterion_7_cce_general_sum():
    rng = np.random.default_rng(707)
    M = UniformMatroid(5, 2)
    game = CongestionSpec([M] * 3, rng.uniform(0, 1, (5, 3)))
    T = 5000
    hist = self_play(game, T, seed=7)
    gaps, ident = [], 0.0
    for i in range(3):
        g = cce_gap(hist, game, i)
        gaps.append(g / game.L_max(i))
        ident = max(ident, abs(g - regret(hist.actions, game, i) / T))
    ok = max(gaps) <= 0.25 and ident <= 1e-12
    acceptance_line(7, ok, f"max gap/L_max {max(gaps):.4f}, identity error {ident:.1e}",
                    "0.25 and 1e-12")
    assert ok


def test_criterion_8_matching_samplers():
    rng = np.random.default_rng(808)
    game = DuelSpec(rng.dirichlet(np.ones(4)))
    beta = 0.6
    hist = self_play(game, 5, LearnerConfig(horizon=5, beta=beta, delta=0.05), seed=8)
    W = aggregate(game, 0, hist.actions, beta).log_w
    perms, law = matching_law(W)
    exact = exact_matching_sample(W, rng, 100_000)
    tv_exact = tv_distance(law, empirical_counts(exact, perms))
    mcmc = mcmc_matching_sample(W, 10_000, rng, replicas=20_000)
    tv_mcmc = tv_distance(law, empirical_counts(mcmc, perms))
    ok = tv_exact <= 0.03 and tv_mcmc <= 0.08
    acceptance_line(8, ok, f"TV exact {tv_exact:.4f}, mcmc {tv_mcmc:.4f}", "0.03 / 0.08")
    assert ok


def test_criterion_9_polylog_scaling():
    ns = [10**4, 10**5, 10**6]
    rows = bench(ns, k=3, rounds=200, delta=0.1, beta=0.9, repeats=3)
    secs = {(r["mode"], r["n"]): r["seconds"] for r in rows}
    approx = [secs["approx", b] / secs["approx", a] for a, b in zip(ns, ns[1:])]
    exact = [secs["exact", b] / secs["exact", a] for a, b in zip(ns, ns[1:])]
    ok = max(approx) <= 2.0 and min(exact) >= 5.0
    acceptance_line(9, ok, "approx ratios " + ", ".join(f"{r:.2f}" for r in approx)
                    + "; exact ratios " + ", ".join(f"{r:.2f}" for r in exact),
                    "approx <= 2.0, exact >= 5.0")
    assert ok


def test_criterion_10_dice():
    rng = np.random.default_rng(1010)
    mismatches = 0
    for _ in range(100):
        m = int(rng.integers(2, 4))
        faces = [int(rng.integers(1, 5)) for _ in range(m)]
        dots = [int(rng.integers(0, 7)) for _ in range(m)]
        spec = DiceSpec(dots, faces)
        dice = [random_split(rng, dots[j], faces[j]) for j in range(m)]
        for i in range(m):
            wins = sum(all(f[i] > f[j] for j in range(m) if j != i)
                       for f in itertools.product(*dice))
            mismatches += dice_reward(spec, dice, i) != float(Fraction(wins, math.prod(faces)))
    game = DiceSpec([20, 20], [3, 3])
    assert game.L_max(0) == 1.0
    good, worst = regret_rate_runs(game, 2000, range(20))
    ok = mismatches == 0 and good >= 16
    acceptance_line(10, ok, f"{mismatches} enumeration mismatches; {good}/20 regret runs within "
                    f"bound (worst regret/bound {worst:.3f})", "0 and >= 16/20")
    assert ok
