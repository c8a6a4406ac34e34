"""Independent reference computations shared by the test modules.

Nothing here calls the package's DP or kernel code: partition functions are
built with numpy's direct convolution in linear space and laws come from
enumeration.
"""

import itertools
import math

import numpy as np
import pytest

from rwmplay.dp_sampler import LossProfile


def brute_convolution(f, g, x):
    """sum_i f(i) g(x - i) with both functions zero outside their domains."""
    total = 0.0
    for i in range(0, x + 1):
        if i <= f.domain_max and 0 <= x - i <= g.domain_max:
            total += f(i) * g(x - i)
    return total


def dense_weights(profile, h):
    """g_h as a linear-space vector, rebuilt from the step rewards."""
    n = profile.caps[h]
    r = np.zeros(n + 1)
    for x0 in profile.breakpoints(h):
        r[x0:] += profile._steps[h][x0]
    return np.exp(r * -math.log(profile.beta))


def reference_partition(profile):
    """Prefix partition functions by direct linear-space convolution."""
    out = []
    f = dense_weights(profile, 0)[: profile.n + 1]
    out.append(f)
    for h in range(1, profile.k):
        f = np.convolve(f, dense_weights(profile, h))[: profile.n + 1]
        out.append(f)
    return out


def compositions(n, k):
    """All ordered k-tuples of non-negative ints summing to n (plain recursion)."""
    if k == 1:
        return [(n,)]
    return [(x,) + rest for x in range(n + 1) for rest in compositions(n - x, k - 1)]


def law_from_profile(profile):
    """Allocations and exact probabilities prod_h g_h(x_h) / Z by enumeration."""
    g = [dense_weights(profile, h) for h in range(profile.k)]
    acts = [a for a in compositions(profile.n, profile.k)
            if all(x < len(g[h]) for h, x in enumerate(a))]
    w = np.array([np.prod([g[h][x] for h, x in enumerate(a)]) for a in acts])
    return acts, w / w.sum()


def empirical_tv(actions, law, samples):
    index = {tuple(int(v) for v in np.ravel(a)): i for i, a in enumerate(actions)}
    counts = np.zeros(len(actions))
    for s in samples:
        counts[index[tuple(int(v) for v in np.ravel(s))]] += 1
    return 0.5 * float(np.abs(np.asarray(law) - counts / counts.sum()).sum())


def random_monotone_profile(rng, n, k, q, beta, max_step=4.0):
    """Loss profile whose every g_h is monotone with at most q pieces."""
    p = LossProfile(n, k, beta)
    for h in range(k):
        if n == 0 or q == 1:
            continue
        cuts = rng.choice(np.arange(1, n + 1), size=min(q - 1, n), replace=False)
        for c in cuts:
            p.add_step(h, int(c), float(rng.uniform(0.1, max_step)))
    return p


def all_subsets(n, k):
    return list(itertools.combinations(range(n), k))


ACCEPTANCE_LINES = []


def acceptance_line(number, ok, measured, threshold, note=""):
    """Record (and print) one acceptance verdict; repeated in the terminal summary."""
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: measured {measured} vs {threshold}"
    if note:
        line += f" ({note})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
