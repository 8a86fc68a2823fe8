"""Independent oracles shared by the test modules."""

from collections import Counter

import numpy as np
import pytest
from hypothesis import settings

from edgesketch.sketch import hash_edge

# first calls include numba compilation
settings.register_profile("default", deadline=None)
settings.load_profile("default")


def exact_counts(us, vs):
    return Counter(zip(np.asarray(us).tolist(), np.asarray(vs).tolist()))


def plain_cms_estimates(counts: Counter, seed: int, d: int, w: int) -> dict:
    """Estimates of a plain count-min sketch built from exact key counts."""
    keys = list(counts)
    cols = np.array([[hash_edge(seed, i, u, v, w) for i in range(d)] for u, v in keys])
    table = np.zeros((d, w))
    weights = np.array([counts[k] for k in keys], dtype=float)
    for i in range(d):
        np.add.at(table[i], cols[:, i], weights)
    est = np.min(table[np.arange(d), cols], axis=1)
    return dict(zip(keys, est))


def pair_count_auc(scores, labels) -> float:
    """Fraction of (positive, negative) pairs ordered correctly, ties counted half."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    pos, neg = s[y], s[~y]
    diff = pos[:, None] - neg[None, :]
    return float(((diff > 0).sum() + 0.5 * (diff == 0).sum()) / diff.size)


def batch_threshold_flags(xs, lam, k):
    """Literal per-step recomputation: EWMA from the first score, mean/std over all scores so far."""
    out = []
    z = None
    for t in range(1, len(xs) + 1):
        x = xs[t - 1]
        z = x if z is None else lam * x + (1 - lam) * z
        hist = np.asarray(xs[:t], dtype=float)
        tau = hist.mean() + k * hist.std()
        out.append((z, tau, z > tau))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------- acceptance report

_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = "SKIP" if rep.skipped else ("PASS" if rep.passed else "FAIL")
        _CRITERIA.append((mark.args[0], status, mark.args[1]))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, title in sorted(_CRITERIA, key=lambda c: c[0]):
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {title}")
