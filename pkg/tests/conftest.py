import itertools

import numpy as np
import pytest

from matchscore.market import Market


def brute_force_value(F):
    """Best total value over all partial matchings, by DP over seller subsets."""
    F = np.asarray(F, dtype=float)
    nb, ns = F.shape
    best = {0: 0.0}
    for b in range(nb):
        nxt = dict(best)
        for mask, val in best.items():
            for s in range(ns):
                if not mask >> s & 1:
                    key = mask | 1 << s
                    cand = val + F[b, s]
                    if cand > nxt.get(key, -np.inf):
                        nxt[key] = cand
        best = nxt
    return max(best.values())


def enumerate_pairwise(pairs, ub, us, has_unmatched, has_transfers):
    """Pairwise comparisons listed straight from the definition."""
    elems = list(pairs)
    if has_unmatched:
        elems += [(b, None) for b in ub] + [(None, s) for s in us]
    if has_transfers:
        return list(itertools.permutations(elems, 2))
    return list(itertools.combinations(elems, 2))


def noiseless(market: Market) -> Market:
    return market.with_noise(np.zeros_like(market.noise))


def random_market(rng, nb, ns, seed=0):
    cov = np.array([[1, 0.25, 0.25], [0.25, 1, 0.25], [0.25, 0.25, 1]])
    chol = np.linalg.cholesky(cov)
    xb = 3 + rng.standard_normal((nb, 3)) @ chol.T
    xs = 3 + rng.standard_normal((ns, 3)) @ chol.T
    return Market(nb, ns, xb, xs, rng.standard_normal((nb, ns)), seed)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def desk_u_ir_n50():
    """Case 2, n=50, beta2=-2, model U with IR, lambda=100, 20 replications."""
    from matchscore.montecarlo import Scenario, run_experiment

    return run_experiment(Scenario(n=50, true_beta2=-2.0, model="u", use_ir=True, lam=100.0, replications=20))


@pytest.fixture(scope="session")
def lambda_contrast_n100():
    """Case 2, n=100, beta2=-1, model U with IR, lambda in {1, 100}, 20 replications each."""
    from matchscore.montecarlo import Scenario, lambda_sweep

    base = Scenario(n=100, true_beta2=-1.0, model="u", use_ir=True, replications=20)
    low, high = lambda_sweep(base, [1.0, 100.0])
    return low, high


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def verdict(request, capsys):
    """Record and print one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(label: str, ok: bool, detail: str):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        request.config.stash.setdefault(_ACCEPTANCE, []).append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
