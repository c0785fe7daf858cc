import numpy as np
import pytest

from matchscore.de import DEConfig, maximize
from matchscore.equilibrium import ObservedData, solve_assignment
from matchscore.estimator import Candidate, CompiledScore, estimate, objective_grid, score
from matchscore.inequalities import Model, ScoreConfig, build_from_outcome, build_inequalities
from matchscore.market import Case, ProductionSpec, generate_market, value_matrix

FAST_DE = DEConfig(population=60, max_generations=40)


def stub(x):
    x = np.atleast_2d(x)
    return -((x[:, 0] - 1) ** 2) - (x[:, 1] + 2) ** 2


def _ineqs(n, seed, model, use_ir=False, lam=100.0, beta2=-2.0, **kw):
    m = generate_market(n, seed)
    out = solve_assignment(value_matrix(ProductionSpec(Case.CASE2, 0.5, beta2), m))
    return m, build_inequalities(ObservedData(out, m), ScoreConfig.for_model(model, use_ir, lam, **kw))


@pytest.mark.parametrize("seed", range(10))
def test_de_smooth_stub(seed):
    res = maximize(stub, DEConfig(seed=seed), vectorized=True)
    assert np.max(np.abs(res.x - [1, -2])) <= 1e-3
    assert np.all(np.diff(res.trace) >= 0)
    assert res.evaluations == 400 * 301
    assert len(res.trace) == 301


def test_de_scalar_objective_path():
    cfg = DEConfig(population=20, max_generations=50, seed=3)
    a = maximize(lambda p: float(stub(p)[0]), cfg)
    b = maximize(stub, cfg, vectorized=True)
    assert np.array_equal(a.x, b.x) and a.trace == b.trace


def test_de_constant_objective():
    res = maximize(lambda p: np.zeros(len(p)), DEConfig(population=30, max_generations=20), vectorized=True)
    assert set(res.trace) == {0.0}
    assert np.all(np.abs(res.x) <= 10)


def test_de_deterministic_and_in_bounds():
    cfg = DEConfig(population=30, max_generations=30, seed=11, domain=((0, 1), (-3, -2)))
    seen = []

    def f(p):
        seen.append(p.copy())
        return p.sum(axis=1)

    a = maximize(f, cfg, vectorized=True)
    b = maximize(lambda p: p.sum(axis=1), cfg, vectorized=True)
    assert np.array_equal(a.x, b.x)
    pts = np.vstack(seen)
    assert pts[:, 0].min() >= 0 and pts[:, 0].max() <= 1
    assert pts[:, 1].min() >= -3 and pts[:, 1].max() <= -2


@pytest.mark.parametrize(
    "kw",
    [dict(population=3), dict(max_generations=0), dict(differential_weight=0), dict(crossover_rate=1.5), dict(domain=((1, 1), (0, 1)))],
)
def test_de_config_validation(kw):
    with pytest.raises(ValueError):
        DEConfig(**kw)


def test_candidate_domain():
    Candidate(10.0, -10.0)
    with pytest.raises(ValueError):
        Candidate(10.5, 0.0)


def test_empty_rows_score_zero():
    m = generate_market(3, 0)
    ineqs = build_from_outcome([], [], [], None, ScoreConfig(use_ir=False))
    val = score(Candidate(0.0, 0.0), ineqs, Case.CASE2, m)
    assert (val.pairwise_satisfied, val.ir_satisfied, val.weighted_total) == (0, 0, 0.0)


def test_weighted_total_identity():
    m, ineqs = _ineqs(12, 4, "u", use_ir=True, lam=7.0)
    c = CompiledScore(ineqs, m)
    for b1, b2 in [(0.5, -2), (3, 3), (-4, 1)]:
        v = c.score(b1, b2)
        assert v.weighted_total == v.pairwise_satisfied + 7.0 * v.ir_satisfied
        assert c.weighted([[b1, b2]])[0] == v.weighted_total


def test_row_order_invariance():
    m, ineqs = _ineqs(10, 2, "ut", use_ir=True)
    perm = np.random.default_rng(0).permutation(len(ineqs))
    a, b = CompiledScore(ineqs, m), CompiledScore(ineqs.take(perm), m)
    pts = np.random.default_rng(1).uniform(-10, 10, (50, 2))
    assert np.array_equal(a.weighted(pts), b.weighted(pts))


def test_vacuous_rows_not_counted():
    m, ineqs = _ineqs(12, 3, "u")
    c = CompiledScore(ineqs, m)
    assert c.n_pairwise == ineqs.n_pairwise_scored < ineqs.n_pairwise


@pytest.mark.parametrize("model", ["none", "t"])
def test_matched_only_regimes_flat_in_beta2(model):
    for seed in range(5):
        m, ineqs = _ineqs(15, seed, model)
        for b1 in (-5.0, 0.5, 2.0):
            assert score(Candidate(b1, -9), ineqs, Case.CASE2, m) == score(Candidate(b1, 9), ineqs, Case.CASE2, m)
        grid = objective_grid(ineqs, m, Case.CASE2, steps=(9, 21))
        assert grid.beta2_constant()


def test_unmatched_without_ir_non_increasing():
    for seed in range(5):
        m, ineqs = _ineqs(15, seed, "u")
        grid = objective_grid(ineqs, m, Case.CASE2, steps=(9, 41))
        assert np.all(np.diff(grid.values, axis=1) <= 0)
        assert not grid.beta2_constant()


def test_large_lambda_bounds_beta2():
    hits = 0
    for seed in range(10):
        m, probe = _ineqs(12, seed, "u")
        lam = max(1.0, float(probe.n_pairwise_scored))
        _, ineqs = _ineqs(12, seed, "u", use_ir=True, lam=lam)
        if ineqs.n_ir == 0:
            continue
        hits += 1
        grid = objective_grid(ineqs, m, Case.CASE2, steps=(41, 81))
        lo, hi = grid.argmax_beta2_range()
        assert -10 < lo and hi < 10
    assert hits >= 5


def test_noiseless_truth_scores_every_row():
    spec = ProductionSpec(Case.CASE2, 0.5, -1.5)
    for seed in range(20):
        m = generate_market(2 + seed % 9, seed)
        m = m.with_noise(np.zeros_like(m.noise))
        out = solve_assignment(value_matrix(spec, m))
        for model in Model:
            ineqs = build_inequalities(ObservedData(out, m), ScoreConfig.for_model(model, True))
            val = score(Candidate(0.5, -1.5), ineqs, Case.CASE2, m)
            assert val.pairwise_satisfied == ineqs.n_pairwise_scored
            assert val.ir_satisfied == ineqs.n_ir


def test_grid_shapes_and_outputs():
    m, ineqs = _ineqs(8, 1, "u", use_ir=True)
    grid = objective_grid(ineqs, m, Case.CASE2, (-1, 2), (-10, 2), (61, 121))
    assert grid.values.shape == (61, 121)
    lines = grid.to_csv().strip().split("\n")
    assert lines[0] == "beta1,beta2,score" and len(lines) == 61 * 121 + 1
    side = grid.sidecar()
    assert side["lambda"] == 100 and side["regime"] == "U +IR"
    assert side["argmax"]["score"] == grid.values.max()


def test_grid_constant_objective():
    m = generate_market(3, 0)
    ineqs = build_from_outcome([], [], [], None, ScoreConfig(use_ir=False))
    grid = objective_grid(ineqs, m, Case.CASE2, steps=2)
    assert grid.values.shape == (2, 2) and np.all(grid.values == 0)


def test_estimate_deterministic_and_consistent():
    m, ineqs = _ineqs(10, 6, "u", use_ir=True)
    a = estimate(ineqs, m, Case.CASE2, FAST_DE)
    b = estimate(ineqs, m, Case.CASE2, FAST_DE)
    assert a.to_dict() == b.to_dict()
    assert a.score.weighted_total == a.trace[-1]
    assert np.all(np.diff(a.trace) >= 0)


def test_desk_estimates_near_truth(desk_u_ir_n50):
    est = desk_u_ir_n50.estimates("beta2")
    assert np.mean(np.abs(est + 2.0) <= 1.0) >= 0.8
