import json

import numpy as np
import pytest

from matchscore.market import (
    COVARIATE_COV,
    AgentRef,
    Case,
    Market,
    ProductionSpec,
    generate_market,
    joint_production,
    pair_features,
    production_matrix,
    value_matrix,
)


def _toy_market():
    xb = np.array([[1.0, 2.0, 7.0]])
    xs = np.array([[3.0, 4.0, -5.0]])
    return Market(1, 1, xb, xs, np.array([[-0.5]]))


def test_shapes_and_mean():
    m = generate_market(10, 42)
    assert m.buyer_covariates.shape == (10, 3)
    assert m.seller_covariates.shape == (10, 3)
    assert m.noise.shape == (10, 10)
    assert abs(m.buyer_covariates[:, 0].mean() - 3) <= 1.0


def test_same_seed_same_market():
    a, b = generate_market(8, 3), generate_market(8, 3)
    assert a == b
    assert np.array_equal(a.noise, b.noise)
    spec = ProductionSpec()
    assert np.array_equal(value_matrix(spec, a), value_matrix(spec, b))
    assert generate_market(8, 4) != a


def test_covariate_moments_large_sample():
    m = generate_market(5000, 7)
    x = np.vstack([m.buyer_covariates, m.seller_covariates])
    # both sides share one law; pooling gives 10000 draws
    assert np.all(np.abs(np.cov(x, rowvar=False) - COVARIATE_COV) <= 0.03)
    assert np.all(np.abs(x.mean(axis=0) - 3) <= 0.03)


def test_market_is_read_only():
    m = generate_market(3, 1)
    with pytest.raises(ValueError):
        m.noise[0, 0] = 1.0


@pytest.mark.parametrize("n,seed", [(0, 1), (-2, 1), (3, -1), (3, 2**64)])
def test_generate_rejects_bad_input(n, seed):
    with pytest.raises(ValueError):
        generate_market(n, seed)


def test_case2_hand_value():
    spec = ProductionSpec(Case.CASE2, 0.5, -2.0, 8.0)
    assert joint_production(spec, AgentRef.buyer(0), AgentRef.seller(0), _toy_market()) == pytest.approx(-9.0)


def test_case1_footnote_value():
    xb = np.full((1, 3), 3.0)
    m = Market(1, 1, xb, xb.copy(), np.zeros((1, 1)))
    spec = ProductionSpec(Case.CASE1, 0.5, 0.0)
    assert joint_production(spec, AgentRef.buyer(0), AgentRef.seller(0), m) == pytest.approx(13.5)


@pytest.mark.parametrize("kind", list(Case))
def test_null_pairs_are_zero(kind):
    m = _toy_market()
    spec = ProductionSpec(kind, 0.5, -2.0)
    assert joint_production(spec, AgentRef.buyer(), AgentRef.seller(), m) == 0.0
    assert joint_production(spec, AgentRef.buyer(0), AgentRef.seller(), m) == 0.0
    assert joint_production(spec, AgentRef.buyer(), AgentRef.seller(0), m) == 0.0


def test_bad_refs():
    m = _toy_market()
    spec = ProductionSpec()
    with pytest.raises(ValueError):
        joint_production(spec, AgentRef.seller(0), AgentRef.buyer(0), m)
    with pytest.raises(IndexError):
        joint_production(spec, AgentRef.buyer(3), AgentRef.seller(0), m)


def test_spec_validation():
    with pytest.raises(ValueError):
        ProductionSpec(beta0=2.0)
    with pytest.raises(ValueError):
        ProductionSpec(kappa=0.0)


def test_case2_ignores_third_covariate():
    m = generate_market(6, 11)
    xb = m.buyer_covariates.copy()
    xb[:, 2] += 100
    shifted = Market(6, 6, xb, m.seller_covariates, m.noise)
    spec = ProductionSpec(Case.CASE2, 0.3, 1.7)
    assert np.array_equal(production_matrix(spec, m), production_matrix(spec, shifted))


def test_case2_cost_cancels_between_real_pairs():
    m = generate_market(5, 2)
    a = production_matrix(ProductionSpec(Case.CASE2, 0.5, -7.0), m)
    b = production_matrix(ProductionSpec(Case.CASE2, 0.5, 4.0), m)
    d = (a[0, 1] - a[2, 3]) - (b[0, 1] - b[2, 3])
    assert abs(d) < 1e-12


@pytest.mark.parametrize("kind", list(Case))
def test_matrix_matches_pointwise(kind):
    m = generate_market(7, 5)
    spec = ProductionSpec(kind, -0.8, 1.3)
    f = production_matrix(spec, m)
    for b in range(7):
        for s in range(7):
            assert f[b, s] == pytest.approx(joint_production(spec, AgentRef.buyer(b), AgentRef.seller(s), m), abs=1e-12)
    assert np.max(np.abs((value_matrix(spec, m) - f) - m.noise)) <= 1e-12


def test_noise_is_additive():
    m = _toy_market()
    spec = ProductionSpec(Case.CASE2, 0.5, -2.0)
    assert value_matrix(spec, m)[0, 0] == pytest.approx(-9.5)
    quiet = m.with_noise(np.zeros((1, 1)))
    assert np.array_equal(value_matrix(spec, quiet), production_matrix(spec, quiet))


def test_features_null_slice():
    phi = pair_features(Case.CASE2, generate_market(4, 0))
    assert phi.shape == (5, 5, 3)
    assert not phi[-1].any() and not phi[:, -1].any()
    assert np.all(phi[:-1, :-1, 2] == 8.0)


def test_json_round_trip():
    m = generate_market(6, 9)
    again = Market.from_json(m.to_json())
    assert again == m
    assert json.loads(m.to_json())["seed"] == 9
    assert again.to_json() == m.to_json()


def test_covariates_csv():
    m = generate_market(3, 9)
    lines = m.covariates_csv().strip().split("\n")
    assert lines[0] == "side,index,x0,x1,x2"
    assert len(lines) == 7
    assert float(lines[1].split(",")[2]) == m.buyer_covariates[0, 0]
