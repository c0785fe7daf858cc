import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from conftest import brute_force_value
from matchscore.equilibrium import (
    EquilibriumError,
    MatchingOutcome,
    ObservedData,
    check_duals,
    extract_transfers,
    hungarian,
    solve_assignment,
    verify_stability,
)
from matchscore.market import ProductionSpec, generate_market, value_matrix


def test_diagonal_example():
    out = solve_assignment([[2, 1], [1, 2]])
    assert out.matched_pairs == ((0, 0), (1, 1))
    assert out.total_value == 4
    u, v = out.buyer_duals, out.seller_duals
    assert u[0] + v[0] == pytest.approx(2)
    assert out.transfers[(0, 0)] == pytest.approx(v[0])


def test_all_negative_leaves_everyone_single():
    out = solve_assignment([[-1, -2], [-3, -4]])
    assert out.matched_pairs == ()
    assert out.unmatched_buyers == (0, 1) and out.unmatched_sellers == (0, 1)
    assert out.total_value == 0
    assert verify_stability(out, [[-1, -2], [-3, -4]]).passed


def test_single_pair_buyer_optimal():
    out = solve_assignment([[5.0]])
    assert out.buyer_duals[0] == pytest.approx(5)
    assert out.seller_duals[0] == pytest.approx(0)
    assert out.transfers[(0, 0)] == pytest.approx(0)


def test_single_negative_entry():
    out = solve_assignment([[-1.0]])
    assert out.n_matched == 0
    report = verify_stability(out, [[-1.0]])
    assert report.passed and report.violations == []


@pytest.mark.parametrize("bad", [[[np.nan]], [[np.inf, 1]], np.zeros((0, 3)), [1, 2]])
def test_rejects_bad_matrices(bad):
    with pytest.raises(ValueError):
        solve_assignment(bad)


def test_hungarian_against_scipy(rng):
    for _ in range(100):
        k = int(rng.integers(1, 9))
        cost = rng.uniform(-5, 5, (k, k))
        col = hungarian(cost)
        r, c = linear_sum_assignment(cost)
        assert cost[np.arange(k), col].sum() == pytest.approx(cost[r, c].sum(), abs=1e-9)


def test_brute_force_oracle(rng):
    for _ in range(200):
        nb, ns = rng.integers(1, 8, size=2)
        F = rng.uniform(-3, 3, (nb, ns))
        out = solve_assignment(F)
        assert abs(out.total_value - brute_force_value(F)) <= 1e-9
        m = out.assignment_matrix()
        assert set(np.unique(m)) <= {0, 1}
        assert m.sum(axis=0).max(initial=0) <= 1 and m.sum(axis=1).max(initial=0) <= 1


def test_partition_and_dual_conditions(rng):
    for _ in range(50):
        nb, ns = rng.integers(1, 12, size=2)
        F = rng.normal(0, 2, (nb, ns))
        out = solve_assignment(F)
        buyers = [b for b, _ in out.matched_pairs] + list(out.unmatched_buyers)
        sellers = [s for _, s in out.matched_pairs] + list(out.unmatched_sellers)
        assert sorted(buyers) == list(range(nb)) and sorted(sellers) == list(range(ns))
        check_duals(out, F, tol=1e-9)
        assert set(out.transfers) == set(out.matched_pairs)
        for b, s in out.matched_pairs:
            assert F[b, s] >= 0
            assert 0 <= out.transfers[(b, s)] <= F[b, s]
            # a rival buyer cannot outbid the observed price
            for b2 in range(nb):
                assert out.seller_duals[s] >= F[b2, s] - out.buyer_duals[b2] - 1e-9


def test_seller_duals_are_minimal(rng):
    # lowering any seller price breaks dual feasibility given buyer-optimal selection
    for _ in range(30):
        F = rng.uniform(-1, 3, (5, 5))
        out = solve_assignment(F)
        u, v = out.buyer_duals, out.seller_duals
        for s in np.flatnonzero(v > 1e-6):
            v2 = v.copy()
            v2[s] -= 1e-4
            u2 = u.copy()
            for b, s_ in out.matched_pairs:
                u2[b] = F[b, s_] - v2[s_]
            feasible = (u2[:, None] + v2[None, :] - F).min() >= -1e-12 and u2.min() >= -1e-12
            assert not feasible


def test_stability_on_simulated_markets():
    for seed in range(40):
        m = generate_market(1 + seed % 30, seed)
        F = value_matrix(ProductionSpec(), m)
        report = verify_stability(solve_assignment(F), F)
        assert report.passed, report.violations[:3]


def test_swapped_partners_are_unstable():
    F = np.array([[3.0, 0.5], [0.5, 3.0]])
    bad = MatchingOutcome(
        matched_pairs=((0, 1), (1, 0)),
        unmatched_buyers=(),
        unmatched_sellers=(),
        buyer_duals=np.zeros(2),
        seller_duals=np.full(2, 0.25),
        total_value=1.0,
        pair_values=(0.5, 0.5),
        transfers={(0, 1): 0.25, (1, 0): 0.25},
    )
    report = verify_stability(bad, F)
    assert not report.passed
    assert report.violations[0]["kind"] == "pairwise"


def test_ir_violation_detected():
    F = np.array([[1.0]])
    bad = MatchingOutcome(((0, 0),), (), (), np.zeros(1), np.ones(1) * 2, 1.0, (1.0,), {(0, 0): 2.0})
    kinds = {v["kind"] for v in verify_stability(bad, F).violations}
    assert "ir" in kinds


def test_extract_transfers_checks_slackness():
    out = solve_assignment([[2.0, 1.0], [1.0, 2.0]])
    assert extract_transfers(out) == out.transfers
    with pytest.raises(EquilibriumError):
        extract_transfers(out, np.array([[9.0, 1.0], [1.0, 2.0]]))


def test_outcome_json_round_trip():
    F = value_matrix(ProductionSpec(), generate_market(12, 3))
    out = solve_assignment(F)
    again = MatchingOutcome.from_json(out.to_json())
    assert again.to_json() == out.to_json()
    assert again.transfers == out.transfers
    assert np.array_equal(again.buyer_duals, out.buyer_duals)


def test_observed_data_withholds_transfers():
    m = generate_market(4, 0)
    out = solve_assignment(value_matrix(ProductionSpec(), m))
    assert ObservedData(out, m).transfers == out.transfers
    with pytest.raises(PermissionError):
        ObservedData(out, m, include_transfers=False).transfers
