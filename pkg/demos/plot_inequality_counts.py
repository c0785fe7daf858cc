"""
Counting equilibrium inequalities
=================================

Observed matches are compared two at a time. With transfers each ordered
comparison is one row, without them each unordered one, so the with-transfer
count is exactly twice the other.
"""

from matchscore import Model, ObservedData, ProductionSpec, ScoreConfig, build_inequalities, count_formula
from matchscore import generate_market, solve_assignment, value_matrix

# sizes from a small hand example
m, ub, us = 3, 1, 1
for model in Model:
    rows = count_formula(m, ub, us, model.has_unmatched, model.has_transfers)
    print(f"{model.label:5s} -> {rows:3d} pairwise rows")

# the same numbers from a simulated market
market = generate_market(10, seed=4)
outcome = solve_assignment(value_matrix(ProductionSpec(), market))
data = ObservedData(outcome, market)
print("matched", outcome.n_matched, "unmatched per side", len(outcome.unmatched_buyers))

for model in Model:
    ineqs = build_inequalities(data, ScoreConfig.for_model(model, use_ir=True))
    print(model.label, ineqs.counts)

# rows can be exported for inspection
ineqs = build_inequalities(data, ScoreConfig.for_model("ut"))
print("\n".join(ineqs.to_csv().split("\n")[:6]))
