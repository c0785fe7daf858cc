"""
Drawing a market and solving its equilibrium
============================================

A market has n buyers and n sellers with three covariates each, drawn
from a correlated normal with mean 3. Match values are
F = f(b, s) + noise and anyone may stay single at value 0.
"""

import numpy as np

from matchscore import ProductionSpec, generate_market, solve_assignment, value_matrix, verify_stability

# one seeded market; the same seed always gives the same draws
market = generate_market(12, seed=1)
print("buyer covariates, first rows:\n", np.round(market.buyer_covariates[:3], 3))

# Case 2: beta2 * kappa is a matching cost charged to every real pair
spec = ProductionSpec("case2", beta1=0.5, beta2=-2.0, kappa=8.0)
F = value_matrix(spec, market)
print("share of pairs with positive value:", np.mean(F > 0).round(3))

# the assignment LP picks the value-maximizing partial matching
outcome = solve_assignment(F)
print("matched pairs:", outcome.matched_pairs)
print("unmatched buyers:", outcome.unmatched_buyers)
print("total value:", round(outcome.total_value, 4))

# seller duals play the role of observed transfers
for (b, s), p in outcome.transfers.items():
    print(f"  pair ({b:2d}, {s:2d})  F = {F[b, s]:7.3f}  price = {p:7.3f}")

# no blocking pair and no regretful match
print(verify_stability(outcome, F).summary())
