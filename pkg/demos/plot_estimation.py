"""
Maximum score estimation with differential evolution
====================================================

The objective counts satisfied inequalities, so it is a step function.
Differential evolution searches the box [-10, 10]^2 and reports the
best point it found.
"""

import numpy as np

from matchscore import DEConfig, ObservedData, ProductionSpec, ScoreConfig, build_inequalities, estimate
from matchscore import generate_market, objective_grid, solve_assignment, value_matrix

market = generate_market(50, seed=8)
outcome = solve_assignment(value_matrix(ProductionSpec("case2", 0.5, -2.0), market))
ineqs = build_inequalities(ObservedData(outcome, market), ScoreConfig.for_model("u", use_ir=True, lam=100))

est = estimate(ineqs, market, "case2", DEConfig(seed=0))
print("estimate:", round(est.candidate.beta1, 3), round(est.candidate.beta2, 3))
print("pairwise rows satisfied:", est.score.pairwise_satisfied, "of", ineqs.n_pairwise_scored)
print("IR rows satisfied:", est.score.ir_satisfied, "of", ineqs.n_ir)
print("best value by generation 0, 10, 50, 300:", [est.trace[g] for g in (0, 10, 50, 300)])

# a grid view around the estimate tells how sharp the peak is
grid = objective_grid(ineqs, market, "case2", (-1, 2), (-4, 0), (31, 41))
top = grid.values.max()
near = np.argwhere(grid.values >= top - 5)
print("grid argmax:", grid.argmax)
print("beta2 range within 5 points of the top:", grid.beta2[near[:, 1]].min(), grid.beta2[near[:, 1]].max())
