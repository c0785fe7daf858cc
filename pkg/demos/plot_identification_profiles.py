"""
What each data regime says about the matching cost
==================================================

Score profiles along beta2 at beta1 = 0.5 for one Case 2 market.
Matched-only data cannot see the cost at all, unmatched agents bound it
from above, and individual rationality rows bound it from below.
"""

import numpy as np

from matchscore import CompiledScore, Model, ObservedData, ProductionSpec, ScoreConfig, build_inequalities
from matchscore import generate_market, solve_assignment, value_matrix

market = generate_market(50, seed=3)
outcome = solve_assignment(value_matrix(ProductionSpec("case2", 0.5, -2.0), market))
data = ObservedData(outcome, market)
beta2 = np.linspace(-10, 10, 11)
points = np.column_stack([np.full_like(beta2, 0.5), beta2])

print("beta2     ", " ".join(f"{b:7.1f}" for b in beta2))
for model, use_ir in [(Model.NONE, False), (Model.T, False), (Model.U, False), (Model.U, True), (Model.UT, True)]:
    cfg = ScoreConfig.for_model(model, use_ir=use_ir, lam=100.0)
    values = CompiledScore(build_inequalities(data, cfg), market).weighted(points)
    tag = model.label + (" +IR" if use_ir else "")
    print(f"{tag:10s}", " ".join(f"{v:7.0f}" for v in values))

# the first two rows are flat, the third never increases,
# and with IR the peak sits near the true value -2
