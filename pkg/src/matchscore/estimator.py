"""Matching maximum score objective and its maximization.

f(b, s | beta) is linear in (beta0, beta1, beta2) for both production
cases, so every inequality row reduces to ``c0 + c1*beta1 + c2*beta2 >= 0``.
Rows are compiled once per data set into that form and candidates are
scored in batches with a single matrix product.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from matchscore._io import csv_text, dumps_json
from matchscore.de import DEConfig, DEResult, maximize
from matchscore.inequalities import Family, InequalitySet
from matchscore.market import DEFAULT_KAPPA, Case, Market, pair_features

# slack allowed when comparing each side of a row; absorbs rounding in dual-derived prices
SCORE_TOL = 1e-9
DOMAIN = (-10.0, 10.0)
_BATCH = 512


@dataclass(frozen=True)
class Candidate:
    beta1: float
    beta2: float

    def __post_init__(self):
        for v in (self.beta1, self.beta2):
            if not DOMAIN[0] <= v <= DOMAIN[1]:
                raise ValueError(f"candidate coordinate {v} outside {DOMAIN}")

    def as_array(self) -> np.ndarray:
        return np.array([self.beta1, self.beta2])


@dataclass(frozen=True)
class ScoreValue:
    pairwise_satisfied: int
    ir_satisfied: int
    weighted_total: float


class CompiledScore:
    """Inequality rows of one market in linear form, ready for batch scoring.

    Vacuous rows never depend on beta and are left out of the count.
    """

    def __init__(
        self,
        ineqs: InequalitySet,
        market: Market,
        kind: Union[Case, str] = Case.CASE2,
        kappa: float = DEFAULT_KAPPA,
        lam: Optional[float] = None,
        tol: float = SCORE_TOL,
    ):
        self.kind = Case(kind)
        self.lam = float(ineqs.config.lam if lam is None else lam)
        self.use_ir = ineqs.config.use_ir
        self.tol = tol
        phi = pair_features(self.kind, market, kappa)
        fam = ineqs.family
        lb, ls, rb, rs = ineqs.left_b, ineqs.left_s, ineqs.right_b, ineqs.right_s
        # index -1 selects the all-zero null row/column of phi
        coef = np.zeros((len(fam), 3))
        t = fam == Family.PAIRWISE_WITH_TRANSFER
        coef[t] = phi[lb[t], ls[t]] - phi[lb[t], rs[t]]
        nt = fam == Family.PAIRWISE_NO_TRANSFER
        coef[nt] = (phi[lb[nt], ls[nt]] + phi[rb[nt], rs[nt]]) - phi[lb[nt], rs[nt]] - phi[rb[nt], ls[nt]]
        ir = fam == Family.IR
        coef[ir] = phi[lb[ir], ls[ir]]
        coef[:, 0] -= np.where(ineqs.has_rhs, ineqs.rhs, 0.0)

        keep = ~ineqs.vacuous
        self.coef = coef[keep]
        self.is_ir = ir[keep]
        self.n_pairwise = int((~self.is_ir).sum())
        self.n_ir = int(self.is_ir.sum())

    def counts(self, points) -> Tuple[np.ndarray, np.ndarray]:
        """Satisfied pairwise and IR counts for each row of ``points`` (k, 2)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        pw = np.empty(len(points), dtype=np.int64)
        ir = np.empty(len(points), dtype=np.int64)
        c0 = self.coef[:, :1]
        slope = self.coef[:, 1:]
        for start in range(0, len(points), _BATCH):
            chunk = points[start : start + _BATCH]
            ok = (c0 + slope @ chunk.T) >= -self.tol
            ir_ok = ok[self.is_ir].sum(axis=0)
            pw[start : start + _BATCH] = ok.sum(axis=0) - ir_ok
            ir[start : start + _BATCH] = ir_ok
        return pw, ir

    def weighted(self, points) -> np.ndarray:
        pw, ir = self.counts(points)
        if not self.use_ir:
            return pw.astype(float)
        return pw + self.lam * ir

    def score(self, beta1: float, beta2: float) -> ScoreValue:
        pw, ir = self.counts([[beta1, beta2]])
        ir_count = int(ir[0]) if self.use_ir else 0
        return ScoreValue(int(pw[0]), ir_count, float(pw[0] + self.lam * ir_count))


def score(
    candidate: Candidate,
    ineqs: InequalitySet,
    spec_kind: Union[Case, str],
    market: Market,
    kappa: float = DEFAULT_KAPPA,
) -> ScoreValue:
    return CompiledScore(ineqs, market, spec_kind, kappa).score(candidate.beta1, candidate.beta2)


@dataclass
class Estimate:
    candidate: Candidate
    score: ScoreValue
    trace: List[float]
    evaluations: int

    def to_dict(self) -> dict:
        return {
            "beta1": self.candidate.beta1,
            "beta2": self.candidate.beta2,
            "score": {
                "pairwise_satisfied": self.score.pairwise_satisfied,
                "ir_satisfied": self.score.ir_satisfied,
                "weighted_total": self.score.weighted_total,
            },
            "evaluations": self.evaluations,
            "trace": self.trace,
        }


def estimate(
    ineqs: InequalitySet,
    market: Market,
    spec_kind: Union[Case, str] = Case.CASE2,
    de: DEConfig = DEConfig(),
    kappa: float = DEFAULT_KAPPA,
) -> Estimate:
    """Best-found maximizer of the weighted score over the DE domain."""
    compiled = CompiledScore(ineqs, market, spec_kind, kappa)
    result: DEResult = maximize(compiled.weighted, de, vectorized=True)
    b1, b2 = (float(v) for v in result.x)
    return Estimate(Candidate(b1, b2), compiled.score(b1, b2), result.trace, result.evaluations)


@dataclass
class GridResult:
    beta1: np.ndarray
    beta2: np.ndarray
    values: np.ndarray  # shape (len(beta1), len(beta2))
    lam: float
    regime: str

    @property
    def argmax(self) -> Tuple[float, float]:
        i, j = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return float(self.beta1[i]), float(self.beta2[j])

    @property
    def argmax_mask(self) -> np.ndarray:
        return self.values == self.values.max()

    def argmax_beta2_range(self) -> Tuple[float, float]:
        cols = np.flatnonzero(self.argmax_mask.any(axis=0))
        return float(self.beta2[cols.min()]), float(self.beta2[cols.max()])

    def beta2_constant(self) -> bool:
        """True when every beta1 slice is exactly flat in beta2."""
        return bool(np.all(self.values == self.values[:, :1]))

    def to_csv(self) -> str:
        rows = (
            (float(b1), float(b2), float(self.values[i, j]))
            for i, b1 in enumerate(self.beta1)
            for j, b2 in enumerate(self.beta2)
        )
        return csv_text(["beta1", "beta2", "score"], rows)

    def sidecar(self) -> dict:
        b1, b2 = self.argmax
        return {"argmax": {"beta1": b1, "beta2": b2, "score": float(self.values.max())}, "lambda": self.lam, "regime": self.regime}

    def sidecar_json(self) -> str:
        return dumps_json(self.sidecar())


def axis(lo: float, hi: float, steps: int) -> np.ndarray:
    if steps < 2:
        raise ValueError("a grid axis needs at least 2 steps")
    return np.linspace(lo, hi, int(steps))


def objective_grid(
    ineqs: InequalitySet,
    market: Market,
    spec_kind: Union[Case, str] = Case.CASE2,
    beta1_range: Tuple[float, float] = DOMAIN,
    beta2_range: Tuple[float, float] = DOMAIN,
    steps: Union[int, Tuple[int, int]] = 41,
    kappa: float = DEFAULT_KAPPA,
) -> GridResult:
    n1, n2 = (steps, steps) if np.isscalar(steps) else steps
    b1 = axis(*beta1_range, n1)
    b2 = axis(*beta2_range, n2)
    compiled = CompiledScore(ineqs, market, spec_kind, kappa)
    mesh = np.stack(np.meshgrid(b1, b2, indexing="ij"), axis=-1).reshape(-1, 2)
    values = compiled.weighted(mesh).reshape(len(b1), len(b2))
    cfg = ineqs.config
    regime = cfg.model.label + (" +IR" if cfg.use_ir else "")
    return GridResult(b1, b2, values, cfg.lam if cfg.use_ir else 0.0, regime)
