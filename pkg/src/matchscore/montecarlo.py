"""Monte Carlo studies: simulate markets, solve, estimate, summarize.

Every replication draws its market seed from a 64-bit mix of the base seed,
the replication index and a hash of the data-generating fields (case, n,
true parameters, kappa). Scenarios that differ only in the estimator side
(model, IR, lambda, DE settings) therefore see the same markets.
"""

from __future__ import annotations

import dataclasses
import hashlib
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np

from matchscore._io import csv_text, fmt_float
from matchscore.de import DEConfig
from matchscore.equilibrium import EquilibriumError, ObservedData, solve_assignment
from matchscore.estimator import estimate
from matchscore.inequalities import Model, ScoreConfig, build_inequalities
from matchscore.market import Case, ProductionSpec, generate_market, value_matrix

MASK64 = (1 << 64) - 1
DEFAULT_LAMBDAS = (1.0, 2.0, 5.0, 10.0, 20.0, 100.0)
PAPER_BETA2_GRID = (1.0, 0.0, -1.0, -2.0, -3.0)
SUMMARY_HEADER = ["case", "n", "model", "ir", "lambda", "param", "truth", "bias", "rmse", "mean_unmatched"]


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def mix64(*words: int) -> int:
    h = 0
    for w in words:
        h = splitmix64(h ^ (int(w) & MASK64))
    return h


def default_jobs() -> int:
    return max(1, int(os.environ.get("MATCHSCORE_JOBS", "1")))


@dataclass(frozen=True)
class Scenario:
    case: Case = Case.CASE2
    n: int = 50
    true_beta1: float = 0.5
    true_beta2: float = -2.0
    kappa: float = 8.0
    model: Model = Model.U
    use_ir: bool = True
    lam: float = 100.0
    replications: int = 20
    base_seed: int = 0
    de: DEConfig = DEConfig()

    def __post_init__(self):
        object.__setattr__(self, "case", Case(self.case))
        object.__setattr__(self, "model", Model(self.model))
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    @property
    def spec(self) -> ProductionSpec:
        return ProductionSpec(self.case, self.true_beta1, self.true_beta2, self.kappa)

    @property
    def score_config(self) -> ScoreConfig:
        return ScoreConfig.for_model(self.model, self.use_ir, self.lam)

    def dgp_key(self) -> int:
        text = "|".join(
            [self.case.value, str(self.n), fmt_float(self.true_beta1), fmt_float(self.true_beta2), fmt_float(self.kappa)]
        )
        return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")

    def market_seed(self, r: int) -> int:
        return mix64(self.base_seed, self.dgp_key(), r)

    def to_dict(self) -> dict:
        return {
            "case": self.case.value,
            "n": self.n,
            "true_beta1": self.true_beta1,
            "true_beta2": self.true_beta2,
            "kappa": self.kappa,
            "model": self.model.value,
            "use_ir": self.use_ir,
            "lambda": self.lam,
            "replications": self.replications,
            "base_seed": self.base_seed,
            "de": {
                "population": self.de.population,
                "max_generations": self.de.max_generations,
                "differential_weight": self.de.differential_weight,
                "crossover_rate": self.de.crossover_rate,
                "domain": [list(d) for d in self.de.domain],
            },
        }


@dataclass
class ReplicationRecord:
    replication: int
    seed: int
    beta1: float = float("nan")
    beta2: float = float("nan")
    score: float = float("nan")
    n_matched: int = 0
    n_unmatched_buyers: int = 0
    n_unmatched_sellers: int = 0
    runtime: float = 0.0
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def row(self) -> list:
        return [
            self.replication,
            self.seed,
            self.beta1,
            self.beta2,
            self.score,
            self.n_matched,
            self.n_unmatched_buyers,
            self.n_unmatched_sellers,
            self.error or "",
        ]


RECORD_HEADER = [
    "replication",
    "seed",
    "beta1",
    "beta2",
    "score",
    "n_matched",
    "n_unmatched_buyers",
    "n_unmatched_sellers",
    "error",
]


def run_replication(scenario: Scenario, r: int) -> ReplicationRecord:
    if not 0 <= r < scenario.replications:
        raise ValueError(f"replication {r} out of range")
    seed = scenario.market_seed(r)
    start = time.perf_counter()
    record = ReplicationRecord(r, seed)
    market = generate_market(scenario.n, seed)
    try:
        outcome = solve_assignment(value_matrix(scenario.spec, market))
    except (EquilibriumError, ValueError) as exc:
        record.error = f"solver: {exc}"
        return record
    record.n_matched = outcome.n_matched
    record.n_unmatched_buyers = len(outcome.unmatched_buyers)
    record.n_unmatched_sellers = len(outcome.unmatched_sellers)
    model = scenario.model
    data = ObservedData(outcome, market, model.has_unmatched, model.has_transfers)
    ineqs = build_inequalities(data, scenario.score_config)
    de = dataclasses.replace(scenario.de, seed=mix64(seed, 0xDE))
    est = estimate(ineqs, market, scenario.case, de, scenario.kappa)
    record.beta1 = est.candidate.beta1
    record.beta2 = est.candidate.beta2
    record.score = est.score.weighted_total
    record.runtime = time.perf_counter() - start
    return record


@dataclass
class ExperimentSummary:
    scenario: Scenario
    records: List[ReplicationRecord]

    @property
    def valid(self) -> List[ReplicationRecord]:
        return [r for r in self.records if r.ok]

    @property
    def exclusion_rate(self) -> float:
        return 1.0 - len(self.valid) / len(self.records)

    def estimates(self, param: str) -> np.ndarray:
        return np.array([getattr(r, param) for r in self.valid])

    def truth(self, param: str) -> float:
        return {"beta1": self.scenario.true_beta1, "beta2": self.scenario.true_beta2}[param]

    def bias(self, param: str) -> float:
        return float(np.mean(self.estimates(param) - self.truth(param)))

    def rmse(self, param: str) -> float:
        return float(np.sqrt(np.mean((self.estimates(param) - self.truth(param)) ** 2)))

    @property
    def mean_unmatched(self) -> float:
        """Average unmatched buyers per market (equal to sellers when sides match)."""
        return float(np.mean([r.n_unmatched_buyers for r in self.valid]))

    @property
    def mean_unmatched_share(self) -> float:
        return self.mean_unmatched / self.scenario.n

    def rows(self) -> List[list]:
        s = self.scenario
        return [
            [
                s.case.value,
                s.n,
                s.model.label,
                int(s.use_ir),
                s.lam,
                param,
                self.truth(param),
                self.bias(param),
                self.rmse(param),
                self.mean_unmatched,
            ]
            for param in ("beta1", "beta2")
        ]

    def records_csv(self) -> str:
        return csv_text(RECORD_HEADER, (r.row() for r in self.records))

    def manifest_entry(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "seeds": [r.seed for r in self.records],
            "exclusion_rate": self.exclusion_rate,
        }


def unmatched_counts(scenario: Scenario) -> np.ndarray:
    """Unmatched buyers per replication, solving each market without estimating."""
    counts = []
    for r in range(scenario.replications):
        market = generate_market(scenario.n, scenario.market_seed(r))
        counts.append(len(solve_assignment(value_matrix(scenario.spec, market)).unmatched_buyers))
    return np.array(counts)


def _run_one(args):
    scenario, r = args
    return run_replication(scenario, r)


def run_experiment(scenario: Scenario, jobs: Optional[int] = None) -> ExperimentSummary:
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    tasks = [(scenario, r) for r in range(scenario.replications)]
    if jobs == 1:
        records = [_run_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_one, tasks))
    return ExperimentSummary(scenario, records)


def lambda_sweep(
    scenario: Scenario, lambdas: Sequence[float] = DEFAULT_LAMBDAS, jobs: Optional[int] = None
) -> List[ExperimentSummary]:
    if not scenario.use_ir:
        raise ValueError("a lambda sweep needs IR rows")
    return [run_experiment(scenario.replace(lam=float(lam)), jobs) for lam in lambdas]


def threshold_grid(start: float = -1.0, stop: float = -3.0, step: float = -0.1) -> List[float]:
    count = int(round((stop - start) / step)) + 1
    return [round(start + k * step, 10) for k in range(count)]


@dataclass
class ThresholdRow:
    beta2: float
    summary: ExperimentSummary

    def row(self) -> list:
        s = self.summary
        return [
            self.beta2,
            s.mean_unmatched,
            s.mean_unmatched_share,
            s.bias("beta1"),
            s.rmse("beta1"),
            s.bias("beta2"),
            s.rmse("beta2"),
        ]


THRESHOLD_HEADER = ["beta2", "mean_unmatched", "unmatched_share", "bias_beta1", "rmse_beta1", "bias_beta2", "rmse_beta2"]


def unmatched_threshold_scan(
    n: int = 100,
    beta2_grid: Optional[Iterable[float]] = None,
    base: Optional[Scenario] = None,
    jobs: Optional[int] = None,
) -> List[ThresholdRow]:
    """Unmatched share versus beta2 bias for Case 2, model U with IR."""
    base = base or Scenario()
    base = base.replace(case=Case.CASE2, n=n, model=Model.U, use_ir=True)
    grid = threshold_grid() if beta2_grid is None else list(beta2_grid)
    return [ThresholdRow(b2, run_experiment(base.replace(true_beta2=float(b2)), jobs)) for b2 in grid]


def summaries_csv(summaries: Iterable[ExperimentSummary]) -> str:
    return csv_text(SUMMARY_HEADER, (row for s in summaries for row in s.rows()))


def threshold_csv(rows: Iterable[ThresholdRow]) -> str:
    return csv_text(THRESHOLD_HEADER, (r.row() for r in rows))
