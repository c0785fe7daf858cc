"""DE/rand/1/bin on a box, maximizing.

Selection is greedy and strict: a trial replaces its target only when it
scores higher, so plateaus of a piecewise-constant objective do not cause
drift. The whole run is a deterministic function of ``DEConfig.seed``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Sequence, Tuple

import numpy as np

DEFAULT_DOMAIN = ((-10.0, 10.0), (-10.0, 10.0))


@dataclass(frozen=True)
class DEConfig:
    population: int = 400
    max_generations: int = 300
    differential_weight: float = 0.8
    crossover_rate: float = 0.9
    domain: Tuple[Tuple[float, float], ...] = DEFAULT_DOMAIN
    seed: int = 0

    def __post_init__(self):
        if self.population < 4:
            raise ValueError("DE needs a population of at least 4")
        if self.max_generations < 1:
            raise ValueError("max_generations must be positive")
        if not 0 < self.differential_weight <= 2:
            raise ValueError("differential_weight must lie in (0, 2]")
        if not 0 <= self.crossover_rate <= 1:
            raise ValueError("crossover_rate must lie in [0, 1]")
        domain = tuple((float(lo), float(hi)) for lo, hi in self.domain)
        if any(not hi > lo for lo, hi in domain):
            raise ValueError(f"empty domain {domain}")
        object.__setattr__(self, "domain", domain)

    @property
    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        arr = np.array(self.domain)
        return arr[:, 0], arr[:, 1]


@dataclass
class DEResult:
    x: np.ndarray
    value: float
    trace: List[float] = field(default_factory=list)
    evaluations: int = 0


def _distinct_triples(rng: np.random.Generator, size: int) -> np.ndarray:
    keys = rng.random((size, size))
    np.fill_diagonal(keys, 2.0)
    picks = np.argpartition(keys, 3, axis=1)[:, :3]
    # argpartition leaves the first three unordered; fix their order by key
    order = np.argsort(np.take_along_axis(keys, picks, axis=1), axis=1)
    return np.take_along_axis(picks, order, axis=1)


def maximize(objective: Callable, config: DEConfig = DEConfig(), vectorized: bool = False) -> DEResult:
    """Maximize ``objective`` over ``config.domain``.

    With ``vectorized=True`` the objective receives a ``(k, d)`` array and
    returns ``k`` values; otherwise it is called once per point.
    """
    lo, hi = config.bounds
    dim = lo.size
    size = config.population
    rng = np.random.Generator(np.random.Philox(int(config.seed)))

    def evaluate(points):
        if vectorized:
            return np.asarray(objective(points), dtype=float).reshape(len(points))
        return np.array([float(objective(p)) for p in points])

    pop = lo + rng.random((size, dim)) * (hi - lo)
    fit = evaluate(pop)
    best = int(np.argmax(fit))
    best_x, best_val = pop[best].copy(), float(fit[best])
    trace = [best_val]
    evals = size
    rows = np.arange(size)

    for _ in range(config.max_generations):
        abc = _distinct_triples(rng, size)
        base = pop[abc[:, 0]]
        mutant = base + config.differential_weight * (pop[abc[:, 1]] - pop[abc[:, 2]])
        # out-of-box coordinates move halfway from the base vector to the bound
        mutant = np.where(mutant < lo, (base + lo) / 2, mutant)
        mutant = np.where(mutant > hi, (base + hi) / 2, mutant)
        cross = rng.random((size, dim)) < config.crossover_rate
        cross[rows, rng.integers(0, dim, size)] = True
        trial = np.where(cross, mutant, pop)
        trial_fit = evaluate(trial)
        evals += size
        better = trial_fit > fit
        pop[better] = trial[better]
        fit[better] = trial_fit[better]
        gen_best = int(np.argmax(fit))
        if fit[gen_best] > best_val:
            best_x, best_val = pop[gen_best].copy(), float(fit[gen_best])
        trace.append(best_val)

    return DEResult(best_x, best_val, trace, evals)
