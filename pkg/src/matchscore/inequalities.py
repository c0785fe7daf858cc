"""Pairwise-stability and individual-rationality inequalities.

Observed matches form the set M: every matched pair plus, when unmatched
data is available, a singleton (b, null) per unmatched buyer and
(null, s) per unmatched seller. With transfers every ordered pair of
distinct elements of M gives one row

    f(b, s) - f(b, s') >= p(b, s) - p(b', s'),

and without transfers every unordered pair gives one row

    f(b, s) + f(b', s') >= f(b, s') + f(b', s).

IR rows f(b, s) - p(b, s) >= 0 are added once per matched pair on request.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from math import comb, perm
from typing import Dict, List, Optional, Tuple

import numpy as np

from matchscore._io import csv_text, fmt_float
from matchscore.equilibrium import ObservedData
from matchscore.market import AgentRef, Market, ProductionSpec, joint_production

NULL = -1


class Family(enum.IntEnum):
    PAIRWISE_WITH_TRANSFER = 0
    PAIRWISE_NO_TRANSFER = 1
    IR = 2


FAMILY_NAMES = {
    Family.PAIRWISE_WITH_TRANSFER: "PairwiseWithTransfer",
    Family.PAIRWISE_NO_TRANSFER: "PairwiseNoTransfer",
    Family.IR: "IR",
}


class Model(str, enum.Enum):
    """Data availability regimes: unmatched agents (U) and transfers (T)."""

    UT = "ut"
    T = "t"
    U = "u"
    NONE = "none"

    @property
    def has_unmatched(self) -> bool:
        return self in (Model.UT, Model.U)

    @property
    def has_transfers(self) -> bool:
        return self in (Model.UT, Model.T)

    @property
    def label(self) -> str:
        return {"ut": "U,T", "t": "T", "u": "U", "none": "None"}[self.value]


@dataclass(frozen=True)
class ScoreConfig:
    has_unmatched: bool = True
    has_transfers: bool = False
    use_ir: bool = True
    lam: float = 100.0
    # score IR rows as f >= 0 even when transfers are observed
    ir_ignore_transfers: bool = False
    # lambda < 1 is only meaningful for diagnostics
    enforce_lambda_floor: bool = True

    def __post_init__(self):
        if self.use_ir and self.enforce_lambda_floor and self.lam < 1:
            raise ValueError(f"lambda must be >= 1 when IR rows are used, got {self.lam}")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")

    @classmethod
    def for_model(cls, model, use_ir: bool = True, lam: float = 100.0, **kwargs) -> "ScoreConfig":
        model = Model(model)
        return cls(model.has_unmatched, model.has_transfers, use_ir, lam, **kwargs)

    @property
    def model(self) -> Model:
        return {
            (True, True): Model.UT,
            (False, True): Model.T,
            (True, False): Model.U,
            (False, False): Model.NONE,
        }[(self.has_unmatched, self.has_transfers)]


@dataclass(frozen=True)
class Inequality:
    family: Family
    left_pair: Tuple[AgentRef, AgentRef]
    right_pair: Optional[Tuple[AgentRef, AgentRef]]
    transfer_rhs: Optional[float] = None
    vacuous: bool = False


def _ref_pair(b: int, s: int) -> Tuple[AgentRef, AgentRef]:
    return (
        AgentRef.buyer(None if b == NULL else int(b)),
        AgentRef.seller(None if s == NULL else int(s)),
    )


@dataclass(frozen=True, eq=False)
class InequalitySet:
    """Rows stored column-wise; agent index -1 is the null partner.

    For IR rows the right pair is (-1, -1) and carries no meaning.
    """

    family: np.ndarray
    left_b: np.ndarray
    left_s: np.ndarray
    right_b: np.ndarray
    right_s: np.ndarray
    rhs: np.ndarray
    has_rhs: np.ndarray
    vacuous: np.ndarray
    config: ScoreConfig
    n_matched: int = 0
    n_unmatched_buyers: int = 0
    n_unmatched_sellers: int = 0

    def __len__(self) -> int:
        return len(self.family)

    @property
    def counts(self) -> Dict[str, int]:
        out = {name: int(np.sum(self.family == fam)) for fam, name in FAMILY_NAMES.items()}
        out["vacuous"] = int(self.vacuous.sum())
        return out

    @property
    def pairwise_mask(self) -> np.ndarray:
        return self.family != Family.IR

    @property
    def ir_mask(self) -> np.ndarray:
        return self.family == Family.IR

    @property
    def n_pairwise(self) -> int:
        return int(self.pairwise_mask.sum())

    @property
    def n_ir(self) -> int:
        return int(self.ir_mask.sum())

    @property
    def n_pairwise_scored(self) -> int:
        return int((self.pairwise_mask & ~self.vacuous).sum())

    def row(self, i: int) -> Inequality:
        fam = Family(int(self.family[i]))
        right = None if fam is Family.IR else _ref_pair(self.right_b[i], self.right_s[i])
        return Inequality(
            family=fam,
            left_pair=_ref_pair(self.left_b[i], self.left_s[i]),
            right_pair=right,
            transfer_rhs=float(self.rhs[i]) if self.has_rhs[i] else None,
            vacuous=bool(self.vacuous[i]),
        )

    @property
    def rows(self) -> List[Inequality]:
        return [self.row(i) for i in range(len(self))]

    def take(self, index) -> "InequalitySet":
        """Subset or reorder rows."""
        index = np.asarray(index)
        return InequalitySet(
            self.family[index],
            self.left_b[index],
            self.left_s[index],
            self.right_b[index],
            self.right_s[index],
            self.rhs[index],
            self.has_rhs[index],
            self.vacuous[index],
            self.config,
            self.n_matched,
            self.n_unmatched_buyers,
            self.n_unmatched_sellers,
        )

    def to_csv(self) -> str:
        def cell(i):
            return "" if i == NULL else int(i)

        rows = []
        for i in range(len(self)):
            fam = Family(int(self.family[i]))
            ir = fam is Family.IR
            rows.append(
                [
                    FAMILY_NAMES[fam],
                    cell(self.left_b[i]),
                    cell(self.left_s[i]),
                    "" if ir else cell(self.right_b[i]),
                    "" if ir else cell(self.right_s[i]),
                    fmt_float(self.rhs[i]) if self.has_rhs[i] else "",
                    int(bool(self.vacuous[i])),
                ]
            )
        header = ["family", "left_b", "left_s", "right_b", "right_s", "transfer_rhs", "vacuous"]
        return csv_text(header, rows)


def count_formula(m: int, ub: int, us: int, has_unmatched: bool, has_transfers: bool) -> int:
    """Minimum number of pairwise inequalities for a data regime (IR excluded)."""
    if min(m, ub, us) < 0:
        raise ValueError("counts must be non-negative")
    n = m + ub + us if has_unmatched else m
    return perm(n, 2) if has_transfers else comb(n, 2)


def match_elements(
    pairs, unmatched_buyers, unmatched_sellers, has_unmatched: bool
) -> Tuple[np.ndarray, np.ndarray]:
    bs = [b for b, _ in pairs]
    ss = [s for _, s in pairs]
    if has_unmatched:
        bs += list(unmatched_buyers) + [NULL] * len(unmatched_sellers)
        ss += [NULL] * len(unmatched_buyers) + list(unmatched_sellers)
    return np.array(bs, dtype=int), np.array(ss, dtype=int)


def build_from_outcome(
    pairs,
    unmatched_buyers,
    unmatched_sellers,
    transfers: Optional[Dict[Tuple[int, int], float]],
    config: ScoreConfig,
) -> InequalitySet:
    """Row construction from raw match lists; ``transfers`` may be None without T."""
    pairs = [tuple(map(int, p)) for p in pairs]
    if config.has_transfers and transfers is None:
        raise ValueError("transfer rows requested but no transfers supplied")
    bs, ss = match_elements(pairs, unmatched_buyers, unmatched_sellers, config.has_unmatched)
    k = len(bs)
    price = np.zeros(k)
    if config.has_transfers:
        for i, pair in enumerate(pairs):
            price[i] = transfers[pair]

    if config.has_transfers:
        ii, jj = np.nonzero(~np.eye(k, dtype=bool))
        fam = np.full(ii.size, Family.PAIRWISE_WITH_TRANSFER, dtype=int)
        rhs = price[ii] - price[jj]
        has_rhs = np.ones(ii.size, dtype=bool)
        # terms f(b, s) and f(b, s'): beta-free when both involve a null agent
        vac = (bs[ii] == NULL) | ((ss[ii] == NULL) & (ss[jj] == NULL))
    else:
        ii, jj = np.triu_indices(k, 1)
        fam = np.full(ii.size, Family.PAIRWISE_NO_TRANSFER, dtype=int)
        rhs = np.zeros(ii.size)
        has_rhs = np.zeros(ii.size, dtype=bool)
        b, s, b2, s2 = bs[ii], ss[ii], bs[jj], ss[jj]
        real = lambda x, y: (x != NULL) & (y != NULL)  # noqa: E731
        vac = ~(real(b, s) | real(b2, s2) | real(b, s2) | real(b2, s))

    left_b, left_s, right_b, right_s = bs[ii], ss[ii], bs[jj], ss[jj]

    if config.use_ir:
        m = len(pairs)
        if m == 0:
            warnings.warn("no matched pairs: IR block is empty", RuntimeWarning, stacklevel=3)
        ir_b = np.array([b for b, _ in pairs], dtype=int)
        ir_s = np.array([s for _, s in pairs], dtype=int)
        with_p = config.has_transfers and not config.ir_ignore_transfers
        ir_rhs = price[:m] if with_p else np.zeros(m)
        fam = np.concatenate([fam, np.full(m, Family.IR, dtype=int)])
        left_b = np.concatenate([left_b, ir_b])
        left_s = np.concatenate([left_s, ir_s])
        right_b = np.concatenate([right_b, np.full(m, NULL)])
        right_s = np.concatenate([right_s, np.full(m, NULL)])
        rhs = np.concatenate([rhs, ir_rhs])
        has_rhs = np.concatenate([has_rhs, np.full(m, with_p)])
        vac = np.concatenate([vac, np.zeros(m, dtype=bool)])

    return InequalitySet(
        family=fam,
        left_b=left_b,
        left_s=left_s,
        right_b=right_b,
        right_s=right_s,
        rhs=rhs.astype(float),
        has_rhs=has_rhs,
        vacuous=vac,
        config=config,
        n_matched=len(pairs),
        n_unmatched_buyers=len(unmatched_buyers),
        n_unmatched_sellers=len(unmatched_sellers),
    )


def build_inequalities(data: ObservedData, config: ScoreConfig) -> InequalitySet:
    if config.has_transfers and not data.include_transfers:
        raise ValueError("config asks for transfers the data does not contain")
    if config.has_unmatched and not data.include_unmatched:
        raise ValueError("config asks for unmatched agents the data does not contain")
    out = data.outcome
    transfers = data.transfers if config.has_transfers else None
    return build_from_outcome(
        out.matched_pairs, out.unmatched_buyers, out.unmatched_sellers, transfers, config
    )


def evaluate_inequality(row: Inequality, spec: ProductionSpec, market: Market, tol: float = 0.0) -> bool:
    """Truth value of one row under candidate parameters, from f alone."""
    f = lambda b, s: joint_production(spec, b, s, market)  # noqa: E731
    b, s = row.left_pair
    rhs = row.transfer_rhs or 0.0
    if row.family is Family.IR:
        return f(b, s) - rhs >= -tol
    b2, s2 = row.right_pair
    if row.family is Family.PAIRWISE_WITH_TRANSFER:
        return f(b, s) - f(b, s2) - rhs >= -tol
    return f(b, s) + f(b2, s2) - f(b, s2) - f(b2, s) >= -tol
