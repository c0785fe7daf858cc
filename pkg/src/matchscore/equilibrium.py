"""Equilibrium of the one-to-one assignment game.

The primal is solved exactly with a shortest-augmenting-path Hungarian
method. Supporting prices come from the dual: among all optimal duals the
buyer-optimal one (every seller price at its minimum) is selected, which
makes the observed transfers a deterministic function of the value matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from matchscore._io import dumps_json
from matchscore.market import Market

POST_TOL = 1e-7
INTERNAL_TOL = 1e-9
DUAL_SELECTION = "buyer-optimal"


class EquilibriumError(RuntimeError):
    """Raised when an outcome fails a feasibility or slackness check."""


def hungarian(cost: np.ndarray) -> np.ndarray:
    """Minimum-cost perfect assignment of a square matrix.

    Returns ``col`` with ``col[i]`` the column assigned to row ``i``. Ties in
    the column scan resolve to the lowest index.
    """
    cost = np.asarray(cost, dtype=float)
    n = cost.shape[0]
    if cost.shape != (n, n):
        raise ValueError("cost matrix must be square")
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    owner = np.zeros(n + 1, dtype=int)  # owner[j] = 1-based row holding column j
    way = np.zeros(n + 1, dtype=int)
    padded = np.zeros((n + 1, n + 1))
    padded[1:, 1:] = cost
    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        minv = np.full(n + 1, inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = owner[j0]
            free = ~used
            free[0] = False
            cur = padded[i0] - u[i0] - v
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            masked = np.where(free, minv, inf)
            j1 = int(np.argmin(masked))
            delta = masked[j1]
            u[owner[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1
    col = np.empty(n, dtype=int)
    col[owner[1:] - 1] = np.arange(n)
    return col


@dataclass(frozen=True)
class MatchingOutcome:
    matched_pairs: Tuple[Tuple[int, int], ...]
    unmatched_buyers: Tuple[int, ...]
    unmatched_sellers: Tuple[int, ...]
    buyer_duals: np.ndarray
    seller_duals: np.ndarray
    total_value: float
    # F(b, s) for each matched pair, kept so transfers can be clamped and checked
    pair_values: Tuple[float, ...] = ()
    transfers: Dict[Tuple[int, int], float] = field(default_factory=dict)
    dual_selection: str = DUAL_SELECTION

    @property
    def n_buyers(self) -> int:
        return len(self.buyer_duals)

    @property
    def n_sellers(self) -> int:
        return len(self.seller_duals)

    @property
    def n_matched(self) -> int:
        return len(self.matched_pairs)

    def assignment_matrix(self) -> np.ndarray:
        m = np.zeros((self.n_buyers, self.n_sellers), dtype=int)
        for b, s in self.matched_pairs:
            m[b, s] = 1
        return m

    def to_dict(self) -> dict:
        return {
            "matched_pairs": [list(p) for p in self.matched_pairs],
            "unmatched_buyers": list(self.unmatched_buyers),
            "unmatched_sellers": list(self.unmatched_sellers),
            "transfers": [[b, s, self.transfers[(b, s)]] for b, s in self.matched_pairs],
            "duals": {
                "buyer": self.buyer_duals.tolist(),
                "seller": self.seller_duals.tolist(),
                "selection": self.dual_selection,
            },
            "pair_values": list(self.pair_values),
            "total_value": self.total_value,
        }

    def to_json(self) -> str:
        return dumps_json(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "MatchingOutcome":
        pairs = tuple((int(b), int(s)) for b, s in data["matched_pairs"])
        transfers = {(int(b), int(s)): float(p) for b, s, p in data.get("transfers", [])}
        return cls(
            matched_pairs=pairs,
            unmatched_buyers=tuple(int(b) for b in data["unmatched_buyers"]),
            unmatched_sellers=tuple(int(s) for s in data["unmatched_sellers"]),
            buyer_duals=np.asarray(data["duals"]["buyer"], dtype=float),
            seller_duals=np.asarray(data["duals"]["seller"], dtype=float),
            total_value=float(data["total_value"]),
            pair_values=tuple(float(x) for x in data.get("pair_values", ())),
            transfers=transfers,
            dual_selection=data["duals"].get("selection", DUAL_SELECTION),
        )

    @classmethod
    def from_json(cls, text: str) -> "MatchingOutcome":
        return cls.from_dict(json.loads(text))


def _seller_minimal_duals(F: np.ndarray, partner: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Least seller prices consistent with the optimal matching ``partner``.

    ``partner[b]`` is buyer b's seller or -1. Prices solve the difference
    system v_s >= F[b, s] - u_b with u_b = F[b, partner[b]] - v[partner[b]],
    v >= 0, v = 0 for unmatched sellers; the least solution is found by
    Bellman-Ford style relaxation from the lower bounds.
    """
    nb, ns = F.shape
    matched_b = np.flatnonzero(partner >= 0)
    unmatched_b = np.flatnonzero(partner < 0)
    matched_s = partner[matched_b]
    seller_matched = np.zeros(ns, dtype=bool)
    seller_matched[matched_s] = True

    lower = np.zeros(ns)
    if unmatched_b.size:
        lower = np.maximum(lower, F[unmatched_b].max(axis=0))
    v = np.where(seller_matched, lower, 0.0)
    own = F[matched_b, matched_s]
    gaps = F[matched_b] - own[:, None]  # gaps[k, s] = F[b_k, s] - F[b_k, partner]
    for _ in range(ns + 1):
        if not matched_b.size:
            break
        reach = (gaps + v[matched_s][:, None]).max(axis=0)
        new = np.where(seller_matched, np.maximum(lower, reach), 0.0)
        if np.array_equal(new, v):
            break
        v = new
    u = np.zeros(nb)
    u[matched_b] = own - v[matched_s]
    return u, v


def solve_assignment(F) -> MatchingOutcome:
    """Maximize sum F(b, s) m(b, s) over partial one-to-one matchings.

    Agents may stay unmatched at value 0, so only pairs with F > 0 can be
    part of the optimum. Duals are the buyer-optimal supporting prices.
    """
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or 0 in F.shape:
        raise ValueError("value matrix must be a non-empty 2-D array")
    if not np.all(np.isfinite(F)):
        raise ValueError("value matrix has non-finite entries")
    nb, ns = F.shape
    k = max(nb, ns)
    gain = np.zeros((k, k))
    gain[:nb, :ns] = np.maximum(F, 0.0)
    col = hungarian(-gain)

    partner = np.full(nb, -1)
    for b in range(nb):
        s = col[b]
        if s < ns and F[b, s] > 0.0:
            partner[b] = s
    pairs = tuple((b, int(partner[b])) for b in range(nb) if partner[b] >= 0)
    matched_sellers = {s for _, s in pairs}
    if len(matched_sellers) != len(pairs):
        raise EquilibriumError("assignment is not one-to-one")

    u, v = _seller_minimal_duals(F, partner)
    values = tuple(float(F[b, s]) for b, s in pairs)
    outcome = MatchingOutcome(
        matched_pairs=pairs,
        unmatched_buyers=tuple(b for b in range(nb) if partner[b] < 0),
        unmatched_sellers=tuple(s for s in range(ns) if s not in matched_sellers),
        buyer_duals=u,
        seller_duals=v,
        total_value=float(sum(values)),
        pair_values=values,
    )
    check_duals(outcome, F, tol=INTERNAL_TOL)
    return _with_transfers(outcome)


def check_duals(outcome: MatchingOutcome, F, tol: float = INTERNAL_TOL) -> None:
    F = np.asarray(F, dtype=float)
    u, v = outcome.buyer_duals, outcome.seller_duals
    if u.min(initial=0.0) < -tol or v.min(initial=0.0) < -tol:
        raise EquilibriumError("negative dual value")
    slack = u[:, None] + v[None, :] - F
    if slack.min() < -tol:
        b, s = np.unravel_index(np.argmin(slack), slack.shape)
        raise EquilibriumError(f"dual infeasible at ({b}, {s}) by {-slack[b, s]:.3g}")
    for b, s in outcome.matched_pairs:
        if abs(slack[b, s]) > tol:
            raise EquilibriumError(f"complementary slackness fails at ({b}, {s})")
    if any(abs(u[b]) > tol for b in outcome.unmatched_buyers) or any(
        abs(v[s]) > tol for s in outcome.unmatched_sellers
    ):
        raise EquilibriumError("unmatched agent has a positive dual")


def extract_transfers(outcome: MatchingOutcome, F=None) -> Dict[Tuple[int, int], float]:
    """Seller duals as observed merger prices, clamped to [0, F(b, s)].

    Unmatched agents carry an implicit price of 0 and are not stored.
    """
    values = dict(zip(outcome.matched_pairs, outcome.pair_values))
    transfers = {}
    for b, s in outcome.matched_pairs:
        u, v = outcome.buyer_duals[b], outcome.seller_duals[s]
        value = float(F[b, s]) if F is not None else values.get((b, s), u + v)
        if abs(u + v - value) > POST_TOL:
            raise EquilibriumError(f"complementary slackness violated at ({b}, {s})")
        transfers[(b, s)] = float(min(max(v, 0.0), value))
    return transfers


def _with_transfers(outcome: MatchingOutcome) -> MatchingOutcome:
    outcome.transfers.update(extract_transfers(outcome))
    return outcome


@dataclass
class StabilityReport:
    passed: bool
    n_pairwise: int
    n_ir: int
    violations: List[dict]

    def summary(self) -> str:
        return f"{len(self.violations)} violations ({self.n_pairwise} pairwise, {self.n_ir} IR rows checked)"

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "n_pairwise": self.n_pairwise,
            "n_ir": self.n_ir,
            "n_violations": len(self.violations),
            "violations": self.violations,
        }


def _match_list(outcome: MatchingOutcome, nb: int, ns: int):
    """Matched pairs followed by singleton pairs; null is encoded as nb or ns."""
    left = [b for b, _ in outcome.matched_pairs] + list(outcome.unmatched_buyers) + [nb] * len(
        outcome.unmatched_sellers
    )
    right = [s for _, s in outcome.matched_pairs] + [ns] * len(outcome.unmatched_buyers) + list(
        outcome.unmatched_sellers
    )
    return np.array(left, dtype=int), np.array(right, dtype=int)


def verify_stability(outcome: MatchingOutcome, F, tol: float = POST_TOL) -> StabilityReport:
    """Check every ordered comparison F(b,s) - F(b,s') >= p(b,s) - p(b',s') and IR."""
    F = np.asarray(F, dtype=float)
    nb, ns = F.shape
    ext = np.zeros((nb + 1, ns + 1))
    ext[:nb, :ns] = F
    bs, ss = _match_list(outcome, nb, ns)
    price = np.array(
        [outcome.transfers.get((int(b), int(s)), 0.0) for b, s in zip(bs, ss)], dtype=float
    )
    # lhs[i, j] compares element i against element j (row i's buyer with j's seller)
    lhs = ext[bs[:, None], ss[:, None]] - ext[bs[:, None], ss[None, :]]
    rhs = price[:, None] - price[None, :]
    gap = lhs - rhs
    np.fill_diagonal(gap, np.inf)
    violations = []
    for i, j in zip(*np.nonzero(gap < -tol)):
        violations.append(
            {
                "kind": "pairwise",
                "left": [_ref(bs[i], nb), _ref(ss[i], ns)],
                "right": [_ref(bs[j], nb), _ref(ss[j], ns)],
                "gap": float(gap[i, j]),
            }
        )
    for (b, s), p in ((pair, outcome.transfers.get(pair, 0.0)) for pair in outcome.matched_pairs):
        if F[b, s] - p < -tol:
            violations.append({"kind": "ir", "left": [b, s], "right": None, "gap": float(F[b, s] - p)})
    k = len(bs)
    return StabilityReport(
        passed=not violations,
        n_pairwise=k * (k - 1),
        n_ir=outcome.n_matched,
        violations=violations,
    )


def _ref(i, null) -> Optional[int]:
    return None if i == null else int(i)


@dataclass(frozen=True)
class ObservedData:
    """What an econometrician sees of an equilibrium.

    The unmatched flag controls whether unmatched agents enter estimation;
    with ``include_transfers`` off, prices are withheld from consumers.
    """

    outcome: MatchingOutcome
    market: Market
    include_unmatched: bool = True
    include_transfers: bool = True

    @property
    def transfers(self) -> Dict[Tuple[int, int], float]:
        if not self.include_transfers:
            raise PermissionError("transfer data withheld for this data set")
        return dict(self.outcome.transfers)
