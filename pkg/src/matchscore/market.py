"""Market data and the two joint-production specifications.

A market holds three covariates per agent on each side plus an
idiosyncratic match shock for every real buyer-seller pair. Covariates are
trivariate normal with mean 3, unit variance and correlation 0.25.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from matchscore._io import dumps_json

N_COVARIATES = 3
COVARIATE_MEAN = np.full(N_COVARIATES, 3.0)
COVARIATE_COV = np.array(
    [
        [1.0, 0.25, 0.25],
        [0.25, 1.0, 0.25],
        [0.25, 0.25, 1.0],
    ]
)
# computed once; the covariance is a module constant
COVARIATE_CHOL = np.linalg.cholesky(COVARIATE_COV)

DEFAULT_KAPPA = 8.0


class Case(str, enum.Enum):
    CASE1 = "case1"
    CASE2 = "case2"


class Side(str, enum.Enum):
    BUYER = "buyer"
    SELLER = "seller"


@dataclass(frozen=True)
class AgentRef:
    """A buyer or seller, or the null partner when ``index`` is None."""

    side: Side
    index: Optional[int] = None

    @property
    def is_null(self) -> bool:
        return self.index is None

    @classmethod
    def buyer(cls, index: Optional[int] = None) -> "AgentRef":
        return cls(Side.BUYER, index)

    @classmethod
    def seller(cls, index: Optional[int] = None) -> "AgentRef":
        return cls(Side.SELLER, index)


@dataclass(frozen=True)
class ProductionSpec:
    """Parametric joint production f(b, s | beta).

    ``beta0`` is a scale normalization and must stay at 1. ``kappa`` scales the
    matching-cost term in Case 2 and is ignored in Case 1.
    """

    kind: Case = Case.CASE2
    beta1: float = 0.5
    beta2: float = -2.0
    kappa: float = DEFAULT_KAPPA
    beta0: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Case(self.kind))
        if self.beta0 != 1.0:
            raise ValueError("beta0 is normalized to 1")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")

    def with_beta(self, beta1: float, beta2: float) -> "ProductionSpec":
        return ProductionSpec(self.kind, float(beta1), float(beta2), self.kappa)


@dataclass(frozen=True, eq=False)
class Market:
    n_buyers: int
    n_sellers: int
    buyer_covariates: np.ndarray
    seller_covariates: np.ndarray
    noise: np.ndarray
    seed: int = 0

    def __post_init__(self):
        if self.n_buyers < 1 or self.n_sellers < 1:
            raise ValueError("a market needs at least one agent on each side")
        expected = {
            "buyer_covariates": (self.n_buyers, N_COVARIATES),
            "seller_covariates": (self.n_sellers, N_COVARIATES),
            "noise": (self.n_buyers, self.n_sellers),
        }
        for name, shape in expected.items():
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __eq__(self, other):
        if not isinstance(other, Market):
            return NotImplemented
        return (
            self.seed == other.seed
            and np.array_equal(self.buyer_covariates, other.buyer_covariates)
            and np.array_equal(self.seller_covariates, other.seller_covariates)
            and np.array_equal(self.noise, other.noise)
        )

    __hash__ = None

    def with_noise(self, noise) -> "Market":
        return Market(
            self.n_buyers,
            self.n_sellers,
            self.buyer_covariates,
            self.seller_covariates,
            noise,
            self.seed,
        )

    def to_dict(self) -> dict:
        return {
            "n": self.n_buyers,
            "n_buyers": self.n_buyers,
            "n_sellers": self.n_sellers,
            "seed": int(self.seed),
            "buyer_covariates": self.buyer_covariates.tolist(),
            "seller_covariates": self.seller_covariates.tolist(),
            "noise": self.noise.tolist(),
        }

    def to_json(self) -> str:
        return dumps_json(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "Market":
        xb = np.asarray(data["buyer_covariates"], dtype=float)
        xs = np.asarray(data["seller_covariates"], dtype=float)
        return cls(
            n_buyers=int(data.get("n_buyers", xb.shape[0])),
            n_sellers=int(data.get("n_sellers", xs.shape[0])),
            buyer_covariates=xb,
            seller_covariates=xs,
            noise=np.asarray(data["noise"], dtype=float).reshape(xb.shape[0], xs.shape[0]),
            seed=int(data.get("seed", 0)),
        )

    @classmethod
    def from_json(cls, text: str) -> "Market":
        return cls.from_dict(json.loads(text))

    def covariates_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["side", "index", "x0", "x1", "x2"])
        for side, block in (("buyer", self.buyer_covariates), ("seller", self.seller_covariates)):
            for i, row in enumerate(block):
                writer.writerow([side, i, *(repr(float(v)) for v in row)])
        return buf.getvalue()


def market_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox stream; normals come from numpy's ziggurat sampler."""
    return np.random.Generator(np.random.Philox(int(seed)))


def draw_covariates(rng: np.random.Generator, n: int) -> np.ndarray:
    z = rng.standard_normal((n, N_COVARIATES))
    return COVARIATE_MEAN + z @ COVARIATE_CHOL.T


def generate_market(n: int, seed: int) -> Market:
    """Draw a market with ``n`` buyers and ``n`` sellers.

    Draw order is fixed: buyer covariates, seller covariates, then the
    ``n x n`` noise matrix row-major, all from one stream seeded by ``seed``.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    rng = market_rng(seed)
    xb = draw_covariates(rng, n)
    xs = draw_covariates(rng, n)
    noise = rng.standard_normal((n, n))
    return Market(n, n, xb, xs, noise, seed)


def _covariates(ref: AgentRef, market: Market) -> Optional[np.ndarray]:
    if ref.is_null:
        return None
    block = market.buyer_covariates if ref.side is Side.BUYER else market.seller_covariates
    limit = block.shape[0]
    if not 0 <= ref.index < limit:
        raise IndexError(f"{ref.side.value} index {ref.index} out of range [0, {limit})")
    return block[ref.index]


def joint_production(spec: ProductionSpec, b: AgentRef, s: AgentRef, market: Market) -> float:
    """Deterministic match value f(b, s), excluding the match shock.

    Any pair with a null partner is the outside option and is worth exactly
    0 under both cases; the Case 2 matching cost is charged only to pairs of
    two real agents.
    """
    if b.side is not Side.BUYER or s.side is not Side.SELLER:
        raise ValueError("joint_production takes a buyer reference and a seller reference")
    xb = _covariates(b, market)
    xs = _covariates(s, market)
    if xb is None or xs is None:
        return 0.0
    value = spec.beta0 * xb[0] * xs[0] + spec.beta1 * xb[1] * xs[1]
    if spec.kind is Case.CASE1:
        value += spec.beta2 * xb[2] * xs[2]
    else:
        value += spec.beta2 * spec.kappa
    return float(value)


def pair_features(kind: Union[Case, str], market: Market, kappa: float = DEFAULT_KAPPA) -> np.ndarray:
    """Per-pair regressors phi with f(b, s) = phi[b, s] @ (beta0, beta1, beta2).

    Shape ``(n_buyers + 1, n_sellers + 1, 3)``; the trailing row and column
    stand for the null partner and are all zero.
    """
    kind = Case(kind)
    xb, xs = market.buyer_covariates, market.seller_covariates
    nb, ns = market.n_buyers, market.n_sellers
    phi = np.zeros((nb + 1, ns + 1, 3))
    phi[:nb, :ns, 0] = np.outer(xb[:, 0], xs[:, 0])
    phi[:nb, :ns, 1] = np.outer(xb[:, 1], xs[:, 1])
    if kind is Case.CASE1:
        phi[:nb, :ns, 2] = np.outer(xb[:, 2], xs[:, 2])
    else:
        phi[:nb, :ns, 2] = kappa
    return phi


def production_matrix(spec: ProductionSpec, market: Market) -> np.ndarray:
    phi = pair_features(spec.kind, market, spec.kappa)[:-1, :-1]
    return phi @ np.array([spec.beta0, spec.beta1, spec.beta2])


def value_matrix(spec: ProductionSpec, market: Market) -> np.ndarray:
    """Realized match values F = f + noise for every real pair."""
    return production_matrix(spec, market) + market.noise
