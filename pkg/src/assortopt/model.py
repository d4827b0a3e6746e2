"""Domain types for assortment optimization under ranking-based choice models.

The universe consists of products 1..N plus the no-purchase option N+1, which
carries zero revenue and is always offered.  A ranking is represented by its
*prefix*: the ordered products a customer prefers to the no-purchase option.
A customer with that ranking buys the first prefix product present in the
assortment, or nothing.  A :class:`RankingModel` is a finite mixture of such
rankings with arrival probabilities ``lambda_k``; it is exactly the object
produced by aggregating Monte-Carlo utility samples, so optimizing expected
revenue under it solves the sample average approximation of the underlying
stochastic assortment problem.

Assortments are plain numpy vectors of length N+1: entry ``i-1`` is the
indicator (or LP-relaxed fraction) for product ``i``, and the last entry is
always 1 for the no-purchase option.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace
from typing import Iterable, Optional

import numpy as np

__all__ = [
    "Instance",
    "Ranking",
    "RankingModel",
    "binary_assortment",
    "check_assortment",
    "expected_revenue",
    "load_instance",
    "rankings_from_samples",
    "revenue_of",
    "save_instance",
]

#: Relative tolerance below which two utilities in one sample count as tied.
TIE_TOLERANCE = 1e-12

#: Slack allowed when checking that arrival probabilities sum to at most one.
LAMBDA_SUM_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class Instance:
    """Product universe: revenues, and an optional cardinality budget.

    ``revenues`` has length ``n_products + 1`` with the no-purchase revenue
    pinned to zero in the last slot.  ``budget``, when present, caps the
    number of offered products (the no-purchase option does not count).
    """

    n_products: int
    revenues: np.ndarray
    budget: Optional[int] = None

    def __eq__(self, other):
        return (
            isinstance(other, Instance)
            and self.n_products == other.n_products
            and self.budget == other.budget
            and np.array_equal(self.revenues, other.revenues)
        )

    def __hash__(self):
        return hash((self.n_products, self.budget, self.revenues.tobytes()))

    def __post_init__(self):
        n = self.n_products
        if n < 1:
            raise ValueError("need at least one product")
        rev = np.asarray(self.revenues, dtype=float)
        if rev.shape != (n + 1,):
            raise ValueError(f"revenues must have length {n + 1} (got {rev.shape})")
        if rev[n] != 0.0:
            raise ValueError("no-purchase revenue must be exactly 0")
        if not np.all(rev[:n] > 0.0):
            raise ValueError("product revenues must be strictly positive")
        rev.setflags(write=False)
        object.__setattr__(self, "revenues", rev)
        if self.budget is not None and not 1 <= self.budget <= n:
            raise ValueError(f"budget must lie in [1, {n}]")

    def with_budget(self, budget: Optional[int]) -> "Instance":
        return replace(self, budget=budget)


@dataclass(frozen=True)
class Ranking:
    """One preference prefix: the products preferred to no-purchase, in order.

    Position ``len(prefix) + 1`` is implicitly the no-purchase option.
    """

    prefix: tuple
    probability: float

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(int(i) for i in self.prefix))
        if len(self.prefix) < 1:
            raise ValueError("prefix must contain at least one product")
        if len(set(self.prefix)) != len(self.prefix):
            raise ValueError("prefix contains duplicate products")
        if not 0.0 < self.probability <= 1.0:
            raise ValueError("ranking probability must lie in (0, 1]")

    @property
    def length(self) -> int:
        """Number of products preferred to the no-purchase option."""
        return len(self.prefix)

    def top_revenue(self, instance: Instance) -> float:
        """Highest revenue among the prefix and the no-purchase option."""
        return float(max(instance.revenues[i - 1] for i in self.prefix))


@dataclass(frozen=True)
class RankingModel:
    """A ranking-based choice model: distinct prefixes with probabilities.

    ``dropped_mass`` records the probability mass of samples whose most
    preferred option was no-purchase.  Those samples contribute zero revenue
    to every assortment, so they are removed without renormalizing the
    remaining probabilities; objective values stay directly comparable to
    the raw sample average.
    """

    instance: Instance
    rankings: tuple
    dropped_mass: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "rankings", tuple(self.rankings))
        if not self.rankings:
            raise ValueError("model needs at least one ranking")
        n = self.instance.n_products
        seen = set()
        total = 0.0
        for rk in self.rankings:
            if any(not 1 <= i <= n for i in rk.prefix):
                raise ValueError(f"prefix {rk.prefix} references unknown products")
            if rk.prefix in seen:
                raise ValueError(f"duplicate prefix {rk.prefix}")
            seen.add(rk.prefix)
            total += rk.probability
        if total - 1.0 > LAMBDA_SUM_TOLERANCE:
            raise ValueError(f"ranking probabilities sum to {total} > 1")

    @property
    def n_rankings(self) -> int:
        return len(self.rankings)

    def with_budget(self, budget: Optional[int]) -> "RankingModel":
        return replace(self, instance=self.instance.with_budget(budget))


def binary_assortment(included: Iterable[int], n_products: int) -> np.ndarray:
    """Indicator vector of length N+1 for the given product ids (1-based)."""
    x = np.zeros(n_products + 1)
    x[n_products] = 1.0
    for i in included:
        if not 1 <= i <= n_products:
            raise ValueError(f"product id {i} out of range")
        x[i - 1] = 1.0
    return x


def check_assortment(x: np.ndarray, n_products: int, binary: bool = False) -> np.ndarray:
    """Validate an assortment vector; returns it as a float array."""
    x = np.asarray(x, dtype=float)
    if x.shape != (n_products + 1,):
        raise ValueError(f"assortment must have length {n_products + 1}")
    if x[n_products] != 1.0:
        raise ValueError("no-purchase entry must be 1")
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("assortment entries must lie in [0, 1]")
    if binary and not np.all((x == 0.0) | (x == 1.0)):
        raise ValueError("assortment must be binary")
    return x


def revenue_of(x: np.ndarray, ranking: Ranking, instance: Instance) -> float:
    """Revenue earned from one ranking under a binary assortment.

    Returns the revenue of the most preferred prefix product that is offered,
    or 0 when the customer walks away with the no-purchase option.
    """
    for i in ranking.prefix:
        if x[i - 1] == 1.0:
            return float(instance.revenues[i - 1])
    return 0.0


def expected_revenue(x: np.ndarray, model: RankingModel) -> float:
    """Expected revenue of a binary assortment under the ranking model."""
    inst = model.instance
    x = check_assortment(x, inst.n_products, binary=True)
    if inst.budget is not None and x[: inst.n_products].sum() > inst.budget + 1e-9:
        raise ValueError(f"assortment exceeds budget of {inst.budget}")
    return sum(rk.probability * revenue_of(x, rk, inst) for rk in model.rankings)


def rankings_from_samples(
    utilities: np.ndarray,
    instance: Instance,
    tie_tolerance: float = TIE_TOLERANCE,
) -> RankingModel:
    """Aggregate raw utility samples into a ranking-based choice model.

    Each row of ``utilities`` (shape K x (N+1)) is sorted descending; the
    products preferred to the no-purchase option form that sample's prefix.
    Identical prefixes are merged with probability mass 1/K each.  Samples
    that prefer no-purchase to everything are dropped without renormalizing
    (their revenue is zero under any assortment); the dropped mass is kept on
    the returned model.  Rows containing tied utilities violate the
    distinct-utilities assumption and are rejected with a warning.
    """
    util = np.asarray(utilities, dtype=float)
    n = instance.n_products
    if util.ndim != 2 or util.shape[1] != n + 1:
        raise ValueError(f"utilities must have shape (K, {n + 1})")
    if util.shape[0] < 1:
        raise ValueError("need at least one sample row")

    order = np.argsort(-util, axis=1, kind="stable")
    ranked = np.take_along_axis(util, order, axis=1)
    gaps = np.abs(np.diff(ranked, axis=1))
    scale = np.maximum(np.abs(ranked[:, :-1]), np.abs(ranked[:, 1:]))
    tied_rows = np.where(np.any(gaps <= tie_tolerance * np.maximum(scale, 1.0), axis=1))[0]
    if tied_rows.size:
        warnings.warn(
            f"rejected {tied_rows.size} sample row(s) with tied utilities "
            f"(first at row {tied_rows[0]}); distinct utilities are required",
            stacklevel=2,
        )
    valid = np.setdiff1d(np.arange(util.shape[0]), tied_rows)
    if valid.size == 0:
        raise ValueError("all sample rows were rejected for tied utilities")

    counts: dict = {}
    dropped = 0
    for row in valid:
        prefix = []
        for pos in order[row]:
            if pos == n:  # no-purchase reached; rest of the row is irrelevant
                break
            prefix.append(int(pos) + 1)
        if not prefix:
            dropped += 1
            continue
        key = tuple(prefix)
        counts[key] = counts.get(key, 0) + 1

    k_valid = valid.size
    if not counts:
        raise ValueError("every sample preferred the no-purchase option")
    rankings = tuple(
        Ranking(prefix=pfx, probability=cnt / k_valid)
        for pfx, cnt in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    )
    return RankingModel(instance=instance, rankings=rankings, dropped_mass=dropped / k_valid)


def save_instance(model: RankingModel, path) -> None:
    """Write a ranking model to the JSON instance schema."""
    inst = model.instance
    payload = {
        "n_products": inst.n_products,
        "revenues": [float(r) for r in inst.revenues[: inst.n_products]],
        "budget": inst.budget,
        "rankings": [
            {"prefix": list(rk.prefix), "lambda": rk.probability} for rk in model.rankings
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_instance(path) -> RankingModel:
    """Load a ranking model from the JSON instance schema."""
    with open(path) as fh:
        payload = json.load(fh)
    try:
        n = int(payload["n_products"])
        revenues = np.append(np.asarray(payload["revenues"], dtype=float), 0.0)
        budget = payload.get("budget")
        instance = Instance(
            n_products=n,
            revenues=revenues,
            budget=None if budget is None else int(budget),
        )
        rankings = tuple(
            Ranking(prefix=tuple(entry["prefix"]), probability=float(entry["lambda"]))
            for entry in payload["rankings"]
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed instance file {path}: {exc}") from exc
    return RankingModel(instance=instance, rankings=rankings)
