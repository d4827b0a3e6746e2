"""Shared fixtures: the hand-checkable fixture instance and random models."""

from __future__ import annotations

import numpy as np
import pytest

from assortopt.model import Instance, Ranking, RankingModel


@pytest.fixture
def fixture_model() -> RankingModel:
    """Two rankings over three products with a premium third product.

    Integer optimum 100 (offer product 1 or 2); the LP relaxation of the
    per-position formulation reaches 112.5 at x = (0.5, 0.5, >=0.5).
    """
    instance = Instance(3, np.array([100.0, 100.0, 150.0, 0.0]))
    return RankingModel(
        instance=instance,
        rankings=(Ranking((1, 2, 3), 0.5), Ranking((2, 1), 0.5)),
    )


@pytest.fixture
def two_product_fixture():
    """One ranking over products (1, 2) with revenues (10, 5)."""
    instance = Instance(2, np.array([10.0, 5.0, 0.0]))
    return instance, Ranking((1, 2), 1.0)


def random_model(rng: np.random.Generator, n: int, k: int, l_max: int = None,
                 budget=None, integer_revenue: bool = True) -> RankingModel:
    """A random instance with up to ``k`` distinct ranking prefixes."""
    if integer_revenue:
        revenues = np.append(rng.integers(1, 10001, n).astype(float), 0.0)
    else:
        revenues = np.append(rng.uniform(1.0, 100.0, n), 0.0)
    instance = Instance(n, revenues, budget=budget)
    l_max = min(l_max or n, n)
    lam = rng.exponential(1.0, k)
    lam /= lam.sum()
    prefixes = {}
    for weight in lam:
        length = int(rng.integers(1, l_max + 1))
        prefix = tuple(int(i) + 1 for i in rng.permutation(n)[:length])
        prefixes[prefix] = prefixes.get(prefix, 0.0) + weight
    rankings = tuple(Ranking(p, w) for p, w in prefixes.items())
    return RankingModel(instance=instance, rankings=rankings)


def random_fractional_assortment(rng: np.random.Generator, n: int) -> np.ndarray:
    x = np.append(rng.uniform(0.0, 1.0, n), 1.0)
    # sprinkle exact endpoints so degenerate pieces get exercised too
    snap = rng.random(n) < 0.3
    x[:n][snap] = np.round(x[:n][snap])
    return x
