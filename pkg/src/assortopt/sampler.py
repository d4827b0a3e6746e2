"""Synthetic instance generation: MNL with rank cutoffs.

The generator follows a four-step pipeline.  A ground-truth choice model
supported on ``M`` uniformly random full rankings is drawn first, with
arrival weights sampled uniformly from the probability simplex.  A
multinomial logit model is then fitted by maximum likelihood to transactions
simulated from that ground truth over random assortments.  Revenues are
drawn uniformly on {1..10000} and assigned *against* attraction order (the
most attractive product gets the lowest revenue) so the downstream
optimization is not trivially solved by offering the high-revenue products.
Finally, utility samples are drawn as Gumbel perturbations of the fitted
attractions, truncated so that at most ``L`` products can beat the
no-purchase option: whenever more than ``L`` do, the no-purchase utility is
raised to the midpoint between the ``L``-th and ``(L+1)``-th highest product
utilities, which places it at exactly rank ``L+1`` (only the rank matters
downstream, so any value with that rank would do).

All randomness flows through counter-based Philox generators keyed by
``(seed, stream)``; utility sampling is additionally blocked in fixed-size
row chunks with one stream per chunk, so outputs are bit-identical however
the chunks are scheduled.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .model import Instance, RankingModel, rankings_from_samples

__all__ = [
    "FitConfig",
    "GroundTruth",
    "MnlCutoffModel",
    "assign_revenues",
    "fit_mnl",
    "generate_ground_truth",
    "make_synthetic_instance",
    "mnl_choice_probabilities",
    "sample_utilities",
    "simulate_transactions",
]

log = logging.getLogger(__name__)

#: Rows per independent RNG stream when sampling utilities.
UTILITY_BLOCK = 4096


def stream_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for (seed, stream); stable across platforms."""
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(stream)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class GroundTruth:
    """A ranking-based choice model on full permutations of {1..N+1}."""

    rankings: Tuple[Tuple[int, ...], ...]
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n_products(self) -> int:
        return len(self.rankings[0]) - 1


@dataclass(frozen=True)
class MnlCutoffModel:
    """Fitted MNL attractions plus the consideration-set cap ``rank_cutoff``."""

    attraction: np.ndarray
    rank_cutoff: int
    revenues: np.ndarray

    def __post_init__(self):
        nu = np.asarray(self.attraction, dtype=float)
        if nu[-1] != 0.0:
            raise ValueError("no-purchase attraction must be pinned at 0")
        n = len(nu) - 1
        if not 1 <= self.rank_cutoff <= n:
            raise ValueError(f"rank cutoff must lie in [1, {n}]")
        rev = np.asarray(self.revenues, dtype=float)
        if rev.shape != nu.shape:
            raise ValueError("revenues must match the attraction vector length")
        nu.setflags(write=False)
        rev.setflags(write=False)
        object.__setattr__(self, "attraction", nu)
        object.__setattr__(self, "revenues", rev)

    @property
    def n_products(self) -> int:
        return len(self.attraction) - 1

    def choice_probabilities(self, offered: np.ndarray) -> np.ndarray:
        """Closed-form MNL choice probabilities on one assortment."""
        return mnl_choice_probabilities(self.attraction, offered)


def mnl_choice_probabilities(attraction: np.ndarray, offered: np.ndarray) -> np.ndarray:
    """Softmax of the attractions restricted to the offered products.

    ``offered`` is a boolean mask of length N+1 whose last entry must be
    True; entries outside the assortment get probability exactly 0.
    """
    offered = np.asarray(offered, dtype=bool)
    if not offered[-1]:
        raise ValueError("the no-purchase option is always offered")
    weights = np.where(offered, np.exp(attraction - attraction[offered].max()), 0.0)
    return weights / weights.sum()


@dataclass(frozen=True)
class FitConfig:
    """Maximum-likelihood settings; the defaults match the generator.

    ``grad_tol`` is the stopping threshold on the mean-log-likelihood
    gradient norm, ``l2_reg`` an optional ridge penalty (0 disables it),
    and ``floor`` the attraction assigned to products that were never
    offered or never chosen.
    """

    grad_tol: float = 1e-6
    max_iters: int = 2000
    l2_reg: float = 0.0
    floor: float = -20.0


def generate_ground_truth(n: int, m: int, seed: int) -> GroundTruth:
    """Draw ``m`` uniform permutations of {1..n+1} and simplex weights.

    Permutations come from Fisher-Yates shuffles; weights are normalized
    iid unit exponentials, i.e. a uniform point on the simplex.
    """
    if m < 1:
        raise ValueError("need at least one ranking")
    rng = stream_rng(seed, 0)
    rankings = tuple(tuple(int(i) + 1 for i in rng.permutation(n + 1)) for _ in range(m))
    draws = rng.exponential(1.0, size=m)
    return GroundTruth(rankings=rankings, weights=draws / draws.sum())


def simulate_transactions(
    ground: GroundTruth,
    n_transactions: int,
    inclusion_prob: float,
    seed: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """Simulate (offered, chosen) pairs from the ground-truth model.

    Each product enters each assortment independently with
    ``inclusion_prob``; the no-purchase option is always offered.  A
    transaction picks a ranking by weight and buys its most preferred
    offered option.
    """
    if n_transactions < 1:
        raise ValueError("need at least one transaction")
    if not 0.0 < inclusion_prob < 1.0:
        raise ValueError("inclusion probability must lie in (0, 1)")
    n = ground.n_products
    rng = stream_rng(seed, 1)
    offered = np.empty((n_transactions, n + 1), dtype=bool)
    offered[:, :n] = rng.random((n_transactions, n)) < inclusion_prob
    offered[:, n] = True
    which = rng.choice(len(ground.rankings), size=n_transactions, p=ground.weights)
    chosen = np.empty(n_transactions, dtype=np.int64)
    for t in range(n_transactions):
        for i in ground.rankings[which[t]]:
            if offered[t, i - 1]:
                chosen[t] = i - 1
                break
    return offered, chosen


def fit_mnl(
    ground: GroundTruth,
    n_transactions: int = 25000,
    inclusion_prob: float = 0.05,
    seed: int = 0,
    config: FitConfig = FitConfig(),
) -> np.ndarray:
    """Fit MNL attractions to simulated transactions; no-purchase pinned at 0.

    Full-batch gradient ascent on the mean log-likelihood with backtracking
    line search, stopped at ``config.grad_tol``.  Products that were never
    offered or never chosen carry no likelihood signal upward and are
    clamped to ``config.floor`` with a warning.
    """
    offered, chosen = simulate_transactions(ground, n_transactions, inclusion_prob, seed)
    return _fit_mnl_mle(offered, chosen, config)


def _fit_mnl_mle(offered: np.ndarray, chosen: np.ndarray, config: FitConfig) -> np.ndarray:
    n_plus = offered.shape[1]
    n = n_plus - 1
    T = offered.shape[0]
    chosen_count = np.bincount(chosen, minlength=n_plus).astype(float)
    offered_count = offered.sum(axis=0)

    clamped = [i for i in range(n) if offered_count[i] == 0 or chosen_count[i] == 0]
    if clamped:
        log.warning(
            "clamping %d product(s) with no usable transactions to %.1f: %s",
            len(clamped), config.floor, [i + 1 for i in clamped],
        )
    free = np.array([i for i in range(n) if i not in set(clamped)], dtype=int)

    nu = np.zeros(n_plus)
    nu[clamped] = config.floor
    offered_f = offered.astype(float)

    # The mean log-likelihood only needs the per-transaction softmax
    # denominators, so both it and its gradient reduce to matvecs.
    def denominators(nu_vec):
        shift = nu_vec.max()
        denom = offered_f @ np.exp(nu_vec - shift)
        return denom, shift

    def mean_ll(nu_vec, denom, shift):
        ll = float((nu_vec[chosen] - (np.log(denom) + shift)).mean())
        if config.l2_reg:
            ll -= 0.5 * config.l2_reg * float(nu_vec[free] @ nu_vec[free])
        return ll

    def gradient(nu_vec, denom, shift):
        expected = np.exp(nu_vec - shift) * (offered_f.T @ (1.0 / denom))
        grad = (chosen_count - expected) / T
        if config.l2_reg:
            grad = grad - config.l2_reg * nu_vec
        return grad

    denom, shift = denominators(nu)
    ll = mean_ll(nu, denom, shift)
    grad = gradient(nu, denom, shift)
    step = 1.0
    for _ in range(config.max_iters):
        g = np.zeros(n_plus)
        g[free] = grad[free]
        gnorm = float(np.linalg.norm(g))
        if gnorm <= config.grad_tol:
            break
        step = min(step * 2.0, 1e6)  # warm-start from the last accepted step
        while step > 1e-14:
            trial = nu + step * g
            t_denom, t_shift = denominators(trial)
            trial_ll = mean_ll(trial, t_denom, t_shift)
            if trial_ll >= ll + 1e-4 * step * gnorm * gnorm:
                nu, ll = trial, trial_ll
                grad = gradient(trial, t_denom, t_shift)
                break
            step *= 0.5
        else:
            break  # no ascent step left; gradient is numerically flat
    else:
        log.warning("MLE stopped at max_iters=%d with gradient norm %.2e", config.max_iters, gnorm)
    return nu


def assign_revenues(attraction: np.ndarray, seed: int) -> np.ndarray:
    """Draw uniform revenues on {1..10000} and assign them against attraction.

    Sorting products by attraction descending (ties keep product-id order)
    and the drawn revenues ascending, the most attractive product receives
    the lowest revenue.  Returns a vector of length N+1 ending in 0.
    """
    nu = np.asarray(attraction, dtype=float)
    n = len(nu) - 1
    rng = stream_rng(seed, 2)
    draws = np.sort(rng.integers(1, 10001, size=n).astype(float))
    by_attraction = np.argsort(-nu[:n], kind="stable")
    revenues = np.zeros(n + 1)
    revenues[by_attraction] = draws
    return revenues


def sample_utilities(model: MnlCutoffModel, k_tilde: int, seed: int) -> np.ndarray:
    """Draw utility samples from the MNL-with-rank-cutoffs model.

    Rows are attraction plus iid standard Gumbel noise.  In rows where more
    than ``rank_cutoff`` products beat the no-purchase option, its utility
    is raised to sit exactly between the ``L``-th and ``(L+1)``-th highest
    product utilities.  Identical seeds give bit-identical matrices.
    """
    if k_tilde < 1:
        raise ValueError("need at least one sample")
    n = model.n_products
    L = model.rank_cutoff
    blocks = []
    for b, start in enumerate(range(0, k_tilde, UTILITY_BLOCK)):
        rows = min(UTILITY_BLOCK, k_tilde - start)
        rng = stream_rng(seed, 16 + b)
        util = model.attraction[None, :] + rng.gumbel(size=(rows, n + 1))
        if L < n:
            above = (util[:, :n] > util[:, n : n + 1]).sum(axis=1)
            fix = above > L
            if fix.any():
                top = np.sort(util[fix, :n], axis=1)
                midpoint = 0.5 * (top[:, n - L] + top[:, n - L - 1])
                util[fix, n] = midpoint
        blocks.append(util)
    return np.vstack(blocks)


def make_synthetic_instance(
    n: int,
    m: int,
    rank_cutoff: int,
    k_tilde: int,
    seed: int,
    budget: Optional[int] = None,
    n_transactions: int = 25000,
    inclusion_prob: float = 0.05,
    fit: FitConfig = FitConfig(),
) -> Tuple[RankingModel, MnlCutoffModel, GroundTruth]:
    """Run the full generation pipeline down to an aggregated ranking model."""
    ground = generate_ground_truth(n, m, seed)
    attraction = fit_mnl(ground, n_transactions, inclusion_prob, seed, fit)
    revenues = assign_revenues(attraction, seed)
    mnl = MnlCutoffModel(attraction=attraction, rank_cutoff=rank_cutoff, revenues=revenues)
    utilities = sample_utilities(mnl, k_tilde, seed)
    instance = Instance(n_products=n, revenues=revenues, budget=budget)
    model = rankings_from_samples(utilities, instance)
    return model, mnl, ground
