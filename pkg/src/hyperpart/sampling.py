"""Monte-Carlo estimation of the flattened affinity from sampled edges.

Edges are drawn independently with replacement from a sampling plan; each
drawn edge e contributes (m - 2)! * w_e / (N * p_e) to every vertex pair it
covers.  The resulting matrix is an entrywise unbiased estimator of the
exact flattened affinity for any plan whose support includes every edge of
positive weight.

Plan kinds:

* ``uniform``: p_e = 1 / C(n, m) over all m-subsets.
* ``weighted``: p_e proportional to w_e over the positive-weight edges;
  building it requires one full pass over the weights.
* ``explicit``: caller-supplied support and probabilities.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import ceil, comb, factorial, log

import numpy as np

from .core import (
    DataError,
    EdgeWeightOracle,
    EmptySupportError,
    Partition,
    SizeCapError,
    WeightedUniformHypergraph,
    all_edges_array,
    derive_seed,
    make_rng,
)
from .spectral import ttm_partition_from_affinity

PLAN_KINDS = ("uniform", "weighted", "explicit")

# full-support walks over an oracle stay exact but explode combinatorially
_ORACLE_WALK_MAX_N_HIGH_ORDER = 60


def default_sample_count(n: int) -> int:
    """Default draw budget: 8 * n * ceil(ln(n)^2)."""
    return 8 * n * ceil(log(n) ** 2)


@dataclass(frozen=True)
class SamplingPlan:
    """Distribution over m-subsets plus a draw budget ``n_samples``."""

    kind: str
    n: int
    m: int
    n_samples: int
    support: np.ndarray | None = None
    probs: np.ndarray | None = None
    total_weight: float | None = None

    def __post_init__(self):
        if self.kind not in PLAN_KINDS:
            raise DataError(f"unknown plan kind {self.kind!r}")
        if self.n_samples < 1:
            raise DataError("n_samples must be positive")
        if self.m < 2 or self.m > self.n:
            raise DataError(f"need 2 <= m <= n, got m={self.m}, n={self.n}")

    def _support_prob_table(self) -> dict[tuple[int, ...], float]:
        return {
            tuple(int(v) for v in row): float(p)
            for row, p in zip(self.support, self.probs)
        }

    def probability(self, edges: np.ndarray) -> np.ndarray:
        """Per-edge draw probability; 0 for edges outside the support."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, self.m)
        if self.kind == "uniform":
            return np.full(edges.shape[0], 1.0 / comb(self.n, self.m))
        table = self._support_prob_table()
        sorted_edges = np.sort(edges, axis=1)
        return np.array(
            [table.get(tuple(int(v) for v in row), 0.0) for row in sorted_edges]
        )

    def max_weight_ratio(self) -> float:
        """max over supported edges of w_e / p_e.

        For the weighted kind every supported edge has w_e / p_e equal to
        the total source weight, so that total is returned as-is.
        """
        if self.kind != "weighted":
            raise DataError("weight ratio diagnostic requires a weighted plan")
        return float(self.total_weight)

    @classmethod
    def explicit(
        cls, n: int, m: int, edges: np.ndarray, probs: np.ndarray, n_samples: int
    ) -> "SamplingPlan":
        edges = np.sort(np.asarray(edges, dtype=np.int32).reshape(-1, m), axis=1)
        probs = np.asarray(probs, dtype=np.float64).reshape(-1)
        if edges.shape[0] != probs.shape[0]:
            raise DataError("support and probability counts differ")
        if probs.min() < 0.0 or abs(probs.sum() - 1.0) > 1e-9:
            raise DataError("probabilities must be nonnegative and sum to 1")
        if len({tuple(row) for row in edges.tolist()}) != edges.shape[0]:
            raise DataError("duplicate edge in support")
        return cls("explicit", n, m, n_samples, support=edges, probs=probs)


def proportional_probs(weights: np.ndarray) -> np.ndarray:
    """Normalize nonnegative weights to a probability vector."""
    weights = np.asarray(weights, dtype=np.float64)
    total = float(weights.sum())
    if weights.size == 0 or total <= 0.0:
        raise EmptySupportError("no positive weight to sample from")
    if weights.min() < 0.0:
        raise DataError("weights must be nonnegative")
    return weights / total


def build_plan(
    source: WeightedUniformHypergraph | EdgeWeightOracle, kind: str, n_samples: int
) -> SamplingPlan:
    """Derive a plan from a hypergraph or an oracle.

    The weighted kind prices every positive-weight edge by w_e / total; for
    an oracle source this walks all C(n, m) subsets, which is refused for
    m >= 4 beyond n = 60.
    """
    if kind not in PLAN_KINDS:
        raise DataError(f"unknown plan kind {kind!r}")
    if kind == "explicit":
        raise DataError("explicit plans are built via SamplingPlan.explicit")
    n, m = source.n, source.m
    if kind == "uniform":
        return SamplingPlan("uniform", n, m, n_samples)
    if isinstance(source, WeightedUniformHypergraph):
        edges, weights = source.edges, source.weights
    else:
        if m >= 4 and n > _ORACLE_WALK_MAX_N_HIGH_ORDER:
            raise SizeCapError(
                f"full oracle walk refused for m={m}, n={n} "
                f"(cap n <= {_ORACLE_WALK_MAX_N_HIGH_ORDER} when m >= 4)"
            )
        edges = all_edges_array(n, m)
        weights = source.weights_for(edges)
    positive = weights > 0.0
    edges, weights = edges[positive], weights[positive]
    probs = proportional_probs(weights)
    return SamplingPlan(
        "weighted",
        n,
        m,
        n_samples,
        support=np.asarray(edges, dtype=np.int32),
        probs=probs,
        total_weight=float(weights.sum()),
    )


@dataclass(frozen=True)
class EdgeMultiset:
    """Distinct drawn edges with their draw counts."""

    edges: np.ndarray
    counts: np.ndarray

    @property
    def total_draws(self) -> int:
        return int(self.counts.sum())


def draw(plan: SamplingPlan, seed: int) -> EdgeMultiset:
    """Draw ``plan.n_samples`` edges independently with replacement."""
    rng = make_rng(seed)
    if plan.kind == "uniform":
        keys = rng.random((plan.n_samples, plan.n))
        picked = np.argpartition(keys, plan.m - 1, axis=1)[:, : plan.m]
        subsets = np.sort(picked, axis=1).astype(np.int32)
        edges, counts = np.unique(subsets, axis=0, return_counts=True)
        return EdgeMultiset(edges=edges, counts=counts)
    idx = rng.choice(plan.support.shape[0], size=plan.n_samples, p=plan.probs)
    counts = np.bincount(idx, minlength=plan.support.shape[0])
    hit = counts > 0
    return EdgeMultiset(edges=plan.support[hit], counts=counts[hit])


def _scatter_pairs(edges: np.ndarray, coeff: np.ndarray, n: int, m: int) -> np.ndarray:
    import itertools

    pair_cols = np.array(list(itertools.combinations(range(m), 2)))
    i = edges[:, pair_cols[:, 0]].astype(np.int64).ravel()
    j = edges[:, pair_cols[:, 1]].astype(np.int64).ravel()
    c = np.repeat(coeff, pair_cols.shape[0])
    flat = np.concatenate([i * n + j, j * n + i])
    a = np.bincount(flat, weights=np.concatenate([c, c]), minlength=n * n)
    return a.reshape(n, n)


@dataclass(frozen=True)
class SampledAffinity:
    """Estimated flattened affinity together with the multiset behind it."""

    a_hat: np.ndarray
    samples: EdgeMultiset


def estimate_affinity(
    samples: EdgeMultiset, plan: SamplingPlan, oracle: EdgeWeightOracle
) -> SampledAffinity:
    """Importance-weighted estimate of the flattened affinity.

    a_hat = (m - 2)! / N * sum over draws of (w_e / p_e) * R_e, where R_e
    marks the vertex pairs inside e.  Raises if a sampled edge has recorded
    probability zero.
    """
    n, m = plan.n, plan.m
    if samples.edges.size == 0:
        return SampledAffinity(a_hat=np.zeros((n, n)), samples=samples)
    w = oracle.weights_for(samples.edges)
    p = plan.probability(samples.edges)
    if np.any(p <= 0.0):
        raise DataError("sampled edge has zero recorded probability")
    coeff = (
        factorial(m - 2)
        / samples.total_draws
        * samples.counts.astype(np.float64)
        * (w / p)
    )
    a_hat = _scatter_pairs(samples.edges, coeff, n, m)
    return SampledAffinity(a_hat=a_hat, samples=samples)


def expectation_matrix(plan: SamplingPlan, oracle: EdgeWeightOracle) -> np.ndarray:
    """Exact expectation of one draw's contribution, summed over the support.

    Equals sum_e p_e * (m - 2)! * (w_e / p_e) * R_e; for any plan covering
    all positive-weight edges this reproduces the exact flattened affinity.
    """
    n, m = plan.n, plan.m
    if plan.kind == "uniform":
        support = all_edges_array(n, m)
    else:
        support = plan.support
    w = oracle.weights_for(support)
    p = plan.probability(support)
    covered = p > 0.0
    coeff = np.zeros(support.shape[0])
    coeff[covered] = factorial(m - 2) * p[covered] * (w[covered] / p[covered])
    return _scatter_pairs(support, coeff, n, m)


def sampled_ttm_partition(
    oracle: EdgeWeightOracle,
    plan: SamplingPlan,
    k: int,
    seed: int,
    restarts: int = 10,
) -> Partition:
    """Draw, estimate, then run the normalized spectral tail on the estimate."""
    samples = draw(plan, derive_seed(seed, "draw"))
    est = estimate_affinity(samples, plan, oracle)
    return ttm_partition_from_affinity(est.a_hat, k, seed, restarts, m=plan.m)


def export_draws(
    samples: EdgeMultiset, oracle: EdgeWeightOracle, path: str
) -> None:
    """Write drawn edges in the hypergraph format plus a multiplicity column."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{oracle.n} {oracle.m} {samples.edges.shape[0]}\n")
        weights = oracle.weights_for(samples.edges)
        for row, w, c in zip(samples.edges, weights, samples.counts):
            ids = " ".join(str(int(v)) for v in row)
            fh.write(f"{ids} {float(w)!r} {int(c)}\n")
