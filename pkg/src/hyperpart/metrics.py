"""Partition quality metrics.

``clustering_error`` counts misassigned vertices under the best label
permutation.  ``normalized_associativity`` is the sum over clusters of
within-cluster edge weight divided by cluster volume; its tensor-trace form
``tensor_trace_nassoc`` evaluates the same quantity by explicit summation
over index tuples and exists as a brute-force cross-check.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import DataError, Partition, SizeCapError, WeightedUniformHypergraph

# k! enumeration is used up to this many classes, the assignment solver above.
_BRUTE_FORCE_MAX_K = 8


@dataclass(frozen=True)
class ConfusionMatrix:
    """Pairwise label agreement counts between two partitions."""

    counts: np.ndarray

    @classmethod
    def from_partitions(cls, psi: Partition, other: Partition) -> "ConfusionMatrix":
        if psi.n != other.n:
            raise DataError(f"partition lengths differ: {psi.n} vs {other.n}")
        # pad the smaller label range with empty classes
        k = max(psi.k, other.k)
        counts = np.zeros((k, k), dtype=np.int64)
        np.add.at(counts, (psi.labels, other.labels), 1)
        counts.setflags(write=False)
        return cls(counts)

    @property
    def k(self) -> int:
        return self.counts.shape[0]


def _best_agreement_brute_force(counts: np.ndarray) -> int:
    k = counts.shape[0]
    best = 0
    for perm in itertools.permutations(range(k)):
        agree = int(counts[np.arange(k), perm].sum())
        if agree > best:
            best = agree
    return best


def _best_agreement_assignment(counts: np.ndarray) -> int:
    rows, cols = linear_sum_assignment(counts, maximize=True)
    return int(counts[rows, cols].sum())


def clustering_error(psi: Partition, other: Partition) -> int:
    """Misassignment count minimized over relabelings of ``other``."""
    counts = ConfusionMatrix.from_partitions(psi, other).counts
    if counts.shape[0] <= _BRUTE_FORCE_MAX_K:
        agree = _best_agreement_brute_force(counts)
    else:
        agree = _best_agreement_assignment(counts)
    return psi.n - agree


def fractional_error(psi: Partition, other: Partition) -> float:
    return clustering_error(psi, other) / psi.n


def normalized_associativity(h: WeightedUniformHypergraph, p: Partition) -> float:
    """Sum over clusters of assoc(V_j) / vol(V_j); empty-volume clusters add 0."""
    if p.n != h.n:
        raise DataError(f"partition covers {p.n} vertices, hypergraph has {h.n}")
    deg = h.degrees()
    vol = np.zeros(p.k)
    np.add.at(vol, p.labels, deg)
    assoc = np.zeros(p.k)
    if h.num_edges():
        edge_labels = p.labels[h.edges]
        inside = np.all(edge_labels == edge_labels[:, :1], axis=1)
        np.add.at(assoc, edge_labels[inside, 0], h.weights[inside])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(vol > 0.0, assoc / np.where(vol > 0.0, vol, 1.0), 0.0)
    return float(ratio.sum())


def tensor_trace_nassoc(
    h: WeightedUniformHypergraph, p: Partition, betas: tuple[float, ...] | None = None
) -> float:
    """Associativity evaluated through the adjacency-tensor trace form.

    The adjacency tensor has entry w_e at every permutation of each edge's
    index tuple and 0 elsewhere.  For any exponents beta_1..beta_m summing
    to 1, contracting each tensor mode with the indicator matrix whose
    column j is 1{i in V_j} / vol(V_j)^{beta_l} and taking 1/m! of the trace
    reproduces ``normalized_associativity`` exactly.  Explicit summation,
    so n is capped.
    """
    if h.n > 10:
        raise SizeCapError(f"trace form is brute force; n={h.n} exceeds cap 10")
    m = h.m
    if betas is None:
        betas = (1.0 / m,) * m
    if len(betas) != m:
        raise DataError(f"need {m} exponents, got {len(betas)}")
    if abs(sum(betas) - 1.0) > 1e-12:
        raise DataError(f"exponents must sum to 1, got {sum(betas)!r}")
    deg = h.degrees()
    vol = np.zeros(p.k)
    np.add.at(vol, p.labels, deg)
    # mode-l factor: Y[l][i, j] = 1{p.labels[i] == j} / vol_j^beta_l, 0 if vol_j == 0
    factors = []
    for beta in betas:
        y = np.zeros((h.n, p.k))
        for i in range(h.n):
            j = p.labels[i]
            if vol[j] > 0.0:
                y[i, j] = vol[j] ** (-beta)
        factors.append(y)
    lookup = {edge: w for edge, w in h.edge_list()}
    total = 0.0
    for idx in itertools.product(range(h.n), repeat=m):
        if len(set(idx)) != m:
            continue
        w = lookup.get(tuple(sorted(idx)))
        if w is None:
            continue
        for j in range(p.k):
            term = w
            for l in range(m):
                term *= factors[l][idx[l], j]
            total += term
    return total / factorial(m)
