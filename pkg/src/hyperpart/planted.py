"""Planted partition models for weighted uniform hypergraphs.

Each m-subset {i1..im} gets an independent weight with mean
alpha * B[classes(i1..im)], where B is a symmetric k^m tensor of block
means.  The (p, q) special case sets B = p + q when all m classes agree
and q otherwise.  Two weight laws are supported:

* ``bernoulli``: weight 1 with the mean as probability, else 0.
* ``bounded_uniform``: uniform on [max(0, 2mu - 1), min(1, 2mu)], which has
  mean mu and support inside [0, 1].

The expected flattened affinity of such a model is block-constant; this
module also computes the block matrix G, the expected degrees, and the
spectral separation margin delta that governs exact recovery of the planted
classes from the expected matrices.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb, factorial
from typing import Iterator

import numpy as np

from .core import (
    DataError,
    ModelError,
    Partition,
    WeightedUniformHypergraph,
    all_edges_array,
    make_rng,
)

WEIGHT_LAWS = ("bernoulli", "bounded_uniform")


@dataclass(frozen=True)
class PlantedSpec:
    """Ground-truth classes plus block means and a weight law.

    Exactly one of ``pq`` (tuple (p, q)) and ``tensor_b`` (symmetric k^m
    array) must be given.  All means alpha * B must lie in [0, 1].
    """

    n: int
    k: int
    m: int
    alpha: float
    psi: Partition
    weight_law: str = "bernoulli"
    pq: tuple[float, float] | None = None
    tensor_b: np.ndarray | None = None

    def __post_init__(self):
        if (self.pq is None) == (self.tensor_b is None):
            raise ModelError("give exactly one of pq and tensor_b")
        if self.weight_law not in WEIGHT_LAWS:
            raise ModelError(f"unknown weight law {self.weight_law!r}")
        if self.psi.n != self.n:
            raise ModelError(f"psi labels {self.psi.n} vertices, expected {self.n}")
        if self.psi.k != self.k:
            raise ModelError(f"psi has k={self.psi.k}, expected {self.k}")
        if self.m < 2 or self.m > self.n:
            raise ModelError(f"need 2 <= m <= n, got m={self.m}, n={self.n}")
        if self.alpha < 0.0:
            raise ModelError(f"alpha must be nonnegative, got {self.alpha}")
        if self.pq is not None:
            p, q = self.pq
            if not (0.0 <= p <= 1.0 and 0.0 <= q <= 1.0):
                raise ModelError(f"p and q must lie in [0, 1], got {self.pq}")
            if q > 1.0 - p:
                raise ModelError(f"need q <= 1 - p for means in [0, 1], got {self.pq}")
            if self.alpha * (p + q) > 1.0 + 1e-15:
                raise ModelError("alpha * (p + q) exceeds 1")
        else:
            b = np.asarray(self.tensor_b, dtype=np.float64)
            if b.shape != (self.k,) * self.m:
                raise ModelError(f"tensor_b must have shape {(self.k,) * self.m}")
            for axes in itertools.permutations(range(self.m)):
                if not np.array_equal(np.transpose(b, axes), b):
                    raise ModelError("tensor_b must be symmetric")
            if b.min() < 0.0 or self.alpha * b.max() > 1.0 + 1e-15:
                raise ModelError("means alpha * B must lie in [0, 1]")
            b.setflags(write=False)
            object.__setattr__(self, "tensor_b", b)

    @classmethod
    def balanced_pq(
        cls,
        n: int,
        k: int,
        m: int,
        p: float,
        q: float,
        alpha: float = 1.0,
        weight_law: str = "bernoulli",
    ) -> "PlantedSpec":
        """Equal-size classes 0..k-1 in vertex order; requires k | n."""
        if n % k != 0:
            raise ModelError(f"balanced model needs k | n, got n={n}, k={k}")
        labels = np.repeat(np.arange(k), n // k)
        return cls(n, k, m, alpha, Partition(labels, k), weight_law, pq=(p, q))

    def is_balanced(self) -> bool:
        sizes = self.psi.class_sizes()
        return bool(np.all(sizes == sizes[0]))

    def block_mean(self, classes: tuple[int, ...]) -> float:
        """Mean weight alpha * B for an edge whose vertices have these classes."""
        if self.pq is not None:
            p, q = self.pq
            b = p + q if len(set(classes)) == 1 else q
        else:
            b = float(self.tensor_b[tuple(sorted(classes))])
        return self.alpha * b

    def to_config_items(self) -> list[tuple[str, str]]:
        items = [
            ("n", str(self.n)),
            ("k", str(self.k)),
            ("m", str(self.m)),
            ("alpha", repr(float(self.alpha))),
        ]
        if self.pq is not None:
            items += [("p", repr(float(self.pq[0]))), ("q", repr(float(self.pq[1])))]
        items += [
            ("weight_law", self.weight_law),
            ("balanced", str(self.is_balanced()).lower()),
        ]
        return items


def _edge_means(spec: PlantedSpec, edges: np.ndarray) -> np.ndarray:
    classes = spec.psi.labels[edges]
    if spec.pq is not None:
        p, q = spec.pq
        within = np.all(classes == classes[:, :1], axis=1)
        return spec.alpha * (q + p * within)
    classes = np.sort(classes, axis=1)
    flat = np.ravel_multi_index(tuple(classes.T), (spec.k,) * spec.m)
    return spec.alpha * spec.tensor_b.ravel()[flat]


def generate(spec: PlantedSpec, seed: int) -> WeightedUniformHypergraph:
    """Draw one hypergraph; edges with weight 0 are omitted."""
    edges = all_edges_array(spec.n, spec.m)
    means = _edge_means(spec, edges)
    if means.size and (means.min() < -1e-15 or means.max() > 1.0 + 1e-15):
        raise ModelError("mean weight outside [0, 1]")
    rng = make_rng(seed)
    u = rng.random(means.shape[0])
    if spec.weight_law == "bernoulli":
        keep = u < means
        return WeightedUniformHypergraph(
            spec.n, spec.m, edges[keep], np.ones(int(keep.sum()))
        )
    lo = np.maximum(0.0, 2.0 * means - 1.0)
    hi = np.minimum(1.0, 2.0 * means)
    w = lo + u * (hi - lo)
    keep = w > 0.0
    return WeightedUniformHypergraph(spec.n, spec.m, edges[keep], w[keep])


def _bounded_compositions(total: int, bounds: np.ndarray) -> Iterator[tuple[int, ...]]:
    """All ways to split ``total`` into len(bounds) counts with 0 <= c_j <= bounds[j]."""
    k = len(bounds)

    def rec(j: int, remaining: int, prefix: tuple[int, ...]):
        if j == k - 1:
            if remaining <= bounds[j]:
                yield prefix + (remaining,)
            return
        for c in range(min(remaining, int(bounds[j])) + 1):
            yield from rec(j + 1, remaining - c, prefix + (c,))

    yield from rec(0, total, ())


def _block_value(spec: PlantedSpec, a: int, b: int, sizes: np.ndarray) -> float:
    """Expected flattened affinity between distinct vertices of classes a and b.

    Sums alpha * B over all (m-2)-subsets of the remaining vertices, grouped
    by how many land in each class, then scales by (m-2)!.
    """
    avail = sizes.astype(np.int64).copy()
    avail[a] -= 1
    avail[b] -= 1
    if avail.min() < 0:
        return 0.0  # no pair of distinct vertices with these classes exists
    total = 0.0
    for counts in _bounded_compositions(spec.m - 2, avail):
        ways = 1
        for j, c in enumerate(counts):
            ways *= comb(int(avail[j]), c)
        if ways == 0:
            continue
        classes = (a, b) + tuple(
            itertools.chain.from_iterable([j] * c for j, c in enumerate(counts))
        )
        total += ways * spec.block_mean(classes)
    return factorial(spec.m - 2) * total


@dataclass(frozen=True)
class ExpectedQuantities:
    """Block matrix, expected degrees, and the separation margin delta.

    delta = lambda_k(G) * min_i(size(class of i) / D_ii)
            - max_{i,j} |G[c_i, c_i] / D_ii - G[c_j, c_j] / D_jj|.
    A positive delta certifies that the spectral pipeline applied to the
    expected matrices recovers the planted classes exactly.
    """

    g: np.ndarray
    d_expected: np.ndarray
    d_min: float
    lambda_k_g: float
    delta: float


def expected_block_matrix(spec: PlantedSpec) -> np.ndarray:
    sizes = spec.psi.class_sizes()
    g = np.zeros((spec.k, spec.k))
    for a in range(spec.k):
        for b in range(a, spec.k):
            g[a, b] = g[b, a] = _block_value(spec, a, b, sizes)
    return g


def expected_affinity(spec: PlantedSpec) -> np.ndarray:
    """Entrywise expectation of the flattened affinity; zero diagonal."""
    g = expected_block_matrix(spec)
    labels = spec.psi.labels
    a = g[np.ix_(labels, labels)].copy()
    np.fill_diagonal(a, 0.0)
    return a


def expected_quantities(spec: PlantedSpec) -> ExpectedQuantities:
    sizes = spec.psi.class_sizes()
    if sizes.min() == 0:
        raise ModelError("every class must be nonempty")
    g = expected_block_matrix(spec)
    # expected degree is constant on classes: D_a = sum_b G[a,b] * (n_b - [a==b])
    d_class = g @ sizes - np.diag(g)
    if d_class.min() <= 0.0:
        raise ModelError("expected degree must be positive for normalization")
    d_expected = d_class[spec.psi.labels]
    lam = float(np.linalg.eigvalsh(g)[0])
    ratio = sizes / d_class
    diag_ratio = np.diag(g) / d_class
    gap = float(np.max(np.abs(diag_ratio[:, None] - diag_ratio[None, :])))
    delta = lam * float(ratio.min()) - gap
    g.setflags(write=False)
    d_expected.setflags(write=False)
    return ExpectedQuantities(
        g=g,
        d_expected=d_expected,
        d_min=float(d_class.min()),
        lambda_k_g=lam,
        delta=delta,
    )


def pq_closed_forms(spec: PlantedSpec) -> tuple[float, float]:
    """Closed-form (d_min, delta) for the balanced (p, q) model.

    d_min = (m-1)! * alpha * (p * C(n/k - 1, m - 1) + q * C(n - 1, m - 1))
    delta = (m-2)! * alpha * p * n * C(n/k - 2, m - 2) / (k * d_min)
    """
    if spec.pq is None:
        raise ModelError("closed forms exist only for the (p, q) block model")
    if not spec.is_balanced():
        raise ModelError("closed forms exist only for balanced classes")
    n, k, m, alpha = spec.n, spec.k, spec.m, spec.alpha
    p, q = spec.pq
    d_min = factorial(m - 1) * alpha * (
        p * comb(n // k - 1, m - 1) + q * comb(n - 1, m - 1)
    )
    if d_min <= 0.0:
        raise ModelError("expected degree must be positive")
    delta = factorial(m - 2) * alpha * p * n * comb(n // k - 2, m - 2) / (k * d_min)
    return d_min, delta
