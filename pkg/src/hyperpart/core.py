"""Core types, seeded randomness, and text formats.

A weighted m-uniform hypergraph on n vertices is a list of m-element vertex
subsets, each carrying a weight in [0, 1].  Edges are stored as sorted index
tuples, unique within the list, in lexicographic order.

Text formats
------------
Hypergraph file::

    n m E
    v1 v2 ... vm w      (E such lines, ascending 0-based vertex ids)

Lines starting with ``#`` are ignored.  Weights outside [0, 1] are rejected.

Partition file: n lines, one integer label per line.

Randomness
----------
Every stochastic routine takes a 64-bit integer seed and draws from a NumPy
``PCG64`` generator.  Identical seeds produce identical streams on the same
build.  ``derive_seed`` gives a stable way to split one seed into independent
sub-seeds for named stages.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np


class HypergraphError(Exception):
    """Base class for errors raised by this package."""


class DataError(HypergraphError):
    """Invalid input data: malformed files, bad shapes, out-of-range values."""


class ModelError(DataError):
    """Planted-model parameters are inconsistent (e.g. mean weight > 1)."""


class SizeCapError(DataError):
    """Input exceeds the desk-scale cap of an exact routine."""


class EmptySupportError(DataError):
    """A sampling plan has no edge with positive probability."""


class ConvergenceError(HypergraphError):
    """An iterative solver failed to reach its tolerance.

    Attributes
    ----------
    residual : float
        Best residual achieved before giving up.
    """

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


_U64 = 1 << 64
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def stable_hash64(text: str) -> int:
    """64-bit FNV-1a hash of ``text``; stable across runs and platforms."""
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) % _U64
    return h


def derive_seed(seed: int, *tags: object) -> int:
    """Derive a sub-seed from ``seed`` and a sequence of stage tags."""
    return (int(seed) + stable_hash64("|".join(str(t) for t in tags))) % _U64


def make_rng(seed: int) -> np.random.Generator:
    """Return a PCG64 generator for a 64-bit integer seed."""
    seed = int(seed)
    if not 0 <= seed < _U64:
        raise DataError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def enumerate_edges(n: int, m: int) -> Iterator[tuple[int, ...]]:
    """Yield all m-element subsets of range(n) in lexicographic order."""
    if m < 2 or m > n:
        raise DataError(f"edge order must satisfy 2 <= m <= n, got m={m}, n={n}")
    return itertools.combinations(range(n), m)


@lru_cache(maxsize=8)
def all_edges_array(n: int, m: int) -> np.ndarray:
    """All C(n, m) subsets as a read-only (C(n,m), m) int32 array, lex order."""
    count = comb(n, m)
    flat = np.fromiter(
        itertools.chain.from_iterable(enumerate_edges(n, m)),
        dtype=np.int32,
        count=count * m,
    )
    arr = flat.reshape(count, m)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class WeightedUniformHypergraph:
    """Weighted m-uniform hypergraph with canonical edge storage.

    Edge rows are sorted ascending, deduplicated-checked, and kept in
    lexicographic order; weights align with the rows.  Arrays are frozen
    after construction.
    """

    n: int
    m: int
    edges: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        n, m = int(self.n), int(self.m)
        if m < 2 or (self.num_edges() > 0 and m > n):
            raise DataError(f"edge order must satisfy 2 <= m <= n, got m={m}, n={n}")
        edges = np.asarray(self.edges, dtype=np.int32).reshape(-1, m)
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if edges.shape[0] != weights.shape[0]:
            raise DataError("edge and weight counts differ")
        if edges.size:
            if edges.min() < 0 or edges.max() >= n:
                raise DataError("vertex id out of range")
            edges = np.sort(edges, axis=1)
            if np.any(edges[:, 1:] == edges[:, :-1]):
                raise DataError("edge with repeated vertex")
            order = np.lexsort(edges.T[::-1])
            edges = edges[order]
            weights = weights[order]
            if edges.shape[0] > 1 and np.any(
                np.all(edges[1:] == edges[:-1], axis=1)
            ):
                raise DataError("duplicate edge")
        if weights.size and (weights.min() < 0.0 or weights.max() > 1.0):
            raise DataError("edge weight outside [0, 1]")
        edges.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", weights)

    def num_edges(self) -> int:
        return np.asarray(self.edges).reshape(-1, int(self.m)).shape[0]

    def total_weight(self) -> float:
        return float(self.weights.sum())

    def edge_list(self) -> Iterator[tuple[tuple[int, ...], float]]:
        for row, w in zip(self.edges, self.weights):
            yield tuple(int(v) for v in row), float(w)

    def degrees(self) -> np.ndarray:
        """Weighted vertex degrees: deg(v) = sum of w_e over edges containing v."""
        deg = np.zeros(self.n)
        np.add.at(deg, self.edges.ravel(), np.repeat(self.weights, self.m))
        return deg


@dataclass(frozen=True)
class EdgeWeightOracle:
    """Callable view of edge weights: ``evaluate(sorted m-tuple) -> weight``.

    ``batch_evaluate``, when provided, maps an (E, m) index array to weights
    in one call; otherwise ``weights_for`` falls back to a Python loop.
    The evaluator is expected to be pure.
    """

    n: int
    m: int
    evaluate: Callable[[tuple[int, ...]], float]
    batch_evaluate: Callable[[np.ndarray], np.ndarray] | None = None

    def weight(self, edge: Sequence[int]) -> float:
        edge = tuple(int(v) for v in edge)
        if len(edge) != self.m:
            raise DataError(f"expected {self.m} vertices, got {len(edge)}")
        if len(set(edge)) != self.m or any(v < 0 or v >= self.n for v in edge):
            raise DataError(f"invalid edge {edge}")
        w = float(self.evaluate(tuple(sorted(edge))))
        if not 0.0 <= w <= 1.0:
            raise DataError(f"oracle weight {w} outside [0, 1] for edge {edge}")
        return w

    def weights_for(self, edges: np.ndarray) -> np.ndarray:
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, self.m)
        if self.batch_evaluate is not None:
            out = np.asarray(self.batch_evaluate(edges), dtype=np.float64)
        else:
            out = np.array(
                [self.evaluate(tuple(int(v) for v in row)) for row in np.sort(edges, axis=1)],
                dtype=np.float64,
            )
        if out.size and (out.min() < 0.0 or out.max() > 1.0):
            raise DataError("oracle weights outside [0, 1]")
        return out


def oracle_from_hypergraph(h: WeightedUniformHypergraph) -> EdgeWeightOracle:
    """Oracle backed by stored edges; unlisted subsets have weight 0."""
    table = {tuple(int(v) for v in row): float(w) for row, w in zip(h.edges, h.weights)}

    def evaluate(edge: tuple[int, ...]) -> float:
        return table.get(edge, 0.0)

    def batch_evaluate(edges: np.ndarray) -> np.ndarray:
        sorted_edges = np.sort(edges, axis=1)
        return np.array(
            [table.get(tuple(int(v) for v in row), 0.0) for row in sorted_edges]
        )

    return EdgeWeightOracle(h.n, h.m, evaluate, batch_evaluate)


def hypergraph_from_oracle(oracle: EdgeWeightOracle) -> WeightedUniformHypergraph:
    """Materialize an oracle over all m-subsets, dropping zero weights."""
    edges = all_edges_array(oracle.n, oracle.m)
    weights = oracle.weights_for(edges)
    keep = weights > 0.0
    return WeightedUniformHypergraph(oracle.n, oracle.m, edges[keep], weights[keep])


@dataclass(frozen=True)
class Partition:
    """Vertex labels in range(k)."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        k = int(self.k)
        if k < 1:
            raise DataError(f"k must be positive, got {k}")
        if labels.size and (labels.min() < 0 or labels.max() >= k):
            raise DataError("label out of range")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "k", k)

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def class_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def assignment_matrix(self) -> np.ndarray:
        """n x k binary indicator matrix Z with Z[i, labels[i]] = 1."""
        z = np.zeros((self.n, self.k))
        z[np.arange(self.n), self.labels] = 1.0
        return z

    def members(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.labels == j)


def _data_lines(path: str) -> Iterator[str]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                yield line


def read_hypergraph(path: str) -> WeightedUniformHypergraph:
    """Parse the hypergraph text format; see the module docstring."""
    lines = _data_lines(path)
    try:
        header = next(lines)
    except StopIteration:
        raise DataError(f"{path}: empty hypergraph file") from None
    parts = header.split()
    if len(parts) != 3:
        raise DataError(f"{path}: header must be 'n m E', got {header!r}")
    try:
        n, m, num = (int(p) for p in parts)
    except ValueError:
        raise DataError(f"{path}: non-integer header field in {header!r}") from None
    edges = np.zeros((num, m), dtype=np.int32)
    weights = np.zeros(num)
    for idx in range(num):
        try:
            line = next(lines)
        except StopIteration:
            raise DataError(f"{path}: expected {num} edges, found {idx}") from None
        fields = line.split()
        if len(fields) != m + 1:
            raise DataError(f"{path}: edge line needs {m} ids and a weight: {line!r}")
        try:
            edges[idx] = [int(f) for f in fields[:m]]
            weights[idx] = float(fields[m])
        except ValueError:
            raise DataError(f"{path}: malformed edge line {line!r}") from None
    extra = next(lines, None)
    if extra is not None:
        raise DataError(f"{path}: trailing content after {num} edges: {extra!r}")
    try:
        return WeightedUniformHypergraph(n, m, edges, weights)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def write_hypergraph(h: WeightedUniformHypergraph, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{h.n} {h.m} {h.num_edges()}\n")
        for edge, w in h.edge_list():
            fh.write(" ".join(str(v) for v in edge) + f" {w!r}\n")


def read_partition(path: str) -> Partition:
    labels = []
    for line in _data_lines(path):
        try:
            labels.append(int(line))
        except ValueError:
            raise DataError(f"{path}: non-integer label {line!r}") from None
    if not labels:
        raise DataError(f"{path}: empty partition file")
    arr = np.array(labels, dtype=np.int64)
    if arr.min() < 0:
        raise DataError(f"{path}: negative label")
    return Partition(arr, int(arr.max()) + 1)


def write_partition(p: Partition, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for label in p.labels:
            fh.write(f"{int(label)}\n")
