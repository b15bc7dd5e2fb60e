"""Spectral partitioning of weighted uniform hypergraphs.

The main pipeline flattens the hypergraph's adjacency tensor into a pairwise
affinity matrix, degree-normalizes it symmetrically, embeds vertices with the
dominant eigenvectors, row-normalizes the embedding, and clusters rows with
k-means.  The flattened affinity is

    A[i, j] = (m - 2)! * sum of w_e over edges e containing both i and j

with zero diagonal, so the degrees D[i] = sum_j A[i, j] equal
(m - 1)! * (weighted vertex degree).

Two baselines reuse the same embedding-and-cluster tail: one replaces the
flattened affinity with the Gram matrix of the adjacency tensor's mode-1
unfolding (exact but O(n^2) memory, so desk-scale capped), the other with
the vertex-normalized incidence product

    M = Dv^{-1/2} H W De^{-1} H^T Dv^{-1/2},

where H is the vertex-edge incidence matrix, W the edge weights, De = m I,
and Dv the weighted vertex degrees.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from math import factorial

import numpy as np

from .core import (
    ConvergenceError,
    DataError,
    Partition,
    SizeCapError,
    WeightedUniformHypergraph,
    derive_seed,
    make_rng,
)

# Full dense eigendecomposition below this size; seeded block iteration above.
_DENSE_EIG_MAX_N = 512


@dataclass(frozen=True)
class FlattenedAffinity:
    """Pairwise affinity ``a`` with degrees ``d``; ``l`` is set by ``normalize``."""

    a: np.ndarray
    d: np.ndarray
    m: int
    l: np.ndarray | None = None

    @classmethod
    def from_matrix(cls, a: np.ndarray, m: int = 2) -> "FlattenedAffinity":
        """Wrap an externally built affinity (estimated or expected)."""
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DataError(f"affinity must be square, got shape {a.shape}")
        if not np.allclose(a, a.T, rtol=0.0, atol=1e-10 * max(1.0, np.abs(a).max())):
            raise DataError("affinity must be symmetric")
        if a.size and a.min() < 0.0:
            raise DataError("affinity entries must be nonnegative")
        return cls(a=a, d=a.sum(axis=1), m=m)


def flatten(h: WeightedUniformHypergraph) -> FlattenedAffinity:
    """Sum the adjacency tensor over all index positions but two.

    Every edge contributes (m - 2)! * w_e to each of its m(m-1) ordered
    vertex pairs, so sum(A) = m! * total edge weight.
    """
    n, m = h.n, h.m
    scale = float(factorial(m - 2))
    if h.num_edges() == 0:
        zero = np.zeros((n, n))
        return FlattenedAffinity(a=zero, d=np.zeros(n), m=m)
    pair_cols = np.array(list(itertools.combinations(range(m), 2)))
    i = h.edges[:, pair_cols[:, 0]].astype(np.int64).ravel()
    j = h.edges[:, pair_cols[:, 1]].astype(np.int64).ravel()
    w = np.repeat(h.weights, pair_cols.shape[0]) * scale
    flat = np.concatenate([i * n + j, j * n + i])
    a = np.bincount(flat, weights=np.concatenate([w, w]), minlength=n * n)
    a = a.reshape(n, n)
    return FlattenedAffinity(a=a, d=a.sum(axis=1), m=m)


def normalize(f: FlattenedAffinity) -> FlattenedAffinity:
    """Symmetric degree normalization L = D^{-1/2} A D^{-1/2}.

    Zero-degree vertices keep zero rows and columns.  A hypergraph whose
    total weight is zero cannot be normalized.
    """
    if f.d.max() <= 0.0:
        raise DataError("cannot normalize: all degrees are zero")
    if f.d.min() < 0.0:
        raise DataError("negative degree")
    inv_sqrt = np.where(f.d > 0.0, 1.0 / np.sqrt(np.where(f.d > 0.0, f.d, 1.0)), 0.0)
    l = f.a * inv_sqrt[:, None] * inv_sqrt[None, :]
    return replace(f, l=l)


@dataclass(frozen=True)
class SpectralEmbedding:
    """Dominant eigenvectors ``x`` (orthonormal columns), row-normalized ``x_bar``."""

    x: np.ndarray
    x_bar: np.ndarray
    eigvals: np.ndarray


def row_normalize(x: np.ndarray) -> np.ndarray:
    """Scale each row to unit Euclidean norm; zero rows stay zero."""
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1)
    safe = np.where(norms > 0.0, norms, 1.0)
    return np.where(norms[:, None] > 0.0, x / safe[:, None], 0.0)


def _canonical_signs(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    for col in range(x.shape[1]):
        pivot = int(np.argmax(np.abs(x[:, col])))
        if x[pivot, col] < 0.0:
            x[:, col] = -x[:, col]
    return x


def _block_iteration(lsym: np.ndarray, k: int, tol: float, seed: int):
    """Seeded orthogonal block iteration with Rayleigh-Ritz extraction.

    Iterates on L + cI (c = max absolute row sum) so that magnitude order
    matches algebraic order, then reads eigenpairs of L itself off the
    projected block.
    """
    n = lsym.shape[0]
    shift = float(np.abs(lsym).sum(axis=1).max())
    shifted = lsym + shift * np.eye(n)
    rng = make_rng(seed)
    block = min(n, k + 8)
    q, _ = np.linalg.qr(rng.standard_normal((n, block)))
    best_resid = np.inf
    for it in range(1, 1001):
        q, _ = np.linalg.qr(shifted @ q)
        if it % 5 == 0 or it == 1000:
            t = q.T @ lsym @ q
            evals, s = np.linalg.eigh(t)
            order = np.argsort(evals)[::-1][:k]
            x = q @ s[:, order]
            lam = evals[order]
            scale = max(float(np.abs(evals).max()), 1e-300)
            resid = float(np.linalg.norm(lsym @ x - x * lam, axis=0).max())
            best_resid = min(best_resid, resid / scale)
            if resid <= tol * scale:
                return x, lam
    raise ConvergenceError(
        f"block iteration did not reach tol={tol} within 1000 sweeps",
        residual=best_resid,
    )


def dominant_eigenvectors(
    l: np.ndarray, k: int, tol: float = 1e-10, seed: int = 0
) -> SpectralEmbedding:
    """Eigenvectors of the k algebraically largest eigenvalues, descending.

    Dense decomposition up to n = 512; seeded block iteration above, which
    raises ``ConvergenceError`` (carrying the best relative residual) if the
    tolerance is unreachable.  Column signs are fixed so the entry of
    largest magnitude is positive; given the same seed the result is
    reproducible on the same build.
    """
    l = np.asarray(l, dtype=np.float64)
    if l.ndim != 2 or l.shape[0] != l.shape[1]:
        raise DataError(f"matrix must be square, got shape {l.shape}")
    n = l.shape[0]
    if not 1 <= k <= n:
        raise DataError(f"need 1 <= k <= n, got k={k}, n={n}")
    scale = max(1.0, float(np.abs(l).max()))
    if not np.allclose(l, l.T, rtol=0.0, atol=1e-8 * scale):
        raise DataError("matrix must be symmetric")
    lsym = (l + l.T) / 2.0
    if n <= _DENSE_EIG_MAX_N:
        evals, evecs = np.linalg.eigh(lsym)
        x = evecs[:, ::-1][:, :k]
        lam = evals[::-1][:k]
        norm = max(float(np.abs(evals).max()), 1e-300)
        resid = float(np.linalg.norm(lsym @ x - x * lam, axis=0).max())
        if resid > tol * norm:
            raise ConvergenceError(
                f"dense path residual {resid:.3e} exceeds tol * ||L||",
                residual=resid / norm,
            )
    else:
        x, lam = _block_iteration(lsym, k, tol, seed)
    x = _canonical_signs(np.ascontiguousarray(x))
    return SpectralEmbedding(x=x, x_bar=row_normalize(x), eigvals=np.asarray(lam))


@dataclass(frozen=True)
class KMeansResult:
    """Best-of-restarts Lloyd outcome.

    ``degenerate`` flags inputs with fewer distinct points than requested
    clusters; labels then use fewer than k values.
    """

    labels: np.ndarray
    centers: np.ndarray
    cost: float
    cost_history: tuple[float, ...]
    degenerate: bool


def _seed_centers(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Squared-distance weighted seeding."""
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            # every point coincides with a chosen center
            idx = int(rng.integers(n))
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), r, side="right"))
            idx = min(idx, n - 1)
        centers[j] = points[idx]
        d2 = np.minimum(d2, ((points - centers[j]) ** 2).sum(axis=1))
    return centers


def _lloyd(points: np.ndarray, centers: np.ndarray, max_iters: int = 100):
    n = points.shape[0]
    history = []
    prev_cost = np.inf
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(max_iters):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(d2, axis=1)
        cost = float(d2[np.arange(n), labels].sum())
        history.append(cost)
        if np.isfinite(prev_cost) and prev_cost - cost <= 1e-9 * max(prev_cost, 1e-300):
            break
        prev_cost = cost
        for j in range(centers.shape[0]):
            members = labels == j
            if members.any():
                centers[j] = points[members].mean(axis=0)
            else:
                # re-seed an emptied cluster at the point farthest from its center
                far = int(np.argmax(d2[np.arange(n), labels]))
                centers[j] = points[far]
    return labels, centers, history[-1], tuple(history)


def _exact_1d_kmeans(points: np.ndarray, k: int, degenerate: bool) -> KMeansResult:
    """Optimal 1-D clustering by dynamic programming over sorted segments.

    An optimal squared-error clustering of scalars is contiguous in sorted
    order, so splitting the sorted sequence into k segments searches the
    whole solution space.
    """
    values = points[:, 0]
    order = np.argsort(values, kind="stable")
    x = values[order]
    n = x.shape[0]
    s = np.concatenate([[0.0], np.cumsum(x)])
    ss = np.concatenate([[0.0], np.cumsum(x * x)])

    inf = np.inf
    best_cost = np.full((k + 1, n + 1), inf)
    best_cost[0, 0] = 0.0
    split = np.zeros((k + 1, n + 1), dtype=np.int64)
    for t in range(1, k + 1):
        for j in range(t, n + 1):
            i = np.arange(t - 1, j)
            cnt = j - i
            seg = np.maximum(ss[j] - ss[i] - (s[j] - s[i]) ** 2 / cnt, 0.0)
            total = best_cost[t - 1, i] + seg
            pick = int(np.argmin(total))
            best_cost[t, j] = total[pick]
            split[t, j] = i[pick]

    labels_sorted = np.empty(n, dtype=np.int64)
    centers = np.empty((k, 1))
    j = n
    for t in range(k, 0, -1):
        i = int(split[t, j])
        labels_sorted[i:j] = t - 1
        centers[t - 1, 0] = (s[j] - s[i]) / (j - i)
        j = i
    labels = np.empty(n, dtype=np.int64)
    labels[order] = labels_sorted
    cost = float(best_cost[k, n])
    return KMeansResult(
        labels=labels,
        centers=centers,
        cost=cost,
        cost_history=(cost,),
        degenerate=degenerate,
    )


_EXACT_1D_CAP = 2048


def kmeans(points: np.ndarray, k: int, seed: int, restarts: int = 10) -> KMeansResult:
    """k-means with squared-distance seeding and best-of-``restarts`` selection.

    One-dimensional inputs of at most 2048 points are solved exactly by the
    sorted-segment dynamic program; otherwise Lloyd iterations stop when the
    relative cost decrease drops below 1e-9 or after 100 rounds, and the
    lowest-cost restart wins.  Deterministic given the seed.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise DataError(f"points must be 2-D, got shape {points.shape}")
    n = points.shape[0]
    if not 1 <= k <= n:
        raise DataError(f"need 1 <= k <= n points, got k={k}, n={n}")
    if restarts < 1:
        raise DataError("restarts must be positive")
    rng = make_rng(seed)
    degenerate = np.unique(points, axis=0).shape[0] < k
    if points.shape[1] == 1 and n <= _EXACT_1D_CAP:
        return _exact_1d_kmeans(points, k, degenerate)
    best = None
    for _ in range(restarts):
        centers = _seed_centers(points, k, rng)
        labels, centers, cost, history = _lloyd(points, centers.copy())
        if best is None or cost < best.cost:
            best = KMeansResult(
                labels=labels,
                centers=centers,
                cost=cost,
                cost_history=history,
                degenerate=degenerate,
            )
    return best


def _embed_and_cluster(
    sym: np.ndarray, k: int, seed: int, restarts: int
) -> Partition:
    emb = dominant_eigenvectors(sym, k, seed=derive_seed(seed, "eig"))
    km = kmeans(emb.x_bar, k, derive_seed(seed, "kmeans"), restarts)
    return Partition(km.labels, k)


def ttm_partition(
    h: WeightedUniformHypergraph, k: int, seed: int, restarts: int = 10
) -> Partition:
    """Flatten, normalize, embed, row-normalize, cluster."""
    if k > h.n:
        raise DataError(f"k={k} exceeds n={h.n}")
    f = normalize(flatten(h))
    return _embed_and_cluster(f.l, k, seed, restarts)


def ttm_partition_from_affinity(
    a: np.ndarray, k: int, seed: int, restarts: int = 10, m: int = 2
) -> Partition:
    """Same pipeline starting from a prebuilt affinity matrix."""
    f = normalize(FlattenedAffinity.from_matrix(a, m=m))
    return _embed_and_cluster(f.l, k, seed, restarts)


def nhcut_matrix(pair_sums: np.ndarray, m: int) -> np.ndarray:
    """Normalized incidence product from pairwise co-occurrence sums.

    ``pair_sums[i, j]`` must hold sum of w_e over edges containing both i
    and j (zero diagonal); vertex degrees are then row sums / (m - 1).
    """
    pair_sums = np.asarray(pair_sums, dtype=np.float64)
    dv = pair_sums.sum(axis=1) / (m - 1)
    if dv.max() <= 0.0:
        raise DataError("cannot normalize: all vertex degrees are zero")
    inv_sqrt = np.where(dv > 0.0, 1.0 / np.sqrt(np.where(dv > 0.0, dv, 1.0)), 0.0)
    core = pair_sums + np.diag(dv)
    return core * inv_sqrt[:, None] * inv_sqrt[None, :] / m


def nhcut_partition(
    h: WeightedUniformHypergraph, k: int, seed: int, restarts: int = 10
) -> Partition:
    """Vertex-normalized incidence baseline with the shared embedding tail."""
    if k > h.n:
        raise DataError(f"k={k} exceeds n={h.n}")
    f = flatten(h)
    pair_sums = f.a / factorial(h.m - 2)
    return _embed_and_cluster(nhcut_matrix(pair_sums, h.m), k, seed, restarts)


def unfolding_gram(h: WeightedUniformHypergraph) -> np.ndarray:
    """Gram matrix of the adjacency tensor's mode-1 unfolding.

    Gram[i, j] = (m-1)! * sum over (m-1)-subsets s (with i, j not in s, or
    i == j not in s) of w_{s + i} * w_{s + j}.  Accumulated by grouping
    edges over their (m-1)-subsets, never materializing the unfolding.
    """
    n, m = h.n, h.m
    gram = np.zeros((n, n))
    buckets: dict[tuple[int, ...], tuple[list[int], list[float]]] = {}
    for row, w in zip(h.edges, h.weights):
        t = tuple(int(v) for v in row)
        for pos in range(m):
            s = t[:pos] + t[pos + 1 :]
            bucket = buckets.setdefault(s, ([], []))
            bucket[0].append(t[pos])
            bucket[1].append(float(w))
    scale = float(factorial(m - 1))
    for idx, ws in buckets.values():
        ids = np.asarray(idx)
        vec = np.asarray(ws)
        gram[np.ix_(ids, ids)] += scale * np.outer(vec, vec)
    return gram


def hosvd_partition(
    h: WeightedUniformHypergraph,
    k: int,
    seed: int,
    restarts: int = 10,
    n_cap: int = 150,
) -> Partition:
    """Unfolding-Gram baseline; exact, so refuses n beyond ``n_cap``."""
    if h.n > n_cap:
        raise SizeCapError(f"n={h.n} exceeds the cap {n_cap} for the exact baseline")
    if k > h.n:
        raise DataError(f"k={k} exceeds n={h.n}")
    return _embed_and_cluster(unfolding_gram(h), k, seed, restarts)


def save_embedding_csv(x: np.ndarray, path: str) -> None:
    """Write an embedding as CSV, one vertex per row, 17 significant digits."""
    x = np.asarray(x, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as fh:
        for row in np.atleast_2d(x):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
