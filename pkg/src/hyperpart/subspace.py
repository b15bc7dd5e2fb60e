"""Union-of-subspaces models and sampled hypergraph clustering of point clouds.

Points drawn from k linear r-dimensional subspaces of R^{r_a} are clustered
by building an (r + 2)-uniform hypergraph whose edge weights measure how far
an (r + 2)-point subset is from lying in a single r-dimensional subspace:

    w_e = exp(-f_r(points of e) / sigma^2)

The default fit error ``svd_residual`` is the summed squared distance of the
points to their best-fit r-dimensional subspace through the origin (the tail
eigenvalue sum of the point Gram matrix).  ``polar_curvature`` is a
selectable alternative: squared diameter times the mean squared polar sine
over all (r + 1)-point subsets.  Both are nonnegative and vanish exactly on
subsets contained in some r-dimensional subspace.

The full hypergraph has C(n, r + 2) edges, so the iterative sampler below
only ever scores n * c edges per round: it draws c subsets of size r + 1,
completes each with every point, accumulates the weights into an n x n
matrix, clusters its normalized left singular embedding, and resamples the
subsets from the clusters just found until labels stabilize.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import sqrt

import numpy as np

from .core import (
    DataError,
    EdgeWeightOracle,
    Partition,
    WeightedUniformHypergraph,
    all_edges_array,
    derive_seed,
    make_rng,
)
from .metrics import clustering_error
from .spectral import _canonical_signs, kmeans, row_normalize

FIT_MODES = ("svd_residual", "polar_curvature")

_SIGMA_FLOOR = 1e-6
_SIGMA_GRID_SIZE = 7


@dataclass(frozen=True)
class PointCloud:
    """Points as rows, with optional ground-truth labels and bases."""

    points: np.ndarray
    labels: Partition | None = None
    bases: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim != 2:
            raise DataError(f"points must be 2-D, got shape {points.shape}")
        if self.labels is not None and self.labels.n != points.shape[0]:
            raise DataError("label count does not match point count")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class SubspaceSpec:
    """k random r-dimensional subspaces of R^{r_a}, ``points_per`` points each.

    Points are basis @ u with u uniform on the unit sphere of R^r, then
    perturbed by isotropic Gaussian noise with covariance noise_sigma^2 I.
    """

    r_a: int
    k: int
    r: int
    points_per: int
    noise_sigma: float = 0.0

    def __post_init__(self):
        if not 1 <= self.r < self.r_a:
            raise DataError(f"need 1 <= r < r_a, got r={self.r}, r_a={self.r_a}")
        if self.k < 1 or self.points_per < 1:
            raise DataError("k and points_per must be positive")
        if self.noise_sigma < 0.0:
            raise DataError("noise_sigma must be nonnegative")


def generate_subspaces(spec: SubspaceSpec, seed: int) -> PointCloud:
    """Draw bases (QR of Gaussian matrices), sphere-uniform coefficients, noise."""
    rng = make_rng(seed)
    blocks = []
    bases = []
    for _ in range(spec.k):
        q, _ = np.linalg.qr(rng.standard_normal((spec.r_a, spec.r)))
        basis = q[:, : spec.r]
        coeff = rng.standard_normal((spec.r, spec.points_per))
        norms = np.linalg.norm(coeff, axis=0)
        coeff = coeff / np.where(norms > 0.0, norms, 1.0)
        block = (basis @ coeff).T
        if spec.noise_sigma > 0.0:
            block = block + spec.noise_sigma * rng.standard_normal(block.shape)
        blocks.append(block)
        bases.append(basis)
    labels = Partition(np.repeat(np.arange(spec.k), spec.points_per), spec.k)
    return PointCloud(points=np.vstack(blocks), labels=labels, bases=tuple(bases))


def fit_error_batch(pointsets: np.ndarray, r: int, mode: str = "svd_residual") -> np.ndarray:
    """Fit errors for a (batch, m, dim) stack of point subsets."""
    if mode not in FIT_MODES:
        raise DataError(f"unknown fit mode {mode!r}")
    pointsets = np.asarray(pointsets, dtype=np.float64)
    if pointsets.ndim != 3:
        raise DataError(f"pointsets must be 3-D, got shape {pointsets.shape}")
    m = pointsets.shape[1]
    if r < 1:
        raise DataError("subspace dimension must be positive")
    if m < r + 1:
        raise DataError(f"need at least r + 1 = {r + 1} points, got {m}")
    gram = pointsets @ pointsets.transpose(0, 2, 1)
    if mode == "svd_residual":
        evals = np.linalg.eigvalsh(gram)  # ascending
        tail = evals.sum(axis=-1) - evals[:, m - r :].sum(axis=-1)
        return np.maximum(tail, 0.0)
    # polar curvature: diam^2 * mean squared polar sine over (r+1)-point subsets
    diffs = pointsets[:, :, None, :] - pointsets[:, None, :, :]
    diam_sq = (diffs**2).sum(axis=-1).max(axis=(1, 2))
    diag = np.einsum("bii->bi", gram)
    acc = np.zeros(pointsets.shape[0])
    combos = list(itertools.combinations(range(m), r + 1))
    for combo in combos:
        ids = list(combo)
        sub = gram[:, ids, :][:, :, ids]
        det = np.maximum(np.linalg.det(sub), 0.0)
        denom = np.prod(diag[:, ids], axis=1)
        acc += np.where(denom > 0.0, det / np.where(denom > 0.0, denom, 1.0), 0.0)
    return diam_sq * acc / len(combos)


def fit_error(points: np.ndarray, r: int, mode: str = "svd_residual") -> float:
    """Fit error of one point subset (rows are points)."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise DataError(f"points must be 2-D, got shape {points.shape}")
    return float(fit_error_batch(points[None], r, mode)[0])


def edge_weight_oracle(
    cloud: PointCloud, r: int, sigma: float, mode: str = "svd_residual"
) -> EdgeWeightOracle:
    """(r + 2)-uniform oracle with w_e = exp(-f_r / sigma^2)."""
    if sigma <= 0.0:
        raise DataError(f"sigma must be positive, got {sigma}")
    m = r + 2
    if cloud.n < m:
        raise DataError(f"need at least m = {m} points, got {cloud.n}")
    points = cloud.points
    sig_sq = float(sigma) ** 2

    def evaluate(edge: tuple[int, ...]) -> float:
        return float(np.exp(-fit_error(points[list(edge)], r, mode) / sig_sq))

    def batch_evaluate(edges: np.ndarray) -> np.ndarray:
        return np.exp(-fit_error_batch(points[edges], r, mode) / sig_sq)

    return EdgeWeightOracle(cloud.n, m, evaluate, batch_evaluate)


def curvature_hypergraph(
    cloud: PointCloud, r: int, sigma: float, mode: str = "svd_residual"
) -> WeightedUniformHypergraph:
    """Materialize the full (r + 2)-uniform weighted hypergraph."""
    oracle = edge_weight_oracle(cloud, r, sigma, mode)
    edges = all_edges_array(cloud.n, oracle.m)
    weights = oracle.weights_for(edges)
    return WeightedUniformHypergraph(cloud.n, oracle.m, edges, weights)


def sigma_candidates(fit_errors: np.ndarray) -> np.ndarray:
    """Geometric grid of sigma^2 candidates: RMS(f) * 2^{-j}, j = 0..6."""
    vals = np.asarray(fit_errors, dtype=np.float64).ravel()
    if vals.size == 0:
        raise DataError("no fit errors to scale from")
    rms = float(np.sqrt(np.mean(vals**2)))
    return rms * 2.0 ** -np.arange(_SIGMA_GRID_SIZE, dtype=np.float64)


def _draw_subsets(
    rng: np.random.Generator, pool: np.ndarray, count: int, size: int
) -> np.ndarray:
    """``count`` uniform size-``size`` subsets of ``pool``, distinct members."""
    keys = rng.random((count, pool.shape[0]))
    picked = np.argpartition(keys, size - 1, axis=1)[:, :size]
    return np.sort(pool[picked], axis=1)


def _fit_matrix(points: np.ndarray, subsets: np.ndarray, r: int, mode: str):
    """Fit errors of every point-subset completion, and a validity mask.

    Entry (i, j) scores the subset j completed with point i; completions
    where i already belongs to subset j are masked out (the adjacency
    tensor is zero on repeated indices).
    """
    n, d = points.shape
    c, mm1 = subsets.shape
    batch = np.empty((n, c, mm1 + 1, d))
    batch[:, :, 0, :] = points[:, None, :]
    batch[:, :, 1:, :] = points[subsets][None, :, :, :]
    f = fit_error_batch(batch.reshape(n * c, mm1 + 1, d), r, mode).reshape(n, c)
    valid = ~np.any(subsets[None, :, :] == np.arange(n)[:, None, None], axis=2)
    return f, valid


def accumulate_completions(weights: np.ndarray, subsets: np.ndarray, n: int) -> np.ndarray:
    """Scatter completion weights: row = completing point, columns = subset members."""
    c = subsets.shape[0]
    rows = np.repeat(np.arange(n, dtype=np.int64), c)
    flat_w = np.asarray(weights, dtype=np.float64).ravel()
    a_hat = np.zeros(n * n)
    for col in range(subsets.shape[1]):
        cols = np.broadcast_to(subsets[:, col].astype(np.int64), (n, c)).ravel()
        a_hat += np.bincount(rows * n + cols, weights=flat_w, minlength=n * n)
    return a_hat.reshape(n, n)


def _cluster_from_fit(
    fit: np.ndarray,
    valid: np.ndarray,
    subsets: np.ndarray,
    sigma: float,
    k: int,
    seed: int,
    restarts: int,
):
    """Steps after weighting: accumulate, one-sided normalize, embed, cluster."""
    n, c = fit.shape
    weights = np.where(valid, np.exp(-fit / float(sigma) ** 2), 0.0)
    a_hat = accumulate_completions(weights, subsets, n)
    degrees = a_hat.sum(axis=1)
    if degrees.max() <= 0.0:
        raise DataError("all accumulated weights are zero")
    l_hat = a_hat / np.where(degrees > 0.0, degrees, 1.0)[:, None]
    l_hat[degrees <= 0.0] = 0.0
    u, _, _ = np.linalg.svd(l_hat, full_matrices=False)
    x = _canonical_signs(np.ascontiguousarray(u[:, :k]))
    km = kmeans(row_normalize(x), k, seed, restarts)
    return km.labels, km.cost


def estimate_sigma(
    fit: np.ndarray,
    subsets: np.ndarray,
    k: int,
    seed: int,
    valid: np.ndarray | None = None,
    restarts: int = 10,
) -> float:
    """Pick sigma from the candidate grid by minimal clustering cost.

    Runs the full weight-accumulate-embed-cluster tail once per candidate
    sigma^2 and returns the sigma whose k-means embedding cost is lowest.
    All-zero fit errors return the fixed floor 1e-6.  Deterministic given
    the seed.
    """
    fit = np.asarray(fit, dtype=np.float64)
    if valid is None:
        valid = np.ones(fit.shape, dtype=bool)
    sigma, _, _ = _select_sigma(fit, valid, subsets, k, seed, restarts)
    return sigma


def _select_sigma(fit, valid, subsets, k, seed, restarts):
    sampled = fit[valid]
    grid = sigma_candidates(sampled)
    if grid[0] <= 0.0:
        sigma = _SIGMA_FLOOR
        labels, cost = _cluster_from_fit(fit, valid, subsets, sigma, k, seed, restarts)
        return sigma, labels, cost
    best = None
    for sig_sq in grid:
        sigma = sqrt(float(sig_sq))
        labels, cost = _cluster_from_fit(fit, valid, subsets, sigma, k, seed, restarts)
        if best is None or cost < best[2]:
            best = (sigma, labels, cost)
    return best


@dataclass(frozen=True)
class TetrisConfig:
    """Knobs for the iterative sampler.

    ``sigma`` is either the string "auto" (grid selection each round) or a
    fixed positive float.  Iteration stops once labels change on at most
    ``convergence_tol * n`` points, or after ``max_iters`` rounds.
    """

    c: int
    sigma: float | str = "auto"
    max_iters: int = 20
    convergence_tol: float = 0.01
    restarts: int = 10
    kernel: str = "svd_residual"

    def __post_init__(self):
        if self.c < 1:
            raise DataError("c must be positive")
        if self.max_iters < 1:
            raise DataError("max_iters must be positive")
        if not 0.0 <= self.convergence_tol < 1.0:
            raise DataError("convergence_tol must lie in [0, 1)")
        if isinstance(self.sigma, str):
            if self.sigma != "auto":
                raise DataError(f"sigma must be 'auto' or a float, got {self.sigma!r}")
        elif float(self.sigma) <= 0.0:
            raise DataError("fixed sigma must be positive")
        if self.kernel not in FIT_MODES:
            raise DataError(f"unknown fit mode {self.kernel!r}")


@dataclass(frozen=True)
class TetrisResult:
    """Final partition plus the run log of the iteration."""

    partition: Partition
    sigma: float
    iterations: int
    label_changes: tuple[int, ...]
    sigma_history: tuple[float, ...]
    kmeans_cost: float
    events: tuple[str, ...]


def _resample_quotas(sizes: np.ndarray, c: int) -> np.ndarray:
    """c split as floor(c / k) each, remainder to the largest clusters."""
    k = sizes.shape[0]
    quotas = np.full(k, c // k, dtype=np.int64)
    remainder = c - int(quotas.sum())
    if remainder > 0:
        order = np.argsort(-sizes, kind="stable")
        quotas[order[:remainder]] += 1
    return quotas


def tetris(
    cloud: PointCloud, k: int, r: int, config: TetrisConfig, seed: int
) -> TetrisResult:
    """Iteratively sampled spectral clustering of a union-of-subspaces cloud.

    Each round draws c subsets of r + 1 points (uniformly at first, then
    from the previous clusters), scores every point against every subset,
    and reclusters.  Cluster quotas are floor(c / k) with the remainder
    going to the largest clusters; a cluster too small to host a subset has
    its quota redrawn over all points, which is noted in the run log.
    """
    points = cloud.points
    n = points.shape[0]
    mm1 = r + 2 - 1  # subsets have m - 1 = r + 1 members
    if n < r + 2:
        raise DataError(f"need at least r + 2 = {r + 2} points, got {n}")
    if not 1 <= k <= n:
        raise DataError(f"need 1 <= k <= n, got k={k}, n={n}")
    all_ids = np.arange(n)
    rng = make_rng(derive_seed(seed, "subsets", 0))
    subsets = _draw_subsets(rng, all_ids, config.c, mm1)
    labels_prev = None
    events: list[str] = []
    changes: list[int] = []
    sigmas: list[float] = []
    labels = np.zeros(n, dtype=np.int64)
    cost = float("nan")
    iterations = 0
    for it in range(config.max_iters):
        iterations = it + 1
        fit, valid = _fit_matrix(points, subsets, r, config.kernel)
        cluster_seed = derive_seed(seed, "cluster", it)
        if config.sigma == "auto":
            sigma, labels, cost = _select_sigma(
                fit, valid, subsets, k, cluster_seed, config.restarts
            )
        else:
            sigma = float(config.sigma)
            labels, cost = _cluster_from_fit(
                fit, valid, subsets, sigma, k, cluster_seed, config.restarts
            )
        sigmas.append(sigma)
        if labels_prev is not None:
            moved = clustering_error(
                Partition(labels_prev, k), Partition(labels, k)
            )
            changes.append(moved)
            if moved <= config.convergence_tol * n:
                break
        labels_prev = labels
        if it == config.max_iters - 1:
            break
        sizes = np.bincount(labels, minlength=k)
        quotas = _resample_quotas(sizes, config.c)
        rng = make_rng(derive_seed(seed, "subsets", it + 1))
        parts = []
        for j in range(k):
            if quotas[j] == 0:
                continue
            members = np.flatnonzero(labels == j)
            if members.shape[0] >= mm1:
                parts.append(_draw_subsets(rng, members, int(quotas[j]), mm1))
            else:
                events.append(
                    f"round {it + 1}: cluster {j} has {members.shape[0]} points, "
                    f"quota {int(quotas[j])} redrawn over all points"
                )
                parts.append(_draw_subsets(rng, all_ids, int(quotas[j]), mm1))
        subsets = np.vstack(parts)
    return TetrisResult(
        partition=Partition(labels, k),
        sigma=sigmas[-1],
        iterations=iterations,
        label_changes=tuple(changes),
        sigma_history=tuple(sigmas),
        kmeans_cost=cost,
        events=tuple(events),
    )


def uniform_sampled_ttm_subspace(
    cloud: PointCloud,
    k: int,
    r: int,
    c: int,
    sigma: float,
    seed: int,
    restarts: int = 10,
    kernel: str = "svd_residual",
) -> Partition:
    """One round of the sampler with a fixed sigma: uniform subsets only.

    Identical (bit for bit, given the same seed) to ``tetris`` with
    max_iters = 1 and the same fixed sigma.
    """
    config = TetrisConfig(
        c=c, sigma=float(sigma), max_iters=1, restarts=restarts, kernel=kernel
    )
    return tetris(cloud, k, r, config, seed).partition


def write_pointcloud(cloud: PointCloud, path: str) -> None:
    """CSV with one point per row; a trailing integer label column is flagged
    by the header comment ``# labels=last``."""
    with open(path, "w", encoding="utf-8") as fh:
        if cloud.labels is not None:
            fh.write("# labels=last\n")
        for i, row in enumerate(cloud.points):
            cells = [f"{v:.17g}" for v in row]
            if cloud.labels is not None:
                cells.append(str(int(cloud.labels.labels[i])))
            fh.write(",".join(cells) + "\n")


def read_pointcloud(path: str) -> PointCloud:
    labels_last = False
    rows: list[list[str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.replace(" ", "") == "#labels=last":
                    labels_last = True
                continue
            rows.append(line.split(","))
    if not rows:
        raise DataError(f"{path}: empty point cloud file")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise DataError(f"{path}: ragged rows")
    if labels_last and width < 2:
        raise DataError(f"{path}: label column flagged but only one column present")
    try:
        data = np.array(
            [[float(v) for v in r[: width - 1 if labels_last else width]] for r in rows]
        )
        labels = None
        if labels_last:
            raw = np.array([int(r[-1]) for r in rows], dtype=np.int64)
            if raw.min() < 0:
                raise DataError(f"{path}: negative label")
            labels = Partition(raw, int(raw.max()) + 1)
    except ValueError:
        raise DataError(f"{path}: malformed numeric cell") from None
    return PointCloud(points=data, labels=labels)
