"""Experiment harness: seeded grids of trials, CSV results, summaries, figures.

A run is described by a flat ``key = value`` text config (repeated keys form
lists).  Every (cell, trial) pair gets a seed derived from the base seed and
a stable hash of the cell parameters and trial index, so all methods of one
trial see the same generated instance, rows are reproducible in isolation,
and reruns are bit-identical.  Rows are sorted before writing.

Result CSV columns::

    method,n,m,k,p,q,alpha,sigma_a,N,c,trial,seed,err,frac_err,wall_ms

Experiments:

* ``vary_m``, ``vary_p``, ``heatmap_planted``: planted block models swept
  over the given grids, full-hypergraph methods.
* ``sampling_compare``: planted models partitioned from sampled affinity
  estimates; ``sampled_ttm`` expands to one method per ``sampling.kind``.
* ``heatmap_lines``, ``subspace_grid``: union-of-subspaces point clouds
  (ambient dimension 3 and 5 by default); the subset order m implies the
  subspace dimension r = m - 2.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from statistics import median
from typing import Callable

import numpy as np

from .core import (
    DataError,
    Partition,
    WeightedUniformHypergraph,
    derive_seed,
    oracle_from_hypergraph,
    stable_hash64,
    write_partition,
)
from .metrics import clustering_error
from .planted import PlantedSpec, generate
from .sampling import build_plan, sampled_ttm_partition
from .spectral import (
    hosvd_partition,
    kmeans,
    nhcut_partition,
    ttm_partition,
)
from .subspace import (
    PointCloud,
    SubspaceSpec,
    TetrisConfig,
    curvature_hypergraph,
    generate_subspaces,
    sigma_candidates,
    tetris,
    uniform_sampled_ttm_subspace,
)

RESULT_COLUMNS = (
    "method",
    "n",
    "m",
    "k",
    "p",
    "q",
    "alpha",
    "sigma_a",
    "N",
    "c",
    "trial",
    "seed",
    "err",
    "frac_err",
    "wall_ms",
)

PLANTED_EXPERIMENTS = ("vary_m", "vary_p", "heatmap_planted", "sampling_compare")
POINT_EXPERIMENTS = ("heatmap_lines", "subspace_grid")
EXPERIMENTS = PLANTED_EXPERIMENTS + POINT_EXPERIMENTS

_PLANTED_METHODS = ("ttm", "nhcut", "hosvd", "sampled_ttm")
_POINT_METHODS = ("ttm", "nhcut", "hosvd", "tetris", "sampled_ttm", "kmeans_embed")
_DEFAULT_AMBIENT = {"heatmap_lines": 3, "subspace_grid": 5}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    methods: tuple[str, ...]
    n: tuple[int, ...]
    k: tuple[int, ...]
    m: tuple[int, ...]
    trials: int
    seed: int
    p: tuple[float, ...] = ()
    q: tuple[float, ...] = ()
    alpha: tuple[float, ...] = (1.0,)
    sigma_a: tuple[float, ...] = (0.0,)
    sample_counts: tuple[int, ...] = ()
    sampling_kinds: tuple[str, ...] = ("uniform",)
    c: tuple[int, ...] = ()
    weight_law: str = "bernoulli"
    r_a: int | None = None
    kernel: str = "svd_residual"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise DataError(f"unknown experiment {self.experiment!r}")
        if not self.methods:
            raise DataError("at least one method is required")
        allowed = (
            _POINT_METHODS if self.experiment in POINT_EXPERIMENTS else _PLANTED_METHODS
        )
        for method in self.methods:
            if method not in allowed:
                raise DataError(
                    f"method {method!r} is not valid for {self.experiment}"
                )
        if self.trials < 1:
            raise DataError("trials must be positive")
        if not (self.n and self.k and self.m):
            raise DataError("n, k, and m grids must be nonempty")
        for n in self.n:
            for k in self.k:
                if n % k != 0:
                    raise DataError(f"balanced cells need k | n, got n={n}, k={k}")
        if self.experiment in PLANTED_EXPERIMENTS:
            if not (self.p and self.q):
                raise DataError("planted experiments need p and q grids")
        if self.experiment == "sampling_compare":
            if not self.sample_counts:
                raise DataError("sampling_compare needs a sampling.N grid")
            for kind in self.sampling_kinds:
                if kind not in ("uniform", "weighted"):
                    raise DataError(f"unknown sampling kind {kind!r}")
        if self.experiment in POINT_EXPERIMENTS:
            if not self.c:
                raise DataError("point experiments need a c grid")
            for m in self.m:
                if m < 3:
                    raise DataError("point experiments need m >= 3 (r = m - 2 >= 1)")
            ambient = self.ambient_dim
            for m in self.m:
                if m - 2 >= ambient:
                    raise DataError(
                        f"subspace dimension r={m - 2} must stay below r_a={ambient}"
                    )

    @property
    def ambient_dim(self) -> int:
        if self.r_a is not None:
            return self.r_a
        return _DEFAULT_AMBIENT.get(self.experiment, 3)


def parse_config_text(text: str) -> dict[str, list[str]]:
    """Flat ``key = value`` lines; repeated keys accumulate in order."""
    items: dict[str, list[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise DataError(f"line {lineno}: empty key or value in {line!r}")
        items.setdefault(key, []).append(value)
    return items


def _ints(items, key) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in items.get(key, []))
    except ValueError:
        raise DataError(f"config key {key!r} must hold integers") from None


def _floats(items, key) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in items.get(key, []))
    except ValueError:
        raise DataError(f"config key {key!r} must hold numbers") from None


def _single(items, key, default=None) -> str | None:
    values = items.get(key, [])
    if not values:
        return default
    if len(values) > 1:
        raise DataError(f"config key {key!r} given {len(values)} times, expected once")
    return values[0]


def config_from_items(items: dict[str, list[str]]) -> ExperimentConfig:
    known = {
        "experiment",
        "method",
        "n",
        "k",
        "m",
        "p",
        "q",
        "alpha",
        "sigma_a",
        "sampling.N",
        "sampling.kind",
        "c",
        "trials",
        "seed",
        "weight_law",
        "r_a",
        "kernel",
    }
    for key in items:
        if key not in known:
            raise DataError(f"unknown config key {key!r}")
    experiment = _single(items, "experiment")
    if experiment is None:
        raise DataError("config key 'experiment' is required")
    trials = _single(items, "trials")
    seed = _single(items, "seed")
    if trials is None or seed is None:
        raise DataError("config keys 'trials' and 'seed' are required")
    try:
        trials_i, seed_i = int(trials), int(seed)
    except ValueError:
        raise DataError("'trials' and 'seed' must be integers") from None
    kwargs = dict(
        experiment=experiment,
        methods=tuple(items.get("method", [])),
        n=_ints(items, "n"),
        k=_ints(items, "k"),
        m=_ints(items, "m"),
        p=_floats(items, "p"),
        q=_floats(items, "q"),
        trials=trials_i,
        seed=seed_i,
        sample_counts=_ints(items, "sampling.N"),
        c=_ints(items, "c"),
        weight_law=_single(items, "weight_law", "bernoulli"),
        kernel=_single(items, "kernel", "svd_residual"),
    )
    if "alpha" in items:
        kwargs["alpha"] = _floats(items, "alpha")
    if "sigma_a" in items:
        kwargs["sigma_a"] = _floats(items, "sigma_a")
    if "sampling.kind" in items:
        kwargs["sampling_kinds"] = tuple(items["sampling.kind"])
    r_a = _single(items, "r_a")
    if r_a is not None:
        try:
            kwargs["r_a"] = int(r_a)
        except ValueError:
            raise DataError("'r_a' must be an integer") from None
    return ExperimentConfig(**kwargs)


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_items(parse_config_text(fh.read()))


def config_to_text(config: ExperimentConfig) -> str:
    lines = [f"experiment = {config.experiment}"]
    lines += [f"method = {m}" for m in config.methods]
    for key in ("n", "k", "m"):
        lines += [f"{key} = {v}" for v in getattr(config, key)]
    for key in ("p", "q", "alpha", "sigma_a"):
        lines += [f"{key} = {v!r}" for v in getattr(config, key)]
    lines += [f"sampling.N = {v}" for v in config.sample_counts]
    lines += [f"sampling.kind = {v}" for v in config.sampling_kinds]
    lines += [f"c = {v}" for v in config.c]
    lines.append(f"trials = {config.trials}")
    lines.append(f"seed = {config.seed}")
    lines.append(f"weight_law = {config.weight_law}")
    if config.r_a is not None:
        lines.append(f"r_a = {config.r_a}")
    lines.append(f"kernel = {config.kernel}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Cell:
    """One grid point; fields mirror the CSV columns (None renders empty)."""

    n: int
    m: int
    k: int
    p: float | None = None
    q: float | None = None
    alpha: float | None = None
    sigma_a: float | None = None
    sample_count: int | None = None
    c: int | None = None

    def key(self) -> str:
        parts = [
            f"n={self.n}",
            f"m={self.m}",
            f"k={self.k}",
            f"p={_cell_str(self.p)}",
            f"q={_cell_str(self.q)}",
            f"alpha={_cell_str(self.alpha)}",
            f"sigma_a={_cell_str(self.sigma_a)}",
            f"N={_cell_str(self.sample_count)}",
            f"c={_cell_str(self.c)}",
        ]
        return ",".join(parts)


def _cell_str(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class ResultRow:
    method: str
    cell: Cell
    trial: int
    seed: int
    err: int
    frac_err: float
    wall_ms: float

    def csv_cells(self) -> tuple[str, ...]:
        c = self.cell
        return (
            self.method,
            str(c.n),
            str(c.m),
            str(c.k),
            _cell_str(c.p),
            _cell_str(c.q),
            _cell_str(c.alpha),
            _cell_str(c.sigma_a),
            _cell_str(c.sample_count),
            _cell_str(c.c),
            str(self.trial),
            str(self.seed),
            str(self.err),
            repr(self.frac_err),
            repr(self.wall_ms),
        )


def build_cells(config: ExperimentConfig) -> list[Cell]:
    cells = []
    if config.experiment in PLANTED_EXPERIMENTS:
        counts = config.sample_counts if config.experiment == "sampling_compare" else (None,)
        for n in config.n:
            for m in config.m:
                for k in config.k:
                    for p in config.p:
                        for q in config.q:
                            for alpha in config.alpha:
                                for count in counts:
                                    cells.append(
                                        Cell(n, m, k, p, q, alpha, sample_count=count)
                                    )
    else:
        for n in config.n:
            for m in config.m:
                for k in config.k:
                    for sigma_a in config.sigma_a:
                        for c in config.c:
                            cells.append(Cell(n, m, k, sigma_a=sigma_a, c=c))
    return cells


def trial_seed(base_seed: int, cell: Cell, trial: int) -> int:
    return (base_seed + stable_hash64(f"{cell.key()}|trial={trial}")) % (1 << 64)


def _expand_methods(config: ExperimentConfig) -> list[str]:
    expanded = []
    for method in config.methods:
        if method == "sampled_ttm" and config.experiment == "sampling_compare":
            expanded += [f"sampled_ttm:{kind}" for kind in config.sampling_kinds]
        else:
            expanded.append(method)
    return expanded


def _full_hypergraph_sigma(cloud: PointCloud, r: int, k: int, seed: int, kernel: str) -> float:
    """Grid-select sigma for the full curvature hypergraph by pipeline cost."""
    from .spectral import dominant_eigenvectors
    from .core import all_edges_array
    from .subspace import fit_error_batch
    import itertools as _it
    from math import sqrt as _sqrt, factorial as _factorial

    m = r + 2
    edges = all_edges_array(cloud.n, m)
    fits = fit_error_batch(cloud.points[edges], r, kernel)
    grid = sigma_candidates(fits)
    if grid[0] <= 0.0:
        return 1e-6
    n = cloud.n
    pair_cols = np.array(list(_it.combinations(range(m), 2)))
    i = edges[:, pair_cols[:, 0]].astype(np.int64).ravel()
    j = edges[:, pair_cols[:, 1]].astype(np.int64).ravel()
    flat = np.concatenate([i * n + j, j * n + i])
    best = None
    for sig_sq in grid:
        sigma = _sqrt(float(sig_sq))
        w = np.repeat(np.exp(-fits / sig_sq), pair_cols.shape[0]) * _factorial(m - 2)
        a = np.bincount(flat, weights=np.concatenate([w, w]), minlength=n * n).reshape(n, n)
        d = a.sum(axis=1)
        inv = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1.0)), 0.0)
        emb = dominant_eigenvectors(a * inv[:, None] * inv[None, :], k, seed=derive_seed(seed, "eig"))
        km = kmeans(emb.x_bar, k, derive_seed(seed, "kmeans"), 10)
        if best is None or km.cost < best[1]:
            best = (sigma, km.cost)
    return best[0]


def run_trial(
    config: ExperimentConfig,
    cell: Cell,
    trial: int,
    clock: Callable[[], float] = time.perf_counter,
) -> list[tuple[ResultRow, Partition, Partition]]:
    """All requested methods on one generated instance.

    Returns (row, truth, estimate) triples so callers can persist partitions.
    """
    seed = trial_seed(config.seed, cell, trial)
    gen_seed = derive_seed(seed, "gen")
    methods = _expand_methods(config)
    out = []
    if config.experiment in PLANTED_EXPERIMENTS:
        spec = PlantedSpec.balanced_pq(
            cell.n, cell.k, cell.m, cell.p, cell.q, cell.alpha, config.weight_law
        )
        h = generate(spec, gen_seed)
        truth = spec.psi
        for method in methods:
            method_seed = derive_seed(seed, "method", method)
            t0 = clock()
            part = _run_planted_method(method, h, cell, method_seed)
            wall_ms = (clock() - t0) * 1000.0
            err = clustering_error(truth, part)
            out.append(
                (
                    ResultRow(method, cell, trial, seed, err, err / cell.n, wall_ms),
                    truth,
                    part,
                )
            )
        return out
    r = cell.m - 2
    spec = SubspaceSpec(
        r_a=config.ambient_dim,
        k=cell.k,
        r=r,
        points_per=cell.n // cell.k,
        noise_sigma=cell.sigma_a,
    )
    cloud = generate_subspaces(spec, gen_seed)
    truth = cloud.labels
    # tetris runs before the single-round variant so the variant can reuse
    # the sigma it settled on; full-hypergraph methods share one sigma too
    ordered = sorted(methods, key=lambda name: 0 if name == "tetris" else 1)
    tetris_sigma: float | None = None
    full_h: WeightedUniformHypergraph | None = None
    results: dict[str, tuple[Partition, float]] = {}
    for method in ordered:
        method_seed = derive_seed(seed, "method", method)
        t0 = clock()
        if method == "tetris":
            res = tetris(
                cloud,
                cell.k,
                r,
                TetrisConfig(c=cell.c, sigma="auto", kernel=config.kernel),
                method_seed,
            )
            part = res.partition
            tetris_sigma = res.sigma
        elif method == "sampled_ttm":
            if tetris_sigma is not None:
                part = uniform_sampled_ttm_subspace(
                    cloud, cell.k, r, cell.c, tetris_sigma, method_seed,
                    kernel=config.kernel,
                )
            else:
                part = tetris(
                    cloud,
                    cell.k,
                    r,
                    TetrisConfig(
                        c=cell.c, sigma="auto", max_iters=1, kernel=config.kernel
                    ),
                    method_seed,
                ).partition
        elif method == "kmeans_embed":
            km = kmeans(cloud.points, cell.k, method_seed)
            part = Partition(km.labels, cell.k)
        else:
            if full_h is None:
                sigma = _full_hypergraph_sigma(
                    cloud, r, cell.k, derive_seed(seed, "fullsigma"), config.kernel
                )
                full_h = curvature_hypergraph(cloud, r, sigma, config.kernel)
            if method == "ttm":
                part = ttm_partition(full_h, cell.k, method_seed)
            elif method == "nhcut":
                part = nhcut_partition(full_h, cell.k, method_seed)
            elif method == "hosvd":
                part = hosvd_partition(full_h, cell.k, method_seed)
            else:
                raise DataError(f"unknown method {method!r}")
        wall_ms = (clock() - t0) * 1000.0
        results[method] = (part, wall_ms)
    for method in methods:
        part, wall_ms = results[method]
        err = clustering_error(truth, part)
        out.append(
            (
                ResultRow(method, cell, trial, seed, err, err / cell.n, wall_ms),
                truth,
                part,
            )
        )
    return out


def _run_planted_method(
    method: str, h: WeightedUniformHypergraph, cell: Cell, seed: int
) -> Partition:
    if method == "ttm":
        return ttm_partition(h, cell.k, seed)
    if method == "nhcut":
        return nhcut_partition(h, cell.k, seed)
    if method == "hosvd":
        return hosvd_partition(h, cell.k, seed)
    if method.startswith("sampled_ttm"):
        kind = method.partition(":")[2] or "uniform"
        if cell.sample_count is None:
            raise DataError("sampled_ttm needs a sampling.N value")
        plan = build_plan(h, kind, cell.sample_count)
        return sampled_ttm_partition(oracle_from_hypergraph(h), plan, cell.k, seed)
    raise DataError(f"unknown method {method!r}")


def _worker(args):
    config, cell, trial = args
    rows = run_trial(config, cell, trial)
    return [row for row, _, _ in rows]


@dataclass(frozen=True)
class RunArtifacts:
    results_csv: str
    summary_csv: str
    figures: tuple[str, ...]
    partitions_dir: str | None = None


def _row_sort_key(cells: tuple[str, ...]):
    return cells


def write_results_csv(rows: list[ResultRow], path: str) -> None:
    table = sorted((row.csv_cells() for row in rows), key=_row_sort_key)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(RESULT_COLUMNS) + "\n")
        for cells in table:
            fh.write(",".join(cells) + "\n")


def summarize(rows: list[ResultRow]) -> list[dict]:
    """Per (method, cell) aggregates: mean/median/standard-error of err."""
    groups: dict[tuple[str, str], list[ResultRow]] = {}
    for row in rows:
        groups.setdefault((row.method, row.cell.key()), []).append(row)
    out = []
    for (method, _), members in sorted(groups.items()):
        errs = np.array([r.err for r in members], dtype=np.float64)
        fracs = np.array([r.frac_err for r in members], dtype=np.float64)
        walls = np.array([r.wall_ms for r in members], dtype=np.float64)
        se = float(errs.std(ddof=1) / np.sqrt(len(errs))) if len(errs) > 1 else 0.0
        out.append(
            {
                "method": method,
                "cell": members[0].cell,
                "trials": len(members),
                "mean_err": float(errs.mean()),
                "median_err": float(median(errs.tolist())),
                "se_err": se,
                "mean_frac_err": float(fracs.mean()),
                "median_frac_err": float(median(fracs.tolist())),
                "mean_wall_ms": float(walls.mean()),
            }
        )
    return out


def write_summary_csv(summary: list[dict], path: str) -> None:
    header = (
        "method,n,m,k,p,q,alpha,sigma_a,N,c,trials,"
        "mean_err,median_err,se_err,mean_frac_err,median_frac_err,mean_wall_ms"
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for item in sorted(
            summary, key=lambda s: (s["method"], s["cell"].key())
        ):
            c = item["cell"]
            cells = [
                item["method"],
                str(c.n),
                str(c.m),
                str(c.k),
                _cell_str(c.p),
                _cell_str(c.q),
                _cell_str(c.alpha),
                _cell_str(c.sigma_a),
                _cell_str(c.sample_count),
                _cell_str(c.c),
                str(item["trials"]),
                repr(item["mean_err"]),
                repr(item["median_err"]),
                repr(item["se_err"]),
                repr(item["mean_frac_err"]),
                repr(item["median_frac_err"]),
                repr(item["mean_wall_ms"]),
            ]
            fh.write(",".join(cells) + "\n")


def _partition_file_stem(row: ResultRow) -> str:
    raw = f"{row.method}_{row.cell.key()}_t{row.trial}"
    return "".join(ch if ch.isalnum() or ch in "._-" else "-" for ch in raw)


def run_experiment(
    config: ExperimentConfig,
    out_dir: str,
    jobs: int = 1,
    clock: Callable[[], float] = time.perf_counter,
    keep_partitions: bool = False,
    figures: bool = True,
) -> RunArtifacts:
    """Execute the grid and write results.csv, summary.csv, and figures.

    ``clock`` is injectable so tests can pin the timing column; custom
    clocks require jobs = 1.  With ``keep_partitions`` every row's truth and
    estimate are persisted under ``out_dir``/partitions for re-validation.
    """
    import os

    if jobs < 1:
        raise DataError("jobs must be positive")
    if jobs > 1 and clock is not time.perf_counter:
        raise DataError("a custom clock requires jobs = 1")
    os.makedirs(out_dir, exist_ok=True)
    cells = build_cells(config)
    tasks = [(cell, trial) for cell in cells for trial in range(config.trials)]
    rows: list[ResultRow] = []
    partitions_dir = None
    if keep_partitions:
        partitions_dir = os.path.join(out_dir, "partitions")
        os.makedirs(partitions_dir, exist_ok=True)
    if jobs == 1:
        for cell, trial in tasks:
            for row, truth, estimate in run_trial(config, cell, trial, clock):
                rows.append(row)
                if keep_partitions:
                    stem = _partition_file_stem(row)
                    write_partition(
                        truth, os.path.join(partitions_dir, stem + ".truth.part")
                    )
                    write_partition(
                        estimate, os.path.join(partitions_dir, stem + ".est.part")
                    )
    else:
        from concurrent.futures import ProcessPoolExecutor

        if keep_partitions:
            raise DataError("keep_partitions requires jobs = 1")
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for chunk in pool.map(
                _worker, [(config, cell, trial) for cell, trial in tasks]
            ):
                rows.extend(chunk)
    results_csv = os.path.join(out_dir, "results.csv")
    summary_csv = os.path.join(out_dir, "summary.csv")
    write_results_csv(rows, results_csv)
    summary = summarize(rows)
    write_summary_csv(summary, summary_csv)
    figure_paths: tuple[str, ...] = ()
    if figures:
        from .figures import render_figures

        figure_paths = tuple(render_figures(config, summary, out_dir))
    return RunArtifacts(
        results_csv=results_csv,
        summary_csv=summary_csv,
        figures=figure_paths,
        partitions_dir=partitions_dir,
    )
