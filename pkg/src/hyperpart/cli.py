"""Command-line interface.

Usage summary::

    hyperpart gen-planted  --n 60 --k 3 --m 3 --p 0.1 --q 0.2 --seed 7 --out base
    hyperpart gen-subspace --ra 3 --k 3 --r 1 --points-per 40 --seed 7 --out pts.csv
    hyperpart partition         base.hg --method ttm --k 3 --seed 1 --out est.part
    hyperpart sampled-partition base.hg --dist weighted --samples 2000 --k 3 \
        --seed 1 --out est.part
    hyperpart tetris pts.csv --k 3 --r 1 --c 300 --seed 1 --out est.part
    hyperpart eval base.true.part est.part
    hyperpart run config.txt --out results/

Exit codes: 0 success, 2 usage error, 3 bad data, 4 non-convergence.
Stochastic commands require an explicit --seed.
"""
from __future__ import annotations

import argparse
import sys

from .core import (
    ConvergenceError,
    DataError,
    HypergraphError,
    oracle_from_hypergraph,
    read_hypergraph,
    read_partition,
    write_hypergraph,
    write_partition,
)
from .metrics import clustering_error
from .planted import PlantedSpec, generate
from .sampling import build_plan, default_sample_count, sampled_ttm_partition
from .spectral import hosvd_partition, nhcut_partition, ttm_partition
from .subspace import (
    SubspaceSpec,
    TetrisConfig,
    generate_subspaces,
    read_pointcloud,
    tetris,
    write_pointcloud,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_CONVERGENCE = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperpart",
        description="Spectral partitioning of weighted uniform hypergraphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-planted", help="draw a planted block-model hypergraph")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--p", type=float, required=True)
    g.add_argument("--q", type=float, required=True)
    g.add_argument("--alpha", type=float, default=1.0)
    g.add_argument(
        "--weight-law", choices=("bernoulli", "bounded_uniform"), default="bernoulli"
    )
    g.add_argument("--seed", type=int, required=True)
    g.add_argument(
        "--out",
        required=True,
        metavar="PREFIX",
        help="writes PREFIX.hg and PREFIX.true.part",
    )

    s = sub.add_parser("gen-subspace", help="draw points from random subspaces")
    s.add_argument("--ra", type=int, required=True, help="ambient dimension")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--r", type=int, required=True, help="subspace dimension")
    s.add_argument("--points-per", type=int, required=True)
    s.add_argument("--sigma-a", type=float, default=0.0, help="noise level")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True, metavar="CSV")

    p = sub.add_parser("partition", help="partition a hypergraph file")
    p.add_argument("hypergraph")
    p.add_argument("--method", choices=("ttm", "nhcut", "hosvd"), required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--out", required=True, metavar="PART")

    sp = sub.add_parser(
        "sampled-partition", help="partition from a sampled affinity estimate"
    )
    sp.add_argument("hypergraph")
    sp.add_argument("--dist", choices=("uniform", "weighted"), required=True)
    sp.add_argument(
        "--samples",
        type=int,
        default=None,
        help="draw budget N (default 8 n ceil(ln(n)^2))",
    )
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True, metavar="PART")

    t = sub.add_parser("tetris", help="iteratively sampled subspace clustering")
    t.add_argument("points", help="point cloud CSV")
    t.add_argument("--k", type=int, required=True)
    t.add_argument("--r", type=int, required=True)
    t.add_argument("--c", type=int, required=True, help="subsets per round")
    t.add_argument("--sigma", default="auto", help="'auto' or a positive float")
    t.add_argument("--max-iters", type=int, default=20)
    t.add_argument("--tol", type=float, default=0.01)
    t.add_argument(
        "--kernel", choices=("svd_residual", "polar_curvature"), default="svd_residual"
    )
    t.add_argument("--seed", type=int, required=True)
    t.add_argument("--out", required=True, metavar="PART")
    t.add_argument("--log", default=None, help="write the run log here")

    e = sub.add_parser("eval", help="compare two partition files")
    e.add_argument("truth")
    e.add_argument("estimate")

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--out", required=True, metavar="DIR")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--no-figures", action="store_true")
    r.add_argument("--keep-partitions", action="store_true")
    return parser


def _cmd_gen_planted(args) -> int:
    spec = PlantedSpec.balanced_pq(
        args.n, args.k, args.m, args.p, args.q, args.alpha, args.weight_law
    )
    h = generate(spec, args.seed)
    write_hypergraph(h, args.out + ".hg")
    write_partition(spec.psi, args.out + ".true.part")
    print(f"wrote {args.out}.hg ({h.num_edges()} edges) and {args.out}.true.part")
    return EXIT_OK


def _cmd_gen_subspace(args) -> int:
    spec = SubspaceSpec(
        r_a=args.ra,
        k=args.k,
        r=args.r,
        points_per=args.points_per,
        noise_sigma=args.sigma_a,
    )
    cloud = generate_subspaces(spec, args.seed)
    write_pointcloud(cloud, args.out)
    print(f"wrote {args.out} ({cloud.n} points in R^{cloud.ambient_dim})")
    return EXIT_OK


def _cmd_partition(args) -> int:
    h = read_hypergraph(args.hypergraph)
    if args.method == "ttm":
        part = ttm_partition(h, args.k, args.seed, args.restarts)
    elif args.method == "nhcut":
        part = nhcut_partition(h, args.k, args.seed, args.restarts)
    else:
        part = hosvd_partition(h, args.k, args.seed, args.restarts)
    write_partition(part, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_sampled_partition(args) -> int:
    h = read_hypergraph(args.hypergraph)
    n_samples = args.samples if args.samples is not None else default_sample_count(h.n)
    plan = build_plan(h, args.dist, n_samples)
    part = sampled_ttm_partition(oracle_from_hypergraph(h), plan, args.k, args.seed)
    write_partition(part, args.out)
    print(f"wrote {args.out} (N={n_samples}, {args.dist})")
    return EXIT_OK


def _cmd_tetris(args) -> int:
    cloud = read_pointcloud(args.points)
    sigma: str | float = args.sigma
    if sigma != "auto":
        try:
            sigma = float(sigma)
        except ValueError:
            raise DataError(f"--sigma must be 'auto' or a float, got {args.sigma!r}")
    config = TetrisConfig(
        c=args.c,
        sigma=sigma,
        max_iters=args.max_iters,
        convergence_tol=args.tol,
        kernel=args.kernel,
    )
    result = tetris(cloud, args.k, args.r, config, args.seed)
    write_partition(result.partition, args.out)
    if args.log is not None:
        with open(args.log, "w", encoding="utf-8") as fh:
            fh.write(f"iterations {result.iterations}\n")
            fh.write(f"sigma {result.sigma!r}\n")
            fh.write(
                "sigma_history " + " ".join(repr(s) for s in result.sigma_history) + "\n"
            )
            fh.write(
                "label_changes " + " ".join(str(c) for c in result.label_changes) + "\n"
            )
            for event in result.events:
                fh.write(f"event {event}\n")
    print(f"wrote {args.out} (iterations={result.iterations}, sigma={result.sigma:g})")
    return EXIT_OK


def _cmd_eval(args) -> int:
    truth = read_partition(args.truth)
    estimate = read_partition(args.estimate)
    err = clustering_error(truth, estimate)
    print(f"err={err} frac={err / truth.n}")
    return EXIT_OK


def _cmd_run(args) -> int:
    from .experiments import load_config, run_experiment

    config = load_config(args.config)
    artifacts = run_experiment(
        config,
        args.out,
        jobs=args.jobs,
        keep_partitions=args.keep_partitions,
        figures=not args.no_figures,
    )
    print(f"wrote {artifacts.results_csv}")
    print(f"wrote {artifacts.summary_csv}")
    for fig in artifacts.figures:
        print(f"wrote {fig}")
    return EXIT_OK


_COMMANDS = {
    "gen-planted": _cmd_gen_planted,
    "gen-subspace": _cmd_gen_subspace,
    "partition": _cmd_partition,
    "sampled-partition": _cmd_sampled_partition,
    "tetris": _cmd_tetris,
    "eval": _cmd_eval,
    "run": _cmd_run,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConvergenceError as exc:
        print(f"hyperpart: did not converge: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except DataError as exc:
        print(f"hyperpart: {exc}", file=sys.stderr)
        return EXIT_DATA
    except HypergraphError as exc:
        print(f"hyperpart: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"hyperpart: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
