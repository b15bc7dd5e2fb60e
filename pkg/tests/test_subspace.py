import itertools

import numpy as np
import pytest

import oracles
from hyperpart import (
    DataError,
    Partition,
    PointCloud,
    SubspaceSpec,
    TetrisConfig,
    clustering_error,
    estimate_sigma,
    fit_error,
    flatten,
    generate_subspaces,
    make_rng,
    sigma_candidates,
    tetris,
    ttm_partition,
    uniform_sampled_ttm_subspace,
)
from hyperpart.subspace import (
    _draw_subsets,
    _fit_matrix,
    _resample_quotas,
    accumulate_completions,
    curvature_hypergraph,
    edge_weight_oracle,
    fit_error_batch,
    read_pointcloud,
    write_pointcloud,
)


# --------------------------------------------------------------- generator


def test_generator_points_lie_in_bases_when_noiseless():
    spec = SubspaceSpec(r_a=5, k=3, r=2, points_per=10, noise_sigma=0.0)
    cloud = generate_subspaces(spec, seed=0)
    assert cloud.points.shape == (30, 5)
    for j, basis in enumerate(cloud.bases):
        block = cloud.points[cloud.labels.labels == j]
        resid = block - block @ basis @ basis.T
        assert np.abs(resid).max() <= 1e-12
        np.testing.assert_allclose(np.linalg.norm(block, axis=1), 1.0, atol=1e-12)


def test_generator_bases_orthonormal():
    cloud = generate_subspaces(SubspaceSpec(4, 2, 3, 5), seed=1)
    for basis in cloud.bases:
        np.testing.assert_allclose(basis.T @ basis, np.eye(3), atol=1e-12)


def test_generator_balanced_labels():
    cloud = generate_subspaces(SubspaceSpec(3, 3, 1, 7), seed=2)
    counts = np.bincount(cloud.labels.labels, minlength=3)
    assert counts.tolist() == [7, 7, 7]


def test_generator_deterministic():
    spec = SubspaceSpec(4, 2, 1, 6, noise_sigma=0.05)
    a = generate_subspaces(spec, seed=3)
    b = generate_subspaces(spec, seed=3)
    assert np.array_equal(a.points, b.points)
    c = generate_subspaces(spec, seed=4)
    assert not np.array_equal(a.points, c.points)


def test_generator_validation():
    with pytest.raises(DataError):
        SubspaceSpec(r_a=3, k=2, r=3, points_per=5)
    with pytest.raises(DataError):
        SubspaceSpec(r_a=3, k=0, r=1, points_per=5)
    with pytest.raises(DataError):
        SubspaceSpec(r_a=3, k=2, r=1, points_per=5, noise_sigma=-0.1)


def test_pointcloud_validation():
    with pytest.raises(DataError):
        PointCloud(points=np.zeros(3))
    with pytest.raises(DataError):
        PointCloud(points=np.zeros((3, 2)), labels=Partition(np.zeros(4, dtype=np.int64), 1))


# --------------------------------------------------------------- fit error


def test_fit_collinear_points_zero():
    pts = np.array([[1.0, 2.0], [2.0, 4.0], [-0.5, -1.0]])
    assert fit_error(pts, 1) == pytest.approx(0.0, abs=1e-12)


def test_fit_quadratic_in_orthogonal_perturbation():
    def f(delta):
        return fit_error(np.array([[1.0, 0.0], [2.0, 0.0], [3.0, delta]]), 1)

    assert f(1e-3) / f(1e-4) == pytest.approx(100.0, rel=1e-2)


def test_fit_matches_gram_tail_oracle():
    rng = make_rng(5)
    for _ in range(10):
        pts = rng.standard_normal((5, 5))
        want = oracles.gram_tail_fit(pts, 3)
        assert fit_error(pts, 3) == pytest.approx(want, abs=1e-10)


def test_fit_invariances():
    rng = make_rng(7)
    pts = rng.standard_normal((6, 4))
    base = fit_error(pts, 2)
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    assert fit_error(pts @ q, 2) == pytest.approx(base, rel=1e-10)
    assert fit_error(pts[rng.permutation(6)], 2) == pytest.approx(base, rel=1e-10)
    assert fit_error(3.0 * pts, 2) == pytest.approx(9.0 * base, rel=1e-10)


def test_fit_validation():
    pts = np.zeros((3, 2))
    with pytest.raises(DataError):
        fit_error(pts, 0)
    with pytest.raises(DataError):
        fit_error(pts, 3)  # needs r + 1 points
    with pytest.raises(DataError):
        fit_error(pts, 1, mode="nope")


def test_polar_curvature_zero_iff_low_rank():
    rng = make_rng(9)
    basis = np.linalg.qr(rng.standard_normal((4, 2)))[0]
    flat_pts = rng.standard_normal((5, 2)) @ basis.T
    assert fit_error(flat_pts, 2, mode="polar_curvature") == pytest.approx(0.0, abs=1e-12)
    full_pts = rng.standard_normal((5, 4))
    assert fit_error(full_pts, 2, mode="polar_curvature") > 1e-6


def test_polar_curvature_single_subset_matches_qr_oracle():
    # with exactly r + 1 points there is one (r + 1)-subset: the whole set
    rng = make_rng(11)
    pts = rng.standard_normal((3, 4))
    diffs = pts[:, None, :] - pts[None, :, :]
    diam_sq = (diffs**2).sum(axis=-1).max()
    want = diam_sq * oracles.polar_sine_sq_qr(pts)
    assert fit_error(pts, 2, mode="polar_curvature") == pytest.approx(want, rel=1e-10)


def test_polar_curvature_batch_averages_subsets():
    rng = make_rng(13)
    pts = rng.standard_normal((5, 4))
    acc = []
    for combo in itertools.combinations(range(5), 3):
        sub = pts[list(combo)]
        acc.append(oracles.polar_sine_sq_qr(sub))
    diffs = pts[:, None, :] - pts[None, :, :]
    diam_sq = (diffs**2).sum(axis=-1).max()
    want = diam_sq * float(np.mean(acc))
    assert fit_error(pts, 2, mode="polar_curvature") == pytest.approx(want, rel=1e-10)


# ------------------------------------------------------------------ oracle


def test_edge_weight_oracle_values():
    spec = SubspaceSpec(r_a=4, k=2, r=1, points_per=5, noise_sigma=0.0)
    cloud = generate_subspaces(spec, seed=15)
    oracle = edge_weight_oracle(cloud, r=1, sigma=0.5)
    assert oracle.m == 3
    # three points from one line fit exactly: weight e^0 = 1
    assert oracle.weight((0, 1, 2)) == pytest.approx(1.0, abs=1e-9)
    # a known fit error maps through exp(-f / sigma^2)
    mixed = (0, 1, 5)
    f = fit_error(cloud.points[list(mixed)], 1)
    assert oracle.weight(mixed) == pytest.approx(np.exp(-f / 0.25), rel=1e-12)


def test_edge_weight_oracle_monotone_in_fit():
    rng = make_rng(17)
    cloud = PointCloud(points=rng.standard_normal((8, 3)))
    oracle = edge_weight_oracle(cloud, r=1, sigma=1.0)
    edges = np.array(list(itertools.combinations(range(8), 3)))
    w = oracle.weights_for(edges)
    f = fit_error_batch(cloud.points[edges], 1)
    order = np.argsort(f)
    assert np.all(np.diff(w[order]) <= 1e-12)


def test_edge_weight_oracle_validation():
    cloud = PointCloud(points=np.zeros((5, 3)))
    with pytest.raises(DataError):
        edge_weight_oracle(cloud, r=1, sigma=0.0)
    with pytest.raises(DataError):
        edge_weight_oracle(PointCloud(points=np.zeros((2, 3))), r=1, sigma=1.0)


def test_sigma_candidates_grid():
    f = np.array([1.0, 2.0, 2.0, 3.0])
    rms = float(np.sqrt(np.mean(f**2)))
    grid = sigma_candidates(f)
    np.testing.assert_allclose(grid, rms * 2.0 ** -np.arange(7), atol=1e-15)
    with pytest.raises(DataError):
        sigma_candidates(np.array([]))


def test_estimate_sigma_floor_on_exact_data():
    spec = SubspaceSpec(r_a=3, k=2, r=1, points_per=6, noise_sigma=0.0)
    cloud = generate_subspaces(spec, seed=19)
    rng = make_rng(19)
    subsets = _draw_subsets(rng, np.arange(cloud.n), 40, 2)
    fit, valid = _fit_matrix(cloud.points, subsets, 1, "svd_residual")
    zero_fit = np.zeros_like(fit)
    sigma = estimate_sigma(zero_fit, subsets, 2, seed=0, valid=valid)
    assert sigma == pytest.approx(1e-6)


# ----------------------------------------------------- sampled accumulation


def test_accumulation_proportional_to_flatten():
    # all C(n, m - 1) subsets at unit weight reproduce the exact flattened
    # affinity of the unit-weight complete hypergraph, up to the (m - 2)!
    # pair multiplicity
    from math import factorial

    from hyperpart.core import all_edges_array

    n, r = 7, 1
    m = r + 2
    subsets = all_edges_array(n, m - 1)
    valid = ~np.any(
        subsets[None, :, :] == np.arange(n)[:, None, None], axis=2
    )
    weights = np.where(valid, 1.0, 0.0)
    a_hat = accumulate_completions(weights, subsets, n)
    edges = all_edges_array(n, m)
    h = __import__("hyperpart").WeightedUniformHypergraph(
        n, m, edges, np.ones(len(edges))
    )
    a_exact = flatten(h).a
    np.testing.assert_allclose(a_hat * factorial(m - 2), a_exact, atol=1e-12)


def test_fit_matrix_masks_subset_members():
    rng = make_rng(23)
    pts = rng.standard_normal((6, 3))
    subsets = np.array([[0, 1], [2, 3]])
    fit, valid = _fit_matrix(pts, subsets, 1, "svd_residual")
    assert fit.shape == (6, 2)
    assert not valid[0, 0] and not valid[1, 0]
    assert valid[2, 0] and valid[0, 1]
    want = fit_error(pts[[4, 0, 1]], 1)
    assert fit[4, 0] == pytest.approx(want, rel=1e-10)


def test_draw_subsets_distinct_members():
    rng = make_rng(29)
    pool = np.arange(5, 25)
    subsets = _draw_subsets(rng, pool, 200, 3)
    assert subsets.shape == (200, 3)
    assert np.all(subsets[:, :-1] < subsets[:, 1:])
    assert subsets.min() >= 5 and subsets.max() < 25


def test_resample_quotas():
    assert _resample_quotas(np.array([10, 10, 10]), 9).tolist() == [3, 3, 3]
    assert _resample_quotas(np.array([5, 20, 10]), 10).tolist() == [3, 4, 3]
    assert _resample_quotas(np.array([5, 20, 10]), 11).tolist() == [3, 4, 4]
    assert _resample_quotas(np.array([7, 7]), 1).tolist() == [1, 0]


# ------------------------------------------------------------------ tetris


def test_tetris_recovers_lines():
    spec = SubspaceSpec(r_a=3, k=3, r=1, points_per=20, noise_sigma=0.0)
    cloud = generate_subspaces(spec, seed=31)
    result = tetris(cloud, 3, 1, TetrisConfig(c=150), seed=31)
    assert clustering_error(cloud.labels, result.partition) == 0
    assert result.iterations <= 20
    assert len(result.sigma_history) == result.iterations


def test_tetris_degenerate_one_point_per_class():
    spec = SubspaceSpec(r_a=5, k=5, r=3, points_per=1, noise_sigma=0.0)
    cloud = generate_subspaces(spec, seed=33)
    result = tetris(cloud, 5, 3, TetrisConfig(c=1), seed=33)
    assert clustering_error(cloud.labels, result.partition) == 0


def test_tetris_single_round_equals_uniform_sampler():
    spec = SubspaceSpec(r_a=4, k=2, r=2, points_per=12, noise_sigma=0.02)
    cloud = generate_subspaces(spec, seed=35)
    config = TetrisConfig(c=60, sigma=0.3, max_iters=1)
    a = tetris(cloud, 2, 2, config, seed=7).partition
    b = uniform_sampled_ttm_subspace(cloud, 2, 2, c=60, sigma=0.3, seed=7)
    assert np.array_equal(a.labels, b.labels)


def test_tetris_deterministic():
    spec = SubspaceSpec(r_a=3, k=2, r=1, points_per=10, noise_sigma=0.05)
    cloud = generate_subspaces(spec, seed=37)
    config = TetrisConfig(c=40)
    a = tetris(cloud, 2, 1, config, seed=5)
    b = tetris(cloud, 2, 1, config, seed=5)
    assert np.array_equal(a.partition.labels, b.partition.labels)
    assert a.sigma_history == b.sigma_history


def test_tetris_label_renaming_equivariance():
    # permuting the points permutes the recovered classes accordingly;
    # verified through exact recovery on both orderings
    spec = SubspaceSpec(r_a=3, k=3, r=1, points_per=15, noise_sigma=0.0)
    cloud = generate_subspaces(spec, seed=39)
    rng = make_rng(40)
    perm = rng.permutation(cloud.n)
    shuffled = PointCloud(
        points=cloud.points[perm],
        labels=Partition(cloud.labels.labels[perm], 3),
    )
    for c, s in ((cloud, 41), (shuffled, 41)):
        result = tetris(c, 3, 1, TetrisConfig(c=150), seed=s)
        assert clustering_error(c.labels, result.partition) == 0


def test_tetris_small_cluster_event_logged():
    # k larger than the data supports forces at least one redraw event
    rng = make_rng(43)
    pts = np.vstack([rng.standard_normal((18, 3)), 1e-9 * rng.standard_normal((1, 3))])
    cloud = PointCloud(points=pts)
    result = tetris(cloud, 6, 1, TetrisConfig(c=30, max_iters=3), seed=43)
    assert result.iterations >= 1  # ran to completion; events list may be used
    for event in result.events:
        assert "redrawn over all points" in event


def test_tetris_validation():
    cloud = PointCloud(points=np.zeros((4, 3)))
    with pytest.raises(DataError):
        tetris(cloud, 2, 3, TetrisConfig(c=5), seed=0)  # n < r + 2
    with pytest.raises(DataError):
        tetris(cloud, 5, 1, TetrisConfig(c=5), seed=0)  # k > n
    with pytest.raises(DataError):
        TetrisConfig(c=0)
    with pytest.raises(DataError):
        TetrisConfig(c=5, sigma=-1.0)
    with pytest.raises(DataError):
        TetrisConfig(c=5, sigma="grid")
    with pytest.raises(DataError):
        TetrisConfig(c=5, convergence_tol=1.0)


def test_tetris_more_subsets_not_worse():
    # averaged over seeds, doubling the subset budget should not hurt
    spec = SubspaceSpec(r_a=4, k=3, r=2, points_per=15, noise_sigma=0.03)
    errs = {c: [] for c in (30, 120)}
    for seed in range(6):
        cloud = generate_subspaces(spec, seed=100 + seed)
        for c in errs:
            result = tetris(cloud, 3, 2, TetrisConfig(c=c), seed=seed)
            errs[c].append(clustering_error(cloud.labels, result.partition))
    assert np.mean(errs[120]) <= np.mean(errs[30]) + 1.0


def test_full_curvature_hypergraph_ttm_recovers_lines():
    spec = SubspaceSpec(r_a=3, k=2, r=1, points_per=10, noise_sigma=0.0)
    cloud = generate_subspaces(spec, seed=47)
    h = curvature_hypergraph(cloud, r=1, sigma=0.2)
    assert h.m == 3
    part = ttm_partition(h, 2, seed=47)
    assert clustering_error(cloud.labels, part) == 0


# ------------------------------------------------------------------ files


def test_pointcloud_roundtrip(tmp_path):
    spec = SubspaceSpec(r_a=3, k=2, r=1, points_per=4, noise_sigma=0.1)
    cloud = generate_subspaces(spec, seed=49)
    path = tmp_path / "cloud.csv"
    write_pointcloud(cloud, str(path))
    back = read_pointcloud(str(path))
    np.testing.assert_array_equal(back.points, cloud.points)
    assert np.array_equal(back.labels.labels, cloud.labels.labels)


def test_pointcloud_roundtrip_unlabeled(tmp_path):
    cloud = PointCloud(points=np.array([[0.5, 1.0], [2.0, 3.0]]))
    path = tmp_path / "plain.csv"
    write_pointcloud(cloud, str(path))
    back = read_pointcloud(str(path))
    assert back.labels is None
    np.testing.assert_array_equal(back.points, cloud.points)


def test_read_pointcloud_rejects_ragged(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1.0,2.0\n3.0\n")
    with pytest.raises(DataError):
        read_pointcloud(str(path))
