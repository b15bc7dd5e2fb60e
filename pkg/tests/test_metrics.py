import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from hyperpart import (
    DataError,
    Partition,
    PlantedSpec,
    SizeCapError,
    WeightedUniformHypergraph,
    all_edges_array,
    clustering_error,
    expected_affinity,
    fractional_error,
    make_rng,
    normalized_associativity,
    tensor_trace_nassoc,
)
from hyperpart.metrics import (
    ConfusionMatrix,
    _best_agreement_assignment,
    _best_agreement_brute_force,
)
from hyperpart.spectral import FlattenedAffinity, ttm_partition_from_affinity


def part(labels, k=None):
    labels = np.asarray(labels)
    return Partition(labels, k if k is not None else int(labels.max()) + 1)


def random_h(n, m, seed):
    rng = make_rng(seed)
    edges = all_edges_array(n, m)
    keep = rng.random(len(edges)) < 0.6
    return WeightedUniformHypergraph(n, m, edges[keep], rng.random(int(keep.sum())))


def test_error_zero_on_equal():
    p = part([0, 1, 0, 2])
    assert clustering_error(p, p) == 0


def test_error_zero_on_relabeling():
    assert clustering_error(part([0, 0, 1, 1]), part([1, 1, 0, 0])) == 0


def test_error_one_disagreement():
    assert clustering_error(part([0, 0, 1, 1]), part([0, 1, 1, 1])) == 1


def test_error_length_mismatch():
    with pytest.raises(DataError):
        clustering_error(part([0, 1]), part([0, 1, 0]))


def test_error_pads_mismatched_k():
    a = Partition(np.array([0, 0, 1, 1]), 2)
    b = Partition(np.array([0, 0, 1, 2]), 3)
    assert clustering_error(a, b) == 1
    assert clustering_error(b, a) == 1


def test_fractional_error():
    assert fractional_error(part([0, 0, 1, 1]), part([0, 1, 1, 1])) == pytest.approx(0.25)


def test_confusion_matrix_counts():
    cm = ConfusionMatrix.from_partitions(part([0, 0, 1, 1]), part([0, 1, 1, 1]))
    assert cm.counts.tolist() == [[1, 1], [0, 2]]
    assert cm.counts.sum() == 4


def test_error_range_and_relabel_invariance():
    rng = make_rng(9)
    for _ in range(25):
        n = int(rng.integers(2, 9))
        k = int(rng.integers(1, 5))
        a = rng.integers(0, k, n)
        b = rng.integers(0, k, n)
        err = clustering_error(Partition(a, k), Partition(b, k))
        assert 0 <= err <= n
        assert err == oracles.best_error_by_enumeration(a.tolist(), b.tolist(), k)
        # relabeling either side leaves the error alone
        perm = rng.permutation(k)
        assert clustering_error(Partition(perm[a], k), Partition(b, k)) == err
        assert clustering_error(Partition(b, k), Partition(a, k)) == err


def test_error_zero_iff_relabeling():
    rng = make_rng(11)
    for _ in range(20):
        n, k = 7, 3
        a = rng.integers(0, k, n)
        b = rng.integers(0, k, n)
        err = clustering_error(Partition(a, k), Partition(b, k))
        fixable = any(
            all(a[i] == perm[b[i]] for i in range(n))
            for perm in itertools.permutations(range(k))
        )
        assert (err == 0) == fixable


def test_assignment_path_matches_enumeration():
    rng = make_rng(3)
    for k in (2, 3, 4, 5, 6):
        for _ in range(6):
            counts = rng.integers(0, 7, (k, k))
            assert _best_agreement_assignment(counts) == _best_agreement_brute_force(counts)


def test_large_k_uses_assignment_and_agrees_with_enumeration():
    rng = make_rng(21)
    n, k = 40, 9
    a = rng.integers(0, k, n)
    b = rng.integers(0, k, n)
    err = clustering_error(Partition(a, k), Partition(b, k))
    assert err == oracles.best_error_by_enumeration(a.tolist(), b.tolist(), k)


def test_nassoc_single_cluster_is_one_over_m():
    for m in (2, 3):
        h = random_h(7, m, seed=m)
        p = Partition(np.zeros(7, dtype=np.int64), 1)
        assert normalized_associativity(h, p) == pytest.approx(1.0 / m, abs=1e-12)


def test_nassoc_no_inside_edges():
    h = WeightedUniformHypergraph(3, 3, np.array([[0, 1, 2]]), np.array([1.0]))
    p = Partition(np.array([0, 0, 1]), 2)
    assert normalized_associativity(h, p) == 0.0


def test_nassoc_empty_cluster_contributes_zero():
    h = WeightedUniformHypergraph(4, 2, np.array([[0, 1]]), np.array([1.0]))
    # class 2 is empty, classes with zero volume are skipped
    p = Partition(np.array([0, 0, 1, 1]), 3)
    val = normalized_associativity(h, p)
    # edge (0,1) inside class 0: assoc 1, vol 2; the other classes add nothing
    assert val == pytest.approx(0.5)


def test_nassoc_matches_definition_loops():
    h = random_h(7, 3, seed=5)
    rng = make_rng(6)
    edges = [e for e, _ in h.edge_list()]
    weights = [w for _, w in h.edge_list()]
    for _ in range(10):
        labels = rng.integers(0, 3, 7)
        got = normalized_associativity(h, Partition(labels, 3))
        want = oracles.nassoc_loops(7, 3, edges, weights, labels.tolist(), 3)
        assert got == pytest.approx(want, abs=1e-12)


def test_trace_form_matches_nassoc_seeded():
    h = random_h(7, 3, seed=5)
    rng = make_rng(8)
    for _ in range(5):
        labels = rng.integers(0, 3, 7)
        p = Partition(labels, 3)
        want = normalized_associativity(h, p)
        got = tensor_trace_nassoc(h, p)
        assert got == pytest.approx(want, abs=1e-12)


def test_trace_form_single_edge_single_cluster():
    h = WeightedUniformHypergraph(3, 3, np.array([[0, 1, 2]]), np.array([1.0]))
    p = Partition(np.zeros(3, dtype=np.int64), 1)
    val = tensor_trace_nassoc(h, p, betas=(1 / 3, 1 / 3, 1 / 3))
    assert val == pytest.approx(1.0 / 3.0, abs=1e-14)


def test_trace_form_beta_independent():
    h = random_h(6, 3, seed=13)
    rng = make_rng(14)
    labels = rng.integers(0, 2, 6)
    p = Partition(labels, 2)
    a = tensor_trace_nassoc(h, p, betas=(0.5, 0.5, 0.0))
    b = tensor_trace_nassoc(h, p, betas=(1 / 3, 1 / 3, 1 / 3))
    assert a == pytest.approx(b, abs=1e-12)


def test_trace_form_zero_weights():
    h = WeightedUniformHypergraph(4, 3, np.empty((0, 3), dtype=np.int64), np.empty(0))
    for labels in ([0, 0, 0, 0], [0, 1, 0, 1], [0, 1, 2, 3]):
        p = part(labels)
        assert tensor_trace_nassoc(h, p) == 0.0


def test_trace_form_validates_betas_and_size():
    h = random_h(6, 3, seed=1)
    p = Partition(np.zeros(6, dtype=np.int64), 1)
    with pytest.raises(DataError):
        tensor_trace_nassoc(h, p, betas=(0.5, 0.5, 0.5))
    big = random_h(11, 3, seed=2)
    with pytest.raises(SizeCapError):
        tensor_trace_nassoc(big, Partition(np.zeros(11, dtype=np.int64), 1))


@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3]))
@settings(max_examples=30, deadline=None)
def test_trace_identity_property(seed, m):
    """The trace form agrees with the direct sum for any simplex betas."""
    rng = make_rng(seed)
    n = int(rng.integers(m, 9))
    h = random_h(n, m, seed=int(rng.integers(0, 2**32)))
    k = int(rng.integers(1, 4))
    p = Partition(rng.integers(0, k, n), k)
    raw = rng.random(m) + 1e-3
    betas = tuple(raw / raw.sum())
    want = normalized_associativity(h, p)
    assert tensor_trace_nassoc(h, p, betas) == pytest.approx(want, abs=1e-12)


def test_ground_truth_maximizes_nassoc_on_expected_affinity():
    spec = PlantedSpec.balanced_pq(10, 2, 3, 0.2, 0.2, 1.0)
    aff = expected_affinity(spec)
    # treat the expected pair-sum matrix as a 2-uniform hypergraph
    n = spec.n
    pairs = np.array(list(itertools.combinations(range(n), 2)))
    weights = np.array([aff[i, j] for i, j in pairs])
    weights = weights / weights.max()
    h2 = WeightedUniformHypergraph(n, 2, pairs, weights)
    truth_val = normalized_associativity(h2, spec.psi)
    rng = make_rng(77)
    for _ in range(200):
        labels = rng.integers(0, 2, n)
        assert normalized_associativity(h2, Partition(labels, 2)) <= truth_val + 1e-12


def test_eval_against_recovered_partition():
    spec = PlantedSpec.balanced_pq(30, 2, 3, 0.3, 0.2, 1.0)
    aff = expected_affinity(spec)
    got = ttm_partition_from_affinity(aff, 2, seed=0, m=3)
    assert clustering_error(spec.psi, got) == 0
