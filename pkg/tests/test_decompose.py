import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jgse.decompose import (Decomposition, assemble_blocks, eigengap_suggest_d, exact_blocks,
                            spectral_cluster, split_dataset)
from jgse.metrics import rand_index
from jgse.model import DataError, neg_log_likelihood
from jgse.synth import NetworkSpec, generate_network, simulate

from conftest import random_data


def _union_find(mask):
    p = mask.shape[0]
    parent = list(range(p))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in zip(*np.nonzero(mask)):
        parent[find(i)] = find(j)
    roots = [find(i) for i in range(p)]
    return {frozenset(np.flatnonzero(np.array(roots) == r)) for r in set(roots)}


def _groups(dec):
    return {frozenset(b.tolist()) for b in dec.blocks}


def _planted_jag(sizes, rng, density=0.6):
    p = sum(sizes)
    perm = rng.permutation(p)
    C = np.zeros((p, p))
    start = 0
    for k in sizes:
        idx = perm[start:start + k]
        # a path keeps each block connected; extra edges are random
        for a, b in zip(idx[:-1], idx[1:]):
            C[a, b] = rng.uniform(0.5, 1.0)
        extra = rng.uniform(0.5, 1.0, (k, k)) * (rng.random((k, k)) < density)
        C[np.ix_(idx, idx)] += extra
        start += k
    C = C + C.T
    np.fill_diagonal(C, 0.0)
    return C, perm


def test_empty_graph_gives_singletons():
    dec = exact_blocks(np.zeros((5, 5)))
    assert dec.d == 5
    np.testing.assert_array_equal(dec.labels, np.arange(5))


def test_single_edge():
    C = np.zeros((4, 4))
    C[0, 1] = C[1, 0] = 0.7
    assert _groups(exact_blocks(C)) == {frozenset({0, 1}), frozenset({2}), frozenset({3})}


@given(st.integers(0, 10_000))
def test_exact_blocks_matches_union_find(seed):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(2, 15))
    mask = rng.random((p, p)) < 0.12
    mask = np.triu(mask | mask.T, 1)
    C = np.where(mask | mask.T, rng.uniform(0.1, 2.0, (p, p)), 0.0)
    C = np.triu(C, 1) + np.triu(C, 1).T
    dec = exact_blocks(C)
    assert _groups(dec) == _union_find(mask)
    assert _groups(exact_blocks(3.5 * C)) == _groups(dec)


def test_planted_blocks_recovered(rng):
    C, perm = _planted_jag((5, 7, 4), rng)
    truth = {frozenset(perm[:5].tolist()), frozenset(perm[5:12].tolist()), frozenset(perm[12:].tolist())}
    assert _groups(exact_blocks(C)) == truth
    assert _groups(spectral_cluster(C, 3)) == truth


def test_spectral_single_cluster(rng):
    C, _ = _planted_jag((4, 4), rng)
    assert spectral_cluster(C, 1).d == 1


def test_spectral_deterministic_and_seed_robust(rng):
    C, _ = _planted_jag((6, 6, 6), rng)
    a = spectral_cluster(C, 3, seed=0)
    np.testing.assert_array_equal(a.labels, spectral_cluster(C, 3, seed=0).labels)
    assert rand_index(a.labels, spectral_cluster(C, 3, seed=99).labels) == 1.0


def test_spectral_isolated_nodes_appended():
    C = np.zeros((5, 5))
    C[0, 1] = C[1, 0] = 1.0
    C[3, 4] = C[4, 3] = 1.0
    dec = spectral_cluster(C, 2)
    assert dec.d == 3
    assert _groups(dec) == {frozenset({0, 1}), frozenset({3, 4}), frozenset({2})}


def test_spectral_rejects_too_many_clusters():
    with pytest.raises(ValueError):
        spectral_cluster(np.ones((3, 3)), 4)


def test_eigengap_three_blocks(rng):
    C, _ = _planted_jag((5, 6, 5), rng)
    assert eigengap_suggest_d(C) == 3


def test_eigengap_complete_graph():
    # L_sym of K_p has eigenvalues 0 and p/(p-1) (multiplicity p-1)
    C = np.ones((8, 8)) - np.eye(8)
    assert eigengap_suggest_d(C) == 1


def test_eigengap_empty_graph_warns():
    with pytest.warns(RuntimeWarning):
        assert eigengap_suggest_d(np.zeros((30, 30))) == 20
    with pytest.warns(RuntimeWarning):
        assert eigengap_suggest_d(np.zeros((4, 4))) == 4


def test_labels_read_only():
    dec = Decomposition(np.array([0, 1, 0]))
    with pytest.raises(ValueError):
        dec.labels[0] = 1


def test_split_single_cluster_returns_input():
    data = random_data(3, 10)
    assert split_dataset(data, Decomposition(np.zeros(3, dtype=int)))[0] is data


def test_split_two_univariate():
    data = random_data(2, 10)
    a, b = split_dataset(data, Decomposition(np.array([0, 1])))
    np.testing.assert_array_equal(a.X[:, 0], data.X[:, 0])
    np.testing.assert_array_equal(b.Y[:, 0], data.Y[:, 1])
    assert a.names == (data.names[0],) and b.names == (data.names[1],)


def test_split_reassembles(rng):
    data = random_data(7, 15, normalize=True)
    dec = Decomposition(rng.integers(0, 3, 7))
    parts = split_dataset(data, dec)
    perm = dec.permutation()
    np.testing.assert_array_equal(np.hstack([d.X for d in parts]), data.X[:, perm])
    np.testing.assert_array_equal(np.hstack([d.Y for d in parts]), data.Y[:, perm])
    np.testing.assert_array_equal(np.hstack([d.x_scale for d in parts]), data.x_scale[perm])


def test_split_label_length_checked():
    with pytest.raises(DataError):
        split_dataset(random_data(3, 10), Decomposition(np.array([0, 1])))


def test_loss_is_additive_over_true_blocks():
    spec = NetworkSpec(p=12, block_sizes=(5, 7), seed=3)
    B, Omega = generate_network(spec)
    data = simulate(B, omega=Omega, n=40, seed=1, center=True)
    dec = Decomposition(np.repeat([0, 1], [5, 7]))
    parts = split_dataset(data, dec)
    total = sum(neg_log_likelihood(B[np.ix_(b, b)], Omega[np.ix_(b, b)], d)
                for b, d in zip(dec.blocks, parts))
    assert abs(total - neg_log_likelihood(B, Omega, data)) <= 1e-8 * abs(total)


def test_assemble_blocks_embeds():
    blocks = [np.array([0, 2]), np.array([1])]
    out = assemble_blocks(blocks, [np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[5.0]])], 3)
    np.testing.assert_array_equal(out, [[1, 0, 2], [0, 5, 0], [3, 0, 4]])


def test_no_warning_on_connected_graph(rng):
    C, _ = _planted_jag((4, 4), rng)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        eigengap_suggest_d(C)
