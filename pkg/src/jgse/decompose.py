"""Splitting a network into subnetworks from its joint association graph."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from sklearn.cluster import KMeans

from .model import DataError, TimeSeriesDataset


@dataclass(frozen=True)
class Decomposition:
    """Node partition; ``labels[i]`` is the 0-based cluster of node ``i``."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int)
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    @property
    def d(self) -> int:
        return int(np.unique(self.labels).size)

    @property
    def blocks(self) -> list:
        """Sorted node indices of each cluster, ordered by first appearance."""
        _, first = np.unique(self.labels, return_index=True)
        order = self.labels[np.sort(first)]
        return [np.flatnonzero(self.labels == k) for k in order]

    def permutation(self) -> np.ndarray:
        """Node order that lists clusters contiguously."""
        return np.concatenate(self.blocks)


def _canonical(labels) -> np.ndarray:
    """Relabel clusters 0..d-1 in order of first appearance."""
    labels = np.asarray(labels)
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=int)
    rank[np.argsort(first)] = np.arange(first.size)
    return rank[inv.ravel()]


def exact_blocks(C) -> Decomposition:
    """Connected components of the graph ``{(i, j): c_ij != 0}``."""
    C = np.asarray(C)
    _, labels = connected_components(csr_matrix(C != 0), directed=False)
    return Decomposition(_canonical(labels))


def _sym_laplacian(W: np.ndarray) -> np.ndarray:
    g = W.sum(axis=1)
    s = 1.0 / np.sqrt(g)
    return np.eye(W.shape[0]) - s[:, None] * W * s[None, :]


def spectral_cluster(C, d: int, seed: int = 0, n_init: int = 50,
                     max_iter: int = 200) -> Decomposition:
    """Normalized-Laplacian spectral clustering of a similarity matrix.

    Nodes with zero degree are left out of the embedding and each becomes its
    own cluster, numbered after the ``d`` requested ones.
    """
    W = np.abs(np.asarray(C, dtype=float))
    W = 0.5 * (W + W.T)
    np.fill_diagonal(W, 0.0)
    p = W.shape[0]
    if d < 1:
        raise ValueError("d must be at least 1")
    if d > p:
        raise ValueError(f"cannot form {d} clusters from {p} nodes")
    active = W.sum(axis=1) > 0
    labels = np.empty(p, dtype=int)
    idx = np.flatnonzero(active)
    k = min(d, idx.size)
    if k == 1:
        labels[idx] = 0
    elif k > 1:
        Lsym = _sym_laplacian(W[np.ix_(idx, idx)])
        _, vecs = np.linalg.eigh(Lsym)
        U = vecs[:, :k]
        norms = np.linalg.norm(U, axis=1, keepdims=True)
        U = U / np.where(norms > 0, norms, 1.0)
        km = KMeans(n_clusters=k, init="k-means++", n_init=n_init,
                    max_iter=max_iter, random_state=seed)
        labels[idx] = km.fit_predict(U)
    iso = np.flatnonzero(~active)
    labels[iso] = k + np.arange(iso.size)
    return Decomposition(_canonical(labels))


def eigengap_suggest_d(C, max_d: int = 20) -> int:
    """Cluster count at the largest gap of the normalized Laplacian spectrum.

    Zero-degree nodes are left out (``spectral_cluster`` gives them their own
    clusters).  An all-zero C returns ``min(p, max_d)`` with a warning.
    """
    W = np.abs(np.asarray(C, dtype=float))
    W = 0.5 * (W + W.T)
    np.fill_diagonal(W, 0.0)
    p = W.shape[0]
    active = W.sum(axis=1) > 0
    if not active.any():
        warnings.warn("association graph has no edges; every node is isolated",
                      RuntimeWarning, stacklevel=2)
        return min(p, max_d)
    idx = np.flatnonzero(active)
    if idx.size < 3:
        return 1
    vals = np.linalg.eigvalsh(_sym_laplacian(W[np.ix_(idx, idx)]))
    top = min(idx.size - 1, max_d)
    gaps = np.diff(vals[: top + 1])
    return int(np.argmax(gaps)) + 1


def split_dataset(data: TimeSeriesDataset, dec: Decomposition) -> list:
    """One dataset per cluster, restricted to that cluster's columns."""
    if len(dec.labels) != data.p:
        raise DataError("labels do not cover every node")
    blocks = dec.blocks
    if len(blocks) == 1:
        return [data]
    return [data.subset(b) for b in blocks]


def assemble_blocks(blocks, mats, p: int) -> np.ndarray:
    """Embed per-block square matrices into a p x p block-diagonal matrix."""
    out = np.zeros((p, p))
    for idx, M in zip(blocks, mats):
        out[np.ix_(idx, idx)] = M
    return out
