"""Attributed undirected networks and labeled/unlabeled splits."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

NEGATIVE_PREFIX = "not_"


def round_half_away(x: float) -> int:
    """Round to nearest integer, halves away from zero (Python's round() is banker's)."""
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable attributed graph.

    ``edges`` holds each undirected edge once as ``(i, j)`` with ``i < j``,
    sorted lexicographically. ``labels[i]`` is a class id or ``None``.
    """

    node_ids: tuple[str, ...]
    edges: np.ndarray
    features: np.ndarray
    labels: tuple[Optional[str], ...]
    label_set: tuple[str, ...] = ()
    positive_label: Optional[str] = None
    _adj: sp.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        n = len(self.node_ids)
        if len(set(self.node_ids)) != n:
            raise ValueError("duplicate node ids")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise ValueError("edge endpoint out of range")
        # canonical form: direction ignored, no self-links, no duplicates
        edges = edges[edges[:, 0] != edges[:, 1]]
        edges = np.sort(edges, axis=1)
        edges = np.unique(edges, axis=0) if edges.size else edges.reshape(0, 2)
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim == 1 and n == 0:
            features = features.reshape(0, 0)
        if features.ndim != 2 or features.shape[0] != n:
            raise ValueError(f"features must have shape (n, d) with n={n}")
        if len(self.labels) != n:
            raise ValueError("labels must have one entry per node")
        present = sorted({y for y in self.labels if y is not None})
        label_set = tuple(self.label_set) if self.label_set else tuple(present)
        unknown = set(present) - set(label_set)
        if unknown:
            raise ValueError(f"labels outside label set: {sorted(unknown)}")
        if self.positive_label is not None and self.positive_label not in label_set:
            raise ValueError(f"positive label {self.positive_label!r} not in label set")

        edges.setflags(write=False)
        features.setflags(write=False)
        data = np.ones(2 * len(edges))
        rows = np.concatenate([edges[:, 0], edges[:, 1]])
        cols = np.concatenate([edges[:, 1], edges[:, 0]])
        adj = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
        adj.sort_indices()
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "label_set", label_set)
        object.__setattr__(self, "_adj", adj)

    @property
    def n(self) -> int:
        return len(self.node_ids)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency in CSR form (a copy)."""
        return self._adj.copy()

    def label_index(self) -> np.ndarray:
        """Class index into ``label_set`` per node, -1 for unlabeled."""
        lookup = {c: i for i, c in enumerate(self.label_set)}
        return np.array([lookup[y] if y is not None else -1 for y in self.labels], dtype=np.int64)

    def positive_index(self) -> int:
        """Index of the positive class in ``label_set`` for binary tasks."""
        if len(self.label_set) != 2:
            raise ValueError(f"binary task expected, got {len(self.label_set)} classes")
        if self.positive_label is None:
            return 0
        return self.label_set.index(self.positive_label)

    def degrees(self) -> np.ndarray:
        return np.diff(self._adj.indptr)

    def with_labels(self, labels: Sequence[Optional[str]], label_set=None, positive_label=None) -> "Network":
        return Network(self.node_ids, self.edges, self.features, tuple(labels),
                       tuple(label_set) if label_set is not None else (), positive_label)

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return (self.node_ids == other.node_ids
                and np.array_equal(self.edges, other.edges)
                and np.array_equal(self.features, other.features)
                and self.labels == other.labels
                and self.label_set == other.label_set
                and self.positive_label == other.positive_label)

    __hash__ = None


@dataclass(frozen=True)
class LabeledSplit:
    labeled: np.ndarray
    unlabeled: np.ndarray
    fraction: float
    seed: int

    def labeled_mask(self, n: int) -> np.ndarray:
        mask = np.zeros(n, dtype=bool)
        mask[self.labeled] = True
        return mask


def neighbors(network: Network, node: int) -> list[int]:
    if not 0 <= node < network.n:
        raise IndexError(f"node {node} out of range for network of {network.n} nodes")
    adj = network._adj
    return adj.indices[adj.indptr[node]:adj.indptr[node + 1]].tolist()


def largest_class(network: Network) -> str:
    """Most frequent labeled class; ties go to the first class in sorted order."""
    counts = Counter(y for y in network.labels if y is not None)
    if not counts:
        raise ValueError("network has no labeled nodes")
    best = max(counts.values())
    return min(c for c, k in counts.items() if k == best)


def binarize_labels(network: Network, positive: str) -> Network:
    if positive not in network.label_set:
        raise ValueError(f"unknown class id {positive!r}")
    if network.positive_label == positive and len(network.label_set) == 2:
        return network
    negative = NEGATIVE_PREFIX + positive
    labels = [None if y is None else (positive if y == positive else negative) for y in network.labels]
    return network.with_labels(labels, label_set=sorted([positive, negative]), positive_label=positive)


def split_labeled(network: Network, fraction: float, seed: int, stratified: bool = False) -> LabeledSplit:
    """Random labeled/unlabeled partition with ``round(fraction * n)`` labeled nodes (at least one)."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    n = network.n
    size = min(n, max(1, round_half_away(fraction * n)))
    rng = np.random.default_rng(seed)
    if stratified:
        y = network.label_index()
        if (y < 0).any():
            raise ValueError("stratified split needs a fully labeled network")
        # one representative per class first, then fill uniformly
        chosen = []
        for c in rng.permutation(len(network.label_set)):
            members = np.flatnonzero(y == c)
            if members.size and len(chosen) < size:
                chosen.append(int(rng.choice(members)))
        rest = np.setdiff1d(np.arange(n), chosen)
        extra = rng.choice(rest, size=size - len(chosen), replace=False)
        labeled = np.sort(np.concatenate([np.array(chosen, dtype=np.int64), extra]))
    else:
        labeled = np.sort(rng.choice(n, size=size, replace=False))
    unlabeled = np.setdiff1d(np.arange(n), labeled)
    return LabeledSplit(labeled.astype(np.int64), unlabeled.astype(np.int64), float(fraction), int(seed))
