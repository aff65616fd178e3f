"""LINQS dataset parsing, synthetic planted-partition networks, and network files.

LINQS ``.content`` lines are ``id f1 ... fd label`` and ``.cites`` lines are
``cited citing``; any mix of tabs and spaces separates columns.

The canonical network file is line-oriented text::

    trica-network 1
    n <n> d <d> m <m> positive <label or ->
    classes <c1> <c2> ...
    <id>\t<label or ?>\t<j:v j:v ...>      (n lines, nonzero features only)
    <i>\t<j>                               (m lines, i < j)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .graph import Network

log = logging.getLogger(__name__)

NETWORK_MAGIC = "trica-network"
NETWORK_VERSION = 1


class FormatError(ValueError):
    """Malformed dataset or network file."""


@dataclass(frozen=True)
class LinqsDataset:
    content_path: Path
    cites_path: Path

    @classmethod
    def from_dir(cls, directory, stem: str) -> "LinqsDataset":
        directory = Path(directory)
        return cls(directory / f"{stem}.content", directory / f"{stem}.cites")


@dataclass(frozen=True)
class LinqsStats:
    raw_links: int
    edges: int
    dangling: int
    self_links: int


@dataclass(frozen=True)
class PlantedPartitionParams:
    block_sizes: Sequence[int]
    p_in: float
    p_out: float
    feature_dim: int = 16
    feature_noise: float = 1.0
    seed: int = 0
    label_prefix: str = "block"


def read_linqs(dataset: LinqsDataset) -> tuple[Network, LinqsStats]:
    content_path, cites_path = Path(dataset.content_path), Path(dataset.cites_path)
    ids, labels, rows = [], [], []
    width = None
    with content_path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 2:
                raise FormatError(f"{content_path}:{lineno}: expected 'id features... label'")
            if width is None:
                width = len(parts)
            elif len(parts) != width:
                raise FormatError(
                    f"{content_path}:{lineno}: feature dimension {len(parts) - 2}, expected {width - 2}")
            ids.append(parts[0])
            labels.append(parts[-1])
            try:
                rows.append([float(v) for v in parts[1:-1]])
            except ValueError as exc:
                raise FormatError(f"{content_path}:{lineno}: {exc}") from None
    if not ids:
        raise FormatError(f"{content_path}: empty content file")

    index = {node: i for i, node in enumerate(ids)}
    if len(index) != len(ids):
        raise FormatError(f"{content_path}: duplicate node ids")
    raw, dangling, self_links = 0, 0, 0
    pairs = []
    with cites_path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise FormatError(f"{cites_path}:{lineno}: expected 'cited citing'")
            raw += 1
            a, b = index.get(parts[0]), index.get(parts[1])
            if a is None or b is None:
                dangling += 1
            elif a == b:
                self_links += 1
            else:
                pairs.append((a, b))

    features = np.array(rows, dtype=np.float64).reshape(len(ids), width - 2)
    network = Network(tuple(ids), np.array(pairs, dtype=np.int64).reshape(-1, 2), features, tuple(labels))
    stats = LinqsStats(raw, len(network.edges), dangling, self_links)
    if dangling:
        log.warning("%s: dropped %d citations to ids absent from %s", cites_path, dangling, content_path.name)
    return network, stats


def load_linqs(dataset: LinqsDataset) -> Network:
    network, stats = read_linqs(dataset)
    log.info("loaded %d nodes, %d raw links, %d undirected edges", network.n, stats.raw_links, stats.edges)
    return network


def generate_planted_partition(params: PlantedPartitionParams) -> Network:
    """Two-level stochastic block model with class-prototype features.

    Node features are ``prototype[block] + feature_noise * N(0, I)`` where the
    prototypes are standard normal draws.
    """
    sizes = [int(s) for s in params.block_sizes]
    if not sizes or min(sizes) < 1:
        raise ValueError("block sizes must be positive")
    for name in ("p_in", "p_out"):
        value = getattr(params, name)
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must be a probability, got {value}")
    if params.feature_dim < 1 or params.feature_noise < 0:
        raise ValueError("feature_dim must be positive and feature_noise nonnegative")

    rng = np.random.default_rng(params.seed)
    block = np.repeat(np.arange(len(sizes)), sizes)
    n = block.size
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(block[iu] == block[ju], params.p_in, params.p_out)
    keep = rng.random(iu.size) < prob
    edges = np.column_stack([iu[keep], ju[keep]])

    prototypes = rng.standard_normal((len(sizes), params.feature_dim))
    features = prototypes[block] + params.feature_noise * rng.standard_normal((n, params.feature_dim))
    width = len(str(n - 1))
    node_ids = tuple(f"n{i:0{width}d}" for i in range(n))
    labels = tuple(f"{params.label_prefix}{b}" for b in block)
    return Network(node_ids, edges, features, labels)


def _format_value(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def write_network(network: Network, path) -> None:
    positive = network.positive_label if network.positive_label is not None else "-"
    with Path(path).open("w") as fh:
        fh.write(f"{NETWORK_MAGIC} {NETWORK_VERSION}\n")
        fh.write(f"n {network.n} d {network.n_features} m {len(network.edges)} positive {positive}\n")
        fh.write("classes " + " ".join(network.label_set) + "\n")
        for node, label, row in zip(network.node_ids, network.labels, network.features):
            nz = np.flatnonzero(row)
            feats = " ".join(f"{j}:{_format_value(row[j])}" for j in nz)
            fh.write(f"{node}\t{'?' if label is None else label}\t{feats}\n")
        for i, j in network.edges:
            fh.write(f"{i}\t{j}\n")


def read_network(path) -> Network:
    path = Path(path)
    with path.open() as fh:
        lines = fh.read().split("\n")
    try:
        magic, version = lines[0].split()
        if magic != NETWORK_MAGIC:
            raise FormatError(f"{path}: not a network file")
        if int(version) != NETWORK_VERSION:
            raise FormatError(f"{path}: unsupported network file version {version}")
        head = lines[1].split()
        n, d, m = int(head[1]), int(head[3]), int(head[5])
        positive = None if head[7] == "-" else head[7]
        classes = tuple(lines[2].split()[1:])
        ids, labels = [], []
        features = np.zeros((n, d))
        for i, line in enumerate(lines[3:3 + n]):
            node, label, feats = line.split("\t")
            ids.append(node)
            labels.append(None if label == "?" else label)
            for tok in feats.split():
                j, v = tok.split(":")
                features[i, int(j)] = float(v)
        edges = np.array([[int(t) for t in line.split("\t")] for line in lines[3 + n:3 + n + m]],
                         dtype=np.int64).reshape(-1, 2)
    except (IndexError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{path}: malformed network file ({exc})") from None
    if len(ids) != n or len(edges) != m:
        raise FormatError(f"{path}: truncated network file")
    return Network(tuple(ids), edges, features, tuple(labels), classes, positive)
