"""Affinity matrices, the normalized operator and label propagation matrices."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg

from .graph import Network

log = logging.getLogger(__name__)

NEUMANN_ORDER = 30


@dataclass(frozen=True)
class AffinityConfig:
    kernel: str = "binary"
    sigma: float = 1.0
    alpha: float = 0.5
    squared_norm: bool = False

    def __post_init__(self):
        if self.kernel not in ("binary", "gaussian"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")
        if self.kernel == "gaussian" and not self.sigma > 0:
            raise ValueError("gaussian kernel needs sigma > 0")


@dataclass(frozen=True, eq=False)
class PropagationMatrix:
    p: np.ndarray
    alpha: float
    source_network: Optional[Network] = None

    @property
    def n(self) -> int:
        return self.p.shape[0]


class PropagationResult(NamedTuple):
    labels: np.ndarray
    converged: bool
    iterations: int


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")


def affinity_matrix(network: Network, config: AffinityConfig = AffinityConfig()) -> np.ndarray:
    """Dense edge-restricted affinity W; W_ii = 0."""
    n = network.n
    W = np.zeros((n, n))
    if not len(network.edges):
        return W
    i, j = network.edges[:, 0], network.edges[:, 1]
    if config.kernel == "binary":
        w = np.ones(len(i))
    else:
        X = network.features
        if X.shape[1] == 0 or not np.isfinite(X).all():
            raise ValueError("gaussian kernel needs a finite feature vector on every node")
        dist = np.linalg.norm(X[i] - X[j], axis=1)
        if config.squared_norm:
            dist = dist ** 2
        w = np.exp(-dist / (2.0 * config.sigma ** 2))
    W[i, j] = w
    W[j, i] = w
    return W


def normalized_operator(W: np.ndarray) -> np.ndarray:
    """L = D^-1/2 W D^-1/2 with D^-1/2 taken as 0 at zero-degree nodes."""
    W = np.asarray(W, dtype=np.float64)
    if (W < 0).any():
        raise ValueError("affinity matrix has negative entries")
    deg = W.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    L = inv_sqrt[:, None] * W * inv_sqrt[None, :]
    return 0.5 * (L + L.T)


def propagate_labels(L: np.ndarray, Y0: np.ndarray, alpha: float,
                     tol: float = 1e-12, max_iter: int = 10_000) -> PropagationResult:
    """Iterate Y <- alpha L Y + (1 - alpha) Y0 from Y0 until the max entry change is below ``tol``."""
    _check_alpha(alpha)
    Y0 = np.asarray(Y0, dtype=np.float64)
    Y = Y0.copy()
    for it in range(1, max_iter + 1):
        nxt = alpha * (L @ Y) + (1.0 - alpha) * Y0
        delta = np.max(np.abs(nxt - Y)) if Y.size else 0.0
        Y = nxt
        if delta < tol:
            return PropagationResult(Y, True, it)
    log.warning("label propagation did not converge in %d iterations", max_iter)
    return PropagationResult(Y, False, max_iter)


def propagation_matrix(L: np.ndarray, alpha: float, method: str = "solve",
                       order: int = NEUMANN_ORDER, network: Optional[Network] = None) -> PropagationMatrix:
    """P = (I - alpha L)^-1, by dense solve or the truncated series sum_{i<=order} (alpha L)^i."""
    _check_alpha(alpha)
    L = np.asarray(L, dtype=np.float64)
    n = L.shape[0]
    eye = np.eye(n)
    if method == "solve":
        try:
            # I - alpha L is symmetric positive definite when |eig(L)| <= 1
            P = scipy.linalg.solve(eye - alpha * L, eye, assume_a="pos")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
            raise RuntimeError(f"propagation solve failed: {exc}") from exc
        P = 0.5 * (P + P.T)
    elif method == "neumann":
        P = eye.copy()
        term = eye
        aL = alpha * L
        for _ in range(order):
            term = aL @ term
            P += term
    else:
        raise ValueError(f"unknown method {method!r}")
    return PropagationMatrix(P, float(alpha), network)


def network_propagation(network: Network, config: AffinityConfig = AffinityConfig(),
                        method: str = "solve") -> PropagationMatrix:
    L = normalized_operator(affinity_matrix(network, config))
    return propagation_matrix(L, config.alpha, method=method, network=network)
