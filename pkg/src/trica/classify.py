"""Logistic base model, relational aggregation, ICA and the transfer pipeline."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.special import expit, log_expit

from .factorization import FitConfig, FactorizationState, fit_joint, select_k
from .graph import LabeledSplit, Network
from .propagation import AffinityConfig, network_propagation

log = logging.getLogger(__name__)

AGGREGATIONS = ("proportion", "count", "mode")


@dataclass(frozen=True)
class LogisticConfig:
    l2: float = 1e-3
    max_iter: int = 2000
    tol: float = 1e-6
    initial_step: float = 1.0


@dataclass
class BaseModel:
    weights: np.ndarray
    bias: float
    l2: float
    trained: bool = False
    constant_prior: bool = False
    loss_history: list = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class IcaConfig:
    max_iterations: int = 50
    seed: int = 0
    aggregation: str = "proportion"
    stability: int = 0
    retrain: bool = False

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {AGGREGATIONS}")


@dataclass
class IcaResult:
    """Per-node class indices into the network's label set, with P(positive)."""

    predicted: np.ndarray
    probabilities: np.ndarray
    passes: int
    converged: bool
    changes: list
    label_set: tuple

    @property
    def labels(self) -> list[str]:
        return [self.label_set[c] for c in self.predicted]


def logistic_loss_grad(params: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float) -> tuple[float, np.ndarray]:
    """Mean logistic loss plus ``l2/2 ||w||^2``; ``params`` is ``[w, b]``, y in {0, 1}."""
    w, b = params[:-1], params[-1]
    z = X @ w + b
    sign = 2.0 * y - 1.0
    loss = -np.mean(log_expit(sign * z)) + 0.5 * l2 * (w @ w)
    r = (expit(z) - y) / len(y)
    grad = np.empty_like(params)
    grad[:-1] = X.T @ r + l2 * w
    grad[-1] = r.sum()
    return float(loss), grad


def train_base(X, y, l2: float = 1e-3, config: LogisticConfig = LogisticConfig()) -> BaseModel:
    """L2-regularized logistic regression by batch gradient descent.

    The step is found by Armijo backtracking at the first iteration and then
    held fixed; it is only halved again if a step would raise the loss.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"feature matrix {X.shape} does not match {y.shape[0]} labels")
    if not np.isfinite(X).all():
        raise ValueError("non-finite features")
    d = X.shape[1]
    pos = int(y.sum())
    if pos == 0 or pos == len(y):
        # one class only: smoothed prior, no weights
        prior = (pos + 1.0) / (len(y) + 2.0)
        return BaseModel(np.zeros(d), float(np.log(prior / (1 - prior))), l2, trained=False, constant_prior=True)

    params = np.zeros(d + 1)
    loss, grad = logistic_loss_grad(params, X, y, l2)
    history = [loss]
    step = config.initial_step
    g2 = grad @ grad
    while True:
        trial_loss, _ = logistic_loss_grad(params - step * grad, X, y, l2)
        if trial_loss <= loss - 0.5 * step * g2 or step < 1e-12:
            break
        step *= 0.5
    for _ in range(config.max_iter):
        if np.sqrt(grad @ grad) < config.tol:
            break
        trial = params - step * grad
        trial_loss, trial_grad = logistic_loss_grad(trial, X, y, l2)
        while trial_loss > loss and step > 1e-12:
            step *= 0.5
            trial = params - step * grad
            trial_loss, trial_grad = logistic_loss_grad(trial, X, y, l2)
        params, loss, grad = trial, trial_loss, trial_grad
        history.append(loss)
    return BaseModel(params[:-1].copy(), float(params[-1]), l2, trained=True, loss_history=history)


def predict_proba(model: BaseModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != model.dim:
        raise ValueError(f"feature dimension {X.shape[-1]} != model dimension {model.dim}")
    return expit(X @ model.weights + model.bias)


def predict(model: BaseModel, feature) -> tuple[int, float]:
    """``(1, p)`` when P(positive) >= 0.5, else ``(0, p)``."""
    p = float(predict_proba(model, np.asarray(feature, dtype=np.float64).reshape(-1)))
    return int(p >= 0.5), p


def aggregate(counts: np.ndarray, aggregation: str = "proportion") -> np.ndarray:
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if aggregation == "count":
        return counts
    if total == 0:
        return np.zeros_like(counts)
    if aggregation == "proportion":
        return counts / total
    if aggregation == "mode":
        out = np.zeros_like(counts)
        out[int(np.argmax(counts))] = 1.0
        return out
    raise ValueError(f"unknown aggregation {aggregation!r}")


def relational_features(network: Network, current: np.ndarray, node: int,
                        aggregation: str = "proportion") -> np.ndarray:
    """Aggregate current neighbor assignments (class indices, -1 = none) per class."""
    adj = network._adj
    nbrs = adj.indices[adj.indptr[node]:adj.indptr[node + 1]]
    assigned = current[nbrs]
    counts = np.bincount(assigned[assigned >= 0], minlength=len(network.label_set))
    return aggregate(counts, aggregation)


def _relational_block(network: Network, current: np.ndarray, aggregation: str) -> np.ndarray:
    n_classes = len(network.label_set)
    onehot = np.zeros((network.n, n_classes))
    known = current >= 0
    onehot[np.flatnonzero(known), current[known]] = 1.0
    counts = network._adj @ onehot
    return np.vstack([aggregate(row, aggregation) for row in counts])


def run_ica(network: Network, split: LabeledSplit, latent: Optional[np.ndarray] = None,
            config: IcaConfig = IcaConfig(), base: LogisticConfig = LogisticConfig()) -> IcaResult:
    """Iterative classification on a binary-labeled network.

    Only labels of ``split.labeled`` are read. The base model is trained once on
    the labeled nodes (relational features from labeled neighbors only), then
    unlabeled nodes are bootstrapped and re-predicted in seeded random order
    until no assignment changes or ``max_iterations`` passes are done.
    """
    n = network.n
    pos = network.positive_index()
    truth = network.label_index()
    labeled = np.asarray(split.labeled, dtype=np.int64)
    unlabeled = np.asarray(split.unlabeled, dtype=np.int64)
    if len(np.intersect1d(labeled, unlabeled)) or len(labeled) + len(unlabeled) != n:
        raise ValueError("split is not a partition of the network's nodes")
    if (truth[labeled] < 0).any():
        raise ValueError("split marks nodes without a label as labeled")

    blocks = [network.features]
    if latent is not None:
        latent = np.asarray(latent, dtype=np.float64)
        if latent.shape[0] != n:
            raise ValueError(f"latent features have {latent.shape[0]} rows for {n} nodes")
        blocks.append(latent)
    static = np.hstack(blocks)

    current = np.full(n, -1, dtype=np.int64)
    current[labeled] = truth[labeled]
    y_train = (truth[labeled] == pos).astype(np.float64)

    def fit(assign):
        rel = _relational_block(network, assign, config.aggregation)[labeled]
        return train_base(np.hstack([static[labeled], rel]), y_train, base.l2, base)

    model = fit(current)
    neg = 1 - pos
    probs = np.where(current == pos, 1.0, 0.0)

    # bootstrap: relational features from observed neighbors only
    rel = _relational_block(network, current, config.aggregation)
    if len(unlabeled):
        p = predict_proba(model, np.hstack([static[unlabeled], rel[unlabeled]]))
        probs[unlabeled] = p
        current[unlabeled] = np.where(p >= 0.5, pos, neg)

    rng = np.random.default_rng(config.seed)
    changes, converged, passes = [], len(unlabeled) == 0, 0
    while not converged and passes < config.max_iterations:
        passes += 1
        if config.retrain:
            model = fit(current)
        changed = 0
        for i in rng.permutation(unlabeled):
            x = np.concatenate([static[i], relational_features(network, current, i, config.aggregation)])
            label, p = predict(model, x)
            new = pos if label == 1 else neg
            probs[i] = p
            if new != current[i]:
                current[i] = new
                changed += 1
        changes.append(changed)
        converged = changed <= config.stability
    if not converged:
        log.info("ICA stopped after %d passes without stabilizing", passes)
    return IcaResult(current, probs, passes, converged, changes, network.label_set)


@dataclass(frozen=True)
class PipelineConfig:
    affinity: AffinityConfig = AffinityConfig()
    fit: FitConfig = FitConfig()
    k: Optional[int] = None
    k_max: int = 20
    k_step: int = 10
    k_mode: str = "max"
    standardize_latent: bool = True
    ica: IcaConfig = IcaConfig()
    base: LogisticConfig = LogisticConfig()


@dataclass
class LatentFeatures:
    rows: np.ndarray
    k: int
    scores: list
    state: Optional[FactorizationState] = None


def prepare_latent(F: np.ndarray, standardize: bool) -> np.ndarray:
    """Optionally z-score latent columns; constant columns map to zero."""
    if not standardize:
        return F
    std = F.std(axis=0)
    return (F - F.mean(axis=0)) / np.where(std > 0, std, 1.0)


def transfer_features(source: Network, target: Network, split: LabeledSplit,
                      config: PipelineConfig = PipelineConfig()) -> LatentFeatures:
    """Latent structure rows F_t from the joint factorization of both propagation matrices."""
    P_s = network_propagation(source, config.affinity).p
    P_t = network_propagation(target, config.affinity).p
    truth = target.label_index()
    scores: list = []
    if config.k is None:
        k, scores = select_k(P_s, P_t, split.labeled, truth, max(2, config.k_max), config.fit,
                             step=config.k_step, mode=config.k_mode)
    else:
        k = max(2, int(config.k))
    state = fit_joint(P_s, P_t, replace(config.fit, k=k))
    return LatentFeatures(state.F_t, k, scores, state)


def tr_ica(source: Network, target: Network, split: LabeledSplit,
           config: PipelineConfig = PipelineConfig()) -> IcaResult:
    latent = transfer_features(source, target, split, config)
    return run_ica(target, split, prepare_latent(latent.rows, config.standardize_latent), config.ica, config.base)
