"""Joint nonnegative tri-factorization of two propagation matrices.

Both matrices are approximated around one shared k x k core::

    P_s ~ F_s A R_s^T,    P_t ~ F_t A R_t^T

minimizing ``||P_s - F_s A R_s^T||^2 + ||P_t - F_t A R_t^T||^2 + beta ||A||^2``
with multiplicative updates. Two rule sets are available for the four outer
factors: ``as_printed`` (denominator ``F F^T P R A^T``, the orthogonal
tri-factorization form) and ``standard_tri_nmf`` (denominator
``F A R^T R A^T``, the gradient split of the objective, which descends
monotonically).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

RULE_SETS = ("as_printed", "standard_tri_nmf")
FACTORS = ("F_s", "R_s", "F_t", "R_t")
NORMALIZATIONS = ("none", "rows", "columns")
DEFAULT_EPS = 1e-12


@dataclass(frozen=True)
class FitConfig:
    k: int = 10
    beta: float = 1.0
    max_sweeps: int = 200
    rel_tol: float = 1e-6
    seed: int = 0
    rule_set: str = "as_printed"
    normalize: Optional[str] = None
    epsilon: float = DEFAULT_EPS

    def __post_init__(self):
        if self.normalize is None:
            # unprojected, the printed rules invert the factor scale every sweep
            object.__setattr__(self, "normalize", "rows" if self.rule_set == "as_printed" else "none")
        if self.normalize not in NORMALIZATIONS:
            raise ValueError(f"normalize must be one of {NORMALIZATIONS}, got {self.normalize!r}")
        if self.k < 2:
            raise ValueError(f"k must be at least 2, got {self.k}")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.rule_set not in RULE_SETS:
            raise ValueError(f"rule_set must be one of {RULE_SETS}, got {self.rule_set!r}")
        if not 0 < self.epsilon <= 1e-6:
            raise ValueError("epsilon must lie in (0, 1e-6]")
        if self.max_sweeps < 0 or not self.rel_tol > 0:
            raise ValueError("max_sweeps must be >= 0 and rel_tol > 0")


@dataclass
class FactorizationState:
    F_s: np.ndarray
    R_s: np.ndarray
    F_t: np.ndarray
    R_t: np.ndarray
    A: np.ndarray
    beta: float = 0.0
    objective_history: list = field(default_factory=list)
    increases: list = field(default_factory=list)
    converged: bool = False

    @property
    def k(self) -> int:
        return self.A.shape[0]

    def copy(self) -> "FactorizationState":
        return replace(self, F_s=self.F_s.copy(), R_s=self.R_s.copy(), F_t=self.F_t.copy(),
                       R_t=self.R_t.copy(), A=self.A.copy(),
                       objective_history=list(self.objective_history), increases=list(self.increases))


@dataclass
class SingleFactorization:
    F: np.ndarray
    R: np.ndarray
    objective_history: list = field(default_factory=list)
    converged: bool = False


def _check_dims(state: FactorizationState, P_s: np.ndarray, P_t: np.ndarray) -> None:
    M, N, k = state.F_s.shape[0], state.F_t.shape[0], state.k
    expected = {"F_s": (M, k), "R_s": (M, k), "F_t": (N, k), "R_t": (N, k), "A": (k, k)}
    for name, shape in expected.items():
        if getattr(state, name).shape != shape:
            raise ValueError(f"{name} has shape {getattr(state, name).shape}, expected {shape}")
    if P_s.shape != (M, M) or P_t.shape != (N, N):
        raise ValueError(f"P_s {P_s.shape} / P_t {P_t.shape} do not match factors (M={M}, N={N})")


def objective(state: FactorizationState, P_s: np.ndarray, P_t: np.ndarray) -> float:
    _check_dims(state, P_s, P_t)
    rs = P_s - state.F_s @ state.A @ state.R_s.T
    rt = P_t - state.F_t @ state.A @ state.R_t.T
    return float(np.sum(rs * rs) + np.sum(rt * rt) + state.beta * np.sum(state.A * state.A))


def update_core(state: FactorizationState, P_s: np.ndarray, P_t: np.ndarray,
                eps: float = DEFAULT_EPS) -> np.ndarray:
    F_s, R_s, F_t, R_t, A = state.F_s, state.R_s, state.F_t, state.R_t, state.A
    num = F_s.T @ P_s @ R_s + F_t.T @ P_t @ R_t
    den = (F_s.T @ F_s) @ A @ (R_s.T @ R_s) + (F_t.T @ F_t) @ A @ (R_t.T @ R_t) + state.beta * A
    return A * num / (den + eps)


def update_factor(state: FactorizationState, which: str, P_s: np.ndarray, P_t: np.ndarray,
                  rule_set: str = "as_printed", eps: float = DEFAULT_EPS,
                  normalize: str = "none") -> np.ndarray:
    """One multiplicative update of an outer factor, optionally projected.

    ``normalize="rows"`` rescales each row to sum 1 (every node's latent
    memberships form a distribution); ``"columns"`` rescales each column.
    """
    if which not in FACTORS:
        raise ValueError(f"unknown factor {which!r}")
    if rule_set not in RULE_SETS:
        raise ValueError(f"unknown rule set {rule_set!r}")
    A = state.A
    if which.endswith("_s"):
        P, F, R = P_s, state.F_s, state.R_s
    else:
        P, F, R = P_t, state.F_t, state.R_t

    if which.startswith("F"):
        X = F
        num = P @ (R @ A.T)
        if rule_set == "as_printed":
            den = F @ (F.T @ num)
        else:
            den = F @ (A @ (R.T @ R) @ A.T)
    else:
        X = R
        num = P.T @ (F @ A)
        if rule_set == "as_printed":
            den = R @ (R.T @ num)
        else:
            den = R @ (A.T @ (F.T @ F) @ A)
    out = X * num / (den + eps)
    if normalize == "rows":
        sums = out.sum(axis=1, keepdims=True)
        out = out / np.where(sums > 0, sums, 1.0)
    elif normalize == "columns":
        sums = out.sum(axis=0)
        out = out / np.where(sums > 0, sums, 1.0)
    return out


def random_state(M: int, N: int, k: int, beta: float, seed: int) -> FactorizationState:
    """I.i.d. uniform (0, 1] factors."""
    rng = np.random.default_rng(seed)
    draw = lambda *shape: 1.0 - rng.random(shape)  # noqa: E731
    return FactorizationState(draw(M, k), draw(M, k), draw(N, k), draw(N, k), draw(k, k), beta=beta)


def _as_nonneg(P, name: str) -> np.ndarray:
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError(f"{name} must be square, got shape {P.shape}")
    if not np.isfinite(P).all():
        raise FloatingPointError(f"{name} has non-finite entries")
    if P.size and P.min() < -1e-10:
        raise ValueError(f"{name} has negative entries (min {P.min():.3g})")
    # roundoff negatives from the dense solve would break multiplicative updates
    return np.maximum(P, 0.0)


def _check_finite(state: FactorizationState, sweep: int) -> None:
    for name in ("A",) + FACTORS:
        M = getattr(state, name)
        if not np.isfinite(M).all():
            raise FloatingPointError(f"non-finite entries in {name} after sweep {sweep}")


def fit_joint(P_s, P_t, config: FitConfig = FitConfig(),
              init: Optional[FactorizationState] = None) -> FactorizationState:
    """Alternating multiplicative updates in the order A, F_s, R_s, F_t, R_t.

    ``objective_history[0]`` is the objective at initialization and entry ``i``
    the objective after sweep ``i``. Stops once the relative change of the
    objective drops below ``config.rel_tol``.
    """
    P_s, P_t = _as_nonneg(P_s, "P_s"), _as_nonneg(P_t, "P_t")
    if init is None:
        state = random_state(P_s.shape[0], P_t.shape[0], config.k, config.beta, config.seed)
    else:
        state = init.copy()
        state.beta = config.beta
        state.objective_history, state.increases = [], []
    _check_dims(state, P_s, P_t)

    eps = config.epsilon
    J = objective(state, P_s, P_t)
    state.objective_history.append(J)
    for sweep in range(1, config.max_sweeps + 1):
        state.A = update_core(state, P_s, P_t, eps)
        for name in FACTORS:
            setattr(state, name, update_factor(state, name, P_s, P_t, config.rule_set, eps,
                                               config.normalize))
        _check_finite(state, sweep)
        J_new = objective(state, P_s, P_t)
        state.objective_history.append(J_new)
        if J_new > J:
            state.increases.append((sweep, J_new - J))
            log.debug("objective increased by %.3g at sweep %d (%s rules)", J_new - J, sweep, config.rule_set)
        if J_new == 0.0 or (J > 0 and abs(J - J_new) / J < config.rel_tol):
            state.converged = True
            break
        J = J_new
    if state.increases:
        log.info("%d of %d sweeps increased the objective", len(state.increases),
                 len(state.objective_history) - 1)
    return state


def fit_single(P, k: int, max_sweeps: int = 200, rel_tol: float = 1e-6, seed: int = 0,
               eps: float = DEFAULT_EPS, init: Optional[tuple] = None) -> SingleFactorization:
    """Two-factor NMF ``P ~ F R^T`` with Lee-Seung multiplicative updates."""
    P = _as_nonneg(P, "P")
    n = P.shape[0]
    if k < 1:
        raise ValueError("k must be positive")
    if init is None:
        rng = np.random.default_rng(seed)
        F, R = 1.0 - rng.random((n, k)), 1.0 - rng.random((n, k))
    else:
        F, R = (np.array(m, dtype=np.float64) for m in init)

    def resid(F, R):
        E = P - F @ R.T
        return float(np.sum(E * E))

    history = [resid(F, R)]
    converged = False
    for sweep in range(1, max_sweeps + 1):
        F = F * (P @ R) / (F @ (R.T @ R) + eps)
        R = R * (P.T @ F) / (R @ (F.T @ F) + eps)
        if not (np.isfinite(F).all() and np.isfinite(R).all()):
            raise FloatingPointError(f"non-finite factor after sweep {sweep}")
        history.append(resid(F, R))
        prev, cur = history[-2], history[-1]
        if cur == 0.0 or (prev > 0 and abs(prev - cur) / prev < rel_tol):
            converged = True
            break
    return SingleFactorization(F, R, history, converged)


def quality_score(F_t: np.ndarray, labeled, labels: Sequence) -> float:
    """Class coherence of latent rows over labeled nodes.

    Sums the Gram matrix ``F_t F_t^T`` over ordered same-class pairs
    (including i == j), each class divided by its labeled count. ``labeled``
    is an index sequence or a split; ``labels`` is indexed by node, and
    classes with no labeled node contribute nothing.
    """
    F_t = np.asarray(F_t, dtype=np.float64)
    labeled = np.asarray(getattr(labeled, "labeled", labeled), dtype=np.int64)
    groups: dict = {}
    for i in labeled:
        groups.setdefault(labels[i], []).append(i)
    Q = 0.0
    for members in groups.values():
        # sum_{i,j in Z_c} <f_i, f_j> = ||sum_{i in Z_c} f_i||^2
        total = F_t[members].sum(axis=0)
        Q += float(total @ total) / len(members)
    return Q


def k_grid(k_max: int, step: int = 10) -> list[int]:
    """2, then multiples of ``step`` up to ``k_max``."""
    if k_max < 2:
        raise ValueError(f"K_max must be at least 2, got {k_max}")
    if step < 1:
        raise ValueError("step must be positive")
    grid = [2] + [k for k in range(step, k_max + 1, step) if k > 2]
    return grid


def pick_k(scores: Sequence[tuple[int, float]], mode: str = "max") -> int:
    """Best k from ``(k, Q)`` pairs; ``first_local_max`` stops at the first peak."""
    if not scores:
        raise ValueError("no scores")
    if mode == "max":
        best = max(q for _, q in scores)
        return min(k for k, q in scores if q == best)
    if mode == "first_local_max":
        for i, (k, q) in enumerate(scores):
            if i + 1 == len(scores) or q >= scores[i + 1][1]:
                return k
    raise ValueError(f"unknown selection mode {mode!r}")


def select_k(P_s, P_t, labeled, labels: Sequence, k_max: int,
             config: FitConfig = FitConfig(), step: int = 10, grid: Optional[Sequence[int]] = None,
             mode: str = "max") -> tuple[int, list[tuple[int, float]]]:
    """Fit the joint factorization for each candidate k and keep the best quality score."""
    if k_max < 2:
        raise ValueError(f"K_max must be at least 2, got {k_max}")
    ks = k_grid(k_max, step) if grid is None else sorted({int(k) for k in grid if 2 <= k <= k_max})
    if not ks:
        raise ValueError("empty k grid")
    scores = []
    for k in ks:
        state = fit_joint(P_s, P_t, replace(config, k=k))
        scores.append((k, quality_score(state.F_t, labeled, labels)))
    return pick_k(scores, mode), scores
