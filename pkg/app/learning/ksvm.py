"""C-SVC trained with SMO, plus the one-vs-one multiclass wrapper.

Kernels are either precomputed (the caller passes Gram matrices) or computed
from features with scikit-learn's ``pairwise_kernels`` (linear, RBF).
"""
import enum
import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from sklearn.metrics.pairwise import pairwise_kernels

from app.core.errors import DataError, ShapeError
from app.numerics.linalg import as_matrix

logger = logging.getLogger(__name__)

TAU = 1e-12
VARIANCE_FLOOR = 1e-12


class KernelKind(str, enum.Enum):
    PRECOMPUTED = "precomputed"
    LINEAR = "linear"
    RBF = "rbf"


class SvmConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    c_reg: float = Field(1.0, gt=0)
    kernel_kind: KernelKind = KernelKind.PRECOMPUTED
    gamma: Union[Literal["scale"], float] = "scale"
    tol: float = Field(1e-3, gt=0)
    max_iter: int = Field(100_000, ge=1)


def scale_gamma(x):
    """gamma = 1 / (d * Var(X)) with the population variance over all entries."""
    x = np.asarray(x, dtype=np.float64)
    return 1.0 / (x.shape[1] * max(float(x.var()), VARIANCE_FLOOR))


def rbf_kernel(x1, x2, gamma="scale"):
    """exp(-gamma * ||x1_i - x2_j||^2); ``gamma="scale"`` is computed from ``x2``, the training side."""
    x1 = as_matrix(x1, "rbf rows")
    x2 = as_matrix(x2, "rbf columns")
    if x1.shape[0] and x1.shape[1] != x2.shape[1]:
        raise ShapeError(f"feature dimensions differ: {x1.shape[1]} vs {x2.shape[1]}")
    gamma = scale_gamma(x2) if gamma == "scale" else float(gamma)
    if x1.shape[0] == 0:
        return np.zeros((0, x2.shape[0]))
    return pairwise_kernels(x1, x2, metric="rbf", gamma=gamma)


def linear_kernel(x1, x2):
    x1 = as_matrix(x1, "linear rows")
    x2 = as_matrix(x2, "linear columns")
    if x1.shape[0] == 0:
        return np.zeros((0, x2.shape[0]))
    if x1.shape[1] != x2.shape[1]:
        raise ShapeError(f"feature dimensions differ: {x1.shape[1]} vs {x2.shape[1]}")
    return pairwise_kernels(x1, x2, metric="linear")


@dataclass(frozen=True)
class DualSolution:
    alpha: np.ndarray
    bias: float
    objective: float
    converged: bool
    n_iter: int


def solve_dual(kernel, y, c_reg, tol=1e-3, max_iter=100_000):
    """SMO with maximal-violating-pair working sets.

    Maximizes sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij subject to
    0 <= alpha_i <= C and sum(alpha_i y_i) = 0.
    """
    k = np.asarray(kernel, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    if k.shape != (n, n):
        raise ShapeError(f"kernel {k.shape} does not match {n} labels")
    q = (y[:, None] * y[None, :]) * k
    diag = np.diag(q).copy()
    alpha = np.zeros(n)
    grad = -np.ones(n)
    converged = False
    n_iter = 0
    while n_iter < max_iter:
        score = -y * grad
        up = ((y > 0) & (alpha < c_reg)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c_reg))
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.flatnonzero(up)[np.argmax(score[up])])
        j = int(np.flatnonzero(low)[np.argmin(score[low])])
        if score[i] - score[j] <= tol:
            converged = True
            break
        n_iter += 1
        old_i, old_j = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(diag[i] + diag[j] + 2.0 * q[i, j], TAU)
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
            if diff > 0:
                if alpha[i] > c_reg:
                    alpha[i] = c_reg
                    alpha[j] = c_reg - diff
            elif alpha[j] > c_reg:
                alpha[j] = c_reg
                alpha[i] = c_reg + diff
        else:
            quad = max(diag[i] + diag[j] - 2.0 * q[i, j], TAU)
            delta = (grad[i] - grad[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > c_reg:
                if alpha[i] > c_reg:
                    alpha[i] = c_reg
                    alpha[j] = total - c_reg
            elif alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = total
            if total > c_reg:
                if alpha[j] > c_reg:
                    alpha[j] = c_reg
                    alpha[i] = total - c_reg
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = total
        grad += q[:, i] * (alpha[i] - old_i) + q[:, j] * (alpha[j] - old_j)
    if not converged:
        logger.warning(f"SMO reached the iteration cap ({max_iter}) on {n} samples")
    bias = -_rho(grad, y, alpha, c_reg)
    objective = float(alpha.sum() - 0.5 * alpha @ q @ alpha)
    return DualSolution(alpha=alpha, bias=bias, objective=objective, converged=converged, n_iter=n_iter)


def _rho(grad, y, alpha, c_reg):
    yg = y * grad
    free = (alpha > 0) & (alpha < c_reg)
    if free.any():
        return float(yg[free].mean())
    at_upper = alpha >= c_reg
    at_lower = alpha <= 0
    # Bounds from the KKT conditions at the box edges.
    ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = float(yg[ub_mask].min()) if ub_mask.any() else np.inf
    lb = float(yg[lb_mask].max()) if lb_mask.any() else -np.inf
    if np.isinf(ub) or np.isinf(lb):
        return 0.0 if np.isinf(ub) and np.isinf(lb) else (ub if np.isfinite(ub) else lb)
    return 0.5 * (ub + lb)


@dataclass(frozen=True)
class BinarySvmModel:
    support_indices: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    kernel_kind: KernelKind
    converged: bool
    dual_objective: float
    n_iter: int
    gamma: Optional[float] = None
    support_vectors: Optional[np.ndarray] = None
    alpha: np.ndarray = field(default=None, repr=False)


def _train_gram(x, cfg):
    if cfg.kernel_kind is KernelKind.PRECOMPUTED:
        k = as_matrix(x, "precomputed kernel")
        if k.shape[0] != k.shape[1]:
            raise ShapeError(f"precomputed training kernel must be square, got {k.shape}")
        return k, None
    x = as_matrix(x, "training features")
    if cfg.kernel_kind is KernelKind.LINEAR:
        return linear_kernel(x, x), None
    gamma = scale_gamma(x) if cfg.gamma == "scale" else float(cfg.gamma)
    return rbf_kernel(x, x, gamma), gamma


def fit_binary(x, labels, cfg):
    """Fit a C-SVC on labels in {-1, +1}; ``x`` is a Gram matrix in precomputed mode."""
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise DataError("binary labels must be -1 or +1")
    if not ((y > 0).any() and (y < 0).any()):
        raise DataError("binary SVM needs at least one sample of each class")
    gram, gamma = _train_gram(x, cfg)
    if gram.shape[0] != y.shape[0]:
        raise ShapeError(f"{gram.shape[0]} training rows for {y.shape[0]} labels")
    sol = solve_dual(gram, y, cfg.c_reg, cfg.tol, cfg.max_iter)
    support = np.flatnonzero(sol.alpha > 0)
    vectors = None if cfg.kernel_kind is KernelKind.PRECOMPUTED else np.asarray(x, dtype=np.float64)[support]
    return BinarySvmModel(
        support_indices=support,
        dual_coefs=sol.alpha[support] * y[support],
        bias=sol.bias,
        kernel_kind=cfg.kernel_kind,
        converged=sol.converged,
        dual_objective=sol.objective,
        n_iter=sol.n_iter,
        gamma=gamma,
        support_vectors=vectors,
        alpha=sol.alpha,
    )


def decision_function(model, x):
    """Decision values; in precomputed mode ``x`` holds kernel columns over the model's training rows."""
    if model.kernel_kind is KernelKind.PRECOMPUTED:
        k = as_matrix(x, "eval kernel")
        if k.shape[0] == 0:
            return np.zeros(0)
        cols = k[:, model.support_indices]
    elif model.kernel_kind is KernelKind.LINEAR:
        cols = linear_kernel(x, model.support_vectors)
    else:
        cols = rbf_kernel(x, model.support_vectors, model.gamma)
    return cols @ model.dual_coefs + model.bias


@dataclass(frozen=True)
class MulticlassSvmModel:
    n_classes: int
    kernel_kind: KernelKind
    # (class_a, class_b) -> (model, training row indices); +1 means class_a.
    pairs: dict


def fit_multiclass(x, labels, cfg, n_classes=None):
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    n_classes = int(labels.max()) + 1 if n_classes is None else n_classes
    counts = np.bincount(labels, minlength=n_classes)
    if np.any(counts == 0):
        raise DataError(f"classes {np.flatnonzero(counts == 0).tolist()} have no training samples")
    pairs = {}
    for a, b in combinations(range(n_classes), 2):
        rows = np.flatnonzero((labels == a) | (labels == b))
        y = np.where(labels[rows] == a, 1.0, -1.0)
        if cfg.kernel_kind is KernelKind.PRECOMPUTED:
            sub = np.asarray(x)[np.ix_(rows, rows)]
        else:
            sub = np.asarray(x)[rows]
        pairs[(a, b)] = (fit_binary(sub, y, cfg), rows)
    unconverged = sum(not m.converged for m, _ in pairs.values())
    if unconverged:
        logger.warning(f"{unconverged} of {len(pairs)} pairwise SVMs did not converge")
    logger.info(f"fitted {len(pairs)} one-vs-one SVMs ({cfg.kernel_kind.value}, C={cfg.c_reg:g})")
    return MulticlassSvmModel(n_classes=n_classes, kernel_kind=cfg.kernel_kind, pairs=pairs)


def predict(model, x):
    """One-vs-one voting; ties go to the larger summed decision value, then the lowest class id."""
    n_rows = np.asarray(x).shape[0]
    votes = np.zeros((n_rows, model.n_classes))
    scores = np.zeros((n_rows, model.n_classes))
    for (a, b), (binary, rows) in model.pairs.items():
        if model.kernel_kind is KernelKind.PRECOMPUTED:
            k = np.asarray(x, dtype=np.float64)
            if k.ndim != 2 or (n_rows and k.shape[1] <= int(rows.max())):
                raise ShapeError(f"eval kernel {k.shape} does not cover the training rows")
            values = decision_function(binary, k[:, rows])
        else:
            values = decision_function(binary, x)
        votes[:, a] += values > 0
        votes[:, b] += values <= 0
        scores[:, a] += values
        scores[:, b] -= values
    predictions = np.empty(n_rows, dtype=np.int64)
    for row in range(n_rows):
        tied = np.flatnonzero(votes[row] == votes[row].max())
        best = tied[scores[row, tied] == scores[row, tied].max()]
        predictions[row] = int(best.min())
    return predictions


@dataclass(frozen=True)
class GridResult:
    c_reg: float
    model: MulticlassSvmModel
    predictions: np.ndarray


def grid_search_c(train_x, train_labels, val_x, val_labels, c_grid, score, base_cfg=None, n_classes=None):
    """Fit one multiclass model per C; keep the best ``score(y_val, pred)``, ties toward the smaller C."""
    base_cfg = base_cfg or SvmConfig()
    results = []
    best = None
    best_score = -np.inf
    for c_reg in sorted(float(c) for c in c_grid):
        cfg = base_cfg.model_copy(update={"c_reg": c_reg})
        model = fit_multiclass(train_x, train_labels, cfg, n_classes)
        predictions = predict(model, val_x)
        value = score(val_labels, predictions)
        results.append((GridResult(c_reg, model, predictions), value))
        logger.info(f"grid search: C={c_reg:g} -> validation score {value:.4f}")
        if value > best_score:
            best, best_score = results[-1][0], value
    logger.info(f"grid search selected C={best.c_reg:g}")
    return best, results
