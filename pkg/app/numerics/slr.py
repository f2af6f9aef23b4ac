"""Supervised latent restructuring: PCA denoising followed by Fisher LDA.

Both stages are fitted on the training partition only; ``transform`` never
touches the fitted fields, which are stored as read-only arrays.
"""
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from app.core.errors import DataError, NotPositiveDefiniteError, NumericalError, ShapeError
from app.core.utils import fingerprint
from app.numerics.linalg import as_matrix, cholesky, solve_triangular, sym_eigen

logger = logging.getLogger(__name__)

LDA_RIDGE = 1e-6


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    class_names: tuple
    # Row ids into the pool this dataset was drawn from.
    source_indices: np.ndarray = field(default=None)

    def __post_init__(self):
        features = as_matrix(self.features, "features")
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if labels.shape[0] != features.shape[0]:
            raise ShapeError(f"{labels.shape[0]} labels for {features.shape[0]} feature rows")
        n_classes = len(self.class_names)
        if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
            raise DataError(f"labels must lie in [0, {n_classes})")
        indices = self.source_indices
        indices = np.arange(labels.shape[0]) if indices is None else np.asarray(indices, dtype=np.int64)
        labels.setflags(write=False)
        indices.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        object.__setattr__(self, "source_indices", indices)

    @property
    def n_samples(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    @property
    def n_classes(self):
        return len(self.class_names)

    def take(self, rows):
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.features[rows], self.labels[rows], self.class_names, self.source_indices[rows])


@dataclass(frozen=True)
class LdaProjection:
    mu_lda: np.ndarray
    w_lda: np.ndarray
    # Generalized eigenvalues of S_b v = lambda S_w v for the kept columns.
    ratios: np.ndarray


@dataclass(frozen=True)
class SlrModel:
    mu_train: np.ndarray
    w_pca: np.ndarray
    explained_variance: np.ndarray
    mu_lda: np.ndarray = None
    w_lda: np.ndarray = None
    lda_ratios: np.ndarray = None

    @property
    def d_pca(self):
        return self.w_pca.shape[1]

    @property
    def d_out(self):
        return None if self.w_lda is None else self.w_lda.shape[1]

    @property
    def is_fitted(self):
        return self.w_lda is not None

    def with_lda(self, lda):
        if lda.w_lda.shape[0] != self.d_pca:
            raise ShapeError(f"LDA expects {lda.w_lda.shape[0]} inputs, PCA yields {self.d_pca}")
        return replace(self, mu_lda=lda.mu_lda, w_lda=lda.w_lda, lda_ratios=lda.ratios)

    def fingerprint(self):
        return fingerprint(self.mu_train, self.w_pca, self.explained_variance, self.mu_lda, self.w_lda, self.lda_ratios)


def _frozen(arr):
    arr = np.array(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


def _project(x, mean, weights):
    # One product per row, so a row's result does not depend on the batch it came in.
    out = np.empty((x.shape[0], weights.shape[1]))
    for i, row in enumerate(x):
        out[i] = (row - mean) @ weights
    return out


def _fix_signs(columns):
    """Make the largest-magnitude entry of every column positive."""
    if columns.size == 0:
        return columns
    pivots = np.argmax(np.abs(columns), axis=0)
    signs = np.sign(columns[pivots, np.arange(columns.shape[1])])
    signs[signs == 0] = 1.0
    return columns * signs


def _complete_basis(basis, dim, count):
    """Extend orthonormal columns to ``count`` columns with a deterministic complement."""
    if basis.shape[1] >= count:
        return basis[:, :count]
    q, _ = np.linalg.qr(np.hstack([basis, np.eye(dim)]))
    extra = q[:, basis.shape[1]:count]
    return np.hstack([basis, extra])


def fit_pca(train, d_pca):
    """Top ``d_pca`` principal directions of the training covariance (1/(N-1) normalization)."""
    x = train.features
    n, d = x.shape
    if n < 2:
        raise DataError(f"PCA needs at least 2 training rows, got {n}")
    if d_pca < 1 or d_pca > min(n - 1, d):
        raise DataError(f"d_pca={d_pca} must lie in [1, min(N-1, D)] = [1, {min(n - 1, d)}]")
    mu = x.mean(axis=0)
    centered = x - mu
    if n - 1 < d:
        # Eigenvectors of the N x N Gram matrix map onto those of the D x D covariance.
        gram = sym_eigen(centered @ centered.T / (n - 1))
        values = np.clip(gram.eigenvalues[:d_pca], 0.0, None)
        floor = 1e-12 * max(float(values[0]) if values.size else 0.0, 1e-300)
        keep = int(np.sum(values > floor))
        mapped = centered.T @ gram.eigenvectors[:, :keep] / np.sqrt((n - 1) * values[:keep])
        # Re-orthonormalize against roundoff in the Gram route.
        mapped, r = np.linalg.qr(mapped)
        mapped = mapped * np.sign(np.where(np.diag(r) == 0, 1.0, np.diag(r)))
        w = _complete_basis(mapped, d, d_pca)
        values[keep:] = 0.0
    else:
        eig = sym_eigen(centered.T @ centered / (n - 1))
        values = np.clip(eig.eigenvalues[:d_pca], 0.0, None)
        w = eig.eigenvectors[:, :d_pca]
    w = _fix_signs(w)
    logger.info(f"PCA fitted on {n}x{d} training matrix, kept {d_pca} components "
                f"({float(values.sum()):.4g} retained variance)")
    return SlrModel(mu_train=_frozen(mu), w_pca=_frozen(w), explained_variance=_frozen(values))


def transform_pca(model, x):
    x = as_matrix(x, "PCA input")
    if x.shape[1] != model.w_pca.shape[0]:
        raise ShapeError(f"model expects {model.w_pca.shape[0]} features, got {x.shape[1]}")
    return _project(x, model.mu_train, model.w_pca)


def scatter_matrices(x, labels):
    """Within-class and between-class scatter (unnormalized sums)."""
    mu = x.mean(axis=0)
    d = x.shape[1]
    s_w = np.zeros((d, d))
    s_b = np.zeros((d, d))
    for cls in np.unique(labels):
        rows = x[labels == cls]
        mu_c = rows.mean(axis=0)
        centered = rows - mu_c
        s_w += centered.T @ centered
        diff = (mu_c - mu)[:, None]
        s_b += rows.shape[0] * (diff @ diff.T)
    return s_w, s_b, mu


def fit_lda(train_pca, labels, d_out, ridge=LDA_RIDGE):
    """Top ``d_out`` solutions of S_b v = lambda S_w v via Cholesky whitening of S_w."""
    x = as_matrix(train_pca, "LDA input")
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != x.shape[0]:
        raise ShapeError(f"{labels.shape[0]} labels for {x.shape[0]} rows")
    classes, counts = np.unique(labels, return_counts=True)
    if np.any(counts < 2):
        small = classes[counts < 2].tolist()
        raise DataError(f"LDA needs at least 2 samples per class; classes {small} have fewer")
    if d_out < 1 or d_out > len(classes) - 1:
        raise DataError(f"d_out={d_out} exceeds C-1={len(classes) - 1}")
    if d_out > x.shape[1]:
        raise DataError(f"d_out={d_out} exceeds the input dimension {x.shape[1]}")
    s_w, s_b, mu = scatter_matrices(x, labels)
    d = x.shape[1]
    try:
        lower = cholesky(s_w)
    except NotPositiveDefiniteError:
        trace = float(np.trace(s_w))
        scale = trace / d if trace > 0 else 1.0
        logger.warning(f"S_w is singular; adding ridge {ridge:g} * {scale:.4g} * I")
        try:
            lower = cholesky(s_w + ridge * scale * np.eye(d))
        except NotPositiveDefiniteError as exc:
            raise NumericalError(f"regularized within-class scatter is still singular: {exc}") from exc
    half = solve_triangular(lower, s_b, lower=True)
    whitened = solve_triangular(lower, half.T, lower=True)
    whitened = 0.5 * (whitened + whitened.T)
    eig = sym_eigen(whitened)
    directions = solve_triangular(lower.T, eig.eigenvectors[:, :d_out], lower=False)
    directions = _fix_signs(directions)
    ratios = eig.eigenvalues[:d_out]
    logger.info(f"LDA fitted on {x.shape[0]} rows, {len(classes)} classes, d_out={d_out}; "
                f"leading ratio {float(ratios[0]):.4g}")
    return LdaProjection(mu_lda=_frozen(mu), w_lda=_frozen(directions), ratios=_frozen(ratios))


def transform_lda(model, x_pca):
    if not model.is_fitted:
        raise DataError("SLR model has no LDA stage yet")
    x_pca = as_matrix(x_pca, "LDA input")
    if x_pca.shape[1] != model.d_pca:
        raise ShapeError(f"LDA stage expects {model.d_pca} columns, got {x_pca.shape[1]}")
    return _project(x_pca, model.mu_lda, model.w_lda)


def transform(model, x):
    return transform_lda(model, transform_pca(model, x))


def fit_slr(train, d_pca, d_out):
    model = fit_pca(train, d_pca)
    lda = fit_lda(transform_pca(model, train.features), train.labels, d_out)
    return model.with_lda(lda)
