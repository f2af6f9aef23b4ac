"""Dense real matrix core: validation, symmetric eigendecomposition and Cholesky.

A Matrix is a 2-D ``float64`` ndarray. Constructors reject NaN/Inf so every
downstream stage can assume finite data.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular as _scipy_solve_triangular

from app.core.errors import (
    AsymmetricMatrixError,
    NonFiniteError,
    NotPositiveDefiniteError,
    ShapeError,
)

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-9
MAX_SWEEPS = 100
# Pivots below this fraction of the largest diagonal entry count as <= 0.
PIVOT_TOL = 1e-12


def as_matrix(data, name="matrix"):
    """Return ``data`` as a read-only 2-D float64 array, rejecting non-finite entries."""
    arr = np.array(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.size else arr.reshape(0, 0)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains NaN or Inf entries")
    arr.setflags(write=False)
    return arr


def as_vector(data, name="vector"):
    arr = np.array(data, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains NaN or Inf entries")
    return arr


@dataclass(frozen=True)
class SymEigen:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _check_symmetric(a):
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got {a.shape}")
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    asym = float(np.max(np.abs(a - a.T))) if a.size else 0.0
    if asym > SYMMETRY_TOL * scale:
        raise AsymmetricMatrixError(f"matrix asymmetry {asym:.3e} exceeds tolerance (scale {scale:.3e})")


def _round_robin(n):
    """Rounds of disjoint index pairs covering every (p, q) once per sweep."""
    players = list(range(n + (n % 2)))
    m = len(players)
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[k], players[m - 1 - k]) for k in range(m // 2)]
        pairs = [(min(p, q), max(p, q)) for p, q in pairs if p < n and q < n]
        if pairs:
            rounds.append((np.array([p for p, _ in pairs]), np.array([q for _, q in pairs])))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def sym_eigen(a):
    """Full spectrum of a symmetric matrix by cyclic Jacobi rotations.

    Rotations are applied in round-robin order so each round updates a set of
    disjoint (p, q) planes at once. Eigenvalues are returned descending with
    the eigenvector columns aligned to them.
    """
    a = as_matrix(a, "sym_eigen input")
    _check_symmetric(a)
    n = a.shape[0]
    work = 0.5 * (a + a.T)
    vecs = np.eye(n)
    if n > 1:
        rounds = _round_robin(n)
        threshold = 1e-15 * n * float(np.linalg.norm(work))
        previous = np.inf
        for sweep in range(MAX_SWEEPS):
            off = float(np.linalg.norm(work - np.diag(np.diag(work))))
            if off <= threshold or off >= previous:
                break
            previous = off
            for p, q in rounds:
                apq = work[p, q]
                app = work[p, p]
                aqq = work[q, q]
                active = np.abs(apq) > 1e-300
                safe_apq = np.where(active, apq, 1.0)
                with np.errstate(over="ignore"):
                    tau = (aqq - app) / (2.0 * safe_apq)
                # hypot keeps 1 + tau^2 from overflowing when apq is tiny
                t = np.where(tau >= 0.0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
                t = np.where(active, t, 0.0)
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rows_p = work[p, :].copy()
                rows_q = work[q, :].copy()
                work[p, :] = c[:, None] * rows_p - s[:, None] * rows_q
                work[q, :] = s[:, None] * rows_p + c[:, None] * rows_q
                cols_p = work[:, p].copy()
                cols_q = work[:, q].copy()
                work[:, p] = cols_p * c - cols_q * s
                work[:, q] = cols_p * s + cols_q * c
                work[p, q] = 0.0
                work[q, p] = 0.0
                vp = vecs[:, p].copy()
                vq = vecs[:, q].copy()
                vecs[:, p] = vp * c - vq * s
                vecs[:, q] = vp * s + vq * c
        else:
            logger.warning(f"Jacobi eigensolver hit {MAX_SWEEPS} sweeps on a {n}x{n} matrix")
    values = np.diag(work).copy()
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vecs = vecs[:, order]
    values.setflags(write=False)
    vecs.setflags(write=False)
    return SymEigen(eigenvalues=values, eigenvectors=vecs)


def cholesky(a):
    """Lower-triangular L with L @ L.T == a; raises NotPositiveDefiniteError on a pivot <= 0."""
    a = as_matrix(a, "cholesky input")
    _check_symmetric(a)
    try:
        lower = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"matrix is not positive definite: {exc}") from exc
    pivots = np.diag(lower) ** 2
    scale = float(np.max(np.abs(np.diag(a)))) if a.size else 0.0
    if pivots.size and float(np.min(pivots)) <= PIVOT_TOL * scale:
        raise NotPositiveDefiniteError(f"matrix is numerically singular (min pivot {float(np.min(pivots)):.3e})")
    return lower


def matmul(a, b):
    if a.shape[-1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def transpose(a):
    return np.asarray(a).T


def solve_triangular(l, b, lower=True):
    """Forward (``lower=True``) or back substitution for L x = b."""
    l = np.asarray(l, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if l.ndim != 2 or l.shape[0] != l.shape[1] or l.shape[0] != b.shape[0]:
        raise ShapeError(f"cannot solve triangular system {l.shape} with right-hand side {b.shape}")
    return _scipy_solve_triangular(l, b, lower=lower, check_finite=True)
