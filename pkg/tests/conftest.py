import numpy as np
import pytest

from app.data.datagen import BlobSpec, make_blobs
from app.quantum.qkernel import KernelConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_blobs():
    """Three well separated classes in 6-D, 12 rows each."""
    return make_blobs(BlobSpec(n_classes=3, dim=6, samples_per_class=12, class_separation=6.0,
                               within_std=0.5, seed=5))


@pytest.fixture
def kernel_cfg_2q():
    return KernelConfig.for_qubits(2)


def power_iteration_spectrum(a, iterations=5000, seed=0):
    """Eigenvalues by power iteration with Hotelling deflation (shifted to make A PSD)."""
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    shift = np.abs(a).sum(axis=1).max()
    work = a + shift * np.eye(n)
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(n):
        v = rng.normal(size=n)
        v /= np.linalg.norm(v)
        for _ in range(iterations):
            w = work @ v
            norm = np.linalg.norm(w)
            if norm == 0:
                break
            v = w / norm
        lam = float(v @ work @ v)
        for _ in range(5):
            # Rayleigh quotient refinement on the deflated matrix.
            try:
                w = np.linalg.solve(work - lam * np.eye(n), v)
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(w)):
                break
            v = w / np.linalg.norm(w)
            lam = float(v @ work @ v)
        values.append(lam - shift)
        work = work - lam * np.outer(v, v)
    return np.sort(values)[::-1]


@pytest.fixture
def desk_config():
    """Five separable classes projected to four qubits."""
    return {
        "blobs": {"n_classes": 5, "dim": 16, "samples_per_class": 20, "class_separation": 6.0,
                  "within_std": 0.3, "distractor_dims": 8, "distractor_std": 1.0, "seed": 4},
        "splits": {"train_per_class": 8, "val_per_class": 3, "test_per_class": 8},
        "d_pca": 8,
        "d_out": 4,
        "spsa": {"maxiter": 4, "allowed_increase": 0.0, "seed": 0},
        "c_grid": [0.1, 1.0, 10.0],
        "seed": 0,
    }
