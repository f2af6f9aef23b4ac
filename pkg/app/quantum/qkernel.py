"""Fidelity quantum kernels K(z1, z2; theta) = |<Phi(z1; theta)|Phi(z2; theta)>|^2."""
import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from app.core.config import settings
from app.core.errors import ShapeError
from app.core.utils import fingerprint
from app.numerics.linalg import as_matrix
from app.quantum.qsim import AnsatzConfig, FeatureMapConfig, Ordering, prepare_state

logger = logging.getLogger(__name__)


class KernelKind(str, enum.Enum):
    SYMMETRIC_TRAIN = "symmetric_train"
    RECTANGULAR_EVAL = "rectangular_eval"


@dataclass(frozen=True)
class KernelMatrix:
    values: np.ndarray
    kind: KernelKind
    theta_fingerprint: str
    n_qubits: int

    @property
    def shape(self):
        return self.values.shape


class KernelConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    feature_map: FeatureMapConfig
    ansatz: AnsatzConfig
    ordering: Ordering = Ordering.ANSATZ_FIRST
    n_threads: Optional[int] = None

    @model_validator(mode="after")
    def _same_width(self):
        if self.feature_map.n_qubits != self.ansatz.n_qubits:
            raise ValueError("feature map and ansatz must act on the same number of qubits")
        return self

    @classmethod
    def for_qubits(cls, n_qubits, reps=1, entanglement="full", **kwargs):
        return cls(
            feature_map=FeatureMapConfig(n_qubits=n_qubits, reps=reps, entanglement=entanglement),
            ansatz=AnsatzConfig(n_qubits=n_qubits, reps=reps, entanglement=entanglement),
            **kwargs,
        )

    @property
    def n_qubits(self):
        return self.feature_map.n_qubits


def _check_latents(latents, cfg, name):
    x = as_matrix(latents, name)
    if x.shape[0] and x.shape[1] != cfg.n_qubits:
        raise ShapeError(f"{name} have {x.shape[1]} columns, kernel uses {cfg.n_qubits} qubits")
    return x


def prepare_states(latents, theta, cfg):
    """Statevectors for every latent row, stacked as an (N, 2**n) array.

    Each row is prepared once per theta and reused for all its kernel entries.
    """
    x = _check_latents(latents, cfg, "latents")
    dim = 2 ** cfg.n_qubits
    if x.shape[0] == 0:
        return np.zeros((0, dim), dtype=np.complex128)

    def prepare(row):
        return prepare_state(cfg.feature_map, cfg.ansatz, row, theta, cfg.ordering).amplitudes

    n_threads = cfg.n_threads or settings.QKA_NUM_THREADS
    if n_threads > 1 and x.shape[0] > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            states = list(pool.map(prepare, x))
    else:
        states = [prepare(row) for row in x]
    return np.vstack(states)


def kernel_entry(z1, z2, theta, cfg):
    states = prepare_states(np.vstack([np.ravel(z1), np.ravel(z2)]), theta, cfg)
    return float(np.abs(np.vdot(states[0], states[1])) ** 2)


def train_kernel(latents, theta, cfg):
    """Symmetric train x train Gram matrix with an exact unit diagonal."""
    states = prepare_states(latents, theta, cfg)
    overlaps = np.abs(states.conj() @ states.T) ** 2
    upper = np.triu(overlaps, k=1)
    values = upper + upper.T
    np.fill_diagonal(values, 1.0)
    values.setflags(write=False)
    logger.debug(f"train kernel {values.shape} built on {cfg.n_qubits} qubits")
    return KernelMatrix(values, KernelKind.SYMMETRIC_TRAIN, fingerprint(np.asarray(theta, dtype=np.float64)), cfg.n_qubits)


def eval_kernel(eval_latents, train_latents, theta, cfg):
    """Rectangular eval x train matrix; rows follow ``eval_latents``, columns ``train_latents``."""
    train_x = _check_latents(train_latents, cfg, "train latents")
    eval_x = as_matrix(eval_latents, "eval latents")
    if eval_x.shape[0] == 0:
        values = np.zeros((0, train_x.shape[0]))
    else:
        if eval_x.shape[1] != train_x.shape[1]:
            raise ShapeError(f"eval latents have {eval_x.shape[1]} columns, train latents {train_x.shape[1]}")
        eval_states = prepare_states(eval_x, theta, cfg)
        train_states = prepare_states(train_x, theta, cfg)
        values = np.abs(eval_states.conj() @ train_states.T) ** 2
    values.setflags(write=False)
    return KernelMatrix(values, KernelKind.RECTANGULAR_EVAL, fingerprint(np.asarray(theta, dtype=np.float64)), cfg.n_qubits)
