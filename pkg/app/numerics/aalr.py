"""Angle-aware latent rescaling: per-dimension min-max map into [a, b]."""
import logging
from dataclasses import dataclass

import numpy as np

from app.core.errors import ConfigError, DataError, ShapeError
from app.core.utils import fingerprint
from app.numerics.linalg import as_matrix

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-8


@dataclass(frozen=True)
class AalrScaler:
    z_min: np.ndarray
    z_max: np.ndarray
    a: float = 0.0
    b: float = 1.0
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if not self.b > self.a:
            raise ConfigError(f"interval upper bound {self.b} must exceed lower bound {self.a}")
        if self.epsilon < 0:
            raise ConfigError("epsilon must be non-negative")
        if np.any(self.z_min > self.z_max):
            raise DataError("z_min must not exceed z_max")

    @classmethod
    def fit(cls, train_latent, a=0.0, b=1.0, epsilon=DEFAULT_EPSILON):
        """Column-wise extrema of the training latents."""
        x = as_matrix(train_latent, "AALR training latents")
        if x.shape[0] == 0:
            raise DataError("AALR needs at least one training row")
        z_min = x.min(axis=0)
        z_max = x.max(axis=0)
        z_min.setflags(write=False)
        z_max.setflags(write=False)
        logger.info(f"AALR fitted on {x.shape[0]} rows into [{a:g}, {b:g}] (epsilon={epsilon:g})")
        return cls(z_min=z_min, z_max=z_max, a=float(a), b=float(b), epsilon=float(epsilon))

    @property
    def dim(self):
        return self.z_min.shape[0]

    def transform(self, x):
        # Evaluation rows beyond the training extrema are deliberately left unclipped.
        x = as_matrix(x, "AALR input")
        if x.shape[0] == 0:
            return np.zeros((0, self.dim))
        if x.shape[1] != self.dim:
            raise ShapeError(f"scaler expects {self.dim} columns, got {x.shape[1]}")
        return self.a + (self.b - self.a) * (x - self.z_min) / (self.z_max - self.z_min + self.epsilon)

    def fingerprint(self):
        return fingerprint(self.z_min, self.z_max, np.array([self.a, self.b, self.epsilon]))
