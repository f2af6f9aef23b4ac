"""Experiment configuration and run report schemas."""
import enum
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.core.errors import ConfigError
from app.data.datagen import BlobSpec
from app.learning.qka import LossKind, SpsaConfig, ThetaInit
from app.quantum.qsim import Entanglement


class Stage(str, enum.Enum):
    SLR = "slr"
    AALR = "aalr"
    QKA = "qka"
    FULL = "full"

    @property
    def rank(self):
        return list(Stage).index(self)


class BaselineEval(str, enum.Enum):
    REMAINDER = "remainder"
    TEST = "test"


class SplitConfig(BaseModel):
    train_per_class: int = Field(10, ge=2)
    val_per_class: int = Field(3, ge=1)
    test_per_class: int = Field(30, ge=1)


class AalrConfig(BaseModel):
    intervals: List[Tuple[float, float]] = [(0.0, 1.0)]
    epsilon: float = Field(1e-8, ge=0)

    @field_validator("intervals")
    @classmethod
    def _ordered(cls, value):
        if not value:
            raise ValueError("at least one target interval is required")
        for a, b in value:
            if not b > a:
                raise ValueError(f"interval [{a}, {b}] must have b > a")
        return value


class CircuitConfig(BaseModel):
    reps: int = Field(1, ge=1)
    entanglement: Entanglement = "full"


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(use_enum_values=False)

    data_csv: Optional[str] = None
    blobs: Optional[BlobSpec] = None
    splits: SplitConfig = SplitConfig()
    d_pca: int = Field(64, ge=1)
    d_out: int = Field(11, ge=1)
    aalr: AalrConfig = AalrConfig()
    feature_map: CircuitConfig = CircuitConfig()
    ansatz: CircuitConfig = CircuitConfig()
    spsa: SpsaConfig = SpsaConfig()
    loss: LossKind = LossKind.SVC
    svc_loss_c: float = Field(1.0, gt=0)
    theta_init: ThetaInit = ThetaInit.ZEROS
    c_grid: List[float] = [0.1, 1.0, 10.0]
    baselines: bool = True
    baselines_eval: BaselineEval = BaselineEval.REMAINDER
    stage_through: Stage = Stage.FULL
    output_dir: str = "runs/default"
    seed: int = 0

    @model_validator(mode="after")
    def _consistent(self):
        if (self.data_csv is None) == (self.blobs is None):
            raise ValueError("exactly one of data_csv or blobs must be given")
        if self.d_out > self.d_pca:
            raise ValueError(f"d_out={self.d_out} cannot exceed d_pca={self.d_pca}")
        if self.blobs is not None and self.d_out > self.blobs.n_classes - 1:
            raise ValueError(f"d_out={self.d_out} exceeds n_classes-1={self.blobs.n_classes - 1}")
        if not self.c_grid or any(c <= 0 for c in self.c_grid):
            raise ValueError("c_grid must hold positive values")
        return self

    @property
    def n_qubits(self):
        return self.d_out

    @classmethod
    def from_file(cls, path, **overrides):
        """Load a JSON config; non-None ``overrides`` replace file values."""
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}")
        return cls.build(data, **overrides)

    @classmethod
    def build(cls, data, **overrides):
        data = dict(data)
        data.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return cls.model_validate(data)
        except ValidationError as exc:
            raise ConfigError(f"invalid experiment config: {exc}")


class RunReport(BaseModel):
    """Fixed key set; stages that did not run keep ``None``."""

    status: str = "running"
    failed_stage: Optional[str] = None
    error: Optional[str] = None
    config: Dict[str, Any]
    dataset: Optional[Dict[str, Any]] = None
    timings: Dict[str, float] = {}
    leakage_audit: Optional[Dict[str, Any]] = None
    silhouette: Optional[Dict[str, Dict[str, Optional[float]]]] = None
    baselines: Optional[Dict[str, Any]] = None
    qka: Optional[Dict[str, Any]] = None
    interval_selection: Optional[List[Dict[str, Any]]] = None
    qsvc: Optional[Dict[str, Any]] = None
    artifacts: Dict[str, str] = {}
