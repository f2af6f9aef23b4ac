"""Quantum kernel alignment: SPSA over the ansatz parameters against an SVC or alignment loss."""
import enum
import json
import logging
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.core.errors import DataError, NumericalError, ShapeError, SpsaDivergenceError
from app.learning.ksvm import solve_dual
from app.quantum.qkernel import KernelMatrix, train_kernel

logger = logging.getLogger(__name__)


class LossKind(str, enum.Enum):
    SVC = "svc"
    KTA = "kta"


class ThetaInit(str, enum.Enum):
    ZEROS = "zeros"
    UNIFORM = "uniform"


class SpsaConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    # 0 is accepted and means "evaluate nothing, return theta0".
    maxiter: int = Field(30, ge=0)
    learning_rate: float = Field(0.02, gt=0)
    perturbation: float = Field(0.05, gt=0)
    blocking: bool = True
    allowed_increase: float = Field(0.002, ge=0)
    resamplings: int = Field(1, ge=1)
    seed: int = 0


@dataclass(frozen=True)
class SpsaStep:
    iteration: int
    loss: float
    accepted: bool
    theta: tuple
    # Objective value of the accepted point after this iteration.
    current_loss: float
    rng_state: dict = field(repr=False)
    estimated: bool = False

    def to_record(self):
        return {
            "iteration": self.iteration,
            "loss": self.loss,
            "accepted": self.accepted,
            "estimated": self.estimated,
            "current_loss": self.current_loss,
            "theta": list(self.theta),
            "rng_state": self.rng_state,
        }

    @classmethod
    def from_record(cls, record):
        return cls(
            iteration=int(record["iteration"]),
            loss=float(record["loss"]),
            accepted=bool(record["accepted"]),
            theta=tuple(float(v) for v in record["theta"]),
            current_loss=float(record["current_loss"]),
            rng_state=record["rng_state"],
            estimated=bool(record.get("estimated", False)),
        )


@dataclass
class QkaState:
    theta: np.ndarray
    trace: List[SpsaStep] = field(default_factory=list)
    initial_loss: Optional[float] = None
    # Objective evaluations, i.e. kernel-matrix builds when the objective is a kernel loss.
    n_evaluations: int = 0
    # Pairwise SMO solves inside svc_loss that stopped at the iteration cap.
    capped_pairs: int = 0

    @property
    def final_loss(self):
        return self.trace[-1].current_loss if self.trace else self.initial_loss

    @property
    def accepted_steps(self):
        return sum(step.accepted for step in self.trace)


@dataclass(frozen=True)
class TargetKernel:
    values: np.ndarray


def target_matrix(labels):
    """Ideal kernel: 1 where two samples share a label, else 0."""
    labels = np.asarray(labels).reshape(-1)
    if labels.size == 0:
        raise DataError("target kernel needs at least one label")
    values = (labels[:, None] == labels[None, :]).astype(np.float64)
    values.setflags(write=False)
    return TargetKernel(values)


def _values(kernel):
    return kernel.values if isinstance(kernel, (KernelMatrix, TargetKernel)) else np.asarray(kernel, dtype=np.float64)


def svc_loss_terms(kernel, labels, c_reg, max_iter=100_000):
    """Optimal binary dual objective for every one-vs-one class pair.

    Returns ``(terms, capped)`` where ``capped`` lists the pairs whose solver
    stopped at ``max_iter``; their terms are the last iterate.
    """
    k = _values(kernel)
    labels = np.asarray(labels).reshape(-1)
    if k.shape != (labels.shape[0], labels.shape[0]):
        raise ShapeError(f"kernel {k.shape} does not match {labels.shape[0]} labels")
    terms = {}
    capped = []
    for a, b in combinations(np.unique(labels).tolist(), 2):
        rows = np.flatnonzero((labels == a) | (labels == b))
        y = np.where(labels[rows] == a, 1.0, -1.0)
        sol = solve_dual(k[np.ix_(rows, rows)], y, c_reg, max_iter=max_iter)
        if not sol.converged:
            capped.append((a, b))
            logger.warning(f"svc_loss: SMO for pair ({a}, {b}) stopped at the iteration cap; using last iterate")
        terms[(a, b)] = sol.objective
        logger.debug(f"svc_loss pair ({a}, {b}): {sol.objective:.6g}")
    return terms, capped


def svc_loss(kernel, labels, c_reg=1.0, max_iter=100_000):
    terms, _ = svc_loss_terms(kernel, labels, c_reg, max_iter)
    return float(sum(terms.values()))


def kta_loss(kernel, target):
    """Negated (uncentered) kernel-target alignment; -1 is a perfect match."""
    k = _values(kernel)
    t = _values(target)
    if k.shape != t.shape:
        raise ShapeError(f"kernel {k.shape} and target {t.shape} differ in shape")
    k_norm = np.linalg.norm(k)
    t_norm = np.linalg.norm(t)
    if k_norm == 0 or t_norm == 0:
        raise NumericalError("alignment is undefined for a zero-norm kernel")
    return -float(np.sum(k * t) / (k_norm * t_norm))


def _rademacher(rng, size):
    return rng.integers(0, 2, size=size).astype(np.float64) * 2.0 - 1.0


def _checked(value, trace, theta):
    if not np.isfinite(value):
        raise SpsaDivergenceError(f"objective returned {value} at theta={np.round(theta, 6).tolist()}", trace)
    return float(value)


def spsa_gradient(objective, theta, perturbation, rng, resamplings=1):
    """Simultaneous-perturbation gradient estimate averaged over ``resamplings`` draws.

    Returns the estimate and the objective values at the perturbed points.
    """
    grad = np.zeros_like(theta)
    sampled = []
    for _ in range(resamplings):
        delta = _rademacher(rng, theta.shape)
        plus = objective(theta + perturbation * delta)
        minus = objective(theta - perturbation * delta)
        sampled.extend((plus, minus))
        grad += (plus - minus) / (2.0 * perturbation) / delta
    return grad / resamplings, sampled


def spsa_minimize(objective, theta0, cfg, resume=None):
    """SPSA with constant gains and optional blocking.

    ``resume`` is a list of ``SpsaStep`` (e.g. from ``load_trace``); the loop
    continues from its last accepted point and generator state.
    """
    rng = np.random.default_rng(cfg.seed)
    theta = np.array(theta0, dtype=np.float64)
    trace = []
    evaluations = 0
    initial_loss = None
    current = None
    if resume:
        trace = list(resume)
        last = trace[-1]
        rng.bit_generator.state = last.rng_state
        accepted = [step for step in trace if step.accepted]
        theta = np.array(accepted[-1].theta if accepted else theta0, dtype=np.float64)
        current = last.current_loss
        logger.info(f"SPSA resuming after iteration {last.iteration} (loss {current:.6g})")
    if cfg.maxiter == 0:
        return QkaState(theta=theta, trace=trace)
    if current is None and cfg.blocking:
        current = _checked(objective(theta), trace, theta)
        evaluations += 1
        initial_loss = current
    def guarded(point):
        return _checked(objective(point), trace, theta)

    for iteration in range(len(trace), cfg.maxiter):
        grad, sampled = spsa_gradient(guarded, theta, cfg.perturbation, rng, cfg.resamplings)
        evaluations += len(sampled)
        candidate = theta - cfg.learning_rate * grad
        if cfg.blocking:
            loss = _checked(objective(candidate), trace, candidate)
            evaluations += 1
            accepted = loss <= current + cfg.allowed_increase
            estimated = False
        else:
            # No extra evaluation without blocking; record the perturbed-point mean.
            loss = float(np.mean(sampled))
            accepted = True
            estimated = True
        if accepted:
            theta = candidate
            current = loss
        else:
            logger.info(f"SPSA iteration {iteration}: blocked step (loss {loss:.6g} > {current:.6g} + {cfg.allowed_increase:g})")
        if initial_loss is None and not trace:
            initial_loss = float(np.mean(sampled))
        trace.append(SpsaStep(
            iteration=iteration,
            loss=loss,
            accepted=accepted,
            theta=tuple(theta.tolist()),
            current_loss=current,
            rng_state=rng.bit_generator.state,
            estimated=estimated,
        ))
        logger.info(f"SPSA iteration {iteration}: loss={loss:.6g} accepted={accepted}")
    return QkaState(theta=theta, trace=trace, initial_loss=initial_loss, n_evaluations=evaluations)


def write_trace(trace, path):
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for step in trace:
            fh.write(json.dumps(step.to_record()) + "\n")
    return path


def load_trace(path):
    with Path(path).open(encoding="utf-8") as fh:
        return [SpsaStep.from_record(json.loads(line)) for line in fh if line.strip()]


def initial_theta(param_count, init=ThetaInit.ZEROS, seed=0):
    if ThetaInit(init) is ThetaInit.ZEROS:
        return np.zeros(param_count)
    return np.random.default_rng(seed).uniform(-0.1, 0.1, size=param_count)


def align(train_latents, labels, kernel_cfg, spsa_cfg, loss=LossKind.SVC, c_reg=1.0, theta0=None,
          svm_max_iter=100_000):
    """Train the ansatz parameters so the induced train kernel fits the class structure."""
    labels = np.asarray(labels).reshape(-1)
    latents = np.asarray(train_latents, dtype=np.float64)
    if latents.ndim != 2 or latents.shape[1] != kernel_cfg.n_qubits:
        raise ShapeError(f"latent dimension {latents.shape[-1]} must equal n_qubits={kernel_cfg.n_qubits}")
    if latents.shape[0] != labels.shape[0]:
        raise ShapeError(f"{latents.shape[0]} latents for {labels.shape[0]} labels")
    theta0 = initial_theta(kernel_cfg.ansatz.param_count) if theta0 is None else np.asarray(theta0, dtype=np.float64)
    if theta0.shape[0] != kernel_cfg.ansatz.param_count:
        raise ShapeError(f"theta0 has {theta0.shape[0]} entries, ansatz needs {kernel_cfg.ansatz.param_count}")
    loss = LossKind(loss)
    target = target_matrix(labels) if loss is LossKind.KTA else None
    capped = 0

    def objective(theta):
        nonlocal capped
        kernel = train_kernel(latents, theta, kernel_cfg)
        if loss is LossKind.KTA:
            return kta_loss(kernel, target)
        terms, capped_pairs = svc_loss_terms(kernel, labels, c_reg, svm_max_iter)
        capped += len(capped_pairs)
        return float(sum(terms.values()))

    logger.info(f"QKA: {latents.shape[0]} samples, {kernel_cfg.n_qubits} qubits, "
                f"{theta0.shape[0]} parameters, loss={loss.value}, maxiter={spsa_cfg.maxiter}")
    state = spsa_minimize(objective, theta0, spsa_cfg)
    state.capped_pairs = capped
    if capped:
        logger.warning(f"QKA: {capped} pairwise SMO solves stopped at the iteration cap")
    if state.trace:
        logger.info(f"QKA finished: loss {state.initial_loss:.6g} -> {state.final_loss:.6g}, "
                    f"{state.accepted_steps}/{len(state.trace)} steps accepted")
    return state
