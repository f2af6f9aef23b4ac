"""Statevector simulator plus the ZZ feature map and RealAmplitudes-style ansatz builders.

Qubit 0 is the least-significant bit of the amplitude index. No global phase
is removed; everything downstream uses squared overlaps.
"""
import enum
import logging
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import cos, pi, sin, sqrt
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from app.core.errors import ConfigError, ShapeError

logger = logging.getLogger(__name__)

_SQRT2_INV = 1 / sqrt(2)


class GateKind(str, enum.Enum):
    H = "H"
    RY = "RY"
    PHASE = "PHASE"
    CX = "CX"


class Ordering(str, enum.Enum):
    ANSATZ_FIRST = "ansatz_first"
    LITERAL_EQ3 = "literal_eq3"


@dataclass(frozen=True)
class GateOp:
    kind: GateKind
    target: int
    angle: Optional[float] = None
    control: Optional[int] = None

    def validate(self, n_qubits):
        if not 0 <= self.target < n_qubits:
            raise ShapeError(f"{self.kind.value} target {self.target} out of range for {n_qubits} qubits")
        if self.kind is GateKind.CX:
            if self.control is None or not 0 <= self.control < n_qubits:
                raise ShapeError(f"CX control {self.control} out of range for {n_qubits} qubits")
            if self.control == self.target:
                raise ShapeError("CX control and target must differ")
        elif self.kind in (GateKind.RY, GateKind.PHASE) and self.angle is None:
            raise ShapeError(f"{self.kind.value} needs an angle")

    def __str__(self):
        if self.kind is GateKind.CX:
            return f"CX {self.control} {self.target}"
        if self.angle is None:
            return f"{self.kind.value} {self.target}"
        return f"{self.kind.value}({self.angle!r}) {self.target}"


@dataclass(frozen=True)
class CircuitSpec:
    n_qubits: int
    ops: Tuple[GateOp, ...]

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        for op in self.ops:
            op.validate(self.n_qubits)

    def __add__(self, other):
        if other.n_qubits != self.n_qubits:
            raise ShapeError("cannot concatenate circuits of different widths")
        return CircuitSpec(self.n_qubits, self.ops + other.ops)


@dataclass(frozen=True)
class Statevector:
    amplitudes: np.ndarray
    n_qubits: int

    @classmethod
    def zero(cls, n_qubits):
        amps = np.zeros(2 ** n_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(amps, n_qubits)

    def norm_squared(self):
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


Entanglement = Union[Literal["full", "linear"], List[Tuple[int, int]]]


def entangling_pairs(n_qubits, entanglement):
    if entanglement == "full":
        return list(combinations(range(n_qubits), 2))
    if entanglement == "linear":
        return [(i, i + 1) for i in range(n_qubits - 1)]
    return [tuple(pair) for pair in entanglement]


class _CircuitConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_qubits: int
    reps: int = 1
    entanglement: Entanglement = "full"

    @field_validator("n_qubits", "reps")
    @classmethod
    def _positive(cls, value):
        if value < 1:
            raise ValueError("must be >= 1")
        return value

    @field_validator("entanglement")
    @classmethod
    def _pairs_distinct(cls, value):
        if isinstance(value, list):
            for i, j in value:
                if i == j:
                    raise ValueError(f"entangling pair ({i}, {j}) repeats a qubit")
        return value

    @property
    def pairs(self):
        pairs = entangling_pairs(self.n_qubits, self.entanglement)
        for i, j in pairs:
            if not (0 <= i < self.n_qubits and 0 <= j < self.n_qubits):
                raise ConfigError(f"entangling pair ({i}, {j}) out of range for {self.n_qubits} qubits")
        return pairs


class FeatureMapConfig(_CircuitConfig):
    pass


class AnsatzConfig(_CircuitConfig):
    @property
    def param_count(self):
        return self.n_qubits * (self.reps + 1)


@lru_cache(maxsize=256)
def _cx_swap_indices(n_qubits, control, target):
    idx = np.arange(2 ** n_qubits)
    src = idx[((idx >> control) & 1 == 1) & ((idx >> target) & 1 == 0)]
    return src, src | (1 << target)


def _apply_inplace(amps, op, n_qubits):
    if op.kind is GateKind.CX:
        src, dst = _cx_swap_indices(n_qubits, op.control, op.target)
        amps[src], amps[dst] = amps[dst], amps[src].copy()
        return
    # (high bits, target bit, low bits)
    view = amps.reshape(2 ** (n_qubits - op.target - 1), 2, 2 ** op.target)
    if op.kind is GateKind.PHASE:
        view[:, 1, :] *= np.exp(1j * op.angle)
        return
    a0 = view[:, 0, :].copy()
    a1 = view[:, 1, :]
    if op.kind is GateKind.H:
        view[:, 0, :] = (a0 + a1) * _SQRT2_INV
        view[:, 1, :] = (a0 - view[:, 1, :]) * _SQRT2_INV
    else:
        c, s = cos(op.angle / 2), sin(op.angle / 2)
        view[:, 0, :] = c * a0 - s * a1
        view[:, 1, :] = s * a0 + c * view[:, 1, :]


def apply_gate(state, op):
    op.validate(state.n_qubits)
    amps = state.amplitudes.copy()
    _apply_inplace(amps, op, state.n_qubits)
    return Statevector(amps, state.n_qubits)


def run_circuit(circuit, state=None):
    """Apply every op of ``circuit`` to ``state`` (default |0...0>)."""
    state = Statevector.zero(circuit.n_qubits) if state is None else state
    if state.n_qubits != circuit.n_qubits:
        raise ShapeError(f"{circuit.n_qubits}-qubit circuit applied to a {state.n_qubits}-qubit state")
    amps = state.amplitudes.copy()
    for op in circuit.ops:
        _apply_inplace(amps, op, circuit.n_qubits)
    return Statevector(amps, circuit.n_qubits)


def build_feature_map(cfg, z):
    """Second-order ZZ map: H layer, PHASE(2 z_i), then CX-PHASE-CX per entangling pair."""
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    if z.shape[0] != cfg.n_qubits:
        raise ShapeError(f"feature map needs {cfg.n_qubits} inputs, got {z.shape[0]}")
    pairs = cfg.pairs
    ops = []
    for _ in range(cfg.reps):
        ops.extend(GateOp(GateKind.H, q) for q in range(cfg.n_qubits))
        ops.extend(GateOp(GateKind.PHASE, q, angle=2.0 * float(z[q])) for q in range(cfg.n_qubits))
        for i, j in pairs:
            angle = 2.0 * (pi - float(z[i])) * (pi - float(z[j]))
            ops.append(GateOp(GateKind.CX, j, control=i))
            ops.append(GateOp(GateKind.PHASE, j, angle=angle))
            ops.append(GateOp(GateKind.CX, j, control=i))
    return CircuitSpec(cfg.n_qubits, ops)


def build_ansatz(cfg, theta):
    """RY layer, then per rep: CX over the entangling pairs followed by another RY layer."""
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if theta.shape[0] != cfg.param_count:
        raise ShapeError(f"ansatz needs {cfg.param_count} parameters, got {theta.shape[0]}")
    n = cfg.n_qubits
    ops = [GateOp(GateKind.RY, q, angle=float(theta[q])) for q in range(n)]
    for rep in range(cfg.reps):
        ops.extend(GateOp(GateKind.CX, j, control=i) for i, j in cfg.pairs)
        offset = n * (rep + 1)
        ops.extend(GateOp(GateKind.RY, q, angle=float(theta[offset + q])) for q in range(n))
    return CircuitSpec(n, ops)


def prepare_state(fm, an, z, theta, ordering=Ordering.ANSATZ_FIRST):
    if fm.n_qubits != an.n_qubits:
        raise ShapeError(f"feature map has {fm.n_qubits} qubits, ansatz has {an.n_qubits}")
    feature_map = build_feature_map(fm, z)
    ansatz = build_ansatz(an, theta)
    if Ordering(ordering) is Ordering.ANSATZ_FIRST:
        return run_circuit(ansatz + feature_map)
    return run_circuit(feature_map + ansatz)


def format_circuit(circuit):
    """Human-readable gate list, one op per line."""
    lines = [f"# qubits {circuit.n_qubits}"]
    lines.extend(str(op) for op in circuit.ops)
    return "\n".join(lines) + "\n"
