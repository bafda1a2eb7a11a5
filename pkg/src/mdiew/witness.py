"""Conventional entanglement witness W = I/2 - |Psi-><Psi-|."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .qmat import is_hermitian, projector
from .states import I2, PSI_MINUS, SX, SY, SZ, TwoQubitState

AXES = ("x", "y", "z")
SIGN_PAIRS = ("++", "+-", "-+", "--")
_AXIS_OPS = {"x": SX, "y": SY, "z": SZ}


@dataclass(frozen=True)
class WitnessOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (4, 4) or not is_hermitian(m, 1e-12):
            raise ValueError("witness must be a Hermitian 4x4 matrix")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


def conventional_witness() -> WitnessOperator:
    return WitnessOperator(0.5 * np.eye(4) - projector(PSI_MINUS))


W = conventional_witness()


@dataclass(frozen=True)
class PauliCorrelations:
    """<sigma_i sigma_i> for i = x, y, z, plus the joint sign probabilities
    behind each one (keys ``"++"``, ``"+-"``, ``"-+"``, ``"--"``)."""

    exx: float
    eyy: float
    ezz: float
    joint: dict[str, dict[str, float]] | None = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("exx", "eyy", "ezz"):
            if abs(getattr(self, name)) > 1.0 + 1e-9:
                raise ValueError(f"{name}={getattr(self, name)} outside [-1, 1]")

    def __getitem__(self, axis: str) -> float:
        return {"x": self.exx, "y": self.eyy, "z": self.ezz}[axis]

    @classmethod
    def from_joint(cls, joint: dict[str, dict[str, float]]) -> "PauliCorrelations":
        e = {ax: correlation_from_signs(joint[ax]) for ax in AXES}
        return cls(e["x"], e["y"], e["z"], joint=joint)


def sign_projector(axis: str, sign: str) -> np.ndarray:
    op = _AXIS_OPS[axis]
    return 0.5 * (I2 + op) if sign == "+" else 0.5 * (I2 - op)


def joint_sign_probabilities(rho: TwoQubitState, axis: str) -> dict[str, float]:
    """p(a, b) for both qubits measured along ``axis``."""
    out = {}
    for pair in SIGN_PAIRS:
        proj = np.kron(sign_projector(axis, pair[0]), sign_projector(axis, pair[1]))
        out[pair] = float(np.trace(rho.matrix @ proj).real)
    return out


def correlation_from_signs(p: dict[str, float]) -> float:
    """<++> + <--> - <+-> - <-+> over the normalised joint probabilities."""
    total = sum(p[k] for k in SIGN_PAIRS)
    if total <= 0:
        raise ValueError("joint sign probabilities sum to zero")
    return (p["++"] + p["--"] - p["+-"] - p["-+"]) / total


def pauli_correlations(rho: TwoQubitState) -> PauliCorrelations:
    joint = {ax: joint_sign_probabilities(rho, ax) for ax in AXES}
    e = [float(np.trace(rho.matrix @ np.kron(_AXIS_OPS[ax], _AXIS_OPS[ax])).real) for ax in AXES]
    return PauliCorrelations(*e, joint=joint)


def witness_value_exact(rho: TwoQubitState, witness: WitnessOperator = W) -> float:
    return float(np.trace(witness.matrix @ rho.matrix).real)


def witness_value_from_correlations(c: PauliCorrelations) -> float:
    return (1.0 + c.exx + c.eyy + c.ezz) / 4.0
