"""State constructors: Pauli operators, Bell states, the rho^v family,
the single-qubit ancilla preparations and the tilde transform."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .qmat import ATOL, as_matrix, is_hermitian, projector

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (I2, SX, SY, SZ)

H = np.array([1, 0], dtype=complex)
V = np.array([0, 1], dtype=complex)

_R2 = np.sqrt(0.5)
PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) * _R2
PHI_MINUS = np.array([1, 0, 0, -1], dtype=complex) * _R2
PSI_PLUS = np.array([0, 1, 1, 0], dtype=complex) * _R2
PSI_MINUS = np.array([0, 1, -1, 0], dtype=complex) * _R2
BELL = {"phi+": PHI_PLUS, "phi-": PHI_MINUS, "psi+": PSI_PLUS, "psi-": PSI_MINUS}

for _a in (I2, SX, SY, SZ, PHI_PLUS, PHI_MINUS, PSI_PLUS, PSI_MINUS):
    _a.setflags(write=False)


def _frozen(m) -> np.ndarray:
    a = np.array(as_matrix(m), dtype=complex)
    a.setflags(write=False)
    return a


def _check_density(m: np.ndarray, atol: float, psd_tol: float) -> None:
    if not is_hermitian(m, atol):
        raise ValueError("matrix is not Hermitian")
    tr = np.trace(m)
    if abs(tr - 1.0) > atol:
        raise ValueError(f"trace is {tr.real:.12g}, expected 1")
    lam_min = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
    if lam_min < -psd_tol:
        raise ValueError(f"minimum eigenvalue {lam_min:.3e} is negative")


@dataclass(frozen=True)
class TwoQubitState:
    """A validated 4x4 density matrix.

    Pass ``validate=False`` for reconstructed states that may carry small
    negative eigenvalues; :attr:`is_valid` then reports whether the
    positivity check would have passed.
    """

    matrix: np.ndarray
    label: str = ""
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.shape != (4, 4):
            raise ValueError(f"two-qubit state needs a 4x4 matrix, got {m.shape}")
        object.__setattr__(self, "matrix", m)
        if self.validate:
            _check_density(m, ATOL, 1e-9)

    @property
    def is_valid(self) -> bool:
        try:
            _check_density(self.matrix, ATOL, 1e-9)
        except ValueError:
            return False
        return True


@dataclass(frozen=True)
class AncillaState:
    """Single-qubit preparation tau_s / omega_t, indexed by a label in
    ``"0" .. "4"`` or ``"4'"``."""

    matrix: np.ndarray
    label: str

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.shape != (2, 2):
            raise ValueError(f"ancilla needs a 2x2 matrix, got {m.shape}")
        _check_density(m, ATOL, ATOL)
        object.__setattr__(self, "matrix", m)

    @property
    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)


@dataclass(frozen=True)
class MixingAngle:
    theta: float
    v: float

    @classmethod
    def from_theta(cls, theta: float) -> "MixingAngle":
        return cls(theta=theta, v=v_from_theta(theta))


def rho_v(v: float) -> TwoQubitState:
    """(1-v)|Psi-><Psi-| + v/2 (|HH><HH| + |VV><VV|), for 0 <= v <= 1."""
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"v must lie in [0, 1], got {v}")
    m = (1.0 - v) * projector(PSI_MINUS) + 0.5 * v * np.diag([1, 0, 0, 1]).astype(complex)
    return TwoQubitState(m, label=f"rho_v(v={v:g})")


def v_from_theta(theta: float) -> float:
    """Selector half-wave-plate angle in degrees to mixing parameter v."""
    return float(np.cos(np.deg2rad(2.0 * theta)) ** 2)


def theta_from_v(v: float) -> float:
    """Inverse of :func:`v_from_theta` on 0..45 degrees."""
    return float(np.rad2deg(np.arccos(np.sqrt(min(1.0, max(0.0, v))))) / 2.0)


def rho_theta(theta: float) -> TwoQubitState:
    return rho_v(min(1.0, max(0.0, v_from_theta(theta))))


def hwp_flip_b(rho: TwoQubitState) -> TwoQubitState:
    """Apply a 45 degree half-wave plate (H <-> V) to qubit B.

    Turns the separable rho_v(1) into (|HV><HV| + |VH><VH|)/2, the input
    used for the time-shift attack demonstration.
    """
    u = np.kron(I2, SX)
    return TwoQubitState(u @ rho.matrix @ u.conj().T, label=f"flipB[{rho.label}]")


def maximally_mixed() -> TwoQubitState:
    return TwoQubitState(np.eye(4) / 4, label="I/4")


def bloch_qubit(r) -> np.ndarray:
    """(I + r . sigma)/2 for a Bloch vector r."""
    x, y, z = r
    return 0.5 * (I2 + x * SX + y * SY + z * SZ)


_S3 = 1.0 / np.sqrt(3.0)
_BLOCH = {
    "0": (0.0, 0.0, 0.0),
    "1": (1.0, 0.0, 0.0),
    "2": (0.0, 1.0, 0.0),
    "3": (0.0, 0.0, 1.0),
    "4": (_S3, _S3, _S3),
    "4'": (-_S3, -_S3, _S3),
}
ANCILLA_LABELS = tuple(_BLOCH)


def ancilla(label: str) -> AncillaState:
    """tau_0 = I/2, tau_s = (I + sigma_s)/2 for s = 1, 2, 3, and the two
    tetrahedral-direction states ``"4"`` and ``"4'"``."""
    try:
        r = _BLOCH[label]
    except KeyError:
        raise ValueError(f"unknown ancilla label {label!r}; expected one of {ANCILLA_LABELS}") from None
    return AncillaState(bloch_qubit(r), label)


SAME_SIGN = "same-sign"
MIXED_SIGN = "mixed-sign"

_SETTINGS = {
    SAME_SIGN: (("0", "0"), ("1", "1"), ("2", "2"), ("3", "3"), ("0", "4"), ("4", "0")),
    MIXED_SIGN: (("0", "0"), ("1", "1"), ("2", "2"), ("3", "3"), ("0", "4'"), ("4'", "0")),
}


def ancilla_settings(outcome_class: str) -> tuple[tuple[str, str], ...]:
    """The six (s, t) label pairs used for ``outcome_class``."""
    try:
        return _SETTINGS[outcome_class]
    except KeyError:
        raise ValueError(f"outcome_class must be {SAME_SIGN!r} or {MIXED_SIGN!r}") from None


def ancilla_set(outcome_class: str) -> list[tuple[AncillaState, AncillaState]]:
    return [(ancilla(s), ancilla(t)) for s, t in ancilla_settings(outcome_class)]


def all_settings() -> list[tuple[str, str]]:
    """The eight distinct (tau, omega) settings across both classes."""
    seen: dict[tuple[str, str], None] = {}
    for cls in (SAME_SIGN, MIXED_SIGN):
        for st in _SETTINGS[cls]:
            seen.setdefault(st, None)
    return list(seen)


_TILDE_SIGNS = np.array([[1, -1], [-1, 1]])


def tilde(m) -> np.ndarray:
    """<j|m~|i> = (-1)^(i+j) <j|m|i>: flips the sign of the off-diagonals."""
    a = as_matrix(m)
    if a.shape != (2, 2):
        raise ValueError(f"tilde is defined on 2x2 matrices, got {a.shape}")
    return a * _TILDE_SIGNS


def random_density_matrix(rng: np.random.Generator, dim: int = 4) -> np.ndarray:
    """A A^dagger / Tr for A with i.i.d. standard complex Gaussian entries."""
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = a @ a.conj().T
    return m / np.trace(m).real


def random_pure_qubit(rng: np.random.Generator) -> np.ndarray:
    k = rng.normal(size=2) + 1j * rng.normal(size=2)
    return projector(k / np.linalg.norm(k))


def random_product_state(rng: np.random.Generator) -> TwoQubitState:
    return TwoQubitState(np.kron(random_pure_qubit(rng), random_pure_qubit(rng)), label="product")


def random_separable_state(rng: np.random.Generator, max_terms: int = 4) -> TwoQubitState:
    """Mixture of 1..max_terms random pure product states, flat Dirichlet weights."""
    k = int(rng.integers(1, max_terms + 1))
    weights = rng.dirichlet(np.ones(k))
    m = sum(w * random_product_state(rng).matrix for w in weights)
    return TwoQubitState(m, label=f"separable(k={k})")
