"""Two-qubit Pauli tomography, v fitting and the tangle."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .detection import seed_sequence
from .qmat import eigenvalues_4x4
from .states import PAULI, SY, TwoQubitState

PAIRS = tuple(itertools.product(range(4), repeat=2))
MEASURED_BASES = tuple(itertools.product(range(1, 4), repeat=2))
DEFAULT_SHOTS = 250_000
ROUNDOFF_FLOOR = 1e-14

# Spin-flip matrix, equal to sigma_y (x) sigma_y.
SPIN_FLIP = np.real(np.kron(SY, SY)).astype(complex)
SPIN_FLIP.setflags(write=False)


class IncompleteRecordError(ValueError):
    def __init__(self, missing):
        super().__init__(f"tomography record is missing Pauli pairs {sorted(missing)}")
        self.missing = sorted(missing)


@dataclass(frozen=True)
class TomographyRecord:
    """Estimated <sigma_i (x) sigma_j> for i, j in 0..3 (0 = identity)."""

    expectations: dict[tuple[int, int], float]
    shots: int | None = None

    def __post_init__(self):
        e = {tuple(k): float(v) for k, v in self.expectations.items()}
        if e.get((0, 0), 1.0) != 1.0:
            raise ValueError("<I (x) I> must be exactly 1")
        e[(0, 0)] = 1.0
        for k, v in e.items():
            if abs(v) > 1.0 + 1e-9:
                raise ValueError(f"expectation {k} = {v} outside [-1, 1]")
        object.__setattr__(self, "expectations", e)


def _mat(rho) -> np.ndarray:
    return rho.matrix if hasattr(rho, "matrix") else np.asarray(rho, dtype=complex)


def exact_expectations(rho) -> TomographyRecord:
    m = _mat(rho)
    e = {(i, j): float(np.trace(m @ np.kron(PAULI[i], PAULI[j])).real) for i, j in PAIRS}
    e[(0, 0)] = 1.0
    return TomographyRecord(e)


def _sign_projectors(i: int) -> tuple[np.ndarray, np.ndarray]:
    return 0.5 * (PAULI[0] + PAULI[i]), 0.5 * (PAULI[0] - PAULI[i])


def sample_expectations(rho, shots: int = DEFAULT_SHOTS, seed=None) -> TomographyRecord:
    """Simulate the nine local Pauli bases, ``shots`` events each.

    Each basis (i, j) yields the correlation <s_i s_j> directly and the
    single-qubit terms as marginals; single-qubit terms are averaged over
    the three bases that contain them.
    """
    if shots < 1:
        raise ValueError("shots must be positive")
    m = _mat(rho)
    children = seed_sequence(seed).spawn(len(MEASURED_BASES))
    e = {(0, 0): 1.0}
    local_a = {i: [] for i in range(1, 4)}
    local_b = {j: [] for j in range(1, 4)}
    for (i, j), child in zip(MEASURED_BASES, children):
        pa, pb = _sign_projectors(i), _sign_projectors(j)
        p = np.array(
            [np.trace(m @ np.kron(pa[x], pb[y])).real for x in (0, 1) for y in (0, 1)]
        )
        p = np.clip(p, 0.0, None)
        n = np.random.default_rng(child).multinomial(shots, p / p.sum()) / shots
        npp, npm, nmp, nmm = n
        e[(i, j)] = npp + nmm - npm - nmp
        local_a[i].append(npp + npm - nmp - nmm)
        local_b[j].append(npp + nmp - npm - nmm)
    for i in range(1, 4):
        e[(i, 0)] = float(np.mean(local_a[i]))
        e[(0, i)] = float(np.mean(local_b[i]))
    return TomographyRecord(e, shots)


def reconstruct(record: TomographyRecord) -> TwoQubitState:
    """Linear inversion (1/4) sum_ij e_ij sigma_i (x) sigma_j.

    The result is not checked for positivity; inspect ``is_valid``.
    """
    missing = set(PAIRS) - set(record.expectations)
    if missing:
        raise IncompleteRecordError(missing)
    m = sum(record.expectations[(i, j)] * np.kron(PAULI[i], PAULI[j]) for i, j in PAIRS) / 4.0
    return TwoQubitState(m, label="reconstructed", validate=False)


def trace_distance(a, b) -> float:
    d = _mat(a) - _mat(b)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T)))))


@dataclass(frozen=True)
class VFit:
    estimates: dict[str, float]
    mean: float
    spread: float

    @property
    def stderr(self) -> float:
        """Spread of the mean, spread / sqrt(5)."""
        return self.spread / math.sqrt(len(self.estimates))


def fit_v(rho) -> VFit:
    """Five independent estimates of v from the real parts of rho_11,
    rho_22, rho_33, rho_44 and rho_23; spread is the sample standard
    deviation (ddof=1)."""
    r = np.real(_mat(rho))
    est = {
        "rho11": 2.0 * r[0, 0],
        "rho22": 1.0 - 2.0 * r[1, 1],
        "rho33": 1.0 - 2.0 * r[2, 2],
        "rho44": 2.0 * r[3, 3],
        "rho23": 1.0 + 2.0 * r[1, 2],
    }
    vals = np.array(list(est.values()))
    return VFit({k: float(v) for k, v in est.items()}, float(vals.mean()), float(vals.std(ddof=1)))


@dataclass(frozen=True)
class TangleReport:
    eigenvalues: tuple[float, float, float, float]
    concurrence: float
    tangle: float


def spin_flip_product(rho) -> np.ndarray:
    """R = rho Sigma rho^T Sigma."""
    m = _mat(rho)
    return m @ SPIN_FLIP @ m.T @ SPIN_FLIP


def tangle(rho, imag_tol: float = 1e-6, neg_tol: float = 1e-6, strict: bool = True) -> TangleReport:
    """Concurrence and tangle from the eigenvalues of R.

    With ``strict=False`` (for reconstructed states that are slightly
    non-positive) out-of-tolerance eigenvalues are clamped to their
    non-negative real part instead of raising.
    """
    r = spin_flip_product(rho)
    lam = eigenvalues_4x4(r)
    # eigenvalues at roundoff level are zero; their sqrt would otherwise
    # leak ~1e-8 into C
    floor = ROUNDOFF_FLOOR * max(1.0, float(np.linalg.norm(r)))
    cleaned = []
    for z in lam:
        if strict and (abs(z.imag) > imag_tol or z.real < -neg_tol):
            raise ValueError(f"R has eigenvalue {z:.3e}; input is not a valid density matrix")
        cleaned.append(z.real if z.real > floor else 0.0)
    cleaned.sort(reverse=True)
    root = [math.sqrt(x) for x in cleaned]
    c = max(0.0, root[0] - root[1] - root[2] - root[3])
    return TangleReport(tuple(cleaned), c, c * c)


def analytic_tangle(v: float) -> float:
    return (1.0 - 2.0 * v) ** 2 if v < 0.5 else 0.0


def format_density_matrix(rho) -> str:
    """Plain-text dump: a ``# real`` table then a ``# imag`` table, comma separated."""
    m = _mat(rho)
    lines = []
    for name, part in (("real", m.real), ("imag", m.imag)):
        lines.append(f"# {name}")
        lines.extend(",".join(format(float(x), ".17g") for x in row) for row in part)
    return "\n".join(lines) + "\n"


def parse_density_matrix(text: str) -> np.ndarray:
    blocks: dict[str, list[list[float]]] = {}
    current = None
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            current = line[1:].strip()
            blocks[current] = []
        elif current is None:
            raise ValueError("matrix rows before a '# real' or '# imag' header")
        else:
            blocks[current].append([float(x) for x in line.split(",")])
    if set(blocks) != {"real", "imag"}:
        raise ValueError("expected exactly a real and an imag table")
    re, im = np.array(blocks["real"]), np.array(blocks["imag"])
    if re.shape != im.shape or re.shape[0] != re.shape[1]:
        raise ValueError("real and imag tables must be square and the same shape")
    return re + 1j * im
