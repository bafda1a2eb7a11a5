"""Dense complex linear algebra for 2-, 4- and 16-dimensional operators.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. The basis order
for two qubits is |HH>, |HV>, |VH>, |VV> (H -> 0, V -> 1), and Kronecker
products use the row-major block convention of :func:`numpy.kron`.
"""

from __future__ import annotations

import numpy as np

ATOL = 1e-10

EIG_MAX_ITER = 10_000
EIG_TOL = 1e-13


class EigenvalueConvergenceError(RuntimeError):
    """Shifted QR iteration hit its iteration cap."""

    def __init__(self, residual: float, iterations: int):
        super().__init__(
            f"QR iteration did not converge after {iterations} iterations "
            f"(residual subdiagonal norm {residual:.3e})"
        )
        self.residual = residual
        self.iterations = iterations


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def tensor(*factors) -> np.ndarray:
    """Kronecker product of one or more square matrices, left to right."""
    if not factors:
        raise ValueError("tensor needs at least one factor")
    out = as_matrix(factors[0])
    for f in factors[1:]:
        out = np.kron(out, as_matrix(f))
    return out


def dagger(m) -> np.ndarray:
    return as_matrix(m).conj().T


def trace(m) -> complex:
    return complex(np.trace(as_matrix(m)))


def is_hermitian(m, atol: float = ATOL) -> bool:
    a = as_matrix(m)
    return bool(np.allclose(a, a.conj().T, atol=atol, rtol=0.0))


def projector(ket) -> np.ndarray:
    k = np.asarray(ket, dtype=complex).reshape(-1)
    return np.outer(k, k.conj())


def partial_trace(m, trace_out: str = "B", dims: tuple[int, int] = (2, 2)) -> np.ndarray:
    """Reduced operator after tracing out subsystem ``"A"`` or ``"B"``.

    ``m`` acts on A (x) B with ``dims = (dimA, dimB)``.
    """
    a = as_matrix(m)
    da, db = dims
    if da * db != a.shape[0]:
        raise ValueError(f"dims {dims} do not match matrix dimension {a.shape[0]}")
    t = a.reshape(da, db, da, db)
    if trace_out == "B":
        return np.einsum("ikjk->ij", t)
    if trace_out == "A":
        return np.einsum("kikj->ij", t)
    raise ValueError(f"trace_out must be 'A' or 'B', got {trace_out!r}")


def hessenberg(m) -> np.ndarray:
    """Upper Hessenberg form of ``m`` by Householder similarity transforms."""
    h = as_matrix(m).copy()
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1 :, k].copy()
        xnorm = np.linalg.norm(x)
        if xnorm == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x
        v[0] += phase * xnorm
        v /= np.linalg.norm(v)
        h[k + 1 :, :] -= 2.0 * np.outer(v, v.conj() @ h[k + 1 :, :])
        h[:, k + 1 :] -= 2.0 * np.outer(h[:, k + 1 :] @ v, v.conj())
        h[k + 2 :, k] = 0.0
    return h


def _eig2(a: complex, b: complex, c: complex, d: complex) -> tuple[complex, complex]:
    half_tr = 0.5 * (a + d)
    disc = np.sqrt(0.25 * (a - d) ** 2 + b * c + 0j)
    return half_tr + disc, half_tr - disc


def _qr_step(block: np.ndarray, shift: complex) -> None:
    """One explicit shifted QR step, in place, on an unreduced Hessenberg block."""
    n = block.shape[0]
    for i in range(n):
        block[i, i] -= shift
    rotations = []
    for k in range(n - 1):
        x, y = block[k, k], block[k + 1, k]
        r = np.hypot(abs(x), abs(y))
        if r == 0.0:
            c, s = 1.0, 0.0j
        else:
            c, s = x / r, y / r
        g = np.array([[c.conjugate(), s.conjugate()], [-s, c]])
        block[k : k + 2, k:] = g @ block[k : k + 2, k:]
        rotations.append(g)
    for k, g in enumerate(rotations):
        block[: k + 2, k : k + 2] = block[: k + 2, k : k + 2] @ g.conj().T
    for i in range(n):
        block[i, i] += shift


def eigenvalues_4x4(
    m, max_iter: int = EIG_MAX_ITER, tol: float = EIG_TOL
) -> list[complex]:
    """All eigenvalues of a 4x4 complex matrix, sorted by real part descending.

    Hessenberg reduction followed by Wilkinson-shifted QR with deflation.
    A subdiagonal entry is treated as zero once it drops below ``tol``
    times the magnitude of its neighbouring diagonal entries; an absolute
    floor scaled by the matrix norm guards the all-zero-neighbour case.
    Imaginary parts are returned as computed so callers can test realness.
    """
    a = as_matrix(m)
    if a.shape != (4, 4):
        raise ValueError(f"eigenvalues_4x4 needs a 4x4 matrix, got {a.shape}")
    h = hessenberg(a)
    scale = np.linalg.norm(h)
    floor = np.finfo(float).eps * scale

    found: list[complex] = []
    hi = 3
    iterations = 0
    since_deflation = 0
    while hi >= 0:
        if hi == 0:
            found.append(complex(h[0, 0]))
            break
        lo = hi
        while lo > 0:
            neighbours = abs(h[lo - 1, lo - 1]) + abs(h[lo, lo])
            sub = abs(h[lo, lo - 1])
            if sub < tol * neighbours or sub <= floor:
                h[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            found.append(complex(h[hi, hi]))
            hi -= 1
            since_deflation = 0
            continue
        if lo == hi - 1:
            found.extend(_eig2(h[lo, lo], h[lo, hi], h[hi, lo], h[hi, hi]))
            hi -= 2
            since_deflation = 0
            continue
        if iterations >= max_iter:
            residual = float(np.linalg.norm(np.diag(h[lo : hi + 1, lo : hi + 1], -1)))
            raise EigenvalueConvergenceError(residual, iterations)
        mu1, mu2 = _eig2(h[hi - 1, hi - 1], h[hi - 1, hi], h[hi, hi - 1], h[hi, hi])
        shift = mu1 if abs(mu1 - h[hi, hi]) <= abs(mu2 - h[hi, hi]) else mu2
        if since_deflation and since_deflation % 11 == 0:
            # exceptional shift to break cycles
            shift = h[hi, hi] + 0.75 * abs(h[hi, hi - 1])
        block = h[lo : hi + 1, lo : hi + 1]
        _qr_step(block, shift)
        iterations += 1
        since_deflation += 1

    return sorted(found, key=lambda z: z.real, reverse=True)
