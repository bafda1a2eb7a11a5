import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from mdiew import qmat
from mdiew.states import I2, PHI_PLUS, SX, SZ, rho_v, random_density_matrix
from mdiew.tomography import spin_flip_product

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)
mat2 = arrays(np.float64, (2, 2), elements=finite)


def test_tensor_identity_and_diagonal():
    assert np.array_equal(qmat.tensor(I2, I2), np.eye(4))
    assert np.array_equal(qmat.tensor(SZ, SZ), np.diag([1, -1, -1, 1]))


def test_tensor_flips_hv_to_vh():
    hv = np.array([0, 1, 0, 0])
    vh = np.array([0, 0, 1, 0])
    assert np.array_equal(qmat.tensor(SX, SX) @ hv, vh)


def test_tensor_block_convention():
    a = np.arange(4).reshape(2, 2)
    b = np.arange(4, 8).reshape(2, 2)
    t = qmat.tensor(a, b)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    assert t[i * 2 + k, j * 2 + l] == a[i, j] * b[k, l]


# integer entries keep every product exact, so equality is bitwise
imat2 = arrays(np.int64, (2, 2), elements=st.integers(-1000, 1000))


@given(imat2, imat2, imat2)
def test_tensor_associative(a, b, c):
    assert np.array_equal(qmat.tensor(qmat.tensor(a, b), c), qmat.tensor(a, qmat.tensor(b, c)))


@given(mat2, mat2)
def test_trace_multiplicative(a, b):
    assert abs(qmat.trace(qmat.tensor(a, b)) - qmat.trace(a) * qmat.trace(b)) < 1e-12 * (1 + np.abs(a).sum() * np.abs(b).sum())


def test_partial_trace_examples():
    bell = qmat.projector(PHI_PLUS)
    assert np.allclose(qmat.partial_trace(bell, "B"), I2 / 2, atol=1e-15)
    assert np.allclose(qmat.partial_trace(rho_v(1).matrix, "B"), I2 / 2, atol=1e-15)
    a = np.array([[1, 2j], [-2j, 3]])
    b = np.array([[0.5, 1], [1, 1.5]])
    assert np.allclose(qmat.partial_trace(np.kron(a, b), "B"), a * np.trace(b))
    assert np.allclose(qmat.partial_trace(np.kron(a, b), "A"), b * np.trace(a))


def test_partial_trace_unequal_dims():
    a = np.diag([1.0, 2.0])
    b = np.diag([1.0, 1.0, 2.0])
    m = np.kron(a, b)
    assert np.allclose(qmat.partial_trace(m, "B", (2, 3)), a * 4)
    assert np.allclose(qmat.partial_trace(m, "A", (2, 3)), b * 3)


def test_partial_trace_dimension_mismatch():
    with pytest.raises(ValueError):
        qmat.partial_trace(np.eye(4), "B", (2, 3))


def test_partial_trace_preserves_trace(rng):
    for _ in range(20):
        m = random_density_matrix(rng)
        for side in ("A", "B"):
            assert abs(np.trace(qmat.partial_trace(m, side)) - 1) < 1e-12


def test_eigenvalues_diagonal():
    lam = qmat.eigenvalues_4x4(np.diag([1.0, 4.0, 2.0, 3.0]))
    assert np.allclose(lam, [4, 3, 2, 1], atol=1e-13)


def test_eigenvalues_of_spin_flip_product():
    for v in (0.0, 0.3, 0.5, 0.8, 1.0):
        lam = np.sort(np.real(qmat.eigenvalues_4x4(spin_flip_product(rho_v(v)))))
        want = np.sort([0.0, (1 - v) ** 2, v * v / 4, v * v / 4])
        assert np.allclose(lam, want, atol=1e-9)
    lam = qmat.eigenvalues_4x4(spin_flip_product(rho_v(0)))
    assert np.allclose(lam, [1, 0, 0, 0], atol=1e-9)


def test_eigenvalues_match_numpy_on_general_matrices(rng):
    for _ in range(200):
        m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        ours = qmat.eigenvalues_4x4(m)
        ref = np.linalg.eigvals(m)
        # match as multisets
        for z in ours:
            k = np.argmin(np.abs(ref - z))
            assert abs(ref[k] - z) < 1e-9
            ref = np.delete(ref, k)
        assert all(ours[i].real >= ours[i + 1].real for i in range(3))


def test_eigenvalues_real_nonsymmetric_with_complex_pair():
    rot = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 2, 1], [0, 0, 0, 3]], dtype=float)
    lam = qmat.eigenvalues_4x4(rot)
    assert np.allclose(sorted(lam, key=lambda z: (z.real, z.imag)), [-1j, 1j, 2, 3], atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_eigenvalue_sum_is_trace_and_hermitian_is_real(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    lam = qmat.eigenvalues_4x4(a)
    assert abs(sum(lam) - np.trace(a)) < 1e-9
    h = a + a.conj().T
    lam = qmat.eigenvalues_4x4(h)
    assert max(abs(z.imag) for z in lam) < 1e-10


def test_eigenvalues_rejects_wrong_shape():
    with pytest.raises(ValueError):
        qmat.eigenvalues_4x4(np.eye(3))


def test_eigenvalue_nonconvergence_reports_residual():
    m = np.array([[0, 0, 0, 1], [1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0]], dtype=float)
    with pytest.raises(qmat.EigenvalueConvergenceError) as err:
        qmat.eigenvalues_4x4(m * (1 + 1e-3), max_iter=0)
    assert err.value.residual > 0
