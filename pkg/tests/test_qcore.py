import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from krylov_qfi.ensembles import random_fullrank, random_rank_r
from krylov_qfi.errors import (
    DimensionMismatch,
    DimensionOverflow,
    NotDensityMatrix,
    NotHermitian,
)
from krylov_qfi.qcore import (
    DensityMatrix,
    Observable,
    apply_R,
    build_transition_table,
    check_dimension,
    collective_z,
    commutator_i,
    eigh,
    pauli,
    weighted_inner,
)


def test_eigh_sorted_descending_and_reconstructs():
    rho = random_fullrank(8, 1)
    spec = rho.spectrum
    assert np.all(np.diff(spec.eigenvalues) <= 0)
    assert spec.rank == 8 and spec.full_rank
    np.testing.assert_allclose(spec.reconstruct(), rho.data, atol=1e-12)
    u = spec.eigenvectors
    np.testing.assert_allclose(u.conj().T @ u, np.eye(8), atol=1e-12)


def test_eigh_zeroes_kernel_and_reports_rank():
    rho = random_rank_r(16, 3, 5)
    spec = rho.spectrum
    assert spec.rank == 3
    assert np.all(spec.eigenvalues[3:] == 0.0)
    assert spec.eigenvalues.sum() == pytest.approx(1.0, abs=1e-14)
    assert spec.p_min == spec.eigenvalues[2]
    assert not spec.full_rank


def test_eigh_phase_convention_is_reproducible():
    rho = random_fullrank(4, 2)
    a = eigh(rho.data).eigenvectors
    b = eigh(rho.data.copy()).eigenvectors
    np.testing.assert_array_equal(a, b)
    idx = np.argmax(np.abs(a), axis=0)
    pivots = a[idx, np.arange(4)]
    assert np.all(np.abs(pivots.imag) < 1e-15) and np.all(pivots.real > 0)


def test_density_matrix_validation():
    with pytest.raises(NotHermitian):
        DensityMatrix(np.array([[0.5, 0.1], [0.0, 0.5]]))
    with pytest.raises(NotDensityMatrix):
        DensityMatrix(np.diag([0.6, 0.6]))
    with pytest.raises(NotDensityMatrix):
        DensityMatrix(np.diag([1.2, -0.2]))
    with pytest.raises(DimensionMismatch):
        DensityMatrix(np.ones((2, 3)) / 2)


def test_density_matrix_is_immutable():
    rho = DensityMatrix(np.diag([0.75, 0.25]))
    with pytest.raises(ValueError):
        rho.data[0, 0] = 1.0


def test_pure_state_from_vector():
    rho = DensityMatrix.from_vector([1, 1j])
    assert rho.purity() == pytest.approx(1.0)
    assert rho.spectrum.rank == 1


def test_pauli_ordering_puts_qubit_zero_first():
    zi = pauli("ZI")
    np.testing.assert_allclose(np.diag(zi).real, [1, 1, -1, -1])
    iz = pauli("IZ")
    np.testing.assert_allclose(np.diag(iz).real, [1, -1, 1, -1])


def test_collective_z_matches_pauli_sum():
    N = 3
    H = collective_z(N).data
    ref = sum(pauli("".join("Z" if j == i else "I" for j in range(N))) for i in range(N)) / 2
    np.testing.assert_allclose(H, ref)
    assert H[0, 0] == 1.5 and H[-1, -1] == -1.5


def test_dimension_cap():
    assert check_dimension(12) == 4096
    with pytest.raises(DimensionOverflow):
        check_dimension(13)
    with pytest.raises(DimensionOverflow):
        collective_z(5, max_qubits=4)


def test_observable_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        Observable(np.array([[0, 1], [0, 0]]))


def test_transition_table_qubit_example(qubit_example):
    rho, H = qubit_example
    spec = DensityMatrix(rho).spectrum
    table = build_transition_table(spec, H)
    assert len(table) == 4
    off = table.k != table.l
    np.testing.assert_allclose(table.weight[off], 0.25)
    np.testing.assert_allclose(table.mass[off], 0.25 * 0.25)
    np.testing.assert_allclose(table.nodes[off], 0.5)
    assert table.h_max == 0.5


def test_transition_table_drops_kernel_pairs():
    rho = random_rank_r(8, 2, 0)
    table = build_transition_table(rho.spectrum, collective_z(3))
    # pairs with both members in the kernel are dropped: 64 - 36
    assert len(table) == 28
    assert np.all(table.psum > table.pair_tol)


def test_transition_table_dimension_mismatch():
    rho = random_fullrank(4, 0)
    with pytest.raises(DimensionMismatch):
        build_transition_table(rho.spectrum, collective_z(3))


def test_superoperator_helpers():
    rho = random_fullrank(4, 3).data
    H = collective_z(2).data
    C = commutator_i(rho, H)
    np.testing.assert_allclose(C, C.conj().T, atol=1e-15)
    R = apply_R(rho, C)
    np.testing.assert_allclose(R, 0.5 * (rho @ C + C @ rho))
    ref = 0.5 * np.trace(rho @ (C @ R + R @ C)).real
    assert weighted_inner(C, R, rho) == pytest.approx(ref, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_weighted_inner_is_symmetric_and_positive(n, seed):
    d = 2**n
    rng = np.random.default_rng(seed)
    rho = random_fullrank(d, seed).data
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    X = X + X.conj().T
    Y = rng.normal(size=(d, d))
    Y = Y + Y.T
    assert weighted_inner(X, Y, rho) == pytest.approx(weighted_inner(Y, X, rho), rel=1e-10, abs=1e-12)
    assert weighted_inner(X, X, rho) > 0
