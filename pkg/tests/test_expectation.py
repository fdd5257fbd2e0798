import numpy as np
import pytest

from ancilla_ensemble.circuits import rot
from ancilla_ensemble.expectation import (
    expect_diagonal_hermitian, expect_hermitian_unitary, expect_projector,
    expect_unitary, joint_expect, moussa,
)
from ancilla_ensemble.oscillator import TruncatedOscillator, contextuality_observables, translation
from ancilla_ensemble.qcore import (
    X, Y, Z, DensityMatrix, DimensionError, random_density_matrix, random_unitary, tensor,
)

BELL = DensityMatrix.from_ket([1, 0, 0, 1])
MIXED = DensityMatrix.maximally_mixed(2)


def test_expect_unitary_examples():
    assert np.isclose(expect_unitary(MIXED, np.eye(2)), 1)
    zero = DensityMatrix.basis(0, 2)
    assert np.isclose(expect_unitary(zero, Z), 1)
    assert abs(expect_unitary(zero, X)) < 1e-15
    plus_i = DensityMatrix.from_ket([1, 1j])
    u = rot("y", np.pi / 2)
    assert abs(expect_unitary(plus_i, u) - np.trace(plus_i.matrix @ u)) < 1e-15


def test_moussa_result_fields():
    rho = random_density_matrix(4, 1)
    u = random_unitary(4, 2)
    res = moussa(rho, [u])
    assert res.value == complex(*res.ancilla_readout)
    assert abs(res.value) <= 1 + 1e-9
    assert res.circuit_used.n_qubits == 3 and res.circuit_used.gates[0].kind == "ControlledU"


def test_hermitian_unitary_examples():
    assert np.isclose(expect_hermitian_unitary(DensityMatrix.basis(1, 2), Z), -1)
    assert np.isclose(expect_hermitian_unitary(DensityMatrix.from_ket([1, 1]), X), 1)
    assert abs(expect_hermitian_unitary(BELL, tensor(X, Z))) < 1e-15
    with pytest.raises(ValueError):
        expect_hermitian_unitary(MIXED, rot("x", 0.3))


def test_projector_examples():
    p0 = np.diag([1, 0])
    assert np.isclose(expect_projector(DensityMatrix.basis(0, 2), p0), 1)
    assert np.isclose(expect_projector(MIXED, p0), 0.5)
    u = translation(TruncatedOscillator(4), 0.5)
    rho = DensityMatrix.from_ket(u[:, 0])
    p1 = np.diag([0, 1, 0, 0])
    assert abs(expect_projector(rho, p1) - abs(u[1, 0]) ** 2) < 1e-12
    with pytest.raises(ValueError):
        expect_projector(MIXED, np.diag([1, 2]))


def test_diagonal_examples():
    assert np.isclose(expect_diagonal_hermitian(MIXED, np.eye(2)), 1)
    assert abs(expect_diagonal_hermitian(DensityMatrix.from_ket([1, 1]), Z)) < 1e-15
    assert np.isclose(expect_diagonal_hermitian(DensityMatrix.basis(2, 4), np.diag([0, 1, 2, 3])), 2)
    with pytest.raises(ValueError):
        expect_diagonal_hermitian(MIXED, X)


def test_joint_examples():
    assert np.isclose(joint_expect(MIXED, np.eye(2), np.eye(2)), 1)
    assert abs(joint_expect(MIXED, X, Y)) < 1e-15
    # Y X = -i Z, so on |0> the readout is -i
    assert np.isclose(joint_expect(DensityMatrix.basis(0, 2), X, Y), -1j)
    a, b, c, d = contextuality_observables(0.0, 0.0)
    assert abs(joint_expect(DensityMatrix.basis(0, 4), b, c)) < 1e-15


@pytest.mark.parametrize("dim", [2, 4, 8])
def test_random_ensemble(dim):
    rng = np.random.default_rng(dim)
    for _ in range(100):
        rho = random_density_matrix(dim, rng)
        u, v = random_unitary(dim, rng), random_unitary(dim, rng)
        assert abs(expect_unitary(rho, u) - np.trace(rho.matrix @ u)) < 1e-12
        assert abs(joint_expect(rho, u, v) - np.trace(rho.matrix @ v @ u)) < 1e-12


def test_commuting_hermitian_pair_is_real():
    rho = random_density_matrix(4, 7)
    val = joint_expect(rho, tensor(X, np.eye(2)), tensor(np.eye(2), Z))
    assert abs(val.imag) < 1e-10


def test_projector_set_completeness():
    rho = random_density_matrix(8, 3)
    vals = []
    for k in range(8):
        p = np.zeros((8, 8))
        p[k, k] = 1
        vals.append(expect_projector(rho, p))
    assert all(-1e-9 <= v <= 1 + 1e-9 for v in vals)
    assert abs(sum(vals) - 1) < 1e-9


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        expect_unitary(MIXED, np.eye(4))
