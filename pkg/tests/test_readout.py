import numpy as np
from hypothesis import given, settings, strategies as st

from ancilla_ensemble.qcore import X, Y, DensityMatrix, random_density_matrix, tensor
from ancilla_ensemble.readout import (
    SpectralRecord, diagonal_populations, spectrum, transverse_expectations,
)

PLUS = DensityMatrix.from_ket([1, 1])


def test_transverse_examples():
    assert np.allclose(transverse_expectations(PLUS, 0), (1, 0))
    assert np.allclose(transverse_expectations(DensityMatrix.basis(0, 2), 0), (0, 0))
    rho = DensityMatrix((np.eye(2) + (X + Y) / np.sqrt(2)) / 2)
    assert np.allclose(transverse_expectations(rho, 0), (1 / np.sqrt(2), 1 / np.sqrt(2)))


@given(st.integers(0, 2 ** 31 - 1), st.integers(0, 2))
@settings(max_examples=30, deadline=None)
def test_transverse_matches_embedded_paulis(seed, j):
    rho = random_density_matrix(8, seed)
    ops = [np.eye(2)] * 3
    sx = tensor(*[X if k == j else o for k, o in enumerate(ops)])
    sy = tensor(*[Y if k == j else o for k, o in enumerate(ops)])
    got = transverse_expectations(rho, j)
    assert np.allclose(got, (np.trace(rho.matrix @ sx).real, np.trace(rho.matrix @ sy).real), atol=1e-13)


def test_spectrum_examples():
    assert np.all(spectrum(DensityMatrix.maximally_mixed(8)).amplitudes == 0)
    one = spectrum(PLUS)
    assert one.amplitudes.shape == (1, 1) and np.isclose(one.amplitudes[0, 0], 0.5)
    two = spectrum(DensityMatrix(tensor(PLUS.matrix, np.diag([1, 0]))))
    expected = np.zeros((2, 2), dtype=complex)
    expected[0, 0] = 0.5
    assert np.allclose(two.amplitudes, expected)


def test_spectrum_linear():
    a, b = random_density_matrix(8, 1).matrix, random_density_matrix(8, 2).matrix
    lhs = spectrum(0.3 * a + 0.7 * b).amplitudes
    rhs = 0.3 * spectrum(a).amplitudes + 0.7 * spectrum(b).amplitudes
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_mixed_ancilla_adds_no_lines():
    rho = random_density_matrix(4, 3).matrix
    joint = np.kron(rho, np.eye(2) / 2)
    amps = spectrum(joint).amplitudes
    assert np.max(np.abs(amps[2])) < 1e-12
    # input-qubit lines summed over the ancilla bit reproduce the bare spectrum
    bare = spectrum(rho).amplitudes
    summed = amps[:2].reshape(2, 2, 2).sum(axis=2)
    assert np.max(np.abs(summed - bare)) < 1e-12


def test_noise_is_seeded():
    r1 = spectrum(PLUS, 0.01, seed=5)
    r2 = spectrum(PLUS, 0.01, seed=5)
    assert np.array_equal(r1.amplitudes, r2.amplitudes)
    assert not np.array_equal(r1.amplitudes, spectrum(PLUS).amplitudes)


def test_record_round_trip():
    rec = spectrum(random_density_matrix(8, 4), 0.02, seed=3)
    back = SpectralRecord.from_json(rec.to_json())
    assert np.array_equal(back.amplitudes, rec.amplitudes) and back.noise_sigma == 0.02
    assert rec.real_vector().shape == (3 * 4 * 2,)


def test_populations():
    assert np.allclose(diagonal_populations(DensityMatrix.basis(1, 4)), [0, 1, 0, 0])
    assert np.allclose(diagonal_populations(DensityMatrix.maximally_mixed(4)), [0.25] * 4)
    bell = DensityMatrix.from_ket([1, 0, 0, 1])
    assert np.allclose(diagonal_populations(bell), [0.5, 0, 0, 0.5])
    p = diagonal_populations(random_density_matrix(8, 9))
    assert abs(p.sum() - 1) < 1e-12
