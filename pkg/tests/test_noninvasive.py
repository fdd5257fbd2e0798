import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ancilla_ensemble.circuits import rot
from ancilla_ensemble.noninvasive import (
    METHODS, ElgiConfig, JointProbabilityTable, binary_entropy, conditional_entropy,
    elgi_closed_form, elgi_deficit, elgi_sweep, joint_probabilities,
)
from ancilla_ensemble.qcore import DensityMatrix, random_density_matrix

MIXED = DensityMatrix.maximally_mixed(2)


@pytest.mark.parametrize("method", METHODS)
def test_identity_on_zero(method):
    t = joint_probabilities(DensityMatrix.basis(0, 2), np.eye(2), method)
    assert np.allclose(t.p, [[1, 0], [0, 0]])


def test_pi_rotation_flips():
    t = joint_probabilities(MIXED, rot("x", np.pi), "cnot")
    assert np.allclose(t.p, [[0, 0.5], [0.5, 0]], atol=1e-15)


@pytest.mark.parametrize("method", METHODS)
def test_half_pi_uniform(method):
    t = joint_probabilities(MIXED, rot("x", np.pi / 2), method)
    assert np.allclose(t.p, 0.25, atol=1e-15)


@given(st.integers(0, 2 ** 31 - 1), st.floats(0, np.pi))
@settings(max_examples=40, deadline=None)
def test_methods_agree_and_marginals(seed, theta):
    rho = random_density_matrix(2, seed)
    u = rot("x", theta)
    tables = [joint_probabilities(rho, u, m).p for m in METHODS]
    for t in tables[1:]:
        assert np.max(np.abs(t - tables[0])) < 1e-12
    assert np.allclose(tables[0].sum(axis=1), np.real(np.diag(rho.matrix)), atol=1e-12)


def test_entropy_examples():
    assert conditional_entropy(JointProbabilityTable([[1, 0], [0, 0]], "cnot")) == 0
    assert np.isclose(conditional_entropy(JointProbabilityTable(np.full((2, 2), 0.25), "cnot")), 1)
    t = joint_probabilities(MIXED, rot("x", np.pi / 4))
    assert np.isclose(conditional_entropy(t), binary_entropy(np.cos(np.pi / 8) ** 2), atol=1e-12)
    assert abs(conditional_entropy(t) - 0.6009) < 1e-4


def test_entropy_weights_by_marginal():
    # first outcome mostly 0 with a deterministic second, rare 1 with a uniform second
    t = JointProbabilityTable([[0.9, 0.0], [0.05, 0.05]], "cnot")
    assert np.isclose(conditional_entropy(t), 0.1)


def test_inconsistent_table():
    with pytest.raises(ValueError):
        JointProbabilityTable([[0.7, 0.7], [0, 0]], "cnot")


def test_d3_examples():
    assert abs(elgi_deficit(ElgiConfig(3, np.pi / 4)) - (-0.134)) < 1e-3
    assert abs(elgi_deficit(ElgiConfig(3, 0.0))) < 1e-12
    ref = 2 * binary_entropy(np.cos(np.pi / 16) ** 2) - binary_entropy(np.cos(np.pi / 8) ** 2)
    assert abs(ref - (-0.1342)) < 1e-4
    assert abs(elgi_deficit(ElgiConfig(3, np.pi / 4)) - ref) < 1e-12


def test_sweep_matches_closed_form():
    thetas = np.linspace(0, np.pi, 50)
    sim, ref = elgi_sweep(thetas)
    assert np.max(np.abs(sim - ref)) < 1e-10


@pytest.mark.parametrize("n", [3, 4, 6])
def test_lower_bound(n):
    thetas = np.linspace(0, np.pi, 40)
    sim, _ = elgi_sweep(thetas, n)
    assert sim.min() >= -1


def test_unique_minimum_near_quarter_pi():
    thetas = np.linspace(1e-3, np.pi / 2 - 1e-3, 400)
    vals = np.array([elgi_closed_form(t) for t in thetas])
    k = int(np.argmin(vals))
    assert abs(thetas[k] - np.pi / 4) < 0.01
    # single basin: decreasing before the minimum, increasing after
    assert np.all(np.diff(vals[:k + 1]) <= 1e-12) and np.all(np.diff(vals[k:]) >= -1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        ElgiConfig(n=1)
    with pytest.raises(ValueError):
        ElgiConfig(theta=4.0)
    with pytest.raises(NotImplementedError):
        ElgiConfig(spin=1.0)
