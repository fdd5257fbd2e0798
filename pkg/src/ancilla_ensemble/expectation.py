"""Ancilla-interferometric expectation values.

Every routine here runs an actual circuit: an ancilla (qubit 0) prepared in
|+>, one or more controlled unitaries acting on the system register (qubits
1..n) when the ancilla is |1>, then the ancilla's transverse magnetisation
``<sigma_x> + i <sigma_y>`` is read out. For a single controlled ``U`` that
readout equals ``tr(rho U)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuits import Circuit, Gate, compile_circuit
from .qcore import (
    DensityMatrix,
    DimensionError,
    as_matrix,
    check_unitary,
    kron,
    is_hermitian,
)

_PLUS = DensityMatrix.from_ket([1, 1])


@dataclass(frozen=True, eq=False)
class MoussaResult:
    value: complex
    circuit_used: Circuit
    ancilla_readout: tuple[float, float]


def controlled_circuit(unitaries: Sequence[np.ndarray], n: int) -> Circuit:
    """Ancilla-controlled ``unitaries`` (time order) on an ``n``-qubit system."""
    system = tuple(range(1, n + 1))
    gates = []
    for u in unitaries:
        u = check_unitary(u)
        if u.shape != (1 << n, 1 << n):
            raise DimensionError(f"operator {u.shape} does not act on {n} qubits")
        gates.append(Gate("ControlledU", (0,) + system, u=u, active_on=1))
    return Circuit(n + 1, tuple(gates))


def ancilla_readout(rho: DensityMatrix, circuit_unitary: np.ndarray) -> tuple[float, float]:
    """Ancilla ``(<sigma_x>, <sigma_y>)`` after running a compiled circuit on ``|+><+| (x) rho``."""
    if rho.kind != "normalized":
        raise ValueError("expectation circuits need a normalized state")
    u = as_matrix(circuit_unitary)
    if u.shape != (2 * rho.dim, 2 * rho.dim):
        raise DimensionError(f"circuit {u.shape} does not fit ancilla + {rho.dim}-level system")
    # U (|+><+| (x) rho) U^dagger; the ancilla coherence sits in the upper-right block
    final = u @ kron(_PLUS.matrix, rho.matrix) @ u.conj().T
    d = rho.dim
    c = np.trace(final[:d, d:])
    return float(2 * c.real), float(-2 * c.imag)


def moussa(rho: DensityMatrix, unitaries: Sequence[np.ndarray]) -> MoussaResult:
    """Apply ``unitaries`` in order, each controlled by the |+> ancilla."""
    if rho.kind != "normalized":
        raise ValueError("expectation circuits need a normalized state")
    circuit = controlled_circuit(unitaries, rho.n_qubits)
    sx, sy = ancilla_readout(rho, compile_circuit(circuit))
    return MoussaResult(complex(sx, sy), circuit, (sx, sy))


def expect_unitary(rho: DensityMatrix, u) -> complex:
    return moussa(rho, [u]).value


def expect_hermitian_unitary(rho: DensityMatrix, a) -> float:
    """``<A>`` for an operator with ``A = A^dagger`` and ``A^2 = 1``."""
    a = as_matrix(a)
    if not is_hermitian(a, 1e-10) or np.max(np.abs(a @ a - np.eye(a.shape[0]))) > 1e-10:
        raise ValueError("operator is not Hermitian-unitary")
    value = expect_unitary(rho, a)
    if abs(value.imag) > 1e-9:
        raise ValueError(f"readout has imaginary part {value.imag:.3g}")
    return value.real


def expect_projector(rho: DensityMatrix, p) -> float:
    """``tr(rho P)`` via the reflection ``2P - 1``."""
    p = as_matrix(p)
    if not is_hermitian(p, 1e-10) or np.max(np.abs(p @ p - p)) > 1e-10:
        raise ValueError("operator is not an orthogonal projector")
    reflection = 2 * p - np.eye(p.shape[0])
    return (1 + expect_hermitian_unitary(rho, reflection)) / 2


def expect_diagonal_hermitian(rho: DensityMatrix, a) -> float:
    """``tr(rho A)`` for diagonal ``A`` as a weighted sum of projector runs.

    Basis levels with zero weight are skipped.
    """
    a = as_matrix(a)
    if np.max(np.abs(a - np.diag(np.diag(a)))) > 1e-12:
        raise ValueError("operator is not diagonal")
    weights = np.diag(a)
    if np.max(np.abs(weights.imag)) > 1e-12:
        raise ValueError("diagonal entries must be real")
    total = 0.0
    d = a.shape[0]
    for k, w in enumerate(weights.real):
        if w == 0:
            continue
        proj = np.zeros((d, d), dtype=complex)
        proj[k, k] = 1
        total += w * expect_projector(rho, proj)
    return total


def joint_expect(rho: DensityMatrix, u, v) -> complex:
    """``tr(rho V U)``: controlled ``U`` first, then controlled ``V``."""
    return moussa(rho, [u, v]).value
