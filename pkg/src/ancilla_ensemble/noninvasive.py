"""Two-time joint probabilities and the entropic Leggett-Garg deficit.

The register for the ancilla-based schemes is ``|ancilla, system>`` (ancilla
on qubit 0), so the final populations are read directly as ``P(q1, q2)``.
Outcome ``q = 0`` is the +1 eigenvalue of ``sigma_z``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .circuits import Circuit, Gate, compile_circuit, rot
from .qcore import DensityMatrix, DimensionError, as_matrix, evolve, tensor
from .readout import diagonal_populations

Method = Literal["cnot", "inrm", "projective"]
METHODS = ("cnot", "inrm", "projective")

_ANCILLA_ZERO = DensityMatrix.basis(0, 2)


@dataclass(frozen=True, eq=False)
class JointProbabilityTable:
    p: np.ndarray
    method: str

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).reshape(2, 2).copy()
        if p.min() < -1e-10 or p.max() > 1 + 1e-10:
            raise ValueError(f"probabilities out of range: {p}")
        if abs(p.sum() - 1) > 1e-9:
            raise ValueError(f"joint table sums to {p.sum()}")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    def marginal_first(self) -> np.ndarray:
        return self.p.sum(axis=1)

    def marginal_second(self) -> np.ndarray:
        return self.p.sum(axis=0)


def _ancilla_run(rho: DensityMatrix, u: np.ndarray, gate: str) -> np.ndarray:
    c = Circuit(2, (Gate(gate, (1, 0)), Gate("RawUnitary", (1,), u=u)))
    final = evolve(DensityMatrix(tensor(_ANCILLA_ZERO, rho), "normalized"), compile_circuit(c))
    return diagonal_populations(final).reshape(2, 2)


def joint_probabilities(rho: DensityMatrix, u, method: Method = "inrm") -> JointProbabilityTable:
    """``P(q1, q2)`` for a sigma_z measurement, evolution ``u``, sigma_z measurement.

    ``cnot`` copies the first outcome onto an ancilla; ``inrm`` takes the
    ``q1 = 0`` row from the CNOT run and the ``q1 = 1`` row from the
    anti-CNOT run, in both cases where the ancilla stayed in |0>;
    ``projective`` collapses the system (Lueders rule) between the two
    measurements.
    """
    u = as_matrix(u)
    if rho.dim != 2 or u.shape != (2, 2):
        raise DimensionError("joint_probabilities works on a single system qubit")
    if method == "cnot":
        p = _ancilla_run(rho, u, "CNOT")
    elif method == "inrm":
        p = np.empty((2, 2))
        p[0] = _ancilla_run(rho, u, "CNOT")[0]
        # anti-CNOT leaves the ancilla in |0> exactly when the system was |1>
        p[1] = _ancilla_run(rho, u, "AntiCNOT")[0]
    elif method == "projective":
        p = np.empty((2, 2))
        for q1 in range(2):
            proj = np.zeros((2, 2), dtype=complex)
            proj[q1, q1] = 1
            branch = u @ proj @ rho.matrix @ proj @ u.conj().T
            p[q1] = np.real(np.diag(branch))
    else:
        raise ValueError(f"unknown method {method!r}")
    return JointProbabilityTable(p, method)


def conditional_probabilities(table: JointProbabilityTable) -> np.ndarray:
    """``P(q2 | q1)`` by Bayes' rule; rows with ``P(q1) = 0`` are left as zeros."""
    p = table.p
    marg = table.marginal_first()
    cond = np.zeros((2, 2))
    for q1 in range(2):
        if marg[q1] > 0:
            cond[q1] = p[q1] / marg[q1]
        elif np.any(p[q1] > 1e-12):
            raise ValueError("zero marginal with nonzero joint entry")
    return cond


def conditional_entropy(table: JointProbabilityTable) -> float:
    """``H(Q2 | Q1)`` in bits, with ``0 log 0 = 0``."""
    cond = conditional_probabilities(table)
    p = table.p
    mask = p > 0
    return float(-np.sum(p[mask] * np.log2(cond[mask])))


def binary_entropy(p: float) -> float:
    return float(-sum(x * np.log2(x) for x in (p, 1 - p) if x > 0))


@dataclass(frozen=True, eq=False)
class ElgiConfig:
    n: int = 3
    theta: float = np.pi / 4
    spin: float = 0.5
    initial_state: DensityMatrix = field(default_factory=lambda: DensityMatrix.maximally_mixed(2))

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least two measurements")
        if not 0 <= self.theta <= np.pi + 1e-12:
            raise ValueError("theta must lie in [0, pi]")
        if self.spin != 0.5:
            raise NotImplementedError("only spin-1/2 is supported")


def entropy_after_rotation(phi: float, rho: DensityMatrix, method: Method = "inrm") -> float:
    return conditional_entropy(joint_probabilities(rho, rot("x", phi), method))


def elgi_deficit(cfg: ElgiConfig, method: Method = "inrm") -> float:
    """Information deficit ``D_n(theta)`` in bits.

    ``theta`` is the total rotation between the first and last of the ``n``
    equidistant measurements, so neighbouring measurements are separated by
    ``RotX(theta / (n - 1))``.
    """
    step = entropy_after_rotation(cfg.theta / (cfg.n - 1), cfg.initial_state, method)
    full = entropy_after_rotation(cfg.theta, cfg.initial_state, method)
    return ((cfg.n - 1) * step - full) / np.log2(2 * cfg.spin + 1)


def elgi_closed_form(theta: float, n: int = 3) -> float:
    """Binary-entropy expression for ``D_n`` under x-rotations."""
    step = binary_entropy(np.cos(theta / (2 * (n - 1))) ** 2)
    return (n - 1) * step - binary_entropy(np.cos(theta / 2) ** 2)


def elgi_sweep(thetas, n: int = 3, method: Method = "inrm") -> tuple[np.ndarray, np.ndarray]:
    """Circuit-simulated and closed-form ``D_n`` on a grid of total angles."""
    thetas = np.asarray(thetas, dtype=float)
    sim = np.array([elgi_deficit(ElgiConfig(n, float(t)), method) for t in thetas])
    ref = np.array([elgi_closed_form(float(t), n) for t in thetas])
    return sim, ref
