"""Truncated harmonic oscillator on qubits: Franck-Condon factors and a
pseudo-spin contextuality test.

Units are dimensionless (hbar = omega = mass = 1). Level ``l`` of a four-level
oscillator is stored in two-qubit basis state ``l`` (|0> = |up,up>,
|1> = |up,down>, |2> = |down,up>, |3> = |down,down>).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import integrate

from .circuits import compile_circuit
from .expectation import ancilla_readout, controlled_circuit, expect_projector, joint_expect
from .qcore import I2, X, Y, Z, DensityMatrix, expm, n_qubits_of

Route = Literal["circuit", "direct"]

# b at which each FCF curve enters the classically forbidden region
FORBIDDEN_MARKERS = {(0, 0): 2.0, (0, 1): 1.0 + np.sqrt(3.0)}

MAX_BOUND = 2 * np.sqrt(2)

# (beta, eta) maximising I for oscillator level l
MAX_VIOLATION_ANGLES = {
    0: (-np.pi / 4, -3 * np.pi / 4),
    1: (3 * np.pi / 4, np.pi / 4),
    2: (np.pi / 4, 3 * np.pi / 4),
    3: (-3 * np.pi / 4, -np.pi / 4),
}


def ladder(d: int) -> np.ndarray:
    """Truncated annihilation operator."""
    return np.diag(np.sqrt(np.arange(1, d)), k=1).astype(complex)


@dataclass(frozen=True, eq=False)
class TruncatedOscillator:
    d: int = 4
    delta_e: float = 0.0  # shifts energies only; FCFs do not depend on it
    x_op: np.ndarray = field(init=False, repr=False)
    p_op: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("need at least two levels")
        a = ladder(self.d)
        ad = a.conj().T
        object.__setattr__(self, "x_op", (a + ad) / np.sqrt(2))
        object.__setattr__(self, "p_op", 1j * (ad - a) / np.sqrt(2))

    def commutator(self) -> np.ndarray:
        """``[x, p]``; equals ``i`` on the diagonal except the top level."""
        return self.x_op @ self.p_op - self.p_op @ self.x_op


def translation(osc: TruncatedOscillator, b: float) -> np.ndarray:
    """Displacement ``exp(-i p b)`` in the truncated space."""
    if not np.isfinite(b):
        raise ValueError("displacement must be finite")
    return expm(osc.p_op, -1j * b)


def fcf(osc: TruncatedOscillator, m: int, n: int, b: float, route: Route = "direct") -> float:
    """Franck-Condon factor ``|<m| U_T(b) |n>|**2`` in the truncated space.

    The circuit route prepares ``U_T(b)|n>`` on ``log2(d)`` qubits and
    measures the projector ``|m><m|`` through an ancilla.
    """
    if not (0 <= m < osc.d and 0 <= n < osc.d):
        raise IndexError(f"levels ({m}, {n}) outside a {osc.d}-level oscillator")
    u = translation(osc, b)
    if route == "direct":
        return float(abs(u[m, n]) ** 2)
    if route != "circuit":
        raise ValueError(f"unknown route {route!r}")
    n_qubits_of(osc.d)  # circuit encoding needs d = 2**k
    rho = DensityMatrix.from_ket(u[:, n])
    proj = np.zeros((osc.d, osc.d), dtype=complex)
    proj[m, m] = 1
    return expect_projector(rho, proj)


def hermite_functions(kmax: int, x: np.ndarray) -> np.ndarray:
    """Normalised oscillator eigenfunctions ``psi_0..psi_kmax`` at ``x``.

    Uses the three-term recurrence, which stays stable for large ``k``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((kmax + 1,) + x.shape)
    out[0] = np.pi ** -0.25 * np.exp(-x * x / 2)
    if kmax >= 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for k in range(1, kmax):
        out[k + 1] = np.sqrt(2.0 / (k + 1)) * x * out[k] - np.sqrt(k / (k + 1)) * out[k - 1]
    return out


def fcf_analytic_oracle(m: int, n: int, b: float) -> float:
    """Untruncated FCF: squared overlap of ``psi_m(x)`` and ``psi_n(x - b)`` by quadrature."""
    if not (0 <= m <= 40 and 0 <= n <= 40):
        raise ValueError("levels above 40 are not supported")

    def integrand(x):
        return hermite_functions(m, x)[m] * hermite_functions(n, x - b)[n]

    val, _ = integrate.quad(integrand, -20.0, 20.0 + b, epsabs=1e-13, epsrel=1e-13, limit=400,
                            points=[b / 2])
    return float(val * val)


def fcf_analytic_levels(m_max: int, n: int, b: float) -> np.ndarray:
    """Untruncated FCFs for ``m = 0..m_max`` from one vector-valued quadrature."""
    if not (0 <= m_max <= 40 and 0 <= n <= 40):
        raise ValueError("levels above 40 are not supported")

    def integrand(x):
        return hermite_functions(m_max, x) * hermite_functions(n, x - b)[n]

    val, _ = integrate.quad_vec(integrand, -20.0, 20.0 + b, epsabs=1e-13, epsrel=1e-13,
                                points=[b / 2], limit=2000)
    return val * val


def contextuality_observables(beta: float, eta: float):
    """The four +/-1-valued observables ``A, B, C, D`` on two qubits."""
    a = np.kron(X, I2)
    bb = np.kron(X, np.cos(beta) * Z - np.sin(beta) * X)
    c = -np.kron(Y, Y)
    dd = np.kron(X, np.cos(eta) * Z - np.sin(eta) * X)
    return a, bb, c, dd


def level_state(level: int, d: int = 4) -> DensityMatrix:
    if not 0 <= level < d:
        raise IndexError(f"level {level} outside 0..{d - 1}")
    return DensityMatrix.basis(level, d)


def contextuality_I(level: int, beta: float, eta: float, route: Route = "circuit") -> float:
    """``<AB> + <BC> + <CD> - <AD>`` on oscillator eigenstate ``level``.

    The circuit route reads every pair with a joint ancilla measurement on a
    three-qubit register; ``direct`` takes the traces.
    """
    if level not in (0, 1, 2, 3):
        raise ValueError("level must be 0, 1, 2 or 3")
    a, b, c, d = contextuality_observables(beta, eta)
    rho = level_state(level)
    pairs = ((a, b, 1), (b, c, 1), (c, d, 1), (a, d, -1))
    total = 0j
    for first, second, sign in pairs:
        if route == "circuit":
            total += sign * joint_expect(rho, second, first)
        elif route == "direct":
            total += sign * np.trace(rho.matrix @ first @ second)
        else:
            raise ValueError(f"unknown route {route!r}")
    if abs(total.imag) > 1e-9:
        raise ValueError(f"I has imaginary part {total.imag:.3g}")
    return float(total.real)


def contextuality_surface(betas, etas, levels=(0, 1, 2, 3)) -> np.ndarray:
    """Circuit-route ``I`` for several levels on a (beta, eta) grid.

    Returns an array indexed ``[level, beta, eta]``. Each pair circuit is
    compiled once per grid point and shared by all level states.
    """
    betas = np.asarray(betas, dtype=float)
    etas = np.asarray(etas, dtype=float)
    states = [level_state(l) for l in levels]
    out = np.empty((len(levels), len(betas), len(etas)))
    for i, beta in enumerate(betas):
        for j, eta in enumerate(etas):
            a, b, c, d = contextuality_observables(beta, eta)
            acc = np.zeros(len(levels), dtype=complex)
            for first, second, sign in ((a, b, 1), (b, c, 1), (c, d, 1), (a, d, -1)):
                u = compile_circuit(controlled_circuit([second, first], 2))
                for k, rho in enumerate(states):
                    sx, sy = ancilla_readout(rho, u)
                    acc[k] += sign * complex(sx, sy)
            if np.max(np.abs(acc.imag)) > 1e-9:
                raise ValueError("I has an imaginary part")
            out[:, i, j] = acc.real
    return out


def contextuality_grid(level: int, betas, etas) -> np.ndarray:
    """Vectorised direct-trace ``I`` on a (beta, eta) grid.

    For a basis state only the diagonal of the operator sum matters, and
    every term is affine in ``cos``/``sin`` of the angles.
    """
    betas = np.asarray(betas, dtype=float)[:, None]
    etas = np.asarray(etas, dtype=float)[None, :]
    rho = level_state(level).matrix
    a, _, c, _ = contextuality_observables(0.0, 0.0)
    xz, xx = np.kron(X, Z), np.kron(X, X)

    def ev(op):
        return np.trace(rho @ op).real

    # B = cos(beta) XZ - sin(beta) XX, D likewise with eta
    ab = np.cos(betas) * ev(a @ xz) - np.sin(betas) * ev(a @ xx)
    bc = np.cos(betas) * ev(xz @ c) - np.sin(betas) * ev(xx @ c)
    cd = np.cos(etas) * ev(c @ xz) - np.sin(etas) * ev(c @ xx)
    ad = np.cos(etas) * ev(a @ xz) - np.sin(etas) * ev(a @ xx)
    return ab + bc + cd - ad
