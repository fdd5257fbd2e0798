"""Dense density-matrix primitives shared by every protocol module.

Operators are plain complex ``numpy`` arrays. Qubit 0 is the most
significant bit of a basis index, so ``|q0 q1 ... q_{n-1}>`` maps to the
integer ``q0 * 2**(n-1) + ... + q_{n-1}`` and ``tensor(a, b)`` places ``a``
on the leading qubits.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Literal, Sequence

import numpy as np
import scipy.linalg

Kind = Literal["normalized", "deviation"]

MAX_QUBITS = 14

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
EIGEN_TOL = 1e-10
UNITARY_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULIS = (I2, X, Y, Z)


class DimensionError(ValueError):
    """Operands have incompatible shapes."""


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return m.shape[0] == m.shape[1] and float(np.max(np.abs(m - m.conj().T))) <= tol


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    if u.shape[0] != u.shape[1]:
        return False
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))) <= tol


def check_unitary(u, tol: float = UNITARY_TOL) -> np.ndarray:
    m = as_matrix(u)
    if not is_unitary(m, tol):
        raise ValueError("matrix is not unitary")
    return m


def check_hermitian(a, tol: float = HERMITIAN_TOL) -> np.ndarray:
    m = as_matrix(a)
    if not is_hermitian(m, tol):
        raise ValueError("matrix is not Hermitian")
    return m


def n_qubits_of(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if 1 << n != dim:
        raise DimensionError(f"dimension {dim} is not a power of two")
    return n


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian state matrix, either unit-trace or traceless (deviation).

    The stored matrix is made read-only so instances can be shared freely.
    """

    matrix: np.ndarray
    kind: Kind = "normalized"

    def __post_init__(self):
        m = as_matrix(self.matrix).copy()
        if m.shape[0] != m.shape[1]:
            raise DimensionError(f"density matrix must be square, got {m.shape}")
        if not is_hermitian(m):
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(m)
        if self.kind == "normalized":
            if abs(tr - 1) > TRACE_TOL:
                raise ValueError(f"normalized state has trace {tr}")
            if np.linalg.eigvalsh(m).min() < -EIGEN_TOL:
                raise ValueError("normalized state has negative eigenvalues")
        elif self.kind == "deviation":
            if abs(tr) > TRACE_TOL:
                raise ValueError(f"deviation matrix has trace {tr}")
        else:
            raise ValueError(f"unknown kind {self.kind!r}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_qubits(self) -> int:
        return n_qubits_of(self.dim)

    @classmethod
    def from_ket(cls, psi) -> "DensityMatrix":
        v = np.asarray(psi, dtype=complex).ravel()
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def basis(cls, index: int, dim: int) -> "DensityMatrix":
        m = np.zeros((dim, dim), dtype=complex)
        m[index, index] = 1
        return cls(m)

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=complex) / dim)

    def deviation(self) -> np.ndarray:
        """Traceless part ``rho - tr(rho)/d * 1``."""
        return self.matrix - np.trace(self.matrix) / self.dim * np.eye(self.dim)


def _mat(x) -> np.ndarray:
    return x.matrix if isinstance(x, DensityMatrix) else as_matrix(x)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Two-operand Kronecker product of 2-D arrays (cheaper than ``np.kron``)."""
    (ra, ca), (rb, cb) = a.shape, b.shape
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(ra * rb, ca * cb)


def tensor(*ops) -> np.ndarray:
    """Kronecker product, leftmost operand on the most significant qubits."""
    if not ops:
        raise ValueError("tensor needs at least one operand")
    return reduce(kron, (_mat(o) for o in ops))


def tensor_states(*states: DensityMatrix) -> DensityMatrix:
    kinds = {s.kind for s in states}
    kind = "normalized" if kinds == {"normalized"} else "deviation"
    m = tensor(*states)
    if kind == "deviation":
        m = m - np.trace(m) / m.shape[0] * np.eye(m.shape[0])
    return DensityMatrix(m, kind)


def partial_trace_matrix(m: np.ndarray, keep: Iterable[int], n: int) -> np.ndarray:
    keep = sorted(set(keep))
    for q in keep:
        if not 0 <= q < n:
            raise IndexError(f"qubit {q} outside a {n}-qubit register")
    drop = [q for q in range(n) if q not in keep]
    t = m.reshape((2,) * (2 * n))
    # axes 0..n-1 are row qubits, n..2n-1 column qubits
    for k, q in enumerate(sorted(drop, reverse=True)):
        rem = n - k
        t = np.trace(t, axis1=q, axis2=q + rem)
    d = 1 << len(keep)
    return t.reshape(d, d)


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Reduced state on the qubits in ``keep`` (kept in ascending order)."""
    n = rho.n_qubits
    red = partial_trace_matrix(rho.matrix, keep, n)
    red = (red + red.conj().T) / 2
    return DensityMatrix(red, rho.kind)


def evolve(rho: DensityMatrix, u) -> DensityMatrix:
    """Return ``U rho U^dagger``."""
    u = as_matrix(u)
    if u.shape != rho.matrix.shape:
        raise DimensionError(f"unitary {u.shape} does not match state {rho.matrix.shape}")
    out = u @ rho.matrix @ u.conj().T
    out = (out + out.conj().T) / 2
    if rho.kind == "normalized":
        # renormalise rounding drift only; a non-unitary u still fails validation
        tr = np.trace(out).real
        if abs(tr - 1) < 1e-9:
            out = out / tr
    else:
        out = out - np.trace(out) / out.shape[0] * np.eye(out.shape[0])
    return DensityMatrix(out, rho.kind)


def expectation(rho: DensityMatrix, obs) -> float:
    """``tr(rho * obs)`` for a Hermitian observable.

    Raises ``ValueError`` if the trace carries an imaginary part above 1e-8,
    which can only happen for a non-Hermitian operand.
    """
    o = as_matrix(obs)
    if o.shape != rho.matrix.shape:
        raise DimensionError(f"observable {o.shape} does not match state {rho.matrix.shape}")
    val = np.trace(rho.matrix @ o)
    if abs(val.imag) > 1e-8:
        raise ValueError(f"expectation has imaginary part {val.imag:.3g}; operand not Hermitian")
    return float(val.real)


def expm(h, scale: complex = 1.0) -> np.ndarray:
    """Matrix exponential of ``scale * h``.

    Hermitian ``h`` goes through ``eigh`` so that ``expm(h, -1j*t)`` is unitary
    to rounding; anything else falls back to scipy's scaling-and-squaring.
    """
    m = as_matrix(h)
    if m.shape[0] != m.shape[1]:
        raise DimensionError("expm needs a square matrix")
    if is_hermitian(m):
        w, v = np.linalg.eigh((m + m.conj().T) / 2)
        return (v * np.exp(scale * w)) @ v.conj().T
    return scipy.linalg.expm(scale * m)


def random_unitary(dim: int, seed=None) -> np.ndarray:
    """Haar-random unitary: QR of a complex Ginibre matrix, phases fixed by diag(R)."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_density_matrix(dim: int, seed=None, rank: int | None = None) -> DensityMatrix:
    """Hilbert-Schmidt (Ginibre) random mixed state."""
    rng = np.random.default_rng(seed)
    k = dim if rank is None else rank
    g = rng.standard_normal((dim, k)) + 1j * rng.standard_normal((dim, k))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real)


def random_deviation(dim: int, seed=None) -> DensityMatrix:
    """Random traceless Hermitian matrix with unit Frobenius norm."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    m = g + g.conj().T
    m -= np.trace(m) / dim * np.eye(dim)
    return DensityMatrix(m / np.linalg.norm(m), "deviation")


def embed(op, targets: Sequence[int], n: int) -> np.ndarray:
    """Lift ``op`` acting on ``targets`` (in that order) to the full register.

    Non-adjacent or reordered targets are handled by permuting tensor axes.
    """
    op = as_matrix(op)
    k = len(targets)
    if op.shape != (1 << k, 1 << k):
        raise DimensionError(f"operator shape {op.shape} does not act on {k} qubits")
    if len(set(targets)) != k:
        raise ValueError(f"repeated target indices {list(targets)}")
    for q in targets:
        if not 0 <= q < n:
            raise IndexError(f"qubit {q} outside a {n}-qubit register")
    if list(targets) == list(range(n)):
        return op
    rest = [q for q in range(n) if q not in targets]
    full = kron(op, np.eye(1 << len(rest), dtype=complex))
    order = list(targets) + rest  # qubit order of `full`'s axes
    perm = [order.index(q) for q in range(n)]
    t = full.reshape((2,) * (2 * n))
    t = t.transpose(perm + [p + n for p in perm])
    return t.reshape(1 << n, 1 << n)


def pauli_string(labels: str) -> np.ndarray:
    """Tensor product of Paulis from a label like ``"XZ"`` (``I`` allowed)."""
    table = dict(zip("IXYZ", PAULIS))
    return tensor(*(table[c] for c in labels.upper()))


def pauli_basis(n: int) -> list[np.ndarray]:
    """Unnormalised Pauli products in lexicographic (I, X, Y, Z)^n order."""
    out = [np.ones((1, 1), dtype=complex)]
    for _ in range(n):
        out = [kron(a, p) for a in out for p in PAULIS]
    return out


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ``(tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``."""
    a, b = _mat(rho), _mat(sigma)
    sa = scipy.linalg.sqrtm(a)
    inner = scipy.linalg.sqrtm(sa @ b @ sa)
    return float(np.real(np.trace(inner)) ** 2)


def nearest_physical(m) -> np.ndarray:
    """Clip negative eigenvalues and renormalise to unit trace."""
    a = _mat(m)
    w, v = np.linalg.eigh((a + a.conj().T) / 2)
    w = np.clip(w, 0, None)
    if w.sum() <= 0:
        raise ValueError("matrix has no positive part")
    w /= w.sum()
    return (v * w) @ v.conj().T
