"""Gate records and circuits compiled to dense unitaries.

Rotations use the half-angle convention ``R_a(phi) = exp(-i phi sigma_a / 2)``.
A circuit's gate list is in time order; ``compile_circuit`` returns the product
with the last gate leftmost.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .qcore import I2, H, X, Y, Z, check_unitary, embed, expm, kron

KINDS = (
    "PauliX", "PauliY", "PauliZ", "Hadamard",
    "RotX", "RotY", "RotZ",
    "CNOT", "AntiCNOT", "ControlledU", "RawUnitary",
)
_FIXED = {"PauliX": X, "PauliY": Y, "PauliZ": Z, "Hadamard": H}
_AXES = {"RotX": X, "RotY": Y, "RotZ": Z}

P0 = np.diag([1, 0]).astype(complex)
P1 = np.diag([0, 1]).astype(complex)


def rot(axis: str, angle: float) -> np.ndarray:
    """Single-qubit rotation about ``axis`` in {"x", "y", "z"}."""
    return expm(_AXES["Rot" + axis.upper()], -0.5j * angle)


@dataclass(frozen=True, eq=False)
class Gate:
    """One gate; ``targets`` lists every qubit it touches.

    For ``CNOT``/``AntiCNOT`` the targets are ``(control, target)``; for
    ``ControlledU`` the first target is the control and the rest carry ``u``.
    """

    kind: str
    targets: tuple[int, ...]
    angle: float | None = None
    u: np.ndarray | None = field(default=None, repr=False)
    active_on: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"{self.kind}: repeated qubit indices {self.targets}")
        if any(t < 0 for t in self.targets):
            raise IndexError(f"{self.kind}: negative qubit index")
        nt = len(self.targets)
        if self.kind in _FIXED or self.kind in _AXES:
            if nt != 1:
                raise ValueError(f"{self.kind} acts on one qubit, got {nt}")
            if self.kind in _AXES and self.angle is None:
                raise ValueError(f"{self.kind} needs an angle")
        elif self.kind in ("CNOT", "AntiCNOT"):
            if nt != 2:
                raise ValueError(f"{self.kind} needs (control, target)")
        else:
            if self.u is None:
                raise ValueError(f"{self.kind} needs a unitary")
            u = check_unitary(self.u)
            width = nt - 1 if self.kind == "ControlledU" else nt
            if width < 1 or u.shape != (1 << width, 1 << width):
                raise ValueError(f"{self.kind}: unitary shape {u.shape} does not fit {width} qubit(s)")
            if self.active_on not in (0, 1):
                raise ValueError("active_on must be 0 or 1")
            u = u.copy()
            u.setflags(write=False)
            object.__setattr__(self, "u", u)

    def local_matrix(self) -> np.ndarray:
        """Unitary on ``targets`` alone, in target order."""
        k = self.kind
        if k in _FIXED:
            return _FIXED[k]
        if k in _AXES:
            return rot(k[3], self.angle)
        if k == "CNOT":
            return kron(P0, I2) + kron(P1, X)
        if k == "AntiCNOT":
            return kron(P0, X) + kron(P1, I2)
        if k == "RawUnitary":
            return self.u
        d = self.u.shape[0]
        out = np.zeros((2 * d, 2 * d), dtype=complex)
        on = slice(d, 2 * d) if self.active_on == 1 else slice(0, d)
        off = slice(0, d) if self.active_on == 1 else slice(d, 2 * d)
        out[off, off] = np.eye(d)
        out[on, on] = self.u
        return out

    def to_record(self) -> dict:
        rec = {"kind": self.kind, "targets": list(self.targets)}
        if self.angle is not None:
            rec["angle"] = self.angle
        if self.u is not None:
            rec["matrix"] = [[[z.real, z.imag] for z in row] for row in self.u]
            if self.kind == "ControlledU":
                rec["active_on"] = self.active_on
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "Gate":
        u = rec.get("matrix")
        if u is not None:
            u = np.array([[complex(*z) if isinstance(z, list) else complex(z) for z in row] for row in u])
        return cls(rec["kind"], tuple(rec["targets"]), rec.get("angle"), u, rec.get("active_on", 1))


@dataclass(frozen=True, eq=False)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if max(g.targets) >= self.n_qubits:
                raise IndexError(f"{g.kind} on {g.targets} outside a {self.n_qubits}-qubit circuit")

    def then(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise ValueError("circuits act on different registers")
        return Circuit(self.n_qubits, self.gates + other.gates)

    def to_json(self) -> str:
        return json.dumps([g.to_record() for g in self.gates])

    @classmethod
    def from_json(cls, text: str, n_qubits: int | None = None) -> "Circuit":
        gates = [Gate.from_record(r) for r in json.loads(text)]
        if n_qubits is None:
            n_qubits = 1 + max((max(g.targets) for g in gates), default=0)
        return cls(n_qubits, tuple(gates))


def compile_circuit(c: Circuit) -> np.ndarray:
    u = np.eye(1 << c.n_qubits, dtype=complex)
    for g in c.gates:
        u = embed(g.local_matrix(), g.targets, c.n_qubits) @ u
    return u


def cnot(control: int, target: int, n: int) -> np.ndarray:
    return compile_circuit(Circuit(n, (Gate("CNOT", (control, target)),)))


def anti_cnot(control: int, target: int, n: int) -> np.ndarray:
    """NOT on ``target`` when ``control`` is |0>."""
    if control == target:
        raise ValueError("control and target must differ")
    return compile_circuit(Circuit(n, (Gate("AntiCNOT", (control, target)),)))


def controlled_block(blocks: Sequence[np.ndarray], ancilla_first: bool = False) -> np.ndarray:
    """Block-diagonal ``sum_a U_a (x) |a><a|`` over an ancilla register.

    ``blocks[a]`` is applied to the input register when the ancilla is in
    basis state ``a``; ``len(blocks)`` fixes the ancilla dimension and must be
    a power of two. The input register comes first unless ``ancilla_first``.
    """
    blocks = [check_unitary(b) for b in blocks]
    na = len(blocks)
    if na == 0 or na & (na - 1):
        raise ValueError(f"need one block per ancilla basis state, got {na}")
    d = blocks[0].shape[0]
    if any(b.shape != (d, d) for b in blocks):
        raise ValueError("blocks differ in dimension")
    out = np.zeros((d * na, d * na), dtype=complex)
    for a, b in enumerate(blocks):
        proj = np.zeros((na, na))
        proj[a, a] = 1
        out += kron(proj, b) if ancilla_first else kron(b, proj)
    return out
