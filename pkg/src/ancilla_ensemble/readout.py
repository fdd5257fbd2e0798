"""NMR-style readout: transverse magnetisation, populations and spectra.

A spectrum holds every single-quantum coherence of the register. For qubit
``j`` and a configuration ``b`` of the remaining qubits (read as an integer,
most significant qubit first) the amplitude is ``<..0_j..| rho |..1_j..>``,
the raising-operator convention ``sigma_x + i sigma_y = 2|0><1|``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .qcore import DensityMatrix


def coherence_indices(n: int, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column basis indices of qubit ``j``'s coherences, ordered by ``b``."""
    p = n - 1 - j
    b = np.arange(1 << (n - 1))
    m0 = ((b >> p) << (p + 1)) | (b & ((1 << p) - 1))
    return m0, m0 | (1 << p)


@dataclass(frozen=True, eq=False)
class SpectralRecord:
    """``amplitudes[j, b]`` is the coherence of qubit ``j`` with the others in ``b``."""

    n_qubits: int
    amplitudes: np.ndarray
    noise_sigma: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.shape != (self.n_qubits, 1 << (self.n_qubits - 1)):
            raise ValueError(f"amplitude array {a.shape} does not fit {self.n_qubits} qubits")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    def real_vector(self) -> np.ndarray:
        """The ``n * 2**n`` real numbers: all real parts, then all imaginary parts."""
        flat = self.amplitudes.ravel()
        return np.concatenate([flat.real, flat.imag])

    def to_json(self) -> str:
        lines = [
            {"qubit": j, "other_bits": b, "re": float(z.real), "im": float(z.imag)}
            for j, row in enumerate(self.amplitudes)
            for b, z in enumerate(row)
        ]
        return json.dumps({
            "n_qubits": self.n_qubits,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "lines": lines,
        })

    @classmethod
    def from_json(cls, text: str) -> "SpectralRecord":
        d = json.loads(text)
        n = d["n_qubits"]
        a = np.zeros((n, 1 << (n - 1)), dtype=complex)
        for ln in d["lines"]:
            a[ln["qubit"], ln["other_bits"]] = complex(ln["re"], ln["im"])
        return cls(n, a, d.get("noise_sigma", 0.0), d.get("seed"))


def transverse_expectations(rho: DensityMatrix, j: int) -> tuple[float, float]:
    """``(<sigma_x>, <sigma_y>)`` of qubit ``j``.

    Both follow from the summed coherence ``c`` of qubit ``j``:
    ``<sigma_x> = 2 Re c`` and ``<sigma_y> = -2 Im c``.
    """
    n = rho.n_qubits
    if not 0 <= j < n:
        raise IndexError(f"qubit {j} outside a {n}-qubit register")
    r, c = coherence_indices(n, j)
    total = rho.matrix[r, c].sum()
    return float(2 * total.real), float(-2 * total.imag)


def ideal_amplitudes(m: np.ndarray) -> np.ndarray:
    n = int(m.shape[0]).bit_length() - 1
    out = np.empty((n, 1 << (n - 1)), dtype=complex)
    for j in range(n):
        r, c = coherence_indices(n, j)
        out[j] = m[r, c]
    return out


def spectrum(rho: DensityMatrix | np.ndarray, noise_sigma: float = 0.0, seed=None) -> SpectralRecord:
    """Single-quantum coherences of ``rho``.

    With ``noise_sigma > 0`` independent Gaussian noise of standard deviation
    ``noise_sigma * max|amplitude|`` is added to real and imaginary parts.
    """
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    n = int(m.shape[0]).bit_length() - 1
    if n < 1:
        raise ValueError("spectrum needs at least one qubit")
    amps = ideal_amplitudes(m)
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        scale = noise_sigma * np.max(np.abs(amps))
        amps = amps + scale * (rng.standard_normal(amps.shape) + 1j * rng.standard_normal(amps.shape))
    return SpectralRecord(n, amps, noise_sigma, seed)


def diagonal_populations(rho: DensityMatrix) -> np.ndarray:
    p = np.real(np.diag(rho.matrix)).copy()
    if rho.kind == "normalized":
        if p.min() < -1e-10 or abs(p.sum() - 1) > 1e-10:
            raise ValueError("populations are not a probability vector")
    return p
