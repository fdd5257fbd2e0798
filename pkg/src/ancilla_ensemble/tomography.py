"""Ancilla-assisted state tomography and single-scan process tomography.

State tomography works on an ``n``-qubit input register followed by an
``n_hat``-qubit ancilla register that starts maximally mixed. Each experiment
applies ``(1 (x) V) * sum_a U_a (x) |a><a|`` and records the full
single-quantum spectrum; the spectra of all experiments are linear in the
``N**2 - 1`` real parameters of the traceless part of the input state.

Process matrices use the unnormalised Pauli products ``(I, X, Y, Z)^n`` in
lexicographic order, so a trace-preserving ``chi`` has unit trace.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .circuits import controlled_block, rot
from .qcore import (
    H,
    DensityMatrix,
    DimensionError,
    as_matrix,
    check_unitary,
    nearest_physical,
    pauli_basis,
    random_unitary,
    tensor,
)
from .readout import SpectralRecord, spectrum

log = logging.getLogger(__name__)

MAX_CONDITION = 1e6

# Table of (n_A, n_B) ancilla sizes used for single-scan process tomography
SSPT_ANCILLAS = {1: (1, 1), 2: (2, 2), 3: (3, 3), 4: (4, 5), 5: (5, 6)}


class PlanError(ValueError):
    """The experiments cannot determine every unknown."""


class InconsistentRecords(ValueError):
    """Spectra disagree with the plan by more than the noise allows."""


def min_experiments(n: int, n_hat: int) -> int:
    """Fewest experiments so that ``K * n_tot * 2**n_tot >= 4**n - 1``."""
    if n < 1 or n_hat < 0:
        raise ValueError("need n >= 1 and n_hat >= 0")
    n_tot = n + n_hat
    per_scan = n_tot * (1 << n_tot)
    return -(-(4 ** n - 1) // per_scan)


def sspt_ancillas(n: int) -> tuple[int, int]:
    """``(n_A, n_B)``: faithful ancilla ``n_A = n`` and the smallest single-scan ``n_B``."""
    n_b = 0
    while min_experiments(2 * n, n_b) > 1:
        n_b += 1
    return n, n_b


def count_table(n_max: int = 5) -> list[dict]:
    """Scan counts for standard QPT, ancilla-assisted PT and single-scan PT."""
    if not 1 <= n_max <= 6:
        raise ValueError("n_max must be in 1..6")
    rows = []
    for n in range(1, n_max + 1):
        n_a, n_b = sspt_ancillas(n)
        rows.append({
            "n": n,
            "M_QPT": 4 ** n * min_experiments(n, 0),
            "M_AAPT": min_experiments(2 * n, 0),
            "n_A": n_a,
            "M_SSPT": min_experiments(n + n_a, n_b),
            "n_B": n_b,
        })
    return rows


def scaling_table(n_max: int = 8, n_hat_max: int = 8) -> list[dict]:
    """``K(n, n_hat)`` over a grid of register sizes (the experiment-scaling figure)."""
    return [
        {"n": n, "n_hat": nh, "K": min_experiments(n, nh)}
        for n in range(1, n_max + 1)
        for nh in range(0, n_hat_max + 1)
    ]


@dataclass(frozen=True, eq=False)
class Experiment:
    """One readout unitary: ancilla-conditioned blocks then ancilla-local ``v``."""

    blocks: tuple[np.ndarray, ...]
    v: np.ndarray

    def unitary(self) -> np.ndarray:
        n_in = self.blocks[0].shape[0]
        return np.kron(np.eye(n_in), self.v) @ controlled_block(self.blocks)


def _traceless_basis(n: int) -> list[np.ndarray]:
    return pauli_basis(n)[1:]


def design_matrix(n: int, n_hat: int, experiments: Sequence[Experiment]) -> np.ndarray:
    """Real map from Pauli coefficients ``c_P = tr(rho P)`` to stacked spectra.

    Column ``i`` is the spectrum produced by ``P_i / N`` for the ``i``-th
    non-identity Pauli product.
    """
    big_n, n_anc = 1 << n, 1 << n_hat
    anc_mixed = np.eye(n_anc) / n_anc
    basis = _traceless_basis(n)
    cols = []
    for op in basis:
        parts = []
        for ex in experiments:
            u = ex.unitary()
            r = u @ np.kron(op / big_n, anc_mixed) @ u.conj().T
            parts.append(spectrum(r).real_vector())
        cols.append(np.concatenate(parts))
    return np.array(cols).T


def condition_number(a: np.ndarray) -> float:
    s = np.linalg.svd(a, compute_uv=False)
    return float(s[0] / s[-1]) if s[-1] > 0 else float("inf")


@dataclass(frozen=True, eq=False)
class TomographyPlan:
    n: int
    n_hat: int
    experiments: tuple[Experiment, ...]
    seed: int | None = None
    design: np.ndarray = field(repr=False, default=None)
    condition_number: float = float("nan")

    @classmethod
    def from_experiments(cls, n: int, n_hat: int, experiments: Sequence[Experiment], seed=None) -> "TomographyPlan":
        """Assemble and validate a plan; rank-deficient designs raise ``PlanError``."""
        experiments = tuple(experiments)
        for ex in experiments:
            if len(ex.blocks) != 1 << n_hat:
                raise PlanError(f"need {1 << n_hat} blocks per experiment, got {len(ex.blocks)}")
            if ex.blocks[0].shape != (1 << n, 1 << n) or ex.v.shape != (1 << n_hat, 1 << n_hat):
                raise DimensionError("experiment operators do not match the registers")
        a = design_matrix(n, n_hat, experiments)
        if a.shape[0] < a.shape[1]:
            raise PlanError(f"{a.shape[0]} equations for {a.shape[1]} unknowns")
        cond = condition_number(a)
        if not cond < MAX_CONDITION:
            raise PlanError(f"design matrix condition number {cond:.3g} exceeds {MAX_CONDITION:.0e}")
        a.setflags(write=False)
        return cls(n, n_hat, experiments, seed, a, cond)

    @property
    def n_total(self) -> int:
        return self.n + self.n_hat

    def unitaries(self) -> list[np.ndarray]:
        return [ex.unitary() for ex in self.experiments]


AncillaUnitary = Literal["haar", "hadamard"]


def _ancilla_unitary(n_hat: int, kind: AncillaUnitary, rng) -> np.ndarray:
    if kind == "hadamard":
        return tensor(*([H] * n_hat)) if n_hat else np.eye(1, dtype=complex)
    return random_unitary(1 << n_hat, rng)


def build_plan(n: int, n_hat: int, seed=0, draws: int = 20,
               ancilla_unitary: AncillaUnitary = "haar") -> TomographyPlan:
    """Best of ``draws`` random plans by design-matrix condition number.

    Blocks ``U_a`` are Haar random. The ancilla-local ``V`` is Haar random by
    default: a ``V`` with uniform ``|V_ba|**2`` (e.g. Hadamards) mixes all
    blocks equally into every line and leaves the design rank deficient.
    """
    if draws < 1:
        raise ValueError("draws must be >= 1")
    k = min_experiments(n, n_hat)
    best = None
    for child in np.random.SeedSequence(seed).spawn(draws):
        rng = np.random.default_rng(child)
        experiments = [
            Experiment(
                tuple(random_unitary(1 << n, rng) for _ in range(1 << n_hat)),
                _ancilla_unitary(n_hat, ancilla_unitary, rng),
            )
            for _ in range(k)
        ]
        try:
            plan = TomographyPlan.from_experiments(n, n_hat, experiments, seed)
        except PlanError:
            continue
        if best is None or plan.condition_number < best.condition_number:
            best = plan
    if best is None:
        raise PlanError(f"no usable plan among {draws} draws")
    log.debug("plan n=%d n_hat=%d K=%d cond=%.3g", n, n_hat, k, best.condition_number)
    return best


def acquire(plan: TomographyPlan, rho: DensityMatrix, noise_sigma: float = 0.0, seed=None) -> list[SpectralRecord]:
    """Simulated spectra of ``rho (x) 1/N_hat`` after each experiment."""
    if rho.dim != 1 << plan.n:
        raise DimensionError(f"state of dimension {rho.dim} does not fit {plan.n} input qubits")
    m = rho.deviation() if rho.kind == "deviation" else rho.matrix
    joint = np.kron(m, np.eye(1 << plan.n_hat) / (1 << plan.n_hat))
    seeds = np.random.SeedSequence(seed).spawn(len(plan.experiments))
    out = []
    for u, s in zip(plan.unitaries(), seeds):
        out.append(spectrum(u @ joint @ u.conj().T, noise_sigma, np.random.default_rng(s) if noise_sigma > 0 else None))
    return out


@dataclass(frozen=True, eq=False)
class Reconstruction:
    """Least-squares estimate; ``matrix`` is Hermitian but not necessarily positive."""

    matrix: np.ndarray
    kind: str
    coefficients: np.ndarray
    residual: float
    condition_number: float

    def density_matrix(self, project: bool = False) -> DensityMatrix:
        if self.kind == "normalized" and project:
            return DensityMatrix(nearest_physical(self.matrix))
        return DensityMatrix(self.matrix, self.kind)


def reconstruct(plan: TomographyPlan, records: Sequence[SpectralRecord],
                kind: Literal["normalized", "deviation"] = "normalized") -> Reconstruction:
    """Solve the stacked spectra for the state's traceless part."""
    if len(records) != len(plan.experiments):
        raise ValueError(f"expected {len(plan.experiments)} records, got {len(records)}")
    if plan.condition_number > MAX_CONDITION:
        raise PlanError(f"plan condition number {plan.condition_number:.3g} is unusable")
    y = np.concatenate([r.real_vector() for r in records])
    a = plan.design
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    residual = float(np.linalg.norm(a @ coef - y))
    sigma = max(
        (r.noise_sigma * float(np.max(np.abs(r.amplitudes))) for r in records),
        default=0.0,
    )
    allowed = 10 * max(sigma, 1e-9 * max(1.0, float(np.linalg.norm(y)))) * np.sqrt(len(y))
    if residual > allowed:
        raise InconsistentRecords(f"residual {residual:.3g} exceeds {allowed:.3g}")
    big_n = 1 << plan.n
    dev = sum(c * p for c, p in zip(coef, _traceless_basis(plan.n))) / big_n
    dev = (dev + dev.conj().T) / 2
    m = dev + np.eye(big_n) / big_n if kind == "normalized" else dev
    m.setflags(write=False)
    return Reconstruction(m, kind, coef, residual, plan.condition_number)


# -- process tomography ------------------------------------------------------

PAULI_LABELS = "IXYZ"


def basis_labels(n: int) -> list[str]:
    labels = [""]
    for _ in range(n):
        labels = [a + b for a in labels for b in PAULI_LABELS]
    return labels


def beta_tensor(n: int) -> np.ndarray:
    """``beta[m, n', j, k]`` with ``E_m rho_j E_n'^dagger = sum_k beta rho_k``.

    ``rho_j`` runs over matrix units ``|r><s|`` with ``j = r * N + s``; then
    ``E_m |r><s| E_n'^dagger = sum_{p,q} E_m[p, r] conj(E_n'[q, s]) |p><q|``.
    """
    e = np.array(pauli_basis(n))
    big_n = 1 << n
    b = np.einsum("mpr,nqs->mnrspq", e, e.conj())
    return b.reshape(big_n ** 2, big_n ** 2, big_n ** 2, big_n ** 2)


def kraus_to_chi(kraus: Sequence[np.ndarray]) -> np.ndarray:
    """Theoretical ``chi`` from an operator-sum representation."""
    kraus = [as_matrix(k) for k in kraus]
    n = int(kraus[0].shape[0]).bit_length() - 1
    basis = pauli_basis(n)
    big_n = 1 << n
    coeffs = np.array([[np.trace(p.conj().T @ k) / big_n for p in basis] for k in kraus])
    return coeffs.T @ coeffs.conj()


def apply_kraus(kraus: Sequence[np.ndarray], rho: np.ndarray) -> np.ndarray:
    return sum(k @ rho @ k.conj().T for k in kraus)


@dataclass(frozen=True, eq=False)
class ChiMatrix:
    n: int
    chi: np.ndarray

    @property
    def labels(self) -> list[str]:
        return basis_labels(self.n)

    def apply(self, rho) -> np.ndarray:
        """``sum_{mn} chi_mn E_m rho E_n^dagger``."""
        rho = rho.matrix if isinstance(rho, DensityMatrix) else as_matrix(rho)
        basis = pauli_basis(self.n)
        return sum(
            self.chi[i, j] * basis[i] @ rho @ basis[j].conj().T
            for i in range(len(basis))
            for j in range(len(basis))
            if self.chi[i, j] != 0
        )

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.chi - self.chi.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh((self.chi + self.chi.conj().T) / 2).min())

    def trace_preservation_defect(self) -> float:
        basis = pauli_basis(self.n)
        acc = sum(
            self.chi[i, j] * basis[j].conj().T @ basis[i]
            for i in range(len(basis))
            for j in range(len(basis))
        )
        return float(np.max(np.abs(acc - np.eye(1 << self.n))))

    def to_json(self) -> str:
        return json.dumps({
            "n": self.n,
            "basis": self.labels,
            "re": np.round(self.chi.real, 15).tolist(),
            "im": np.round(self.chi.imag, 15).tolist(),
        })


def process_fidelity(a, b) -> float:
    """Normalised Hilbert-Schmidt overlap ``|tr(a^dagger b)| / (|a| |b|)``."""
    a = a.chi if isinstance(a, ChiMatrix) else np.asarray(a)
    b = b.chi if isinstance(b, ChiMatrix) else np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError("chi matrices differ in shape")
    na = np.trace(a.conj().T @ a).real
    nb = np.trace(b.conj().T @ b).real
    if na == 0 or nb == 0:
        raise ValueError("zero chi matrix")
    return float(abs(np.trace(a.conj().T @ b)) / np.sqrt(na * nb))


def maximally_entangled(n: int) -> np.ndarray:
    """``|Phi> = sum_m |m>|m> / sqrt(N)`` with the system register first."""
    big_n = 1 << n
    phi = np.zeros(big_n * big_n, dtype=complex)
    phi[np.arange(big_n) * big_n + np.arange(big_n)] = 1 / np.sqrt(big_n)
    return phi


def choi_state(kraus: Sequence[np.ndarray], n: int) -> DensityMatrix:
    phi = maximally_entangled(n)
    proj = np.outer(phi, phi.conj())
    ext = [np.kron(as_matrix(k), np.eye(1 << n)) for k in kraus]
    return DensityMatrix(apply_kraus(ext, proj))


def lambda_from_choi(j: np.ndarray, n: int) -> np.ndarray:
    """``lambda[j, k]``: matrix-unit expansion of the process outputs.

    The system-first Choi state stores ``eps(|r><s|)[p, q] / N`` at row
    ``(p, r)`` and column ``(q, s)``.
    """
    big_n = 1 << n
    t = np.asarray(j).reshape(big_n, big_n, big_n, big_n)  # p, r, q, s
    return big_n * t.transpose(1, 3, 0, 2).reshape(big_n ** 2, big_n ** 2)


def solve_chi(lam: np.ndarray, n: int) -> np.ndarray:
    """Least-squares solution of ``beta chi = lambda``."""
    d2 = (1 << n) ** 2
    beta = beta_tensor(n)
    system = beta.transpose(2, 3, 0, 1).reshape(d2 * d2, d2 * d2)
    vec, *_ = np.linalg.lstsq(system, lam.reshape(-1), rcond=None)
    return vec.reshape(d2, d2)


@dataclass(frozen=True, eq=False)
class SsptResult:
    chi: ChiMatrix
    plan: TomographyPlan
    records: list
    choi: np.ndarray = field(repr=False)
    residual: float = 0.0


def sspt(kraus: Sequence[np.ndarray], n: int, n_a: int | None = None, n_b: int | None = None,
         noise_sigma: float = 0.0, seed=0, draws: int = 20) -> SsptResult:
    """Single-scan process tomography of the channel given by ``kraus``.

    The channel acts on half of a maximally entangled system/ancilla-A state;
    one ancilla-assisted acquisition with ``n_b`` further qubits recovers that
    state, whose matrix-unit expansion gives ``lambda``; ``beta chi = lambda``
    then yields ``chi``.
    """
    kraus = [as_matrix(k) for k in kraus]
    if any(k.shape != (1 << n, 1 << n) for k in kraus):
        raise DimensionError(f"Kraus operators must act on {n} qubits")
    default_a, default_b = sspt_ancillas(n)
    n_a = default_a if n_a is None else n_a
    n_b = default_b if n_b is None else n_b
    if n_a != n:
        raise ValueError("single-scan tomography needs n_A = n")
    if min_experiments(n + n_a, n_b) != 1:
        raise ValueError(f"n_B = {n_b} does not allow a single scan")
    choi = choi_state(kraus, n)
    plan = build_plan(n + n_a, n_b, seed=seed, draws=draws)
    records = acquire(plan, choi, noise_sigma, seed)
    rec = reconstruct(plan, records, "normalized")
    lam = lambda_from_choi(rec.matrix, n)
    chi = solve_chi(lam, n)
    chi = (chi + chi.conj().T) / 2
    result = ChiMatrix(n, chi)
    if result.min_eigenvalue() < -1e-6:
        log.warning("reconstructed chi is not completely positive (min eigenvalue %.3g)", result.min_eigenvalue())
    return SsptResult(result, plan, records, rec.matrix, rec.residual)


def named_process(name: str) -> list[np.ndarray]:
    """Kraus list for ``identity``, ``notx``, ``noty``, ``hadamard`` or ``phase(theta)``."""
    name = name.strip().lower()
    fixed = {
        "identity": np.eye(2, dtype=complex),
        "notx": np.array([[0, 1], [1, 0]], dtype=complex),
        "noty": np.array([[0, -1j], [1j, 0]], dtype=complex),
        "hadamard": H,
    }
    if name in fixed:
        return [fixed[name]]
    if name.startswith("phase(") and name.endswith(")"):
        theta = float(name[6:-1])
        return [np.diag([1, np.exp(1j * theta)])]
    if name.startswith("rotx(") and name.endswith(")"):
        return [rot("x", float(name[5:-1]))]
    raise ValueError(f"unknown process {name!r}")


def kraus_from_json(text: str) -> list[np.ndarray]:
    """Kraus list from JSON: a list of matrices whose entries are ``[re, im]`` pairs or reals."""
    data = json.loads(text)
    out = []
    for mat in data:
        out.append(np.array([[complex(*z) if isinstance(z, list) else complex(z) for z in row] for row in mat]))
    total = sum(k.conj().T @ k for k in out)
    if np.max(np.abs(total - np.eye(total.shape[0]))) > 1e-8:
        raise ValueError("Kraus operators are not trace preserving")
    return out


def unitary_kraus(u) -> list[np.ndarray]:
    return [check_unitary(u)]
