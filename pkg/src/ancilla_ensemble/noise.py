"""Kick-engineered decoherence of a system spin coupled to an environment spin.

The pair evolves under ``H = pi (nu_s Z_s + nu_e Z_e + J/2 Z_s Z_e)`` (rad/s
for frequencies in Hz). Random-angle rotations ("kicks") hit the environment
spin; instantaneous pi pulses on the system spin implement CPMG or UDD
decoupling. Each trajectory is a pure-state unitary simulation; the
environment starts maximally mixed, which is handled exactly by evolving
both environment basis states under the same kick sequence.

Times are in ms, kick rates in kicks/ms, angular frequencies in rad/ms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal, Sequence

import numpy as np

SeqKind = Literal["none", "cpmg", "udd"]
KickAxis = Literal["x", "y", "random"]

MIN_FIT_POINTS = 4
FIT_FLOOR = 0.05
_CHUNK = 4096

_SAMPLE, _PULSE, _KICK = 0, 1, 2


@dataclass(frozen=True)
class NoiseConfig:
    nu_s: float = 0.0
    nu_e: float = 0.0
    J: float = 209.2
    gamma: float = 0.0
    kick_range: tuple[float, float] = (0.0, 1.0)  # degrees
    kick_axis: KickAxis = "x"
    kick_timing: Literal["regular", "poisson"] = "regular"
    seed: int = 0
    total_time: float = 100.0
    trajectories: int = 200

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("kick rate must be >= 0")
        lo, hi = self.kick_range
        if lo > hi:
            raise ValueError("kick_range must satisfy lo <= hi")
        if self.total_time <= 0:
            raise ValueError("total_time must be positive")
        if self.trajectories < 1:
            raise ValueError("need at least one trajectory")
        if self.kick_axis not in ("x", "y", "random"):
            raise ValueError(f"unknown kick axis {self.kick_axis!r}")
        if self.kick_timing not in ("regular", "poisson"):
            raise ValueError(f"unknown kick timing {self.kick_timing!r}")


@dataclass(frozen=True)
class PulseSequence:
    kind: SeqKind = "cpmg"
    n_pulses: int = 2
    cycle_time: float = 6.4
    pulse_axis: Literal["x", "y"] = "x"

    def __post_init__(self):
        if self.kind not in ("none", "cpmg", "udd"):
            raise ValueError(f"unknown sequence {self.kind!r}")
        if self.cycle_time <= 0:
            raise ValueError("cycle_time must be positive")
        if self.kind != "none" and self.n_pulses < 1:
            raise ValueError("need at least one pulse per cycle")

    def times(self) -> np.ndarray:
        """Pulse instants within one cycle."""
        n, tc = self.n_pulses, self.cycle_time
        j = np.arange(1, n + 1)
        if self.kind == "cpmg":
            return (j - 0.5) * tc / n
        if self.kind == "udd":
            return tc * np.sin(np.pi * j / (2 * (n + 1))) ** 2
        return np.zeros(0)


@dataclass(frozen=True, eq=False)
class DecayRecord:
    times: np.ndarray
    mx: np.ndarray
    rate: float | None  # fitted 1/T2 in 1/ms; None when the fit failed
    fit_window: tuple[int, int]
    fit_residual: float

    @property
    def t2_fit(self) -> float | None:
        if self.rate is None:
            return None
        return 1.0 / self.rate if self.rate > 0 else math.inf


@dataclass(frozen=True, eq=False)
class NoiseSpectrum:
    taus: np.ndarray
    omegas: np.ndarray
    s_values: np.ndarray  # NaN where the T2 fit failed
    rates: np.ndarray

    @property
    def gaps(self) -> list[int]:
        return [i for i, s in enumerate(self.s_values) if not np.isfinite(s)]


def fit_decay(times: np.ndarray, mx: np.ndarray) -> tuple[float | None, tuple[int, int], float]:
    """Least-squares line through ``log M_x`` while ``M_x`` stays above the floor.

    Returns ``(rate, window, rms_residual)``; ``rate`` is ``None`` with fewer
    than four usable points.
    """
    ok = mx > FIT_FLOOR
    stop = int(np.argmin(ok)) if not ok.all() else len(mx)
    if stop < MIN_FIT_POINTS:
        return None, (0, stop), math.nan
    t, y = times[:stop], np.log(mx[:stop])
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    return float(-slope), (0, stop), float(np.sqrt(np.mean(resid ** 2)))


def _schedule(cfg: NoiseConfig, seq: PulseSequence, kick_times: np.ndarray):
    n_cycles = int(math.floor(cfg.total_time / seq.cycle_time + 1e-9))
    samples = np.arange(n_cycles + 1) * seq.cycle_time
    cycle = seq.times()
    pulses = (np.arange(n_cycles)[:, None] * seq.cycle_time + cycle[None, :]).ravel()
    t = np.concatenate([samples, pulses, kick_times])
    kind = np.concatenate([
        np.full(len(samples), _SAMPLE),
        np.full(len(pulses), _PULSE),
        np.full(len(kick_times), _KICK),
    ])
    order = np.lexsort((kind, t))
    return t[order], kind[order], samples


def _kick_matrices(cfg: NoiseConfig, rng, count: int, batch: int) -> np.ndarray:
    """``(count, batch, 2, 2)`` environment rotations for the next ``count`` kicks."""
    lo, hi = np.deg2rad(cfg.kick_range)
    eps = rng.uniform(lo, hi, size=(count, batch))
    c, s = np.cos(eps / 2), np.sin(eps / 2)
    if cfg.kick_axis == "x":
        off = np.stack([-1j * s, -1j * s])
    elif cfg.kick_axis == "y":
        off = np.stack([-s + 0j, s + 0j])
    else:
        phi = rng.uniform(0, 2 * np.pi, size=(count, batch))
        off = np.stack([-1j * s * np.exp(-1j * phi), -1j * s * np.exp(1j * phi)])
    out = np.empty((count, batch, 2, 2), dtype=complex)
    out[..., 0, 0] = c
    out[..., 1, 1] = c
    out[..., 0, 1] = off[0]
    out[..., 1, 0] = off[1]
    return out


def _energies(cfg: NoiseConfig) -> np.ndarray:
    z = np.array([1.0, -1.0])
    zs, ze = z[:, None], z[None, :]
    # rad/ms
    return np.pi * (cfg.nu_s * zs + cfg.nu_e * ze + 0.5 * cfg.J * zs * ze) * 1e-3


def _run_batch(cfg: NoiseConfig, seq: PulseSequence, rng, batch: int, kick_times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sum of ``<sigma_x^s>`` over ``batch`` trajectories sharing ``kick_times``."""
    times, kinds, samples = _schedule(cfg, seq, kick_times)
    energies = _energies(cfg)
    # psi[traj, env_start, s, e]; system in |+>, env in |0> or |1>
    psi = np.zeros((batch, 2, 2, 2), dtype=complex)
    r = 1 / np.sqrt(2)
    psi[:, 0, :, 0] = r
    psi[:, 1, :, 1] = r
    if seq.pulse_axis == "x":
        pulse = np.array([[0, -1j], [-1j, 0]])
    else:
        pulse = np.array([[0, -1], [1, 0]], dtype=complex)
    out = np.zeros(len(samples))
    kicks = np.empty((0, batch, 2, 2), dtype=complex)
    k_used = 0
    n_kicks_left = len(kick_times)
    isamp = 0
    t_now = 0.0
    last_dt, phase = None, None
    for t_ev, kind in zip(times, kinds):
        dt = t_ev - t_now
        if dt > 0:
            if dt != last_dt:
                phase = np.exp(-1j * energies * dt)
                last_dt = dt
            psi *= phase
            t_now = t_ev
        if kind == _KICK:
            if k_used == len(kicks):
                take = min(_CHUNK, n_kicks_left)
                kicks = _kick_matrices(cfg, rng, take, batch)
                n_kicks_left -= take
                k_used = 0
            m = kicks[k_used][:, None, None]
            k_used += 1
            a, b = psi[..., 0], psi[..., 1]
            psi = np.stack([m[..., 0, 0] * a + m[..., 0, 1] * b, m[..., 1, 0] * a + m[..., 1, 1] * b], axis=-1)
        elif kind == _PULSE:
            psi = np.einsum("st,kjte->kjse", pulse, psi)
        else:
            coh = np.sum(np.conj(psi[:, :, 0, :]) * psi[:, :, 1, :], axis=(1, 2))
            # <sigma_x> = 2 Re <0|rho_s|1>, averaged over the two env starts
            out[isamp] += float(np.sum(coh.real))
            isamp += 1
    return samples, out


def simulate_decay(cfg: NoiseConfig, seq: PulseSequence) -> DecayRecord:
    """Trajectory-averaged ``M_x`` of the system spin, sampled at cycle boundaries."""
    rng = np.random.default_rng(cfg.seed)
    if cfg.gamma == 0:
        samples, total = _run_batch(cfg, seq, rng, cfg.trajectories, np.zeros(0))
    elif cfg.kick_timing == "regular":
        n_k = int(math.floor(cfg.total_time * cfg.gamma + 1e-9))
        kick_times = np.arange(1, n_k + 1) / cfg.gamma
        samples, total = _run_batch(cfg, seq, rng, cfg.trajectories, kick_times)
    else:
        total = None
        for _ in range(cfg.trajectories):
            n_k = rng.poisson(cfg.gamma * cfg.total_time)
            kick_times = np.sort(rng.uniform(0, cfg.total_time, n_k))
            samples, part = _run_batch(cfg, seq, rng, 1, kick_times)
            total = part if total is None else total + part
    mx = total / cfg.trajectories
    rate, window, resid = fit_decay(samples, mx)
    return DecayRecord(samples, mx, rate, window, resid)


def t2_vs_gamma(cfg: NoiseConfig, seq: PulseSequence, gammas: Sequence[float]) -> list[dict]:
    rows = []
    for g in gammas:
        rec = simulate_decay(replace(cfg, gamma=float(g)), seq)
        rows.append({"gamma": float(g), "rate": rec.rate, "t2": rec.t2_fit})
    return rows


def spectral_density(rate: float | None) -> float:
    """``S = pi**2 / (4 T2)``; NaN for a failed fit, 0 when no decay was resolved."""
    if rate is None:
        return math.nan
    return math.pi ** 2 / 4 * max(rate, 0.0)


def point_seed(seed: int, index: int) -> int:
    """Deterministic per-grid-point seed."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def noise_spectrum(cfg: NoiseConfig, taus: Sequence[float], n_pulses: int = 2,
                   index_offset: int = 0) -> NoiseSpectrum:
    """Scan ``S(omega)`` with CPMG trains of pulse spacing ``tau`` (``omega = pi / tau``).

    Grid point ``i`` runs with seed ``point_seed(cfg.seed, index_offset + i)``,
    so a scan split into pieces matches the scan done in one call.
    """
    taus = np.asarray(taus, dtype=float)
    if np.any(taus <= 0):
        raise ValueError("pulse spacings must be positive")
    rates, s_vals = [], []
    for i, tau in enumerate(taus):
        seq = PulseSequence("cpmg", n_pulses, n_pulses * tau)
        rec = simulate_decay(replace(cfg, seed=point_seed(cfg.seed, index_offset + i)), seq)
        rates.append(math.nan if rec.rate is None else rec.rate)
        s_vals.append(spectral_density(rec.rate))
    return NoiseSpectrum(taus, np.pi / taus, np.array(s_vals), np.array(rates))
