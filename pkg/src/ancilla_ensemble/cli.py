"""Command-line runner: one subcommand per protocol.

Sweeps are written as CSV (comma separated, header row, LF line endings)
preceded by ``#`` comment lines that hold the resolved run configuration, a
summary record and a plot recipe. Single results are written as JSON with the
resolved configuration under ``"config"``. Either form can be fed back through
``--config`` to repeat a run.

Exit status: 0 on success, 2 for invalid input or configuration, 3 for
numerical failures. Failures print a JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import math
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from . import __version__
from . import expectation, noise, noninvasive, oscillator, tomography
from .circuits import Circuit, compile_circuit, rot
from .qcore import DensityMatrix, fidelity, random_density_matrix

log = logging.getLogger("ancilla_ensemble")

EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

# keys that never enter the embedded configuration
_RUNTIME_KEYS = {"out", "config", "threads", "command"}


class ConfigError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


# -- parsing helpers ---------------------------------------------------------

_PI_TERM = re.compile(r"^([+-]?[0-9.eE+-]*?)\s*\*?\s*pi(?:\s*/\s*([0-9.eE+-]+))?$")


def parse_angle(text: str) -> float:
    """A number or a multiple of pi: ``1.5``, ``pi``, ``-pi/4``, ``3*pi/4``, ``2pi``."""
    s = str(text).strip().lower()
    m = _PI_TERM.match(s)
    if m:
        coef = m.group(1)
        if coef in ("", "+"):
            c = 1.0
        elif coef == "-":
            c = -1.0
        else:
            c = float(coef)
        value = c * math.pi
        if m.group(2):
            value /= float(m.group(2))
        return value
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"cannot read {text!r} as a number") from None


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:count`` (inclusive endpoints) or a comma-separated list."""
    s = str(text).strip()
    if ":" in s:
        parts = s.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid {text!r} is not lo:hi:count")
        lo, hi = parse_angle(parts[0]), parse_angle(parts[1])
        try:
            count = int(parts[2])
        except ValueError:
            raise ConfigError(f"grid count {parts[2]!r} is not an integer") from None
        if count < 1:
            raise ConfigError("grid count must be >= 1")
        return np.linspace(lo, hi, count)
    values = [parse_angle(v) for v in s.split(",") if v.strip()]
    if not values:
        raise ConfigError(f"empty grid {text!r}")
    return np.array(values)


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{text!r} is not a comma-separated integer list") from None


def parse_pairs(text: str) -> list[tuple[int, int]]:
    """``m,n;m,n;...`` level pairs."""
    out = []
    for chunk in str(text).split(";"):
        if not chunk.strip():
            continue
        vals = parse_int_list(chunk)
        if len(vals) != 2:
            raise ConfigError(f"level pair {chunk!r} needs two integers")
        out.append((vals[0], vals[1]))
    if not out:
        raise ConfigError("no level pairs given")
    return out


def _load_json_arg(text: str):
    """Inline JSON, or the contents of a JSON file."""
    s = str(text).strip()
    if s[:1] in "[{":
        return json.loads(s)
    path = Path(s)
    if not path.is_file():
        raise ConfigError(f"{text!r} is neither JSON nor a readable file")
    return json.loads(path.read_text())


def _matrix_from_json(data) -> np.ndarray:
    """Rows of entries that are reals or ``[re, im]`` pairs."""
    try:
        m = np.array([[complex(*z) if isinstance(z, list) else complex(z) for z in row] for row in data])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad matrix: {exc}") from None
    if m.ndim != 2:
        raise ConfigError("matrix must be two-dimensional")
    return m


STATE_PRESETS = ("mixed", "zero", "one", "plus", "random", "ghz")


def parse_state(spec: str, dim: int, seed: int) -> DensityMatrix:
    """Preset name or matrix JSON (inline or file) on a ``dim``-level register."""
    name = str(spec).strip().lower()
    if name == "mixed":
        return DensityMatrix.maximally_mixed(dim)
    if name == "zero":
        return DensityMatrix.basis(0, dim)
    if name == "one":
        return DensityMatrix.basis(dim - 1, dim)
    if name == "plus":
        return DensityMatrix.from_ket(np.ones(dim))
    if name == "ghz":
        psi = np.zeros(dim)
        psi[0] = psi[-1] = 1
        return DensityMatrix.from_ket(psi)
    if name == "random":
        return random_density_matrix(dim, seed)
    m = _matrix_from_json(_load_json_arg(spec))
    if m.shape != (dim, dim):
        raise ConfigError(f"state is {m.shape}, expected ({dim}, {dim})")
    return DensityMatrix(m)


def _pmap(fn, items, threads: int):
    """Ordered map; results do not depend on ``threads``."""
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- output ------------------------------------------------------------------

def _clean(x):
    """JSON-safe copy: NaN/inf become null, numpy scalars become Python numbers."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (complex, np.complexfloating)):
        return [_clean(x.real), _clean(x.imag)]
    return x


def _dumps(obj, indent=None) -> str:
    return json.dumps(_clean(obj), indent=indent, allow_nan=False)


def _matrix_json(m: np.ndarray):
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return repr(v) if math.isfinite(v) else "nan"


class Output:
    def __init__(self, command: str, config: dict, out: str | None):
        self.command = command
        self.config = config
        self.out = out

    def _write(self, text: str, path: str | None):
        if path is None:
            sys.stdout.write(text)
        else:
            Path(path).write_text(text, encoding="utf-8", newline="\n")

    def json(self, result: dict):
        payload = {"command": self.command, "version": __version__, "config": self.config, "result": result}
        self._write(_dumps(payload, indent=2) + "\n", self.out)

    def csv(self, header: list[str], rows, summary: dict | None = None, recipe: str = ""):
        buf = io.StringIO()
        buf.write(f"# command: {self.command}\n")
        buf.write(f"# config: {_dumps(self.config)}\n")
        if summary is not None:
            buf.write(f"# summary: {_dumps(summary)}\n")
        for line in recipe.strip().splitlines():
            buf.write(f"# plot: {line}\n")
        buf.write(",".join(header) + "\n")
        for row in rows:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        self._write(buf.getvalue(), self.out)
        if self.out is not None and summary is not None:
            side = Path(self.out).with_suffix(".json")
            meta = {"command": self.command, "version": __version__, "config": self.config, "summary": summary}
            side.write_text(_dumps(meta, indent=2) + "\n", encoding="utf-8", newline="\n")


# -- subcommands -------------------------------------------------------------

def cmd_elgi(cfg: dict, out: Output):
    thetas = parse_grid(cfg["theta_grid"])
    n = cfg["n"]
    if n < 2:
        raise ConfigError("--n must be >= 2")
    if thetas.min() < 0 or thetas.max() > math.pi + 1e-12:
        raise ConfigError("theta values must lie in [0, pi]")
    sim, ref = noninvasive.elgi_sweep(thetas, n, cfg["method"])
    k = int(np.argmin(sim))
    summary = {
        "theta_min": thetas[k], "D_min": sim[k],
        "max_abs_difference": float(np.max(np.abs(sim - ref))),
    }
    recipe = f"""
x: theta (rad); y: D{n} (bits)
series: D{n}_circuit as points, D{n}_closed_form as line
reference: horizontal line at 0 (macrorealist bound); vertical line at theta = pi/4
"""
    out.csv(["theta", f"D{n}_circuit", f"D{n}_closed_form"], zip(thetas, sim, ref), summary, recipe)


def cmd_inrm(cfg: dict, out: Output):
    theta = parse_angle(cfg["theta"])
    rho = parse_state(cfg["state"], 2, cfg["seed"])
    u = rot("x", theta)
    result = {"theta": theta, "state": _matrix_json(rho.matrix), "tables": {}}
    for method in noninvasive.METHODS:
        table = noninvasive.joint_probabilities(rho, u, method)
        result["tables"][method] = {
            "P": table.p.tolist(),
            "conditional": noninvasive.conditional_probabilities(table).tolist(),
            "H_Q2_given_Q1": noninvasive.conditional_entropy(table),
        }
    out.json(result)


def cmd_moussa(cfg: dict, out: Output):
    ops = []
    if cfg["circuit"] is not None:
        text = cfg["circuit"]
        data = _load_json_arg(text)
        ops.append(compile_circuit(Circuit.from_json(json.dumps(data))))
    for spec in cfg["unitary"] or []:
        ops.append(_matrix_from_json(_load_json_arg(spec)))
    if not ops:
        raise ConfigError("give --circuit or at least one --unitary")
    dim = ops[0].shape[0]
    if any(o.shape != (dim, dim) for o in ops):
        raise ConfigError("operators differ in dimension")
    rho = parse_state(cfg["state"], dim, cfg["seed"])
    res = expectation.moussa(rho, ops)
    product = np.eye(dim, dtype=complex)
    for o in ops:
        product = o @ product
    direct = complex(np.trace(rho.matrix @ product))
    out.json({
        "value": res.value,
        "ancilla_readout": {"sigma_x": res.ancilla_readout[0], "sigma_y": res.ancilla_readout[1]},
        "direct_trace": direct,
        "abs_difference": abs(res.value - direct),
        "circuit": json.loads(res.circuit_used.to_json()),
    })


def cmd_fcf(cfg: dict, out: Output):
    bs = parse_grid(cfg["b_grid"])
    pairs = parse_pairs(cfg["levels"])
    osc = oscillator.TruncatedOscillator(cfg["d"])
    for m, n in pairs:
        if not (0 <= m < osc.d and 0 <= n < osc.d):
            raise ConfigError(f"level pair ({m}, {n}) outside a {osc.d}-level oscillator")
    route = cfg["route"]

    def row(item):
        b, (m, n) = item
        trunc = oscillator.fcf(osc, m, n, b, route)
        levels = oscillator.fcf_analytic_levels(max(min(osc.d, 41), m + 1) - 1, n, b)
        # analytic weight that falls outside the truncated levels
        return (b, m, n, trunc, levels[m], 1.0 - float(levels[:osc.d].sum()))

    items = [(float(b), p) for p in pairs for b in bs]
    rows = _pmap(row, items, cfg["threads"])
    markers = [
        {"m": m, "n": n, "b": b}
        for (m, n), b in sorted(oscillator.FORBIDDEN_MARKERS.items())
        if (m, n) in pairs
    ]
    summary = {"forbidden_region_markers": markers, "route": route}
    recipe = """
x: b (dimensionless displacement); y: Franck-Condon factor
series per (m, n): fcf_truncated as points, fcf_analytic as smooth line
reference: vertical lines at b = 2 for (0, 0) and b = 1 + sqrt(3) for (0, 1), where the classically forbidden region begins
completeness_defect: 1 - sum of analytic factors over the kept levels
"""
    out.csv(["b", "m", "n", "fcf_truncated", "fcf_analytic", "completeness_defect"], rows, summary, recipe)


def cmd_contextuality(cfg: dict, out: Output):
    betas = parse_grid(cfg["beta_grid"])
    etas = parse_grid(cfg["eta_grid"])
    levels = parse_int_list(cfg["levels"])
    if any(l not in (0, 1, 2, 3) for l in levels):
        raise ConfigError("levels must be drawn from 0, 1, 2, 3")
    if cfg["route"] == "circuit":
        chunks = _pmap(lambda b: oscillator.contextuality_surface([b], etas, levels), betas, cfg["threads"])
        surface = np.concatenate(chunks, axis=1)
    else:
        surface = np.stack([oscillator.contextuality_grid(l, betas, etas) for l in levels])
    rows = [
        (l, b, e, surface[k, i, j])
        for k, l in enumerate(levels)
        for i, b in enumerate(betas)
        for j, e in enumerate(etas)
    ]
    summary = {
        "max_abs_I": float(np.max(np.abs(surface))),
        "bound": oscillator.MAX_BOUND,
        "max_violation_angles": {str(l): list(oscillator.MAX_VIOLATION_ANGLES[l]) for l in levels},
    }
    recipe = """
surface per level l: x = beta (rad), y = eta (rad), z = I
reference: planes at I = 2 (noncontextual bound) and I = 2*sqrt(2)
"""
    out.csv(["l", "beta", "eta", "I"], rows, summary, recipe)


def cmd_aaqst(cfg: dict, out: Output):
    n, n_hat = cfg["n"], cfg["ancilla"]
    if n < 1 or n_hat < 0 or n + n_hat > 12:
        raise ConfigError("need n >= 1, ancilla >= 0 and n + ancilla <= 12")
    if cfg["noise"] < 0:
        raise ConfigError("--noise must be >= 0")
    rho = parse_state(cfg["state"], 1 << n, cfg["seed"])
    plan = tomography.build_plan(n, n_hat, seed=cfg["seed"], draws=cfg["draws"])
    records = tomography.acquire(plan, rho, cfg["noise"], seed=cfg["seed"])
    rec = tomography.reconstruct(plan, records, "normalized")
    est = rec.density_matrix(project=cfg["noise"] > 0)
    out.json({
        "experiments": len(plan.experiments),
        "design_shape": list(plan.design.shape),
        "condition_number": plan.condition_number,
        "residual": rec.residual,
        "frobenius_error": float(np.linalg.norm(rec.matrix - rho.matrix)),
        "fidelity": fidelity(rho.matrix, est.matrix),
        "matrix": _matrix_json(est.matrix),
    })


def cmd_sspt(cfg: dict, out: Output):
    spec = cfg["process"]
    try:
        kraus = tomography.named_process(spec)
    except ValueError:
        kraus = tomography.kraus_from_json(json.dumps(_load_json_arg(spec)))
    n = int(round(math.log2(kraus[0].shape[0])))
    if cfg["noise"] < 0:
        raise ConfigError("--noise must be >= 0")
    res = tomography.sspt(kraus, n, noise_sigma=cfg["noise"], seed=cfg["seed"], draws=cfg["draws"])
    theory = tomography.kraus_to_chi(kraus)
    chi = res.chi
    out.json({
        "n": n,
        "basis": chi.labels,
        "chi": _matrix_json(chi.chi),
        "chi_theory": _matrix_json(theory),
        "fidelity": tomography.process_fidelity(chi, theory),
        "hermiticity_defect": chi.hermiticity_defect(),
        "min_eigenvalue": chi.min_eigenvalue(),
        "trace_preservation_defect": chi.trace_preservation_defect(),
        "condition_number": res.plan.condition_number,
        "design_shape": list(res.plan.design.shape),
    })


def cmd_counts(cfg: dict, out: Output):
    if cfg["table"] == "table1":
        if not 1 <= cfg["n_max"] <= 6:
            raise ConfigError("--n-max must lie in 1..6")
        rows = tomography.count_table(cfg["n_max"])
        header = ["n", "M_QPT", "M_AAPT", "n_A", "M_SSPT", "n_B"]
        recipe = "table: scans per method against input qubit count n"
    else:
        rows = tomography.scaling_table(cfg["n_max"], cfg["n_hat_max"])
        header = list(rows[0].keys()) if rows else ["n", "n_hat", "K"]
        recipe = "x: n_hat (ancilla qubits); y: minimum experiments (log scale); one series per n"
    out.csv(header, [[r[h] for h in header] for r in rows], None, recipe)


def _noise_config(cfg: dict, gamma: float) -> noise.NoiseConfig:
    return noise.NoiseConfig(
        nu_s=cfg["nu_s"], nu_e=cfg["nu_e"], J=cfg["j"], gamma=gamma,
        kick_range=(cfg["kick_lo"], cfg["kick_hi"]), kick_axis=cfg["kick_axis"],
        kick_timing=cfg["kick_timing"], seed=cfg["seed"],
        total_time=cfg["total_time"], trajectories=cfg["trajectories"],
    )


def cmd_noise(cfg: dict, out: Output):
    ncfg = _noise_config(cfg, cfg["gamma"])
    seq = noise.PulseSequence(cfg["seq"], cfg["n_pulses"], cfg["tc"], cfg["pulse_axis"])
    rec = noise.simulate_decay(ncfg, seq)
    summary = {
        "t2": rec.t2_fit, "rate": rec.rate, "residual": rec.fit_residual,
        "fit_window": list(rec.fit_window), "fit_ok": rec.rate is not None,
    }
    recipe = """
x: t (ms); y: log(Mx)
series: Mx at cycle boundaries; fitted line log(Mx) = -t / t2 over fit_window
"""
    out.csv(["t", "Mx"], zip(rec.times, rec.mx), summary, recipe)


def cmd_noise_spectrum(cfg: dict, out: Output):
    taus = parse_grid(cfg["tau_list"])
    if np.any(taus <= 0):
        raise ConfigError("pulse spacings must be positive")
    ncfg = _noise_config(cfg, cfg["gamma"])

    def point(item):
        i, tau = item
        spec = noise.noise_spectrum(ncfg, [tau], cfg["n_pulses"], index_offset=i)
        return spec.omegas[0], spec.s_values[0], tau, spec.rates[0]

    rows = _pmap(point, list(enumerate(taus)), cfg["threads"])
    s = np.array([r[1] for r in rows])
    omegas = np.array([r[0] for r in rows])
    finite = np.isfinite(s)
    order = np.argsort(omegas[finite])
    area = float(trapezoid(s[finite][order], omegas[finite][order])) if finite.sum() > 1 else math.nan
    summary = {"gaps": [int(i) for i in np.flatnonzero(~finite)], "area": area}
    recipe = """
x: omega = pi / tau (rad/ms); y: S(omega) = pi^2 / (4 T2)
series: one curve per kick range; compare areas under the curves
"""
    out.csv(["omega", "S", "tau", "rate"], rows, summary, recipe)


# -- parser ------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _common(suppress: bool) -> argparse.ArgumentParser:
    p = _Parser(add_help=False, argument_default=argparse.SUPPRESS if suppress else None)
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=d(0), help="RNG seed (integer, default 0)")
    p.add_argument("--out", default=d(None), help="output file path (default: stdout)")
    p.add_argument("--threads", type=int, default=d(1), help="worker threads for sweeps (default 1)")
    p.add_argument("--config", default=d(None),
                   help="JSON config file; values apply unless overridden by explicit flags")
    return p


SUBCOMMANDS = {}


def _sub(subparsers, common, name, func, help_text):
    p = subparsers.add_parser(name, parents=[common], help=help_text, description=help_text)
    p.set_defaults(command=name)
    SUBCOMMANDS[name] = func
    return p


def build_parser(suppress: bool = False) -> argparse.ArgumentParser:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser = _Parser(prog="ancilla-ensemble", description=__doc__.split("\n\n")[0],
                     argument_default=argparse.SUPPRESS if suppress else None)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common(suppress)

    p = _sub(sub, common, "elgi", cmd_elgi, "entropic Leggett-Garg deficit sweep (CSV)")
    p.add_argument("--theta-grid", default=d("0:pi:64"),
                   help="total rotation angles in rad, lo:hi:count or list; 'pi' allowed (default 0:pi:64)")
    p.add_argument("--n", type=int, default=d(3), help="number of measurements (default 3)")
    p.add_argument("--method", choices=noninvasive.METHODS, default=d("inrm"),
                   help="joint-probability scheme (default inrm)")

    p = _sub(sub, common, "inrm", cmd_inrm, "joint probability tables for all three schemes (JSON)")
    p.add_argument("--theta", default=d("pi/4"), help="x-rotation between measurements in rad (default pi/4)")
    p.add_argument("--state", default=d("mixed"),
                   help=f"single-qubit state: {'|'.join(STATE_PRESETS)} or matrix JSON/file (default mixed)")

    p = _sub(sub, common, "moussa", cmd_moussa, "ancilla readout of tr(rho U_k...U_1) (JSON)")
    p.add_argument("--circuit", default=d(None),
                   help="gate-record JSON array (inline or file); compiled to the first operator")
    p.add_argument("--unitary", action="append", default=d(None),
                   help="unitary matrix JSON (inline or file), entries real or [re, im]; repeat for joint readout")
    p.add_argument("--state", default=d("mixed"),
                   help=f"system state: {'|'.join(STATE_PRESETS)} or matrix JSON/file (default mixed)")

    p = _sub(sub, common, "fcf", cmd_fcf, "Franck-Condon factors, truncated vs analytic (CSV)")
    p.add_argument("--d", type=int, default=d(4), help="oscillator levels kept (default 4)")
    p.add_argument("--b-grid", default=d("0:3:61"),
                   help="displacements b in oscillator length units, lo:hi:count or list (default 0:3:61)")
    p.add_argument("--levels", default=d("0,0;0,1"), help="level pairs 'm,n;m,n' (default 0,0;0,1)")
    p.add_argument("--route", choices=("circuit", "direct"), default=d("circuit"),
                   help="ancilla circuit or direct matrix element (default circuit)")

    p = _sub(sub, common, "contextuality", cmd_contextuality, "contextuality sum I over (beta, eta) grids (CSV)")
    p.add_argument("--levels", default=d("0,1,2,3"), help="oscillator levels (default 0,1,2,3)")
    p.add_argument("--beta-grid", default=d("-pi:pi:41"), help="beta angles in rad (default -pi:pi:41; write --beta-grid=-pi:... for a negative start)")
    p.add_argument("--eta-grid", default=d("-pi:pi:41"), help="eta angles in rad (default -pi:pi:41; write --eta-grid=-pi:... for a negative start)")
    p.add_argument("--route", choices=("circuit", "direct"), default=d("circuit"),
                   help="joint ancilla readout or direct traces (default circuit)")

    p = _sub(sub, common, "aaqst", cmd_aaqst, "ancilla-assisted state tomography round trip (JSON)")
    p.add_argument("--n", type=int, default=d(3), help="input qubits (default 3)")
    p.add_argument("--ancilla", type=int, default=d(2), help="ancilla qubits (default 2)")
    p.add_argument("--draws", type=int, default=d(20), help="random plans tried (default 20)")
    p.add_argument("--noise", type=float, default=d(0.0),
                   help="amplitude noise std, fraction of the largest amplitude (default 0)")
    p.add_argument("--state", default=d("random"),
                   help=f"input state: {'|'.join(STATE_PRESETS)} or matrix JSON/file (default random)")

    p = _sub(sub, common, "sspt", cmd_sspt, "single-scan process tomography (JSON)")
    p.add_argument("--process", default=d("identity"),
                   help="identity|notx|noty|hadamard|phase(THETA)|rotx(THETA) (rad) or Kraus-list JSON/file")
    p.add_argument("--noise", type=float, default=d(0.0),
                   help="amplitude noise std, fraction of the largest amplitude (default 0)")
    p.add_argument("--draws", type=int, default=d(20), help="random plans tried (default 20)")

    p = _sub(sub, common, "counts", cmd_counts, "experiment-count tables (CSV)")
    p.add_argument("--n-max", type=int, default=d(5), help="largest input qubit count (default 5)")
    p.add_argument("--n-hat-max", type=int, default=d(8), help="largest ancilla count for the scaling table (default 8)")
    p.add_argument("--table", choices=("table1", "scaling"), default=d("table1"),
                   help="method comparison or minimum experiments vs ancilla count (default table1)")

    for name, func, text in (
        ("noise", cmd_noise, "kicked decay of the system coherence (CSV + JSON summary)"),
        ("noise-spectrum", cmd_noise_spectrum, "CPMG noise spectroscopy S(omega) (CSV)"),
    ):
        p = _sub(sub, common, name, func, text)
        p.add_argument("--gamma", type=float, default=d(25.0), help="kick rate in kicks/ms (default 25)")
        p.add_argument("--kick-lo", type=float, default=d(0.0), help="smallest kick angle in degrees (default 0)")
        p.add_argument("--kick-hi", type=float, default=d(1.0), help="largest kick angle in degrees (default 1)")
        p.add_argument("--kick-axis", choices=("x", "y", "random"), default=d("x"),
                       help="kick rotation axis (default x)")
        p.add_argument("--kick-timing", choices=("regular", "poisson"), default=d("regular"),
                       help="kick instants (default regular)")
        p.add_argument("--n-pulses", type=int, default=d(2), help="pi pulses per cycle (default 2)")
        p.add_argument("--total-time", type=float, default=d(100.0), help="run length in ms (default 100)")
        p.add_argument("--trajectories", type=int, default=d(200), help="kick trajectories averaged (default 200)")
        p.add_argument("--j", type=float, default=d(209.2), help="coupling J in Hz (default 209.2)")
        p.add_argument("--nu-s", type=float, default=d(0.0), help="system offset in Hz (default 0)")
        p.add_argument("--nu-e", type=float, default=d(0.0), help="environment offset in Hz (default 0)")
        if name == "noise":
            p.add_argument("--seq", choices=("none", "cpmg", "udd"), default=d("cpmg"),
                           help="decoupling sequence (default cpmg)")
            p.add_argument("--tc", type=float, default=d(6.4), help="cycle time in ms (default 6.4)")
            p.add_argument("--pulse-axis", choices=("x", "y"), default=d("x"), help="pi pulse axis (default x)")
        else:
            p.add_argument("--tau-list", default=d("0.2:3.2:16"),
                           help="CPMG pulse spacings tau in ms, lo:hi:count or list (default 0.2:3.2:16)")
    return parser


def _load_config(path: str, command: str, allowed: set[str]) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    if isinstance(data, dict) and isinstance(data.get("config"), dict):
        if data.get("command") not in (None, command):
            raise ConfigError(f"config was written by {data['command']!r}, not {command!r}")
        data = data["config"]
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    out = {}
    for key, value in data.items():
        k = key.replace("-", "_")
        if k not in allowed:
            raise ConfigError(f"unknown config key {key!r} for {command}")
        out[k] = value
    return out


def _subparser_actions(parser: argparse.ArgumentParser, command: str) -> dict:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return {a.dest: a for a in action.choices[command]._actions}
    return {}


def _coerce(action: argparse.Action, key: str, value):
    """Apply a flag's type and choices to a value read from a config file."""
    if value is None:
        return None
    if isinstance(action, argparse._AppendAction):
        if not isinstance(value, list):
            raise ConfigError(f"config key {key!r} must be a list")
        return [_coerce_one(action, key, v) for v in value]
    return _coerce_one(action, key, value)


def _coerce_one(action, key, value):
    if action.type is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"config key {key!r} must be an integer")
        value = int(value)
    elif action.type is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"config key {key!r} must be a number")
        value = float(value)
    elif not isinstance(value, str):
        raise ConfigError(f"config key {key!r} must be a string")
    if action.choices is not None and value not in action.choices:
        raise ConfigError(f"config key {key!r} must be one of {list(action.choices)}")
    return value


def resolve(argv: list[str]) -> tuple[str, dict]:
    """Defaults, then config file, then explicit flags."""
    parser = build_parser()
    full = vars(parser.parse_args(argv))
    explicit = vars(build_parser(suppress=True).parse_args(argv))
    command = full["command"]
    allowed = set(full) - {"command", "config"}
    resolved = {k: v for k, v in full.items() if k not in ("command", "config")}
    if full.get("config"):
        actions = _subparser_actions(parser, command)
        loaded = _load_config(full["config"], command, allowed)
        resolved.update({k: _coerce(actions[k], k, v) for k, v in loaded.items()})
    resolved.update({k: v for k, v in explicit.items() if k not in ("command", "config")})
    return command, resolved


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    command = None
    try:
        command, resolved = resolve(argv)
        embedded = {k: v for k, v in sorted(resolved.items()) if k not in _RUNTIME_KEYS}
        runtime = {"threads": max(1, int(resolved.get("threads") or 1))}
        out = Output(command, embedded, resolved.get("out"))
        SUBCOMMANDS[command]({**embedded, **runtime}, out)
        return 0
    except (tomography.PlanError, tomography.InconsistentRecords, np.linalg.LinAlgError,
            FloatingPointError, NumericalFailure) as exc:
        return _fail(command, exc, EXIT_NUMERICAL)
    except (ConfigError, ValueError, IndexError, KeyError, TypeError, NotImplementedError) as exc:
        return _fail(command, exc, EXIT_VALIDATION)


def _fail(command, exc, code) -> int:
    record = {"error": {"command": command, "type": type(exc).__name__, "message": str(exc), "exit_code": code}}
    sys.stderr.write(json.dumps(record) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
