"""Configuration-driven experiment runner.

Every physical quantity in the config carries its unit in the key name.
Values come from (lowest to highest priority) the built-in defaults, the
JSON file named by ``--config`` or ``$CAVITYQC_CONFIG``, and ``--key value``
flags. Results go to stdout or ``--output``; failures print an error JSON
on stderr and exit nonzero.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Callable

import numpy as np

from . import dressed, integrator
from . import tomography as tomo
from .errors import AcceptanceViolation, CavityQCError, ConfigError
from .hamiltonian import NOMINAL_DELTA, NOMINAL_OMEGA0, NOMINAL_TAU
from .protocol import gates
from .protocol.calibration import calibrate_pulse
from .protocol.schedule import TWO_PI, Device, Schedule

CONFIG_ENV = "CAVITYQC_CONFIG"
SUBCOMMANDS = ("dressed-spectrum", "adiabaticity", "trace", "calibrate", "gate", "deutsch",
               "schedule-dump")
EXIT_ERROR, EXIT_CONFIG, EXIT_ACCEPTANCE = 1, 2, 3
DEFAULT_PROTOCOL = {"trace": "cnot-atom-to-cavity", "gate": "cnot-inv",
                    "schedule-dump": "cnot-inv"}


@dataclass
class ExperimentConfig:
    """Validated run configuration; defaults are the standard operating point."""

    omega0_rad_per_s: float = NOMINAL_OMEGA0
    delta_rad_per_s: float = NOMINAL_DELTA
    transit_tau_s: float = NOMINAL_TAU
    omega_cavity_rad_per_s: float = TWO_PI * 51e9
    fock_cutoff: int = 4
    drive_tau_atom_to_cavity_s: float = 19e-6
    drive_tau_cavity_to_atom_s: float = 14e-6
    drive_tau_ladder_s: float = 14e-6
    window_half_width_tau: float = 4.0
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    selectivity_factor: float = 3.9
    stark_decouple_omega0: float = 100.0
    rwa: bool = True
    protocol: str | None = None
    initial: str = "g,0"
    n: int = 1
    n_max: int = 2
    points: int = 401
    lower: str = "g,0"
    upper: str = "V-0"
    area: str = "pi"
    drive_tau_s: float | None = None
    xi0_rad_per_s: float | None = None
    theta_rad: float = 0.0
    lambda_target_rad: float | None = 0.0
    f_index: int = 1
    adiabatic_threshold: float = dressed.DEFAULT_ADIABATIC_THRESHOLD
    min_process_fidelity: float = 0.995
    min_success_probability: float = 0.99
    min_purity: float = 0.999
    strict: bool = False
    backend: str = "auto"
    output: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        positive = ("omega0_rad_per_s", "delta_rad_per_s", "transit_tau_s",
                    "omega_cavity_rad_per_s", "drive_tau_atom_to_cavity_s",
                    "drive_tau_cavity_to_atom_s", "drive_tau_ladder_s", "window_half_width_tau",
                    "rel_tol", "abs_tol", "selectivity_factor", "stark_decouple_omega0",
                    "adiabatic_threshold")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        for name in ("drive_tau_s", "xi0_rad_per_s"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be > 0 when given")
        if self.fock_cutoff < 2:
            raise ConfigError("fock_cutoff must be >= 2")
        if self.points < 2:
            raise ConfigError("points must be >= 2")
        if self.n < 0 or self.n_max < 0:
            raise ConfigError("sector indices must be >= 0")
        if self.area not in ("pi", "pi/2"):
            raise ConfigError("area must be 'pi' or 'pi/2'")
        if self.f_index not in (1, 2, 3, 4):
            raise ConfigError("f_index must be 1, 2, 3 or 4")
        if self.backend not in ("auto", *integrator.available_backends()):
            raise ConfigError(f"backend must be 'auto' or one of {integrator.available_backends()}")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        types = {f.name: str(f.type) for f in fields(cls)}
        for key, value in data.items():
            _check_type(key, types[key], value)
        return cls(**data)

    def device(self) -> Device:
        return Device(omega0=self.omega0_rad_per_s, delta=self.delta_rad_per_s,
                      tau=self.transit_tau_s, fock_cutoff=self.fock_cutoff,
                      omega_cavity=self.omega_cavity_rad_per_s,
                      tau_s_atom_to_cavity=self.drive_tau_atom_to_cavity_s,
                      tau_s_cavity_to_atom=self.drive_tau_cavity_to_atom_s,
                      tau_s_ladder=self.drive_tau_ladder_s,
                      window_half_width=self.window_half_width_tau, rel_tol=self.rel_tol,
                      abs_tol=self.abs_tol, selectivity_factor=self.selectivity_factor,
                      stark_decouple=self.stark_decouple_omega0, rwa=self.rwa)


def _check_type(key: str, t: str, value) -> None:
    if value is None:
        if "None" not in t:
            raise ConfigError(f"{key} may not be null")
        return
    base = t.split("|")[0].strip()
    ok = {"bool": isinstance(value, bool),
          "int": isinstance(value, int) and not isinstance(value, bool),
          "float": isinstance(value, (int, float)) and not isinstance(value, bool),
          "str": isinstance(value, str)}[base]
    if not ok:
        raise ConfigError(f"{key} must be of type {base}, got {type(value).__name__}")


def _coerce(field_type, text: str):
    """Parse a ``--key value`` override with the type of the config field."""
    t = str(field_type)
    if text.lower() in ("null", "none") and "None" in t:
        return None
    if t.startswith("bool"):
        if text.lower() in ("1", "true", "yes"):
            return True
        if text.lower() in ("0", "false", "no"):
            return False
        raise ConfigError(f"expected a boolean, got {text!r}")
    try:
        if t.startswith("int"):
            return int(text)
        if t.startswith("float"):
            return float(text)
    except ValueError:
        raise ConfigError(f"cannot parse {text!r} as {t}") from None
    return text


def load_config(path: str | None, overrides: dict[str, str]) -> ExperimentConfig:
    data: dict[str, Any] = {}
    path = path or os.environ.get(CONFIG_ENV)
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    for key, text in overrides.items():
        if key not in types:
            raise ConfigError(f"unknown config key: {key}")
        data[key] = _coerce(types[key], text)
    return ExperimentConfig.from_dict(data)


def dumps(obj) -> str:
    return json.dumps(tomo.round_sig(obj), indent=2, sort_keys=True) + "\n"


# ----------------------------------------------------------------------------- subcommands

def _times(cfg: ExperimentConfig) -> np.ndarray:
    hw = cfg.window_half_width_tau * cfg.transit_tau_s
    return np.linspace(-hw, hw, cfg.points)


def cmd_dressed_spectrum(cfg: ExperimentConfig) -> tuple[str, dict]:
    dev = cfg.device()
    rows = dressed.spectrum_rows(dev.coupling(), dev.delta, range(cfg.n_max + 1), _times(cfg))
    return dressed.spectrum_csv(rows), {}


def cmd_adiabaticity(cfg: ExperimentConfig) -> tuple[str, dict]:
    dev = cfg.device()
    scan = dressed.max_adiabaticity(dev.coupling(), dev.delta, cfg.n, cfg.adiabatic_threshold,
                                    half_width=cfg.window_half_width_tau * dev.tau)
    out = {"n": scan.n, "max_measure": scan.max_measure, "t_at_max_s": scan.t_at_max,
           "threshold": scan.threshold, "below_threshold": scan.satisfied}
    checks = {"adiabaticity": (scan.satisfied, f"max measure {scan.max_measure:.6g} "
                                               f">= threshold {scan.threshold}")}
    return dumps(out), checks


TRACE_FRAGMENTS: dict[str, Callable] = {
    "cnot-atom-to-cavity": gates.cnot_atom_to_cavity,
    "cnot-cavity-to-atom": gates.cnot_cavity_to_atom,
    "excite-on-vacuum": gates.excite_on_vacuum,
    "ladder": gates.ladder_pulse,
    "idle": gates.idle_crossing,
}


def cmd_trace(cfg: ExperimentConfig) -> tuple[str, dict]:
    if cfg.protocol not in TRACE_FRAGMENTS:
        raise ConfigError(f"trace protocol must be one of {sorted(TRACE_FRAGMENTS)}")
    frag = TRACE_FRAGMENTS[cfg.protocol]
    if cfg.xi0_rad_per_s is not None:
        base = frag

        def frag(device, atom, cavity):
            ev = base(device, atom, cavity)
            return replace(ev, drives=tuple(replace(d, xi0=cfg.xi0_rad_per_s)
                                            for d in ev.drives))
    trace = gates.dressed_trace(cfg.device(), frag, cfg.initial,
                                sectors=tuple(range(cfg.n_max + 1)), n_points=cfg.points)
    return trace.to_csv(), {}


def cmd_calibrate(cfg: ExperimentConfig) -> tuple[str, dict]:
    dev = cfg.device()
    tau_s = cfg.drive_tau_s or dev.tau_s_atom_to_cavity
    res = calibrate_pulse(dev, cfg.lower, cfg.upper, tau_s, cfg.area, min_transfer=0.0)
    out = res.to_dict()
    from .protocol.calibration import MIN_PI_TRANSFER
    ok = cfg.area != "pi" or res.transfer >= MIN_PI_TRANSFER
    return dumps(out), {"transfer": (ok, f"pi transfer {res.transfer:.6g} < {MIN_PI_TRANSFER}")}


@dataclass
class GateSpec:
    build: Callable[[Device, ExperimentConfig], Any]
    logical: tuple[str, ...]
    target: Any
    sides: str


def _ghz_target() -> np.ndarray:
    return np.eye(2, dtype=complex)


GATES: dict[str, GateSpec] = {
    "cnot-inv": GateSpec(lambda d, c: gates.cnot_inv(d, lambda_target=c.lambda_target_rad),
                         ("A", "B"), tomo.EQ_CNOT_INV, "output"),
    "cnot": GateSpec(lambda d, c: gates.cnot(d, lambda_target=c.lambda_target_rad),
                     ("A", "B"), tomo.EQ_CNOT, "output"),
    "cnot-inv-measured": GateSpec(
        lambda d, c: gates.cnot_inv_measured(d, lambda_target=c.lambda_target_rad),
        ("A", "B"), tomo.EQ_CNOT_INV, "output"),
    "qpg": GateSpec(lambda d, c: gates.qpg(d), ("A", "B"), tomo.QPG, "both"),
    "toffoli": GateSpec(lambda d, c: gates.toffoli(d), ("A", "B", "C"),
                        tomo.toffoli_matrix(3), "both"),
    "ghz-encode": GateSpec(lambda d, c: gates.ghz_encode(d), ("A", "B", "C"), None, "both"),
    "ghz-decode": GateSpec(lambda d, c: gates.ghz_decode(d), ("A", "B", "C"), None, "both"),
    "not": GateSpec(lambda d, c: gates.one_qubit_not(d, "A", c.theta_rad), ("A",),
                    lambda c: gates.not_phase_matrix(c.theta_rad), "output"),
    "hadamard": GateSpec(lambda d, c: gates.one_qubit_hadamard(d, "A", c.theta_rad), ("A",),
                         lambda c: gates.hadamard_phase_matrix(c.theta_rad), "output"),
}


def _ghz_subspace(g: tomo.GateMatrix, decode: bool) -> float:
    """Fidelity of the two-dimensional code map (|000>,|100>) <-> (|000>,|111>)."""
    cols, rows = ([0, 7], [0, 4]) if decode else ([0, 4], [0, 7])
    m = g.raw[np.ix_(rows, cols)]
    return float(abs(np.trace(m)) ** 2 / 4)


def extract_named_gate(name: str, cfg: ExperimentConfig) -> dict:
    """Build, simulate and score one named protocol."""
    if name not in GATES:
        raise ConfigError(f"unknown protocol {name!r}; expected one of {sorted(GATES)}")
    spec = GATES[name]
    built = spec.build(cfg.device(), cfg)
    logical = list(spec.logical)
    if isinstance(built, gates.MeasuredProtocol):
        out = {"protocol": name, "atom_count": 1 + max(b.atom_count for b in
                                                        built.branches.values()),
               "meta": built.schedule.meta, "branches": {}}
        worst = {"process_fidelity": 1.0, "min_truth_table": 1.0, "purity": 1.0}
        for outcome in sorted(built.branches):
            g = tomo.extract_gate(built.schedule, logical, run=built.branch_runner(outcome),
                                  purity_floor=0.0)
            rec = _score(g, spec, cfg)
            out["branches"][outcome] = rec
            worst["process_fidelity"] = min(worst["process_fidelity"],
                                            rec["fidelity"]["process_fidelity"])
            worst["min_truth_table"] = min(worst["min_truth_table"],
                                           rec["fidelity"]["min_truth_table"])
            worst["purity"] = min(worst["purity"], rec["min_atom_purity"])
        out["worst"] = worst
        return out
    g = tomo.extract_gate(built, logical, purity_floor=0.0)
    if spec.target is None:
        fid = _ghz_subspace(g, name == "ghz-decode")
        rec = g.to_dict()
        rec.update(protocol=name, atom_count=built.atom_count, meta=built.meta,
                   code_subspace_fidelity=fid,
                   min_atom_purity=float(min(g.atom_purity.values())),
                   fidelity={"process_fidelity": fid, "min_truth_table": fid})
        return rec
    rec = _score(g, spec, cfg)
    rec.update(protocol=name, atom_count=built.atom_count, meta=built.meta)
    return rec


def _score(g: tomo.GateMatrix, spec: GateSpec, cfg: ExperimentConfig) -> dict:
    target = spec.target(cfg) if callable(spec.target) and not isinstance(
        spec.target, tomo.TargetShape) else spec.target
    gc = tomo.phase_cleanup(g, target, sides=spec.sides)
    rep = tomo.fidelity(gc, tomo.target_matrix(gc, target))
    rec = gc.to_dict()
    rec["fidelity"] = rep.to_dict()
    rec["min_atom_purity"] = float(min(g.atom_purity.values())) if g.atom_purity else 1.0
    return rec


def cmd_gate(cfg: ExperimentConfig) -> tuple[str, dict]:
    rec = extract_named_gate(cfg.protocol, cfg)
    summary = rec.get("worst") or {"process_fidelity": rec["fidelity"]["process_fidelity"],
                                    "min_truth_table": rec["fidelity"]["min_truth_table"],
                                    "purity": rec["min_atom_purity"]}
    checks = {
        "process_fidelity": (summary["process_fidelity"] >= cfg.min_process_fidelity,
                             f"process fidelity {summary['process_fidelity']:.6g} "
                             f"< {cfg.min_process_fidelity}"),
        "truth_table": (summary["min_truth_table"] >= cfg.min_success_probability,
                        f"truth table {summary['min_truth_table']:.6g} "
                        f"< {cfg.min_success_probability}"),
        "purity": (summary["purity"] >= cfg.min_purity,
                   f"atom purity {summary['purity']:.6g} < {cfg.min_purity}"),
    }
    return dumps(rec), checks


def cmd_deutsch(cfg: ExperimentConfig) -> tuple[str, dict]:
    res = gates.deutsch(cfg.device(), cfg.f_index)
    ok = res.success_probability >= cfg.min_success_probability
    return dumps(res.to_dict()), {"success": (ok, f"success {res.success_probability:.6g} "
                                                  f"< {cfg.min_success_probability}")}


def cmd_schedule_dump(cfg: ExperimentConfig) -> tuple[str, dict]:
    if cfg.protocol == "deutsch":
        sch = gates.deutsch_schedule(cfg.device(), cfg.f_index)
    else:
        if cfg.protocol not in GATES:
            raise ConfigError(f"unknown protocol {cfg.protocol!r}")
        sch = GATES[cfg.protocol].build(cfg.device(), cfg)
    if isinstance(sch, gates.MeasuredProtocol):
        d = {"measured_atom": sch.measured_atom, "schedule": sch.schedule.to_dict(),
             "branches": {k: v.to_dict() for k, v in sorted(sch.branches.items())}}
        return dumps(d), {}
    return sch.to_json(), {}


COMMANDS = {
    "dressed-spectrum": cmd_dressed_spectrum,
    "adiabaticity": cmd_adiabaticity,
    "trace": cmd_trace,
    "calibrate": cmd_calibrate,
    "gate": cmd_gate,
    "deutsch": cmd_deutsch,
    "schedule-dump": cmd_schedule_dump,
}


def run(subcommand: str, cfg: ExperimentConfig) -> str:
    """Run one subcommand; raises :class:`AcceptanceViolation` in strict mode."""
    if subcommand not in COMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    if cfg.protocol is None and subcommand in DEFAULT_PROTOCOL:
        cfg = replace(cfg, protocol=DEFAULT_PROTOCOL[subcommand])
    if cfg.backend != "auto":
        integrator.set_backend(cfg.backend)
    text, checks = COMMANDS[subcommand](cfg)
    if cfg.output:
        with open(cfg.output, "w", newline="") as fh:
            fh.write(text)
    failed = [msg for ok, msg in checks.values() if not ok]
    if cfg.strict and failed:
        raise AcceptanceViolation("; ".join(failed))
    return text


def _parse_overrides(extra: list[str]) -> dict[str, str]:
    out = {}
    it = iter(extra)
    for tok in it:
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:].replace("-", "_")
        if "=" in key:
            key, val = key.split("=", 1)
        else:
            try:
                val = next(it)
            except StopIteration:
                raise ConfigError(f"flag {tok} needs a value") from None
        out[key] = val
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cavityqc",
        description="Cavity-QED gate simulator. Any config key can be given as --key value.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help=f"JSON config file (default: ${CONFIG_ENV})")
    p.add_argument("--strict", action="store_true",
                   help="exit nonzero when a result misses its acceptance threshold")
    p.add_argument("--print-config", action="store_true",
                   help="print the resolved config and exit")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        overrides = _parse_overrides(extra)
        if args.strict:
            overrides["strict"] = "true"
        cfg = load_config(args.config, overrides)
        if args.print_config:
            sys.stdout.write(dumps(asdict(cfg)))
            return 0
        text = run(args.subcommand, cfg)
        if not cfg.output:
            sys.stdout.write(text)
        return 0
    except CavityQCError as exc:
        sys.stderr.write(json.dumps(tomo.round_sig(exc.to_dict()), sort_keys=True) + "\n")
        if isinstance(exc, ConfigError):
            return EXIT_CONFIG
        if isinstance(exc, AcceptanceViolation):
            return EXIT_ACCEPTANCE
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
