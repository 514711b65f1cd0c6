"""Gate extraction from protocol runs, local-phase cleanup and fidelity figures."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import EntanglementResidue, LayoutMismatch, NumericalFailure
from .statespace import AtomLevel, BasisLabel, SystemLayout

PURITY_FLOOR = 0.999

CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
CNOT_INV = np.array([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]], dtype=complex)
QPG = np.diag([1, 1, 1, -1]).astype(complex)


def zz_phase(n_qubits: int, lam: float) -> np.ndarray:
    """``exp(-i lam Z x Z x ...)`` over ``n_qubits``."""
    parity = np.array([(-1) ** bin(k).count("1") for k in range(2 ** n_qubits)])
    return np.diag(np.exp(-1j * lam * parity))


def cnot_inv_lambda(lam: float) -> np.ndarray:
    """Inverted-control C-NOT dressed by the non-local ``ZZ`` phase ``lam``."""
    return zz_phase(2, lam) @ CNOT_INV


def cnot_lambda(lam: float) -> np.ndarray:
    return zz_phase(2, lam) @ CNOT


def toffoli_matrix(n_qubits: int = 3) -> np.ndarray:
    d = 2 ** n_qubits
    u = np.eye(d, dtype=complex)
    u[[d - 2, d - 1]] = u[[d - 1, d - 2]]
    return u


@dataclass(frozen=True)
class TargetShape:
    """Target matrix, optionally depending on named residual parameters."""

    name: str
    build: Callable[..., np.ndarray]
    params: tuple[str, ...] = ()
    fold: Callable[[np.ndarray], np.ndarray] | None = None

    @classmethod
    def fixed(cls, name: str, matrix: np.ndarray) -> "TargetShape":
        m = np.array(matrix, dtype=complex)
        return cls(name, lambda: m)

    def matrix(self, values=()) -> np.ndarray:
        return np.asarray(self.build(*values), dtype=complex)


def fold_quarter(v):
    # lambda is defined modulo pi/2: exp(-i pi/2 ZZ) is a product of local Z gates
    return (np.asarray(v) + np.pi / 4) % (np.pi / 2) - np.pi / 4


EQ_CNOT_INV = TargetShape("cnot-inv-lambda", cnot_inv_lambda, ("lambda",),
                          lambda v: fold_quarter(v))
EQ_CNOT = TargetShape("cnot-lambda", cnot_lambda, ("lambda",), lambda v: fold_quarter(v))


@dataclass
class GateMatrix:
    dimension: int
    labels: tuple[str, ...]
    raw: np.ndarray
    cleaned: np.ndarray | None = None
    corrections: dict = field(default_factory=dict)
    residual_params: dict = field(default_factory=dict)
    leaked: np.ndarray | None = None
    atom_purity: dict = field(default_factory=dict)

    @property
    def n_qubits(self) -> int:
        return int(round(np.log2(self.dimension)))

    @property
    def best(self) -> np.ndarray:
        return self.raw if self.cleaned is None else self.cleaned

    def unitarity_defect(self) -> float:
        r = self.raw
        return float(np.max(np.abs(r.conj().T @ r - np.eye(self.dimension))))

    def to_dict(self) -> dict:
        out = {"dimension": self.dimension, "basis": list(self.labels),
               "raw": _complex_rows(self.raw),
               "unitarity_defect": self.unitarity_defect()}
        if self.cleaned is not None:
            out["cleaned"] = _complex_rows(self.cleaned)
        if self.corrections:
            out["corrections"] = self.corrections
        if self.residual_params:
            out["residual_params"] = self.residual_params
        if self.leaked is not None:
            out["leaked_norm"] = [float(x) for x in self.leaked]
        if self.atom_purity:
            out["atom_purity_min"] = self.atom_purity
        return out

    def to_json(self) -> str:
        return json.dumps(round_sig(self.to_dict()), indent=2, sort_keys=True) + "\n"

    def to_csv(self, which: str = "cleaned") -> str:
        return matrix_csv(self.best if which == "cleaned" else self.raw)


@dataclass
class FidelityReport:
    process_fidelity: float
    max_element_deviation: float
    truth_table: list[float]
    target_name: str = ""

    @property
    def min_truth_table(self) -> float:
        return float(min(self.truth_table))

    def to_dict(self) -> dict:
        return {"target": self.target_name, "process_fidelity": self.process_fidelity,
                "max_element_deviation": self.max_element_deviation,
                "truth_table": list(self.truth_table),
                "min_truth_table": self.min_truth_table}


def _complex_rows(m: np.ndarray):
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def round_sig(obj):
    """Fix floats at 12 significant digits (numpy scalars made plain) for byte-stable output."""
    if isinstance(obj, np.ndarray):
        return round_sig(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(f"{float(obj):.12g}")
    if isinstance(obj, dict):
        return {k: round_sig(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_sig(v) for v in obj]
    return obj


def matrix_csv(m: np.ndarray) -> str:
    """Row-major CSV with ``re,im`` pairs per element."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in np.asarray(m):
        cells = []
        for z in row:
            cells += [f"{z.real:.12g}", f"{z.imag:.12g}"]
        w.writerow(cells)
    return buf.getvalue()


def basis_labels(n_qubits: int) -> tuple[str, ...]:
    return tuple(format(k, f"0{n_qubits}b") for k in range(2 ** n_qubits))


# ----------------------------------------------------------------------------- extraction

def atom_reference_states(layout: SystemLayout, finals: np.ndarray,
                          floor: float = PURITY_FLOOR) -> tuple[dict, dict]:
    """Common exit state of every atom plus the lowest purity seen across columns."""
    refs, purity = {}, {}
    m = finals.shape[1]
    for atom in layout.atoms:
        ax = layout.axis(atom)
        rho_sum = np.zeros((3, 3), dtype=complex)
        worst = 1.0
        for k in range(m):
            t = np.moveaxis(finals[:, k].reshape(layout.shape), ax, 0).reshape(3, -1)
            rho = t @ t.conj().T
            tr = np.real(np.trace(rho))
            if tr > 0:
                worst = min(worst, float(np.real(np.trace(rho @ rho))) / tr ** 2)
            rho_sum += rho
        if worst < floor:
            raise EntanglementResidue(f"atom {atom} left entangled (purity {worst:.6f})",
                                      atom=atom, purity=worst)
        w, v = np.linalg.eigh(rho_sum)
        ref = v[:, -1]
        # fix the gauge: largest component real positive
        j = int(np.argmax(np.abs(ref)))
        refs[atom] = ref * np.exp(-1j * np.angle(ref[j]))
        purity[atom] = worst
    return refs, purity


def project_logical(layout: SystemLayout, finals: np.ndarray, logical: Sequence[str],
                    atom_refs: dict) -> np.ndarray:
    """Amplitudes ``<q, vacuum elsewhere, atom refs | psi_k>`` on the logical qubits."""
    m = finals.shape[1]
    t = np.moveaxis(finals.reshape(layout.shape + (m,)), -1, 0)
    # atoms are the trailing axes; contract the last one each time
    for atom in reversed(layout.atoms):
        t = np.tensordot(t, atom_refs[atom].conj(), axes=([-1], [0]))
    index = [slice(None)]
    kept = []
    for c in layout.cavity_labels:
        if c in logical:
            index.append(slice(0, 2))
            kept.append(c)
        else:
            index.append(0)
    t = t[tuple(index)]
    t = np.moveaxis(t, [1 + kept.index(c) for c in logical], list(range(1, 1 + len(logical))))
    return t.reshape(m, -1).T


def extract_gate(schedule, logical: Sequence[str], run=None,
                 purity_floor: float = PURITY_FLOOR) -> GateMatrix:
    """Simulate ``schedule`` on every logical basis input of the cavities ``logical``.

    Raises :class:`EntanglementResidue` when an atom's worst purity is below
    ``purity_floor`` (pass 0 to measure without enforcing).
    """
    from .protocol.schedule import execute, logical_occupations, product_inputs

    lay = schedule.layout
    for c in logical:
        if c not in lay.cavity_labels:
            raise LayoutMismatch(f"logical cavity {c!r} not in layout")
    n = len(logical)
    occs = []
    for bits in logical_occupations(n):
        occ = dict.fromkeys(lay.cavity_labels, 0)
        occ.update(zip(logical, bits))
        occs.append(tuple(occ[c] for c in lay.cavity_labels))
    inputs = product_inputs(schedule, occs)
    finals = execute(schedule, inputs)[0] if run is None else run(inputs)
    refs, purity = atom_reference_states(lay, finals, purity_floor)
    raw = project_logical(lay, finals, logical, refs)
    leaked = 1.0 - np.sum(np.abs(raw) ** 2, axis=0)
    return GateMatrix(2 ** n, basis_labels(n), raw, leaked=leaked, atom_purity=purity)


# ----------------------------------------------------------------------------- cleanup

def _bit_matrix(n: int) -> np.ndarray:
    return np.array([[(k >> (n - 1 - q)) & 1 for q in range(n)] for k in range(2 ** n)], float)


@dataclass
class _Gauge:
    n: int
    sides: str

    @property
    def n_phase(self) -> int:
        return 1 + self.n * (2 if self.sides == "both" else 1)

    def split(self, x):
        gamma = x[0]
        out = x[1:1 + self.n]
        inp = x[1 + self.n:1 + 2 * self.n] if self.sides == "both" else np.zeros(self.n)
        return gamma, out, inp

    def apply(self, raw, x):
        bits = _bit_matrix(self.n)
        gamma, out, inp = self.split(x)
        ro = bits @ out
        ci = bits @ inp
        return np.exp(1j * (gamma + ro[:, None] + ci[None, :])) * raw


def _objective(raw, gauge: _Gauge, shape: TargetShape):
    bits = _bit_matrix(gauge.n)
    npar = len(shape.params)

    def f(x):
        phase_x, par = x[:gauge.n_phase], x[gauge.n_phase:]
        c = gauge.apply(raw, phase_x)
        t = shape.matrix(par)
        e = c - t
        val = float(np.sum(np.abs(e) ** 2))
        # d|C - T|^2 / d(phase) = 2 Re(conj(E) * iC)
        w = 2.0 * np.real(np.conj(e) * 1j * c)
        g = [w.sum()]
        g += list(bits.T @ w.sum(axis=1))
        if gauge.sides == "both":
            g += list(bits.T @ w.sum(axis=0))
        for j in range(npar):
            h = 1e-7
            dp = np.array(par, dtype=float)
            dp[j] += h
            dm = np.array(par, dtype=float)
            dm[j] -= h
            dt = (shape.matrix(dp) - shape.matrix(dm)) / (2 * h)
            g.append(float(-2.0 * np.real(np.sum(np.conj(e) * dt))))
        return val, np.array(g)

    return f


def _analytic_start(raw, target, gauge: _Gauge):
    """Phases from the largest element per column, solved in the least-squares sense."""
    n, d = gauge.n, raw.shape[0]
    bits = _bit_matrix(n)
    rows, rhs = [], []
    for c in range(d):
        r = int(np.argmax(np.abs(target[:, c])))
        if abs(target[r, c]) < 1e-12 or abs(raw[r, c]) < 1e-12:
            continue
        coeff = [1.0] + list(bits[r])
        if gauge.sides == "both":
            coeff += list(bits[c])
        rows.append(coeff)
        rhs.append(np.angle(target[r, c]) - np.angle(raw[r, c]))
    if not rows:
        return np.zeros(gauge.n_phase)
    sol, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)
    return sol


def phase_cleanup(g: GateMatrix, target: TargetShape | np.ndarray, sides: str = "both",
                  restarts: int = 24, seed: int = 0, gtol: float = 1e-10) -> GateMatrix:
    """Fit global and per-qubit diagonal phases (and named target parameters).

    ``sides`` is ``"both"`` (input and output phases) or ``"output"``. With
    ``"output"`` a non-local ``ZZ`` phase stays identifiable, which is how the
    residual ``lambda`` of the C-NOT variants is reported.
    """
    if isinstance(target, np.ndarray):
        target = TargetShape.fixed("fixed", target)
    if sides not in ("both", "output"):
        raise ValueError("sides must be 'both' or 'output'")
    n = g.n_qubits
    gauge = _Gauge(n, sides)
    f = _objective(g.raw, gauge, target)
    npar = len(target.params)
    rng = np.random.default_rng(seed)
    lam_starts = [np.zeros(npar), np.full(npar, 0.3), np.full(npar, -0.3)] if npar \
        else [np.zeros(0)]
    starts = [np.concatenate([_analytic_start(g.raw, target.matrix(lam0), gauge), lam0])
              for lam0 in lam_starts]
    for _ in range(restarts):
        starts.append(rng.uniform(-np.pi, np.pi, gauge.n_phase + npar))
    best = None
    for x0 in starts:
        res = minimize(f, x0, jac=True, method="BFGS", options={"gtol": gtol, "maxiter": 2000})
        if best is None or res.fun < best.fun - 1e-14:
            best = res
    grad = float(np.linalg.norm(f(best.x)[1]))
    if grad > 1e-6:
        raise NumericalFailure("phase cleanup did not converge", gradient_norm=grad)
    x = best.x
    phase_x, par = x[:gauge.n_phase], x[gauge.n_phase:]
    gamma, out, inp = gauge.split(phase_x)
    wrap = lambda v: float((v + np.pi) % (2 * np.pi) - np.pi)
    corrections = {"global": wrap(gamma), "output": [wrap(v) for v in out]}
    if sides == "both":
        corrections["input"] = [wrap(v) for v in inp]
    residual = {}
    if npar:
        vals = target.fold(par) if target.fold else par
        residual = {name: float(v) for name, v in zip(target.params, np.atleast_1d(vals))}
        # re-fit phases at the folded parameters so cleaned matches the reported values
        if target.fold is not None:
            fixed = TargetShape.fixed("folded", target.matrix(vals))
            h = phase_cleanup(GateMatrix(g.dimension, g.labels, g.raw), fixed, sides, 4, seed)
            corrections = h.corrections
            cleaned = h.cleaned
        else:
            cleaned = gauge.apply(g.raw, phase_x)
    else:
        cleaned = gauge.apply(g.raw, phase_x)
    return GateMatrix(g.dimension, g.labels, g.raw, cleaned, corrections, residual,
                      g.leaked, dict(g.atom_purity))


def target_matrix(g: GateMatrix, target: TargetShape | np.ndarray) -> np.ndarray:
    if isinstance(target, np.ndarray):
        return target
    vals = [g.residual_params[p] for p in target.params]
    return target.matrix(vals)


def fidelity(g: GateMatrix | np.ndarray, target: np.ndarray, name: str = "") -> FidelityReport:
    """Process fidelity ``|Tr(T^dag U)|^2 / d^2``, element deviation and truth table."""
    u = g.best if isinstance(g, GateMatrix) else np.asarray(g)
    t = np.asarray(target, dtype=complex)
    if u.shape != t.shape:
        raise LayoutMismatch(f"gate {u.shape} and target {t.shape} differ")
    d = t.shape[0]
    pf = float(abs(np.trace(t.conj().T @ u)) ** 2 / d ** 2)
    dev = float(np.max(np.abs(u - t)))
    truth = []
    for c in range(d):
        r = int(np.argmax(np.abs(t[:, c])))
        truth.append(float(abs(u[r, c]) ** 2))
    return FidelityReport(min(pf, 1.0), dev, truth, name)


def state_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    return float(abs(np.vdot(a, b)) ** 2 / (np.vdot(a, a).real * np.vdot(b, b).real))
