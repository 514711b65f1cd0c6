"""Named protocols assembled from calibrated cavity crossings.

Every builder returns a :class:`Schedule`. Dynamic phases that the crossings
leave behind are removed by output-side :class:`PhaseCorrection` stages found
by simulating the schedule on its logical basis (the Stark-field adjustments
the physical setup would use).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from ..dressed import dressed_level, bare_level
from ..errors import ConfigError, LayoutMismatch
from ..hamiltonian import DetuningSpec, PairHamiltonian
from ..integrator import EvolutionWindow, TraceLog, TraceRequest, evolve
from ..statespace import AtomLevel, BasisLabel, CavitySpec, StateVector, SystemLayout, basis_state
from .. import tomography as tomo
from .calibration import (calibrate_pulse, calibrated_drive, resonant_area_omega0,
                          resonant_area_tau)
from .schedule import (AtomPulse, Device, EventKind, Itinerary, PhaseCorrection, PulseEvent,
                       Schedule, atom_phase, execute, flip_ge, flip_ig, hadamard_ge, hadamard_ig,
                       logical_occupations, product_inputs)

MEMORY = "M"

# Transition names used as pulse intents.
ATOM_TO_CAVITY = ("g,0", "V-0")
CAVITY_TO_ATOM = ("V-0", "V+1")
EXCITE_ON_VACUUM = ("g,0", "V+0")
LADDER = ("V+0", "V-1")


def chain_layout(device: Device, cavities: Sequence[str], atoms: Sequence[str],
                 memory: str | None = None) -> SystemLayout:
    """Aligned cavities (resonant memory cavity last) and the atoms that will fly."""
    specs = [CavitySpec(c, device.fock_cutoff, device.omega_cavity) for c in cavities]
    if memory is not None:
        specs.append(CavitySpec(memory, device.fock_cutoff, device.omega_cavity + device.delta))
    return SystemLayout(tuple(specs), tuple(atoms), memory)


# ----------------------------------------------------------------------------- fragments

def _dressed_event(device, atom, cavity, pair, tau_s, area="pi", phi_s=0.0) -> PulseEvent:
    cal = calibrate_pulse(device, pair[0], pair[1], tau_s, area)
    kind = EventKind.DRESSED_PI if area == "pi" else EventKind.DRESSED_HALF_PI
    drive = calibrated_drive(device, pair[0], pair[1], tau_s, area, phi_s)
    return PulseEvent(kind, atom, cavity, device.coupling(), DetuningSpec(device.delta),
                      device.window(), (drive,), cal.intent)


def cnot_cavity_to_atom(device: Device, atom: str, cavity: str, phi_s: float = 0.0) -> PulseEvent:
    """Pi pulse on V-(0) <-> V+(1): swaps |g,1> and |e,1>."""
    return _dressed_event(device, atom, cavity, CAVITY_TO_ATOM, device.tau_s_cavity_to_atom,
                          phi_s=phi_s)


def cnot_atom_to_cavity(device: Device, atom: str, cavity: str, phi_s: float = 0.0) -> PulseEvent:
    """Pi pulse on |g,0> <-> V-(0): swaps |g,0> and |g,1>, leaves the atom in e alone."""
    return _dressed_event(device, atom, cavity, ATOM_TO_CAVITY, device.tau_s_atom_to_cavity,
                          phi_s=phi_s)


def half_atom_to_cavity(device: Device, atom: str, cavity: str, phi_s: float = 0.0) -> PulseEvent:
    return _dressed_event(device, atom, cavity, ATOM_TO_CAVITY, device.tau_s_atom_to_cavity,
                          "pi/2", phi_s)


def excite_on_vacuum(device: Device, atom: str, cavity: str, phi_s: float = 0.0) -> PulseEvent:
    """Pi pulse on |g,0> <-> V+(0): the atom is excited only if the cavity is empty."""
    return _dressed_event(device, atom, cavity, EXCITE_ON_VACUUM, device.tau_s_atom_to_cavity,
                          phi_s=phi_s)


def ladder_pulse(device: Device, atom: str, cavity: str, phi_s: float = 0.0) -> PulseEvent:
    """Pi pulse on V+(0) <-> V-(1): |e,0> <-> |g,2>, parking a marker photon pair."""
    return _dressed_event(device, atom, cavity, LADDER, device.tau_s_ladder, phi_s=phi_s)


def idle_crossing(device: Device, atom: str, cavity: str) -> PulseEvent:
    return PulseEvent(EventKind.IDLE, atom, cavity, device.coupling(), DetuningSpec(device.delta),
                      device.window(), (), "idle")


def memory_swap(device: Device, atom: str, memory: str = MEMORY,
                direction: str = "atom->cavity") -> PulseEvent:
    """Resonant pi crossing: |e,0> -> -i|g,1> and |g,1> -> -i|e,0>.

    The peak coupling is solved so the Gaussian area inside the window is pi.
    """
    if direction not in ("atom->cavity", "cavity->atom"):
        raise ConfigError("memory direction must be 'atom->cavity' or 'cavity->atom'")
    omega0 = resonant_area_omega0(device.tau, np.pi, device.window_half_width)
    return PulseEvent(EventKind.RESONANT_RABI, atom, memory, device.coupling(omega0=omega0),
                      DetuningSpec(0.0), device.window(), (), "resonant-pi")


def qpg_tau(device: Device) -> float:
    return resonant_area_tau(device.omega0, 2 * np.pi, device.window_half_width)


def resonant_2pi(device: Device, atom: str, cavity: str) -> PulseEvent:
    """Full Rabi cycle: Stark shift brings g->e onto resonance; transit time gives area 2 pi."""
    tau = qpg_tau(device)
    return PulseEvent(EventKind.RESONANT_RABI, atom, cavity, device.coupling(tau=tau),
                      DetuningSpec(device.delta, stark_offset=-device.delta),
                      device.window(tau), (), "resonant-2pi")


def stark_crossing(device: Device, atom: str, cavity: str, tau: float | None = None,
                   offset: float | None = None) -> PulseEvent:
    """Crossing with g->e pushed far off resonance so the cavity is left untouched."""
    off = device.stark_decouple * device.omega0 if offset is None else offset
    return PulseEvent(EventKind.STARK_GATE, atom, cavity, device.coupling(tau=tau),
                      DetuningSpec(device.delta, stark_offset=off), device.window(tau), (),
                      "stark-detuned")


def single_pass(layout: SystemLayout, atom: str, entry, steps, name: str = "",
                direction: str = "forward", chain: Sequence[str] = ()) -> Schedule:
    return Schedule(layout, (Itinerary(atom, direction, entry, tuple(steps)),), tuple(chain), name)


def pair_schedule(device: Device, fragment, entry="g", cavity: str = "A",
                  atom: str = "a1", **kw) -> Schedule:
    """One atom crossing one cavity with a fragment such as :func:`cnot_atom_to_cavity`."""
    lay = chain_layout(device, [cavity], [atom])
    return single_pass(lay, atom, entry, [fragment(device, atom, cavity, **kw)],
                       getattr(fragment, "__name__", "fragment"))


# ----------------------------------------------------------------------------- corrections

def output_corrections(schedule: Schedule, logical: Sequence[str], target,
                       sides: str = "output") -> tuple[Schedule, tomo.GateMatrix]:
    """Append the cavity phase corrections that bring the gate into ``target`` form."""
    g = tomo.phase_cleanup(tomo.extract_gate(schedule, logical, purity_floor=0.0), target, sides=sides)
    stages = []
    if sides == "both":
        pre = [PhaseCorrection(c, (0.0, a)) for c, a in zip(logical, g.corrections["input"])]
    else:
        pre = []
    post = [PhaseCorrection(c, (0.0, a)) for c, a in zip(logical, g.corrections["output"])]
    corrected = Schedule(schedule.layout, tuple(pre) + schedule.stages + tuple(post),
                         schedule.chain, schedule.name,
                         {**schedule.meta, "residual_params": g.residual_params})
    return corrected, g


# ----------------------------------------------------------------------------- C-NOT family

def _cnot_inv_raw(device, layout, control, target, memory, atoms, first_level, phi_b):
    a1, a2 = atoms
    first = Itinerary(a1, "forward", first_level, (
        cnot_cavity_to_atom(device, a1, control),
        cnot_atom_to_cavity(device, a1, target, phi_s=phi_b),
        memory_swap(device, a1, memory)))
    second = Itinerary(a2, "backward", "g", (
        memory_swap(device, a2, memory, "cavity->atom"),
        idle_crossing(device, a2, target),
        cnot_cavity_to_atom(device, a2, control)))
    name = "cnot-inv" if AtomLevel.parse(first_level) is AtomLevel.G else "cnot"
    return Schedule(layout, (first, second), (control, target, memory), name)


def _tune_phase(lam_at, lambda_target: float | None) -> tuple[float, float]:
    """Drive phase giving residual ``lambda_target``; lambda is linear in that phase.

    Returns ``(phase, lambda at phase 0)``.
    """
    lam0 = lam_at(0.0)
    if lambda_target is None:
        return 0.0, lam0
    step = 0.2
    slope = tomo.fold_quarter(lam_at(step) - lam0) / step
    return float(tomo.fold_quarter(lambda_target - lam0) / slope), lam0


def cnot_inv(device: Device = Device(), control: str = "A", target: str = "B",
             memory: str = MEMORY, atoms: Sequence[str] = ("a1", "a2"),
             first_level="g", layout: SystemLayout | None = None,
             lambda_target: float | None = 0.0, correct: bool = True) -> Schedule:
    """Two-cavity C-NOT with the atomic mirror.

    With the first atom entering in ``g`` the target flips when the control
    holds 0; entering in ``e`` gives the ordinary C-NOT. ``lambda_target``
    sets the drive phase of the target-cavity pulse so that the residual
    ``ZZ`` phase equals the requested value (``None`` keeps phase 0).
    """
    lay = layout or chain_layout(device, [control, target], list(atoms), memory)
    shape = (tomo.EQ_CNOT_INV if AtomLevel.parse(first_level) is AtomLevel.G
             else tomo.EQ_CNOT)
    logical = [control, target]

    def lam_at(phi):
        sch = _cnot_inv_raw(device, lay, control, target, memory, atoms, first_level, phi)
        g = tomo.phase_cleanup(tomo.extract_gate(sch, logical, purity_floor=0.0), shape,
                               sides="output")
        return g.residual_params["lambda"]

    phi_b, lam0 = _tune_phase(lam_at, lambda_target)
    sch = _cnot_inv_raw(device, lay, control, target, memory, atoms, first_level, phi_b)
    sch = Schedule(sch.layout, sch.stages, sch.chain, sch.name,
                   {"lambda_at_zero_phase": float(lam0), "target_phi_s_rad": phi_b})
    if correct:
        sch, _ = output_corrections(sch, logical, shape)
    return sch


def cnot(device: Device = Device(), control: str = "A", target: str = "B", **kw) -> Schedule:
    """Ordinary C-NOT: same crossings, first atom prepared in ``e``."""
    return cnot_inv(device, control, target, first_level="e", **kw)


@dataclass
class MeasuredProtocol:
    """A schedule followed by an ideal projective measurement of one atom and a branch fix."""

    schedule: Schedule
    measured_atom: str
    branches: dict[str, Schedule]

    def run(self, initial) -> dict[str, tuple[float, np.ndarray]]:
        """Outcome -> (probability, normalized post-fix state columns)."""
        lay = self.schedule.layout
        psi, _ = execute(self.schedule, initial)
        out = {}
        for outcome, fix in self.branches.items():
            proj = project_atom(lay, psi, self.measured_atom, outcome)
            prob = float(np.sum(np.abs(proj) ** 2) / psi.shape[1])
            post, _ = execute(fix, proj)
            out[outcome] = (prob, post)
        return out

    def branch_runner(self, outcome: str):
        """Post-selected map of one outcome (each input column renormalized) for extraction."""
        lay = self.schedule.layout

        def run(inputs):
            psi, _ = execute(self.schedule, inputs)
            proj = project_atom(lay, psi, self.measured_atom, outcome)
            proj = proj / np.linalg.norm(proj, axis=0, keepdims=True)
            return execute(self.branches[outcome], proj)[0]
        return run


def project_atom(layout: SystemLayout, psi: np.ndarray, atom: str, outcome) -> np.ndarray:
    lev = int(AtomLevel.parse(outcome))
    m = psi.shape[1]
    t = psi.reshape(layout.shape + (m,)).copy()
    ax = layout.axis(atom)
    keep = [slice(None)] * t.ndim
    for k in range(3):
        if k != lev:
            keep[ax] = k
            t[tuple(keep)] = 0.0
    return t.reshape(layout.dimension, m)


def pi_phase(device: Device, layout: SystemLayout, cavity: str, atoms: Sequence[str]
             ) -> Schedule:
    """``diag(1, -1)`` up to a global phase from two not-phase gates (theta = pi/2, then 0)."""
    first = one_qubit_not(device, cavity, np.pi / 2, atoms[0], layout)
    second = one_qubit_not(device, cavity, 0.0, atoms[1], layout)
    return first.then(second, "pi-phase")


def cnot_inv_measured(device: Device = Device(), control: str = "A", target: str = "B",
                      atoms: Sequence[str] = ("a1", "f1", "f2"),
                      lambda_target: float | None = 0.0) -> MeasuredProtocol:
    """Single-atom C-NOT-INV: a pi/2 pulse after the target, then detect the atom.

    Outcome ``g`` completes the gate; outcome ``e`` needs a pi phase on the control.
    Each branch gets its own output phase corrections.
    """
    lay = chain_layout(device, [control, target], list(atoms))
    a1 = atoms[0]
    empty = Schedule(lay, (), (control, target), "branch-g")
    fix_e = pi_phase(device, lay, control, atoms[1:])

    def build(phi):
        sch = Schedule(lay, (Itinerary(a1, "forward", "g", (
            cnot_cavity_to_atom(device, a1, control),
            cnot_atom_to_cavity(device, a1, target, phi_s=phi),
            hadamard_ge(a1))),), (control, target), "cnot-inv-measured")
        return MeasuredProtocol(sch, a1, {"g": empty, "e": fix_e})

    def fit(proto, outcome):
        g = tomo.extract_gate(proto.schedule, [control, target],
                              run=proto.branch_runner(outcome), purity_floor=0.0)
        return tomo.phase_cleanup(g, tomo.EQ_CNOT_INV, sides="output")

    phi_b, lam0 = _tune_phase(lambda phi: fit(build(phi), "g").residual_params["lambda"],
                              lambda_target)
    proto = build(phi_b)
    branches = {}
    for outcome, fix in proto.branches.items():
        g = fit(proto, outcome)
        post = tuple(PhaseCorrection(c, (0.0, a))
                     for c, a in zip([control, target], g.corrections["output"]))
        branches[outcome] = fix.with_stages(*post)
    sch = Schedule(lay, proto.schedule.stages, proto.schedule.chain, proto.schedule.name,
                   {"lambda_at_zero_phase": float(lam0), "target_phi_s_rad": phi_b})
    return MeasuredProtocol(sch, a1, branches)


# ----------------------------------------------------------------------------- single qubit

@lru_cache(maxsize=32)
def _logical_pulse_matrix(device: Device, area: str) -> np.ndarray:
    """Logical 2x2 action of the |g,0> <-> V-(0) pulse at phase 0 (atom g in, g out)."""
    frag = cnot_atom_to_cavity if area == "pi" else half_atom_to_cavity
    sch = pair_schedule(device, frag)
    return tomo.extract_gate(sch, ["A"], purity_floor=0.0).raw


def not_phase_theta(device: Device, phi_s: float = 0.0) -> float:
    """``theta`` of the not-phase gate realized with drive phase ``phi_s``.

    The drive phase enters as ``exp(-i phi_s N)`` conjugation (``N`` the
    excitation number), so ``theta = theta_0 - phi_s`` exactly.
    """
    u = _logical_pulse_matrix(device, "pi")
    theta0 = 0.5 * (np.angle(u[1, 0]) - np.angle(u[0, 1]))
    return float(theta0 - phi_s)


def one_qubit_not(device: Device, cavity: str, theta: float, atom: str = "a1",
                  layout: SystemLayout | None = None) -> Schedule:
    """Not-phase gate ``[[0, e^{-i theta}], [e^{i theta}, 0]]`` up to a global phase."""
    lay = layout or chain_layout(device, [cavity], [atom])
    phi = not_phase_theta(device, 0.0) - theta
    ev = cnot_atom_to_cavity(device, atom, cavity, phi_s=phi)
    return single_pass(lay, atom, "g", [ev], f"not({theta:.6g})",
                       chain=layout.cavity_labels if layout else ())


def not_phase_matrix(theta: float) -> np.ndarray:
    return np.array([[0, np.exp(-1j * theta)], [np.exp(1j * theta), 0]])


def hadamard_phase_matrix(theta_prime: float) -> np.ndarray:
    return np.array([[1, np.exp(-1j * theta_prime)], [np.exp(1j * theta_prime), -1]]) / np.sqrt(2)


def half_pulse_settings(device: Device, target: np.ndarray) -> tuple[float, float]:
    """Drive phase and post-pulse cavity phase realizing an equal-weight 2x2 ``target``.

    With ``U(phi) = diag(1, e^{-i phi}) U(0) diag(1, e^{i phi})`` followed by
    ``diag(1, e^{i zeta})`` the three phases (global, phi, zeta) are fixed by
    three target entries; unitarity makes the fourth consistent.
    """
    u = _logical_pulse_matrix(device, "pi/2")
    t = np.asarray(target, dtype=complex)
    if not np.allclose(np.abs(t), 1 / np.sqrt(2), atol=1e-9):
        raise ConfigError("a single pi/2 pulse realizes only equal-weight 2x2 gates")
    gamma = np.angle(t[0, 0]) - np.angle(u[0, 0])
    phi = np.angle(t[0, 1]) - np.angle(u[0, 1]) - gamma
    zeta = np.angle(t[1, 1]) - np.angle(u[1, 1]) - gamma
    return float(phi), float(zeta)


def one_qubit_half(device: Device, cavity: str, target: np.ndarray, atom: str = "a1",
                   layout: SystemLayout | None = None, name: str = "half") -> list:
    """Steps (pulse, then cavity phase) for an equal-weight single-qubit gate."""
    phi, zeta = half_pulse_settings(device, target)
    return [half_atom_to_cavity(device, atom, cavity, phi_s=phi)], PhaseCorrection(cavity, (0.0, zeta))


def one_qubit_hadamard(device: Device, cavity: str, theta_prime: float, atom: str = "a1",
                       layout: SystemLayout | None = None) -> Schedule:
    """Hadamard-phase gate ``H(theta')`` from a pi/2 pulse plus a cavity phase."""
    lay = layout or chain_layout(device, [cavity], [atom])
    steps, corr = one_qubit_half(device, cavity, hadamard_phase_matrix(theta_prime), atom)
    sch = single_pass(lay, atom, "g", steps, f"hadamard({theta_prime:.6g})",
                      chain=layout.cavity_labels if layout else ())
    return sch.with_stages(corr)


# ----------------------------------------------------------------------------- QPG

def qpg(device: Device = Device(), control: str = "A", target: str = "B", memory: str = MEMORY,
        atoms: Sequence[str] = ("a1", "a2"), layout: SystemLayout | None = None) -> Schedule:
    """Controlled phase ``diag(1, 1, 1, -1)`` from resonant 2 pi crossings and the mirror.

    The first atom carries its i/g superposition; before the memory cavity it
    is mapped g -> e, i -> g so the memory stores the g component, and the
    second atom maps it back after absorbing.
    """
    lay = layout or chain_layout(device, [control, target], list(atoms), memory)
    a1, a2 = atoms
    tau = qpg_tau(device)
    first = Itinerary(a1, "forward", "i", (
        hadamard_ig(a1),
        resonant_2pi(device, a1, control),
        hadamard_ig(a1),
        resonant_2pi(device, a1, target),
        flip_ge(a1), flip_ig(a1),
        memory_swap(device, a1, memory)))
    second = Itinerary(a2, "backward", "g", (
        memory_swap(device, a2, memory, "cavity->atom"),
        flip_ig(a2), flip_ge(a2),
        # two memory crossings leave (-i)^2 on the stored branch
        atom_phase(a2, (0.0, np.pi, 0.0)),
        hadamard_ig(a2),
        stark_crossing(device, a2, target, tau=tau),
        resonant_2pi(device, a2, control)))
    return Schedule(lay, (first, second), (control, target, memory), "qpg")


def qpg_checkpoints(a: Sequence[complex]) -> dict[str, dict[str, np.ndarray]]:
    """Ideal intermediate two-cavity states per atom level (``i`` and ``g`` rails)."""
    a0, a1, a2, a3 = a
    s = 1 / np.sqrt(2)
    return {
        "after-first-2pi": {"i": s * np.array([a0, a1, a2, a3]), "g": s * np.array([a0, a1, -a2, -a3])},
        "after-second-hadamard": {"i": np.array([a0, a1, 0, 0]), "g": np.array([0, 0, a2, a3])},
        "after-target-2pi": {"i": np.array([a0, a1, 0, 0]), "g": np.array([0, 0, a2, -a3])},
        "after-return-hadamard": {"i": s * np.array([a0, a1, a2, -a3]),
                                  "g": s * np.array([a0, a1, -a2, a3])},
        "final": {"i": s * np.array([a0, a1, a2, -a3]), "g": s * np.array([a0, a1, a2, -a3])},
    }


# composite checkpoints: (name, step label, atom holding the rails)
QPG_CHECKPOINT_STEPS = (
    ("after-first-2pi", "a1:1:A", "a1"),
    ("after-second-hadamard", "a1:2:pi/2(i,g)", "a1"),
    ("after-target-2pi", "a1:3:B", "a1"),
    ("after-return-hadamard", "a2:4:pi/2(i,g)", "a2"),
)


def qpg_checkpoint_fidelities(device: Device, amplitudes: Sequence[complex],
                              ideal: bool = False) -> dict[str, float]:
    """State fidelity of each intermediate QPG state against the matrix-algebra form.

    The rail atom carries ``i``/``g``; the other atom sits in its entry level
    (before it flies) or in the exit state of the first atom.
    """
    a = np.asarray(amplitudes, dtype=complex)
    a = a / np.linalg.norm(a)
    sch = qpg(device)
    lay = sch.layout
    occ = logical_occupations(2)
    psi0 = product_inputs(sch, [tuple(o) + (0,) for o in occ]) @ a
    _, marks = execute(sch, psi0, checkpoints=True, ideal=ideal)
    by_label = {m.label: m.states[:, 0] for m in marks}
    expected = qpg_checkpoints(a)
    out = {}
    for name, label, rail in QPG_CHECKPOINT_STEPS:
        if label not in by_label:
            raise LayoutMismatch(f"checkpoint {label!r} missing from the QPG run")
        other_level = "g"
        v = np.zeros(lay.dimension, dtype=complex)
        for lev, amps in expected[name].items():
            for k, (qa, qb) in enumerate(occ):
                levels = {rail: lev, ("a2" if rail == "a1" else "a1"): other_level}
                idx = lay.index(BasisLabel((qa, qb, 0), tuple(levels[x] for x in lay.atoms)))
                v[idx] += amps[k]
        out[name] = tomo.state_fidelity(v, by_label[label])
    return out


# ----------------------------------------------------------------------------- Toffoli

def toffoli_n(device: Device = Device(), cavities: Sequence[str] = ("A", "B", "C"),
              memory: str = MEMORY, atoms: Sequence[str] = ("a1", "a2"),
              layout: SystemLayout | None = None) -> Schedule:
    """Multi-controlled NOT on the last cavity of the chain, two atoms in total.

    The first atom is excited in the first cavity only if it is empty, then
    flipped so it carries ``e`` for control 1. Every further control marks
    ``|1,0> -> |2,...>`` via the ladder pulse (``|e,0> -> |g,2>``), so after
    the last control and a flip the atom is in ``g`` iff all controls hold 1.
    The second atom undoes the marks on its way back.
    """
    if len(cavities) < 3:
        raise ConfigError("need at least two controls and one target")
    if device.fock_cutoff < 3:
        raise ConfigError("the ladder pulse visits |2>; fock_cutoff must be >= 3")
    lay = layout or chain_layout(device, list(cavities), list(atoms), memory)
    a1, a2 = atoms
    first_c, middle, tgt = cavities[0], list(cavities[1:-1]), cavities[-1]
    s1 = [excite_on_vacuum(device, a1, first_c), flip_ge(a1)]
    s1 += [ladder_pulse(device, a1, c) for c in middle]
    s1 += [flip_ge(a1), cnot_atom_to_cavity(device, a1, tgt), memory_swap(device, a1, memory)]
    s2 = [memory_swap(device, a2, memory, "cavity->atom"), idle_crossing(device, a2, tgt),
          flip_ge(a2)]
    s2 += [ladder_pulse(device, a2, c) for c in reversed(middle)]
    s2 += [flip_ge(a2), excite_on_vacuum(device, a2, first_c)]
    chain = tuple(cavities) + (memory,)
    return Schedule(lay, (Itinerary(a1, "forward", "g", s1), Itinerary(a2, "backward", "g", s2)),
                    chain, f"toffoli-{len(cavities)}")


def toffoli(device: Device = Device(), a: str = "A", b: str = "B", c: str = "C",
            **kw) -> Schedule:
    return toffoli_n(device, (a, b, c), **kw)


def toffoli_truth_table(n_qubits: int) -> np.ndarray:
    return tomo.toffoli_matrix(n_qubits)


# ----------------------------------------------------------------------------- GHZ

def _ghz_raw(device, lay, data, ancillas, memory, atoms, name):
    a1, a2 = atoms
    s1 = [cnot_cavity_to_atom(device, a1, data)]
    s1 += [cnot_atom_to_cavity(device, a1, c) for c in ancillas]
    s1 += [memory_swap(device, a1, memory)]
    s2 = [memory_swap(device, a2, memory, "cavity->atom")]
    s2 += [idle_crossing(device, a2, c) for c in reversed(ancillas)]
    s2 += [cnot_cavity_to_atom(device, a2, data)]
    chain = (data,) + tuple(ancillas) + (memory,)
    return Schedule(lay, (Itinerary(a1, "forward", "e", s1), Itinerary(a2, "backward", "g", s2)),
                    chain, name)


def _branch_phase_fix(sch: Schedule, data: str, cavities: Sequence[str], inputs, outputs,
                      ideal: bool = False):
    """Cavity phase on ``data`` equalizing the phases of the two logical branches."""
    lay = sch.layout
    occ_in = [tuple(o[c] for c in lay.cavity_labels) for o in inputs]
    finals, _ = execute(sch, product_inputs(sch, occ_in), ideal=ideal)
    refs, _ = tomo.atom_reference_states(lay, finals, 0.0)
    amps = tomo.project_logical(lay, finals, list(cavities), refs)
    idx = [int("".join(str(o[c]) for c in cavities), 2) for o in outputs]
    c0, c1 = amps[idx[0], 0], amps[idx[1], 1]
    return PhaseCorrection(data, (0.0, float(np.angle(c0) - np.angle(c1))))


def ghz_encode(device: Device = Device(), data: str = "A", ancillas: Sequence[str] = ("B", "C"),
               memory: str = MEMORY, atoms: Sequence[str] = ("a1", "a2"),
               layout: SystemLayout | None = None, name: str = "ghz-encode",
               ideal: bool = False) -> Schedule:
    """``(alpha|0> + beta|1>)|0...0> -> alpha|0...0> + beta|1...1>`` with two atoms.

    ``ideal=True`` calibrates the closing phase against textbook crossings.
    """
    cav = [data] + list(ancillas)
    lay = layout or chain_layout(device, cav, list(atoms), memory)
    sch = _ghz_raw(device, lay, data, ancillas, memory, atoms, name)
    zero = dict.fromkeys(lay.cavity_labels, 0)
    one_in = {**zero, data: 1}
    one_out = {**zero, **dict.fromkeys(cav, 1)}
    if name == "ghz-encode":
        fix = _branch_phase_fix(sch, data, cav, [zero, one_in], [zero, one_out], ideal)
    else:
        fix = _branch_phase_fix(sch, data, cav, [zero, one_out], [zero, one_in], ideal)
    return sch.with_stages(fix)


def ghz_decode(device: Device = Device(), data: str = "A", ancillas: Sequence[str] = ("B", "C"),
               memory: str = MEMORY, atoms: Sequence[str] = ("a1", "a2"),
               layout: SystemLayout | None = None, ideal: bool = False) -> Schedule:
    """Same crossings as :func:`ghz_encode`; only the closing phase correction differs."""
    return ghz_encode(device, data, ancillas, memory, atoms, layout, "ghz-decode", ideal)


# ----------------------------------------------------------------------------- Deutsch

F_GATES = {
    1: np.eye(4, dtype=complex),
    2: np.kron(np.eye(2), np.array([[0, 1], [1, 0]])).astype(complex),
    3: tomo.CNOT,
    4: tomo.CNOT_INV,
}


def deutsch_ideal(f_index: int) -> tuple[float, float]:
    """Outcome distribution of cavity A from pure matrix algebra."""
    h0, hpi = hadamard_phase_matrix(0.0), hadamard_phase_matrix(np.pi)
    psi = np.kron(h0, hpi) @ np.array([1, 0, 0, 0], dtype=complex)
    psi = np.kron(h0, np.eye(2)) @ (F_GATES[f_index] @ psi)
    p0 = float(np.sum(np.abs(psi[:2]) ** 2))
    return p0, 1.0 - p0


@dataclass
class DeutschResult:
    f_index: int
    p_zero: float
    p_one: float
    atom_count: int
    schedule: Schedule

    @property
    def verdict(self) -> str:
        return "constant" if self.p_zero >= self.p_one else "balanced"

    @property
    def expected(self) -> str:
        return "constant" if self.f_index in (1, 2) else "balanced"

    @property
    def success_probability(self) -> float:
        return self.p_zero if self.expected == "constant" else self.p_one

    def to_dict(self) -> dict:
        return {"f_index": self.f_index, "p_A0": self.p_zero, "p_A1": self.p_one,
                "verdict": self.verdict, "expected": self.expected,
                "success_probability": self.success_probability, "atom_count": self.atom_count}


def deutsch_schedule(device: Device, f_index: int) -> Schedule:
    if f_index not in F_GATES:
        raise ConfigError("f_index must be 1, 2, 3 or 4")
    atoms = ["h1"] + (["f1", "f2"] if f_index in (3, 4) else []) + ["h2"]
    lay = chain_layout(device, ["A", "B"], atoms, MEMORY if f_index in (3, 4) else None)
    chain = ("A", "B", MEMORY) if f_index in (3, 4) else ("A", "B")
    h_a, corr_a = one_qubit_half(device, "A", hadamard_phase_matrix(0.0), "h1")
    target_b = hadamard_phase_matrix(np.pi)
    if f_index == 2:
        # f = NOT on B merges into the first atom's pulse on B
        target_b = np.array([[0, 1], [1, 0]]) @ target_b
    h_b, corr_b = one_qubit_half(device, "B", target_b, "h1")
    sch = Schedule(lay, (Itinerary("h1", "forward", "g", tuple(h_a + h_b)), corr_a, corr_b),
                   chain, f"deutsch-{f_index}")
    if f_index in (3, 4):
        fgate = cnot_inv(device, "A", "B", MEMORY, ("f1", "f2"),
                         first_level="e" if f_index == 3 else "g", layout=lay)
        sch = sch.then(Schedule(lay, fgate.stages, chain, fgate.name, fgate.meta))
    final_a, corr_final = one_qubit_half(device, "A", hadamard_phase_matrix(0.0), "h2")
    sch = sch.then(Schedule(lay, (Itinerary("h2", "forward", "g", tuple(final_a)), corr_final),
                            chain, "readout"), name=f"deutsch-{f_index}")
    return sch


def deutsch(device: Device = Device(), f_index: int = 1) -> DeutschResult:
    """Run the two-cavity Deutsch pipeline and read cavity A by ideal projection."""
    sch = deutsch_schedule(device, f_index)
    lay = sch.layout
    psi0 = product_inputs(sch, [tuple(0 for _ in lay.cavity_labels)])
    psi, _ = execute(sch, psi0)
    t = np.abs(psi[:, 0].reshape(lay.shape)) ** 2
    pa = t.sum(axis=tuple(i for i in range(t.ndim) if i != lay.axis("A")))
    return DeutschResult(f_index, float(pa[0]), float(pa[1]), sch.atom_count, sch)


# ----------------------------------------------------------------------------- misc

def atom_source_statistics(mean: float) -> tuple[float, float]:
    """Poisson beam: probability of exactly one atom, and discarded sections before success."""
    if mean < 0:
        raise ConfigError("mean atom number must be >= 0")
    p = float(mean * np.exp(-mean))
    delay = float("inf") if p == 0.0 else 1.0 / p - 1.0
    return p, delay


def dressed_trace(device: Device, fragment=cnot_atom_to_cavity, initial: str = "g,0",
                  sectors: Sequence[int] = (0, 1), n_points: int = 2000) -> TraceLog:
    """Populations of |g,0> and the instantaneous dressed states during one crossing."""
    lay = chain_layout(device, ["A"], ["a1"])
    ev = fragment(device, "a1", "A")
    h = ev.hamiltonian(lay)
    coupling = ev.coupling
    n, lev = initial.split(",")[1], initial.split(",")[0]
    start = basis_state(lay, BasisLabel((int(n),), (lev,)))

    def embed(v):
        return v.reshape(-1)  # pair index 3n+level equals the composite index here

    projectors = {"g,0": lambda t: embed(bare_level(0, "g", device.delta).pair_vector(
        device.fock_cutoff))}
    for s in sectors:
        for br in ("-", "+"):
            projectors[f"V{br}{s}"] = (
                lambda t, s=s, br=br: embed(dressed_level(coupling, ev.detuning(t), s, br, t)
                                            .pair_vector(device.fock_cutoff)))
    w = EvolutionWindow(ev.window.t_start, ev.window.t_end, rel_tol=ev.window.rel_tol,
                        abs_tol=ev.window.abs_tol, record=TraceRequest(projectors, n_points))
    _, trace = evolve(start, h, w)
    return trace
