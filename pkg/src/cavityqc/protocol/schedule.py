"""Pulse programs: atom itineraries through a chain of cavities and their execution."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence, Union

import numpy as np

from ..errors import ConfigError, LayoutMismatch
from ..hamiltonian import (NOMINAL_DELTA, NOMINAL_OMEGA0, NOMINAL_TAU, CouplingProfile,
                           DetuningSpec, DriveSpec, PairHamiltonian)
from ..integrator import EvolutionWindow, pair_propagator
from ..statespace import AtomLevel, BasisLabel, CavitySpec, StateVector, SystemLayout, apply_local

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Device:
    """Operating point shared by every cavity crossing of a protocol."""

    omega0: float = NOMINAL_OMEGA0
    delta: float = NOMINAL_DELTA
    tau: float = NOMINAL_TAU
    fock_cutoff: int = 4
    omega_cavity: float = TWO_PI * 51e9
    tau_s_atom_to_cavity: float = 19e-6
    tau_s_cavity_to_atom: float = 14e-6
    tau_s_ladder: float = 14e-6
    window_half_width: float = 4.0
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    selectivity_factor: float = 3.9
    stark_decouple: float = 100.0
    rwa: bool = True

    def __post_init__(self):
        for name in ("omega0", "tau", "omega_cavity", "tau_s_atom_to_cavity",
                     "tau_s_cavity_to_atom", "tau_s_ladder", "window_half_width", "rel_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.fock_cutoff < 2:
            raise ConfigError("fock_cutoff must be >= 2")

    def coupling(self, omega0: float | None = None, tau: float | None = None) -> CouplingProfile:
        return CouplingProfile(self.omega0 if omega0 is None else omega0,
                               self.tau if tau is None else tau)

    def window(self, tau: float | None = None) -> EvolutionWindow:
        half = self.window_half_width * (self.tau if tau is None else tau)
        return EvolutionWindow(-half, half, rel_tol=self.rel_tol, abs_tol=self.abs_tol)

    def with_(self, **changes) -> "Device":
        return replace(self, **changes)


class EventKind(str, enum.Enum):
    DRESSED_PI = "DressedPi"
    DRESSED_HALF_PI = "DressedHalfPi"
    RESONANT_RABI = "ResonantRabi"
    STARK_GATE = "StarkGate"
    IDLE = "Idle"


@dataclass(frozen=True)
class PulseEvent:
    """One atom crossing one cavity, optionally with classical drives."""

    kind: EventKind
    atom: str
    cavity: str
    coupling: CouplingProfile
    detuning: DetuningSpec
    window: EvolutionWindow
    drives: tuple[DriveSpec, ...] = ()
    intent: str = ""

    def hamiltonian(self, layout: SystemLayout) -> PairHamiltonian:
        return PairHamiltonian(layout, self.atom, self.cavity, self.coupling, self.detuning,
                               self.drives)

    def pair_unitary(self, layout: SystemLayout) -> np.ndarray:
        return pair_propagator(self.hamiltonian(layout), self.window)

    def apply(self, psi: np.ndarray, layout: SystemLayout) -> np.ndarray:
        return apply_local(psi, layout, self.pair_unitary(layout), [self.cavity, self.atom])

    def to_dict(self) -> dict:
        out = {
            "type": "transit", "kind": self.kind.value, "atom": self.atom, "cavity": self.cavity,
            "intent": self.intent,
            "coupling": {"omega0_rad_per_s": self.coupling.omega0, "tau_s": self.coupling.tau,
                         "t_center_s": self.coupling.t_center},
            "detuning": {"delta_rad_per_s": self.detuning.delta,
                         "stark_offset_rad_per_s": self.detuning.stark_offset,
                         "stark_window_s": list(self.detuning.stark_window)
                         if self.detuning.stark_window else None},
            "window": {"t_start_s": self.window.t_start, "t_end_s": self.window.t_end,
                       "rel_tol": self.window.rel_tol, "abs_tol": self.window.abs_tol},
            "drives": [{"xi0_rad_per_s": d.xi0, "omega_s_rad_per_s": d.omega_s,
                        "phi_s_rad": d.phi_s, "tau_s_s": d.tau_s, "t_center_s": d.t_center,
                        "rwa": d.rwa} for d in self.drives],
        }
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "PulseEvent":
        c, dt, w = d["coupling"], d["detuning"], d["window"]
        sw = dt.get("stark_window_s")
        return cls(EventKind(d["kind"]), d["atom"], d["cavity"],
                   CouplingProfile(c["omega0_rad_per_s"], c["tau_s"], c["t_center_s"]),
                   DetuningSpec(dt["delta_rad_per_s"], dt["stark_offset_rad_per_s"],
                                tuple(sw) if sw else None),
                   EvolutionWindow(w["t_start_s"], w["t_end_s"], rel_tol=w["rel_tol"],
                                   abs_tol=w["abs_tol"]),
                   tuple(DriveSpec(x["xi0_rad_per_s"], x["omega_s_rad_per_s"], x["phi_s_rad"],
                                   x["tau_s_s"], x["t_center_s"], x["rwa"])
                         for x in d["drives"]),
                   d.get("intent", ""))


def _matrix_to_json(m: np.ndarray):
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def _matrix_from_json(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows])


@dataclass(frozen=True, eq=False)
class AtomPulse:
    """Ideal classical microwave pulse on a free atom between cavities.

    ``matrix`` acts on the atomic levels ``(I, G, E)``.
    """

    atom: str
    name: str
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (3, 3) or not np.allclose(m.conj().T @ m, np.eye(3), atol=1e-12):
            raise ValueError("atom pulse must be a 3x3 unitary")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def apply(self, psi: np.ndarray, layout: SystemLayout) -> np.ndarray:
        return apply_local(psi, layout, self.matrix, [self.atom])

    def to_dict(self) -> dict:
        return {"type": "atom_pulse", "atom": self.atom, "name": self.name,
                "matrix": _matrix_to_json(self.matrix)}


def _two_level(a: int, b: int, block: np.ndarray) -> np.ndarray:
    m = np.eye(3, dtype=complex)
    m[np.ix_([a, b], [a, b])] = block
    return m


_G, _E, _I = int(AtomLevel.G), int(AtomLevel.E), int(AtomLevel.I)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_HAD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def flip_ge(atom: str) -> AtomPulse:
    return AtomPulse(atom, "pi(g,e)", _two_level(_G, _E, _X))


def flip_ig(atom: str) -> AtomPulse:
    return AtomPulse(atom, "pi(i,g)", _two_level(_I, _G, _X))


def hadamard_ig(atom: str) -> AtomPulse:
    """Maps ``i -> (i+g)/sqrt2`` and ``g -> (i-g)/sqrt2``."""
    return AtomPulse(atom, "pi/2(i,g)", _two_level(_I, _G, _HAD))


def hadamard_ge(atom: str) -> AtomPulse:
    """Maps ``g -> (g+e)/sqrt2`` and ``e -> (g-e)/sqrt2``."""
    return AtomPulse(atom, "pi/2(g,e)", _two_level(_G, _E, _HAD))


def atom_phase(atom: str, phases: Sequence[float]) -> AtomPulse:
    return AtomPulse(atom, "phase", np.diag(np.exp(1j * np.asarray(phases, dtype=float))))


@dataclass(frozen=True)
class PhaseCorrection:
    """Diagonal phase ``exp(i phases[k])`` on level ``k`` of one subsystem (Stark adjustment)."""

    subsystem: str
    phases: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(float(p) for p in self.phases))

    def apply(self, psi: np.ndarray, layout: SystemLayout) -> np.ndarray:
        dim = layout.shape[layout.axis(self.subsystem)]
        ph = np.zeros(dim)
        ph[:len(self.phases)] = self.phases
        return apply_local(psi, layout, np.diag(np.exp(1j * ph)), [self.subsystem])

    def to_dict(self) -> dict:
        return {"type": "phase_correction", "subsystem": self.subsystem,
                "phases_rad": list(self.phases)}


Step = Union[PulseEvent, AtomPulse]


@dataclass(frozen=True)
class Itinerary:
    """Ordered steps of one atom; it enters in ``entry_level`` and flies ``direction``."""

    atom: str
    direction: str
    entry_level: AtomLevel
    steps: tuple[Step, ...]

    def __post_init__(self):
        if self.direction not in ("forward", "backward"):
            raise ValueError("direction must be 'forward' or 'backward'")
        object.__setattr__(self, "entry_level", AtomLevel.parse(self.entry_level))
        object.__setattr__(self, "steps", tuple(self.steps))
        for s in self.steps:
            if s.atom != self.atom:
                raise LayoutMismatch(f"step for atom {s.atom!r} inside itinerary of {self.atom!r}")

    @property
    def visits(self) -> list[str]:
        return [s.cavity for s in self.steps if isinstance(s, PulseEvent)]

    def check_order(self, chain: Sequence[str]) -> None:
        """Visits must follow the cavity chain (reversed for backward atoms)."""
        order = list(chain) if self.direction == "forward" else list(chain)[::-1]
        pos = [order.index(c) for c in self.visits]
        if pos != sorted(pos) or len(set(pos)) != len(pos):
            raise LayoutMismatch(
                f"atom {self.atom} visits {self.visits} out of {self.direction} order {order}")

    def to_dict(self) -> dict:
        return {"type": "itinerary", "atom": self.atom, "direction": self.direction,
                "entry_level": self.entry_level.name.lower(),
                "steps": [s.to_dict() for s in self.steps]}


@dataclass(frozen=True)
class Schedule:
    """A protocol: itineraries and phase corrections executed strictly in order.

    Atoms fly one at a time (sequential-interaction model), so the order of
    ``stages`` is the time order.
    """

    layout: SystemLayout
    stages: tuple[Union[Itinerary, PhaseCorrection], ...] = ()
    chain: tuple[str, ...] = ()
    name: str = ""
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        chain = self.chain or tuple(self.layout.cavity_labels)
        object.__setattr__(self, "chain", tuple(chain))
        seen = set()
        for st in self.stages:
            if isinstance(st, Itinerary):
                if st.atom not in self.layout.atoms:
                    raise LayoutMismatch(f"atom {st.atom!r} not in layout")
                if st.atom in seen:
                    raise LayoutMismatch(f"atom {st.atom!r} flies twice; use a fresh atom")
                seen.add(st.atom)
                st.check_order(self.chain)

    @property
    def itineraries(self) -> list[Itinerary]:
        return [s for s in self.stages if isinstance(s, Itinerary)]

    @property
    def phase_corrections(self) -> list[PhaseCorrection]:
        return [s for s in self.stages if isinstance(s, PhaseCorrection)]

    @property
    def atom_count(self) -> int:
        return len(self.itineraries)

    def entry_levels(self) -> dict[str, AtomLevel]:
        levels = {a: AtomLevel.G for a in self.layout.atoms}
        for it in self.itineraries:
            levels[it.atom] = it.entry_level
        return levels

    def then(self, other: "Schedule", name: str | None = None) -> "Schedule":
        if other.layout != self.layout:
            raise LayoutMismatch("cannot concatenate schedules on different layouts")
        return Schedule(self.layout, self.stages + other.stages, self.chain,
                        name if name is not None else f"{self.name}+{other.name}",
                        {**self.meta, **other.meta})

    def with_stages(self, *extra) -> "Schedule":
        return replace(self, stages=self.stages + tuple(extra))

    def pulse_events(self) -> list[PulseEvent]:
        return [s for it in self.itineraries for s in it.steps if isinstance(s, PulseEvent)]

    def to_dict(self) -> dict:
        lay = self.layout
        return {
            "format": "cavityqc-pulse-program/1",
            "name": self.name,
            "layout": {
                "cavities": [{"label": c.label, "fock_cutoff": c.fock_cutoff,
                              "omega_rad_per_s": c.omega} for c in lay.cavities],
                "atoms": list(lay.atoms),
                "memory_cavity": lay.memory_cavity,
            },
            "chain": list(self.chain),
            "meta": self.meta,
            "stages": [s.to_dict() for s in self.stages],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True,
                          default=_json_float) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "Schedule":
        lay_d = d["layout"]
        lay = SystemLayout(tuple(CavitySpec(c["label"], c["fock_cutoff"], c["omega_rad_per_s"])
                                 for c in lay_d["cavities"]),
                           tuple(lay_d["atoms"]), lay_d.get("memory_cavity"))
        stages = []
        for st in d["stages"]:
            if st["type"] == "phase_correction":
                stages.append(PhaseCorrection(st["subsystem"], st["phases_rad"]))
                continue
            steps = []
            for s in st["steps"]:
                if s["type"] == "transit":
                    steps.append(PulseEvent.from_dict(s))
                else:
                    steps.append(AtomPulse(s["atom"], s["name"], _matrix_from_json(s["matrix"])))
            stages.append(Itinerary(st["atom"], st["direction"], st["entry_level"], steps))
        return cls(lay, stages, tuple(d.get("chain", ())), d.get("name", ""),
                   dict(d.get("meta", {})))

    @classmethod
    def from_json(cls, text: str) -> "Schedule":
        return cls.from_dict(json.loads(text))


def _json_float(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"not serializable: {type(x)}")


# ----------------------------------------------------------------------------- execution

@dataclass
class Checkpoint:
    label: str
    states: np.ndarray  # (dimension, batch)


def _batch(layout: SystemLayout, psi) -> np.ndarray:
    arr = psi.amplitudes if isinstance(psi, StateVector) else np.asarray(psi, dtype=complex)
    if arr.shape[0] != layout.dimension:
        raise LayoutMismatch("state dimension does not match the schedule layout")
    return arr.reshape(layout.dimension, -1)


def ideal_pair_unitary(event: PulseEvent, cutoff: int) -> np.ndarray:
    """Textbook action of a crossing: the transition it targets, nothing else."""
    d = 3 * cutoff
    u = np.eye(d, dtype=complex)
    idx = lambda n, lv: 3 * n + int(AtomLevel.parse(lv))

    def swap(a, b, phase=1.0):
        u[[a, b], [a, b]] = 0.0
        u[b, a] = u[a, b] = phase

    intent = event.intent
    if event.kind in (EventKind.IDLE, EventKind.STARK_GATE):
        return u
    if intent == "resonant-pi":
        swap(idx(0, "e"), idx(1, "g"), -1j)
    elif intent == "resonant-2pi":
        u[idx(1, "g"), idx(1, "g")] = u[idx(0, "e"), idx(0, "e")] = -1.0
    elif event.kind is EventKind.DRESSED_HALF_PI and intent == "g,0<->V-(0)":
        a, b = idx(0, "g"), idx(1, "g")
        u[np.ix_([a, b], [a, b])] = _HAD
    elif intent == "g,0<->V-(0)":
        swap(idx(0, "g"), idx(1, "g"))
    elif intent == "V-(0)<->V+(1)":
        swap(idx(1, "g"), idx(1, "e"))
    elif intent == "g,0<->V+(0)":
        swap(idx(0, "g"), idx(0, "e"))
    elif intent == "V+(0)<->V-(1)":
        swap(idx(0, "e"), idx(2, "g"))
    else:
        raise ValueError(f"no ideal action known for intent {intent!r}")
    return u


def execute(schedule: Schedule, initial, checkpoints: bool = False, ideal: bool = False
            ) -> tuple[np.ndarray, list[Checkpoint]]:
    """Run ``schedule`` on a batch of composite states (columns).

    Returns the final batch with shape ``(dimension, batch)`` and, on request,
    a checkpoint after every step. ``ideal=True`` replaces every crossing by
    its textbook action (the matrix-algebra oracle).
    """
    lay = schedule.layout
    psi = _batch(lay, initial)
    m = psi.shape[1]
    tensor = psi.reshape(lay.shape + (m,))
    marks: list[Checkpoint] = []

    def mark(label):
        if checkpoints:
            marks.append(Checkpoint(label, tensor.reshape(lay.dimension, m).copy()))

    for st in schedule.stages:
        if isinstance(st, PhaseCorrection):
            tensor = st.apply(tensor, lay)
            mark(f"phase:{st.subsystem}")
            continue
        for k, step in enumerate(st.steps):
            if ideal and isinstance(step, PulseEvent):
                u = ideal_pair_unitary(step, lay.cavity(step.cavity).fock_cutoff)
                tensor = apply_local(tensor, lay, u, [step.cavity, step.atom])
            else:
                tensor = step.apply(tensor, lay)
            where = step.cavity if isinstance(step, PulseEvent) else step.name
            mark(f"{st.atom}:{k}:{where}")
    return tensor.reshape(lay.dimension, m), marks


def product_inputs(schedule: Schedule, cavity_occupations: Iterable[Sequence[int]]) -> np.ndarray:
    """Columns ``|occupations> (x) |entry levels>`` for each occupation tuple."""
    lay = schedule.layout
    levels = schedule.entry_levels()
    atom_lv = tuple(levels[a] for a in lay.atoms)
    cols = []
    for occ in cavity_occupations:
        v = np.zeros(lay.dimension, dtype=complex)
        v[lay.index(BasisLabel(tuple(occ), atom_lv))] = 1.0
        cols.append(v)
    return np.stack(cols, axis=1)


def logical_occupations(n_qubits: int) -> list[tuple[int, ...]]:
    """Computational basis ``|q1 q2 ...>`` in binary order (first qubit most significant)."""
    return [tuple((k >> (n_qubits - 1 - j)) & 1 for j in range(n_qubits))
            for k in range(2 ** n_qubits)]
