"""Composite Hilbert space of truncated cavity modes and three-level atoms.

Basis ordering is lexicographic with cavities first (layout order), atoms
last, and atomic levels ordered ``I, G, E``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import LayoutMismatch, OutOfTruncation

NORM_TOL = 1e-9


class AtomLevel(enum.IntEnum):
    """Atomic levels. ``I`` is the lower circular level that never couples to a cavity."""

    I = 0
    G = 1
    E = 2

    @classmethod
    def parse(cls, value) -> "AtomLevel":
        if isinstance(value, AtomLevel):
            return value
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError:
                raise ValueError(f"unknown atomic level {value!r}; use i, g or e") from None
        return cls(int(value))


@dataclass(frozen=True)
class CavitySpec:
    label: str
    fock_cutoff: int = 4
    omega: float = 2 * np.pi * 51e9  # rad/s, only enters lab-frame frequencies

    def __post_init__(self):
        if self.fock_cutoff < 2:
            raise ValueError(f"cavity {self.label!r}: fock_cutoff must be >= 2")
        if not self.omega > 0:
            raise ValueError(f"cavity {self.label!r}: angular frequency must be positive")


@dataclass(frozen=True)
class SystemLayout:
    cavities: tuple[CavitySpec, ...]
    atoms: tuple[str, ...] = ()
    memory_cavity: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "cavities", tuple(self.cavities))
        object.__setattr__(self, "atoms", tuple(self.atoms))
        labels = [c.label for c in self.cavities] + list(self.atoms)
        if len(set(labels)) != len(labels):
            raise ValueError(f"labels must be unique, got {labels}")
        if self.memory_cavity is not None and self.memory_cavity not in self.cavity_labels:
            raise ValueError(f"memory cavity {self.memory_cavity!r} not in layout")

    @classmethod
    def build(cls, cavities: Sequence[str] | Mapping[str, int], atoms: Sequence[str] = (),
              cutoff: int = 4, memory_cavity: str | None = None, omega: float | None = None):
        """Convenience constructor from bare labels (or a label -> cutoff mapping)."""
        kw = {} if omega is None else {"omega": omega}
        if isinstance(cavities, Mapping):
            specs = [CavitySpec(k, v, **kw) for k, v in cavities.items()]
        else:
            specs = [CavitySpec(k, cutoff, **kw) for k in cavities]
        return cls(tuple(specs), tuple(atoms), memory_cavity)

    @property
    def cavity_labels(self) -> tuple[str, ...]:
        return tuple(c.label for c in self.cavities)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(c.fock_cutoff for c in self.cavities) + (3,) * len(self.atoms)

    @property
    def dimension(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    @property
    def labels(self) -> tuple[str, ...]:
        return self.cavity_labels + self.atoms

    def axis(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutMismatch(f"subsystem {label!r} not in layout {self.labels}") from None

    def cavity(self, label: str) -> CavitySpec:
        if label not in self.cavity_labels:
            raise LayoutMismatch(f"cavity {label!r} not in layout")
        return self.cavities[self.cavity_labels.index(label)]

    def index(self, label: "BasisLabel") -> int:
        occ = tuple(label.fock_occupations)
        lev = tuple(int(AtomLevel.parse(a)) for a in label.atom_levels)
        if len(occ) != len(self.cavities) or len(lev) != len(self.atoms):
            raise LayoutMismatch(f"basis label {label} does not match layout {self.labels}")
        for n, c in zip(occ, self.cavities):
            if not 0 <= n < c.fock_cutoff:
                raise OutOfTruncation(
                    f"occupation {n} of cavity {c.label!r} outside cutoff {c.fock_cutoff}")
        return int(np.ravel_multi_index(occ + lev, self.shape))

    def label_of(self, index: int) -> "BasisLabel":
        multi = np.unravel_index(int(index), self.shape)
        nc = len(self.cavities)
        return BasisLabel(tuple(int(x) for x in multi[:nc]),
                          tuple(AtomLevel(int(x)) for x in multi[nc:]))


@dataclass(frozen=True)
class BasisLabel:
    fock_occupations: tuple[int, ...]
    atom_levels: tuple[AtomLevel, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "fock_occupations", tuple(int(n) for n in self.fock_occupations))
        object.__setattr__(self, "atom_levels",
                           tuple(AtomLevel.parse(a) for a in self.atom_levels))

    def __str__(self):
        occ = ",".join(str(n) for n in self.fock_occupations)
        lev = ",".join(a.name.lower() for a in self.atom_levels)
        return f"|{occ};{lev}>" if lev else f"|{occ}>"


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state on a layout. The amplitude array is read-only."""

    layout: SystemLayout
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amp.size != self.layout.dimension:
            raise LayoutMismatch(
                f"amplitude length {amp.size} != layout dimension {self.layout.dimension}")
        norm = np.linalg.norm(amp)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state not normalized (norm={norm:.12g})")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def from_array(cls, layout: SystemLayout, amplitudes, normalize: bool = False):
        amp = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if normalize:
            amp = amp / np.linalg.norm(amp)
        return cls(layout, amp)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout.shape)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def __add__(self, other):
        raise TypeError("use superpose() to build superpositions of StateVectors")


def basis_state(layout: SystemLayout, label: BasisLabel) -> StateVector:
    amp = np.zeros(layout.dimension, dtype=complex)
    amp[layout.index(label)] = 1.0
    return StateVector(layout, amp)


def superpose(terms: Sequence[tuple[complex, StateVector]], normalize: bool = True) -> StateVector:
    layout = terms[0][1].layout
    amp = np.zeros(layout.dimension, dtype=complex)
    for c, s in terms:
        _check_same(layout, s.layout)
        amp += c * s.amplitudes
    return StateVector.from_array(layout, amp, normalize=normalize)


def _check_same(a: SystemLayout, b: SystemLayout):
    if a != b:
        raise LayoutMismatch("states live on different layouts")


def overlap(a: StateVector, b: StateVector) -> complex:
    """Return <a|b>."""
    _check_same(a.layout, b.layout)
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def reduced_populations(s: StateVector, subsystem: str) -> np.ndarray:
    """Marginal occupation probabilities of one cavity (Fock levels) or atom (I, G, E)."""
    ax = s.layout.axis(subsystem)
    p = np.abs(s.tensor()) ** 2
    other = tuple(i for i in range(p.ndim) if i != ax)
    return p.sum(axis=other)


def reduced_density_matrix(s: StateVector, subsystem: str) -> np.ndarray:
    ax = s.layout.axis(subsystem)
    psi = np.moveaxis(s.tensor(), ax, 0).reshape(s.layout.shape[ax], -1)
    return psi @ psi.conj().T


def subsystem_purity(s: StateVector, subsystem: str) -> float:
    """Tr(rho^2) of the reduced state; 1 iff the subsystem factorizes."""
    rho = reduced_density_matrix(s, subsystem)
    return float(np.real(np.trace(rho @ rho)))


def apply_local(psi: np.ndarray, layout: SystemLayout, op: np.ndarray,
                labels: Sequence[str]) -> np.ndarray:
    """Apply ``op`` acting on the ordered subsystems ``labels`` to a state tensor.

    ``psi`` has shape ``layout.shape`` (optionally with extra trailing batch
    axes); ``op`` is a square matrix on the product of the listed subsystems in
    the given order.
    """
    axes = [layout.axis(lb) for lb in labels]
    dims = [layout.shape[a] for a in axes]
    d = int(np.prod(dims))
    if op.shape != (d, d):
        raise LayoutMismatch(f"operator shape {op.shape} does not match subsystems {labels}")
    nsys = len(layout.shape)
    moved = np.moveaxis(psi, axes, list(range(len(axes))))
    rest = moved.shape[len(axes):]
    out = (op @ moved.reshape(d, -1)).reshape(tuple(dims) + rest)
    out = np.moveaxis(out, list(range(len(axes))), axes)
    assert out.ndim >= nsys
    return out
