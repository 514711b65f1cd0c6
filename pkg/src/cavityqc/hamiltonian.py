"""Time-dependent atom-cavity Hamiltonians in the rotating frame of the cavity.

All frequencies are angular (rad/s) and hbar = 1. The frame removes
``omega * (b^dag b + |e><e|)`` so the pair block reads

    (delta/2)(|e><e| - |g><g|) + Omega(t) (|e><g| b + |g><e| b^dag) + drives

with level ``I`` at zero energy and decoupled from the cavity.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import LayoutMismatch
from .statespace import AtomLevel, SystemLayout, apply_local

# Ω₀ = 420 kHz read as an angular frequency (see README, "Units").
NOMINAL_OMEGA0 = 4.2e5
NOMINAL_DELTA = 0.18 * NOMINAL_OMEGA0
NOMINAL_TAU = 100e-6

_G, _E = int(AtomLevel.G), int(AtomLevel.E)


@dataclass(frozen=True)
class CouplingProfile:
    """Gaussian transit envelope ``omega0 * exp(-((t - t_center)/tau)^2)``."""

    omega0: float = NOMINAL_OMEGA0
    tau: float = NOMINAL_TAU
    t_center: float = 0.0

    def __post_init__(self):
        if not self.omega0 >= 0 or not self.tau > 0:
            raise ValueError("coupling needs omega0 >= 0 and tau > 0")

    def __call__(self, t):
        return self.omega0 * np.exp(-(((np.asarray(t) - self.t_center) / self.tau) ** 2))

    def derivative(self, t):
        x = (np.asarray(t) - self.t_center) / self.tau
        return -2.0 * x / self.tau * self(t)

    @property
    def area(self) -> float:
        """Integral of Omega(t) over the whole transit."""
        return float(self.omega0 * np.sqrt(np.pi) * self.tau)


@dataclass(frozen=True)
class DetuningSpec:
    """Atom-cavity detuning ``delta = omega_eg - omega`` plus a gated Stark offset.

    The Stark offset is active on ``stark_window`` (local time, inclusive);
    ``None`` means always on.
    """

    delta: float = NOMINAL_DELTA
    stark_offset: float = 0.0
    stark_window: tuple[float, float] | None = None

    def __call__(self, t: float) -> float:
        if self.stark_offset and self._stark_on(t):
            return self.delta + self.stark_offset
        return self.delta

    def _stark_on(self, t):
        if self.stark_window is None:
            return True
        a, b = self.stark_window
        return a <= t <= b

    def breakpoints(self) -> list[float]:
        if not self.stark_offset or self.stark_window is None:
            return []
        return list(self.stark_window)


@dataclass(frozen=True)
class DriveSpec:
    """Classical field ``-xi0 cos(omega_s t + phi_s) exp(-((t-t_c)/tau_s)^2) sigma_x``.

    ``omega_s`` is the lab-frame angular frequency. With ``rwa=True`` only the
    co-rotating half is kept.
    """

    xi0: float
    omega_s: float
    phi_s: float = 0.0
    tau_s: float = 19e-6
    t_center: float = 0.0
    rwa: bool = True

    def __post_init__(self):
        if not self.xi0 >= 0 or not self.tau_s > 0:
            raise ValueError("drive needs xi0 >= 0 and tau_s > 0")

    def envelope(self, t):
        return self.xi0 * np.exp(-(((np.asarray(t) - self.t_center) / self.tau_s) ** 2))


def drive_term(d: DriveSpec, t: float, omega_cavity: float) -> np.ndarray:
    """Rotating-frame drive operator on the atomic levels ``(I, G, E)``."""
    h = np.zeros((3, 3), dtype=complex)
    env = float(d.envelope(t))
    if env == 0.0:
        return h
    if d.rwa:
        c = -0.5 * env * np.exp(-1j * ((d.omega_s - omega_cavity) * t + d.phi_s))
    else:
        c = -env * np.cos(d.omega_s * t + d.phi_s) * np.exp(1j * omega_cavity * t)
    h[_E, _G] = c
    h[_G, _E] = np.conj(c)
    return h


@dataclass(frozen=True)
class PairHamiltonian:
    """Hamiltonian of one atom interacting with one cavity, embedded in a layout."""

    layout: SystemLayout
    atom: str
    cavity: str
    coupling: CouplingProfile = field(default_factory=CouplingProfile)
    detuning: DetuningSpec = field(default_factory=DetuningSpec)
    drives: tuple[DriveSpec, ...] = ()

    def __post_init__(self):
        if self.atom not in self.layout.atoms:
            raise LayoutMismatch(f"atom {self.atom!r} not in layout")
        if self.cavity not in self.layout.cavity_labels:
            raise LayoutMismatch(f"cavity {self.cavity!r} not in layout")
        object.__setattr__(self, "drives", tuple(self.drives))

    @property
    def cutoff(self) -> int:
        return self.layout.cavity(self.cavity).fock_cutoff

    @property
    def omega_cavity(self) -> float:
        return self.layout.cavity(self.cavity).omega

    @property
    def pair_dim(self) -> int:
        return 3 * self.cutoff

    def with_drives(self, drives: Sequence[DriveSpec]) -> "PairHamiltonian":
        return replace(self, drives=tuple(drives))

    def pair_block(self, t: float) -> np.ndarray:
        """Matrix on the pair space, basis index ``3*n + level``."""
        return pair_matrix(self.cutoff, float(self.coupling(t)), self.detuning(t),
                           self._drive_op(t))

    def _drive_op(self, t):
        op = np.zeros((3, 3), dtype=complex)
        for d in self.drives:
            op += drive_term(d, t, self.omega_cavity)
        return op

    def evaluate(self, t: float) -> np.ndarray:
        """Full composite-space matrix (identity on spectators)."""
        lay = self.layout
        eye = np.eye(lay.dimension, dtype=complex).reshape(lay.shape + (lay.dimension,))
        out = apply_local(eye, lay, self.pair_block(t), [self.cavity, self.atom])
        return out.reshape(lay.dimension, lay.dimension)

    def kernel_args(self):
        """Flat parameter set consumed by the propagation kernels."""
        n = len(self.drives)
        xi0 = np.array([d.xi0 for d in self.drives], dtype=float).reshape(n)
        det = np.array([d.omega_s - self.omega_cavity for d in self.drives], dtype=float).reshape(n)
        ws = np.array([d.omega_s for d in self.drives], dtype=float).reshape(n)
        phi = np.array([d.phi_s for d in self.drives], dtype=float).reshape(n)
        taus = np.array([d.tau_s for d in self.drives], dtype=float).reshape(n)
        tcs = np.array([d.t_center for d in self.drives], dtype=float).reshape(n)
        rwa = np.array([1 if d.rwa else 0 for d in self.drives], dtype=np.int64).reshape(n)
        return dict(cutoff=self.cutoff, omega0=self.coupling.omega0, tau=self.coupling.tau,
                    tc=self.coupling.t_center, xi0=xi0, det=det, ws=ws, phi=phi,
                    taus=taus, tcs=tcs, rwa=rwa, omega_cav=self.omega_cavity)


def pair_matrix(cutoff: int, omega_t: float, delta: float, drive_op: np.ndarray) -> np.ndarray:
    """Assemble the pair block for given instantaneous coupling, detuning and drive."""
    d = 3 * cutoff
    h = np.zeros((d, d), dtype=complex)
    for n in range(cutoff):
        g, e = 3 * n + _G, 3 * n + _E
        h[g, g] = -0.5 * delta
        h[e, e] = 0.5 * delta
        h[e, g] += drive_op[_E, _G]
        h[g, e] += drive_op[_G, _E]
        if n + 1 < cutoff:
            # |e,n><g,n+1| b : amplitude sqrt(n+1)
            g1 = 3 * (n + 1) + _G
            h[e, g1] = h[g1, e] = omega_t * np.sqrt(n + 1)
    return h


def pair_index(n: int, level) -> int:
    return 3 * int(n) + int(AtomLevel.parse(level))
