"""Adaptive propagation of states and pair propagators.

Only the active atom-cavity pair is integrated; spectator subsystems ride
along as extra columns of the pair-space ODE, which is exact because the
Hamiltonian is the identity on them.
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np

from . import _fallback
from .errors import NumericalFailure
from .hamiltonian import PairHamiltonian
from .statespace import BasisLabel, StateVector, SystemLayout

try:
    from . import _kernels
except ImportError:  # extension not built
    _kernels = None

_BACKENDS = {"python": _fallback}
if _kernels is not None:
    _BACKENDS["compiled"] = _kernels

_backend_name = "python" if (_kernels is None or os.environ.get("CAVITYQC_PURE_PYTHON")) \
    else "compiled"


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def get_backend() -> str:
    return _backend_name


def set_backend(name: str) -> None:
    global _backend_name
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {available_backends()}")
    _backend_name = name
    _cached_pair_propagator.cache_clear()


@dataclass(frozen=True)
class TraceRequest:
    """Observables sampled on a uniform grid.

    Each projector maps a time to a composite-space vector ``v(t)``; the
    recorded population is ``|<v(t)|psi(t)>|^2``.
    """

    projectors: Mapping[str, Callable[[float], np.ndarray]] = field(default_factory=dict)
    n_points: int = 2000

    def __hash__(self):
        return id(self)


@dataclass(frozen=True)
class EvolutionWindow:
    t_start: float
    t_end: float
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float | None = None
    norm_tol: float = 1e-8
    max_steps: int = 5_000_000
    record: TraceRequest | None = field(default=None, compare=False, hash=False)

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError("EvolutionWindow needs t_end > t_start")

    @classmethod
    def centered(cls, half_width: float, **kw) -> "EvolutionWindow":
        return cls(-half_width, half_width, **kw)

    def resolved_max_step(self, h: PairHamiltonian) -> float:
        scales = [h.coupling.tau] + [d.tau_s for d in h.drives]
        clamp = min(scales) / 50.0
        return clamp if self.max_step is None else min(self.max_step, clamp)


@dataclass
class TraceLog:
    times: np.ndarray
    populations: dict[str, np.ndarray]
    norm_drift: np.ndarray

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        labels = list(self.populations)
        w.writerow(["t"] + labels + ["norm"])
        for i, t in enumerate(self.times):
            row = [f"{t:.12g}"] + [f"{self.populations[k][i]:.12g}" for k in labels]
            row.append(f"{1.0 + self.norm_drift[i]:.12g}")
            w.writerow(row)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


@dataclass
class _RunStats:
    nsteps: int = 0
    nrejected: int = 0


def _segments(h: PairHamiltonian, w: EvolutionWindow) -> list[tuple[float, float]]:
    cuts = sorted({w.t_start, w.t_end, *[b for b in h.detuning.breakpoints()
                                         if w.t_start < b < w.t_end]})
    return list(zip(cuts[:-1], cuts[1:]))


def _integrate(h: PairHamiltonian, w: EvolutionWindow, y0: np.ndarray,
               sample_times: np.ndarray | None = None, stats: _RunStats | None = None):
    """Integrate pair-space columns ``y0`` (shape ``(pair_dim, m)``) across the window."""
    backend = _BACKENDS[_backend_name]
    args = h.kernel_args()
    max_step = w.resolved_max_step(h)
    sample_times = np.empty(0) if sample_times is None else np.asarray(sample_times, float)
    y = np.ascontiguousarray(y0, dtype=complex)
    out_samples = []
    for a, b in _segments(h, w):
        mid = 0.5 * (a + b)
        st = sample_times[(sample_times > a) & (sample_times <= b)]
        y, samples, nsteps, nrej, status = backend.propagate(
            y, a, b, h.detuning(mid), args["cutoff"], args["omega0"], args["tau"], args["tc"],
            args["xi0"], args["det"], args["ws"], args["phi"], args["taus"], args["tcs"],
            args["rwa"], args["omega_cav"], w.rel_tol, w.abs_tol, max_step, max_step / 10,
            st, w.max_steps)
        if stats is not None:
            stats.nsteps += nsteps
            stats.nrejected += nrej
        if status == 1:
            raise NumericalFailure("step budget exhausted", t=a, max_steps=w.max_steps)
        if status == 2:
            raise NumericalFailure("step size underflow (stiff dynamics?)", t=a)
        out_samples.append(samples)
    samples = np.concatenate(out_samples) if out_samples else np.empty((0,) + y.shape)
    return y, samples


def _to_pair_columns(psi: np.ndarray, layout: SystemLayout, h: PairHamiltonian):
    axes = [layout.axis(h.cavity), layout.axis(h.atom)]
    moved = np.moveaxis(psi.reshape(layout.shape), axes, [0, 1])
    return moved.reshape(h.pair_dim, -1), moved.shape, axes


def _from_pair_columns(cols: np.ndarray, moved_shape, axes) -> np.ndarray:
    return np.moveaxis(cols.reshape(moved_shape), [0, 1], axes).reshape(-1)


def evolve(state: StateVector, h: PairHamiltonian, w: EvolutionWindow
           ) -> tuple[StateVector, TraceLog | None]:
    """Propagate ``state`` through the window under ``h``.

    A norm drift beyond ``w.norm_tol`` raises :class:`NumericalFailure`;
    smaller drift is projected out of the returned state.
    """
    if state.layout != h.layout:
        from .errors import LayoutMismatch
        raise LayoutMismatch("state and Hamiltonian layouts differ")
    layout = state.layout
    cols, moved_shape, axes = _to_pair_columns(state.amplitudes, layout, h)
    times = None
    if w.record is not None:
        times = np.linspace(w.t_start, w.t_end, w.record.n_points)
    y, samples = _integrate(h, w, cols, None if times is None else times[1:])
    final = _from_pair_columns(y, moved_shape, axes)
    drift = abs(np.linalg.norm(final) - 1.0)
    if drift > w.norm_tol:
        raise NumericalFailure("norm drift exceeds tolerance", drift=drift, tol=w.norm_tol)
    trace = None
    if w.record is not None:
        states = [state.amplitudes] + [_from_pair_columns(s, moved_shape, axes) for s in samples]
        pops = {}
        for label, proj in w.record.projectors.items():
            pops[label] = np.array([abs(np.vdot(proj(t), psi)) ** 2
                                    for t, psi in zip(times, states)])
        norms = np.array([np.linalg.norm(psi) - 1.0 for psi in states])
        if np.max(np.abs(norms)) > w.norm_tol:
            raise NumericalFailure("norm drift exceeds tolerance during trace",
                                   drift=float(np.max(np.abs(norms))), tol=w.norm_tol)
        trace = TraceLog(times, pops, norms)
    # drift is below tolerance; strip it so StateVector's construction check is exact
    return StateVector(layout, final / np.linalg.norm(final) if drift > 1e-12 else final), trace


def _pair_key(h: PairHamiltonian):
    return (h.cutoff, h.omega_cavity, h.coupling, h.detuning, h.drives)


@lru_cache(maxsize=512)
def _cached_pair_propagator(key, w: EvolutionWindow) -> np.ndarray:
    cutoff, omega_cav, coupling, detuning, drives = key
    from .statespace import CavitySpec
    lay = SystemLayout((CavitySpec("c", cutoff, omega_cav),), ("a",))
    h = PairHamiltonian(lay, "a", "c", coupling, detuning, drives)
    u, _ = _integrate(h, w, np.eye(h.pair_dim, dtype=complex))
    u.setflags(write=False)
    return u


def unitarity_defect(u: np.ndarray) -> float:
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1]))))


def pair_propagator(h: PairHamiltonian, w: EvolutionWindow, check: float = 1e-6) -> np.ndarray:
    """Unitary on the pair space (basis ``3*n + level``) for the window. Cached."""
    u = _cached_pair_propagator(_pair_key(h), w)
    defect = unitarity_defect(u)
    if defect > check:
        raise NumericalFailure("pair propagator not unitary", defect=defect, tol=check)
    return u


def propagator(h: PairHamiltonian, w: EvolutionWindow,
               subspace: Sequence[BasisLabel] | None = None) -> np.ndarray:
    """Matrix ``<b_i| U |b_k>`` over ``subspace`` (whole composite space if omitted)."""
    layout = h.layout
    u = pair_propagator(h, w)
    idx = list(range(layout.dimension)) if subspace is None \
        else [layout.index(b) for b in subspace]
    cols = np.zeros((layout.dimension, len(idx)), dtype=complex)
    cols[idx, range(len(idx))] = 1.0
    out = np.empty_like(cols)
    for k in range(len(idx)):
        c, moved_shape, axes = _to_pair_columns(cols[:, k], layout, h)
        out[:, k] = _from_pair_columns(u @ c, moved_shape, axes)
    return out[idx, :]


def apply_pair_unitary(psi: np.ndarray, layout: SystemLayout, h: PairHamiltonian,
                       u: np.ndarray) -> np.ndarray:
    """Apply a pair-space unitary to a composite amplitude vector."""
    c, moved_shape, axes = _to_pair_columns(psi, layout, h)
    return _from_pair_columns(u @ c, moved_shape, axes)
