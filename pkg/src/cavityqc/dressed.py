"""Closed-form dressed states of the detuned atom-cavity pair.

Energies are reported in the rotating frame of :mod:`cavityqc.hamiltonian`;
add ``omega * excitations`` to get lab values. A sector ``n`` couples
``|e,n>`` and ``|g,n+1>`` and carries ``n + 1`` excitations.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import OutOfTruncation, SelectivityError
from .hamiltonian import CouplingProfile, DriveSpec, pair_index
from .statespace import AtomLevel

DEFAULT_ADIABATIC_THRESHOLD = 0.05
# Target/parasitic separation in units of 1/tau_s. Slightly below 4 so the
# atom-to-cavity C-NOT at tau_s = 19 us (separation 3.998/tau_s) is admitted.
DEFAULT_SELECTIVITY_FACTOR = 3.9


@dataclass(frozen=True)
class DressedLevel:
    """Instantaneous eigenstate of one excitation sector, or an uncoupled bare state.

    ``components`` maps ``(photon_number, AtomLevel)`` to amplitudes.
    """

    n: int
    branch: str
    t: float
    components: tuple[tuple[tuple[int, AtomLevel], float], ...]
    energy: float
    excitations: int

    @property
    def name(self) -> str:
        if self.branch == "bare":
            (n, lev), _ = self.components[0]
            return f"{lev.name.lower()},{n}"
        return f"V{self.branch}({self.n})"

    def lab_energy(self, omega_cavity: float) -> float:
        return self.energy + omega_cavity * self.excitations

    def pair_vector(self, cutoff: int) -> np.ndarray:
        """Amplitudes in the pair basis ``3*n + level``."""
        v = np.zeros(3 * cutoff, dtype=complex)
        for (n, lev), amp in self.components:
            if n >= cutoff:
                raise OutOfTruncation(f"{self.name} needs photon number {n} >= cutoff {cutoff}")
            v[pair_index(n, lev)] = amp
        return v

    def amplitude(self, n: int, level) -> float:
        return dict(self.components).get((n, AtomLevel.parse(level)), 0.0)


def _mixing(omega_t: float, delta: float, n: int):
    """Return (R, cos, sin) with R = sqrt((delta/2)^2 + omega_t^2 (n+1))."""
    coupling = omega_t * np.sqrt(n + 1)
    r = np.hypot(0.5 * delta, coupling)
    if r == 0.0:
        return 0.0, np.sqrt(0.5), np.sqrt(0.5)
    c = np.sqrt(0.5 * (1.0 + 0.5 * delta / r))
    s = np.sqrt(max(0.0, 0.5 * (1.0 - 0.5 * delta / r)))
    # copysign keeps both branches eigenvectors if the coupling were negative
    return r, c, np.copysign(s, coupling) if coupling else s


def dressed_level(coupling: CouplingProfile, delta: float, n: int, branch: str, t: float = 0.0,
                  cutoff: int | None = None) -> DressedLevel:
    """Dressed state ``V{branch}(n)`` at time ``t``.

    Branch ``+`` has a non-negative ``|e,n>`` coefficient; for ``delta > 0``
    it tends to ``|e,n>`` and branch ``-`` to ``|g,n+1>`` as the coupling vanishes.
    """
    if branch not in ("+", "-"):
        raise ValueError("branch must be '+' or '-'")
    if n < 0:
        raise ValueError("sector index must be >= 0")
    if cutoff is not None and n + 1 >= cutoff:
        raise OutOfTruncation(f"sector {n} needs |g,{n + 1}> but cutoff is {cutoff}")
    r, c, s = _mixing(float(coupling(t)), delta, n)
    e, g = (n, AtomLevel.E), (n + 1, AtomLevel.G)
    if branch == "+":
        comps, energy = ((e, c), (g, s)), r
    else:
        comps, energy = ((e, -s), (g, c)), -r
    return DressedLevel(n, branch, float(t), comps, float(energy), n + 1)


def bare_level(n: int, level, delta: float, t: float = 0.0) -> DressedLevel:
    """Uncoupled basis state; in practice ``|g,0>`` or any ``|i,n>``."""
    lev = AtomLevel.parse(level)
    if lev is AtomLevel.G and n == 0:
        energy, exc = -0.5 * delta, 0
    elif lev is AtomLevel.I:
        energy, exc = 0.0, n
    else:
        raise ValueError(f"|{lev.name.lower()},{n}> is dressed by the cavity; use dressed_level")
    return DressedLevel(n, "bare", float(t), (((n, lev), 1.0),), energy, exc)


def parse_level(text: str, coupling: CouplingProfile, delta: float, t: float = 0.0
                ) -> DressedLevel:
    """Parse ``V+0``, ``V-1``, ``g,0`` style names."""
    s = text.strip().replace("(", "").replace(")", "")
    if s[:1].upper() == "V" and s[1:2] in "+-" and len(s) > 2:
        return dressed_level(coupling, delta, int(s[2:]), s[1], t)
    lev, n = s.split(",")
    return bare_level(int(n), lev, delta, t)


def sector_eigensolve(omega_t: float, delta: float, n: int):
    """Numerical eigenpairs of the 2x2 sector block on ``(|e,n>, |g,n+1>)``; ascending."""
    k = omega_t * np.sqrt(n + 1)
    return np.linalg.eigh(np.array([[0.5 * delta, k], [k, -0.5 * delta]]))


def adiabaticity_measure(coupling: CouplingProfile, delta: float, n: int, t):
    """Ratio of coupling-rate to squared gap for sector ``n`` (vectorized over ``t``)."""
    t = np.asarray(t, dtype=float)
    om = coupling(t)
    num = np.abs(coupling.derivative(t)) * abs(delta) * np.sqrt(n)
    den = 4.0 * ((0.5 * delta) ** 2 + om ** 2 * n) ** 1.5
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(num == 0.0, 0.0, num / den)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class AdiabaticityScan:
    n: int
    max_measure: float
    t_at_max: float
    threshold: float

    @property
    def satisfied(self) -> bool:
        return self.max_measure < self.threshold


def max_adiabaticity(coupling: CouplingProfile, delta: float, n: int,
                     threshold: float = DEFAULT_ADIABATIC_THRESHOLD,
                     half_width: float | None = None, points: int = 4001) -> AdiabaticityScan:
    """Dense scan of the measure over the transit, refined with a bounded search."""
    hw = 6.0 * coupling.tau if half_width is None else half_width
    ts = coupling.t_center + np.linspace(-hw, hw, points)
    vals = adiabaticity_measure(coupling, delta, n, ts)
    k = int(np.argmax(vals))
    t_best, v_best = float(ts[k]), float(vals[k])
    if v_best > 0 and 0 < k < points - 1:
        res = minimize_scalar(lambda x: -adiabaticity_measure(coupling, delta, n, x),
                              bounds=(ts[k - 1], ts[k + 1]), method="bounded",
                              options={"xatol": 1e-12 * coupling.tau})
        if -res.fun > v_best:
            t_best, v_best = float(res.x), float(-res.fun)
    return AdiabaticityScan(n, v_best, t_best, threshold)


def transition_frequency(lower: DressedLevel, upper: DressedLevel, omega_cavity: float) -> float:
    """Lab-frame angular frequency ``|E_upper - E_lower|`` of a pair of levels."""
    if lower == upper:
        raise ValueError("transition between identical levels")
    return abs(upper.lab_energy(omega_cavity) - lower.lab_energy(omega_cavity))


def frame_offset(lower: DressedLevel, upper: DressedLevel) -> float:
    """Drive detuning ``omega_s - omega`` that is resonant with the transition.

    Signed so that an absorbing drive (one extra excitation in ``upper``) uses it directly.
    """
    d_exc = upper.excitations - lower.excitations
    if abs(d_exc) != 1:
        raise ValueError(f"{lower.name} and {upper.name} are not one excitation apart")
    return (upper.energy - lower.energy) * d_exc


def sigma_x_element(a: DressedLevel, b: DressedLevel) -> float:
    """``<b| (|e><g| + |g><e|) |a>``."""
    amp_b = dict(b.components)
    total = 0.0
    for (n, lev), amp in a.components:
        if lev is AtomLevel.G:
            total += amp * amp_b.get((n, AtomLevel.E), 0.0)
        elif lev is AtomLevel.E:
            total += amp * amp_b.get((n, AtomLevel.G), 0.0)
    return float(total)


def drive_matrix_element(d: DriveSpec, initial: DressedLevel, final: DressedLevel) -> complex:
    """Peak Rabi coupling ``(xi0/2) <final|sigma_x|initial>`` of the drive between two levels."""
    return complex(0.5 * d.xi0 * sigma_x_element(initial, final))


def sector_levels(coupling: CouplingProfile, delta: float, cutoff: int, t: float = 0.0
                  ) -> list[DressedLevel]:
    """All g/e-manifold levels inside the truncation: ``|g,0>`` and each full sector."""
    out = [bare_level(0, AtomLevel.G, delta, t)]
    for n in range(cutoff - 1):
        out += [dressed_level(coupling, delta, n, "-", t), dressed_level(coupling, delta, n, "+", t)]
    return out


@dataclass(frozen=True)
class Transition:
    lower: DressedLevel
    upper: DressedLevel
    frequency: float
    sigma_x: float


def allowed_transitions(coupling: CouplingProfile, delta: float, cutoff: int,
                        omega_cavity: float, t: float = 0.0, min_element: float = 1e-12
                        ) -> list[Transition]:
    """Drive-allowed transitions among the truncated levels, ordered by frequency."""
    out = []
    for a, b in combinations(sector_levels(coupling, delta, cutoff, t), 2):
        if abs(a.excitations - b.excitations) != 1:
            continue
        lo, hi = (a, b) if a.excitations < b.excitations else (b, a)
        m = sigma_x_element(lo, hi)
        if abs(m) > min_element:
            out.append(Transition(lo, hi, transition_frequency(lo, hi, omega_cavity), m))
    return sorted(out, key=lambda tr: tr.frequency)



def selectivity_margin(lower: DressedLevel, upper: DressedLevel, coupling: CouplingProfile,
                       delta: float, cutoff: int, omega_cavity: float) -> tuple[float, Transition]:
    """Smallest frequency gap from the target to any other allowed transition."""
    f0 = transition_frequency(lower, upper, omega_cavity)
    best, worst = np.inf, None
    for tr in allowed_transitions(coupling, delta, cutoff, omega_cavity, lower.t):
        if {_key(tr.lower), _key(tr.upper)} == {_key(lower), _key(upper)}:
            continue
        gap = abs(tr.frequency - f0)
        if gap < best:
            best, worst = gap, tr
    return best, worst


def _key(lv: DressedLevel):
    return (lv.branch, lv.components[0][0] if lv.branch == "bare" else lv.n)


def check_selectivity(lower: DressedLevel, upper: DressedLevel, coupling: CouplingProfile,
                      delta: float, cutoff: int, omega_cavity: float, tau_s: float,
                      factor: float = DEFAULT_SELECTIVITY_FACTOR) -> float:
    """Raise :class:`SelectivityError` unless every parasitic line is > factor/tau_s away.

    Returns the margin in units of ``1/tau_s``.
    """
    gap, worst = selectivity_margin(lower, upper, coupling, delta, cutoff, omega_cavity)
    ratio = gap * tau_s
    if ratio <= factor:
        raise SelectivityError(
            f"{lower.name}<->{upper.name} lies {ratio:.4g}/tau_s from "
            f"{worst.lower.name}<->{worst.upper.name}; need > {factor}/tau_s")
    return float(ratio)


def spectrum_rows(coupling: CouplingProfile, delta: float, n_values: Iterable[int],
                  times: Sequence[float], omega_cavity: float | None = None):
    """Rows ``(t, n, branch, energy)``; energies are lab values if ``omega_cavity`` is given."""
    for t in times:
        for n in n_values:
            for br in ("-", "+"):
                lv = dressed_level(coupling, delta, n, br, t)
                e = lv.energy if omega_cavity is None else lv.lab_energy(omega_cavity)
                yield float(t), n, br, e


def spectrum_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "n", "branch", "energy"])
    for t, n, br, e in rows:
        w.writerow([f"{t:.12g}", n, br, f"{e:.12g}"])
    return buf.getvalue()
