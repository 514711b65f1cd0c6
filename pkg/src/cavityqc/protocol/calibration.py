"""Numerical pulse calibration on a single atom-cavity pair."""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import erf

from ..dressed import (DressedLevel, check_selectivity, frame_offset, parse_level,
                       sigma_x_element, transition_frequency)
from ..errors import CalibrationError
from ..hamiltonian import CouplingProfile, DetuningSpec, DriveSpec, PairHamiltonian, pair_index
from ..integrator import EvolutionWindow, pair_propagator
from ..statespace import AtomLevel, CavitySpec, SystemLayout
from .schedule import Device

AREAS = {"pi": np.pi, "pi/2": np.pi / 2}
MIN_PI_TRANSFER = 0.99
HALF_TRANSFER_TOL = 1e-3


@dataclass(frozen=True)
class CalibrationResult:
    intent: str
    area: str
    drive: DriveSpec
    transfer: float
    residual_phase: float
    seed_xi0: float
    selectivity: float
    evaluations: int

    def to_dict(self) -> dict:
        return {"intent": self.intent, "area": self.area, "xi0_rad_per_s": self.drive.xi0,
                "omega_s_rad_per_s": self.drive.omega_s, "tau_s_s": self.drive.tau_s,
                "phi_s_rad": self.drive.phi_s, "transfer_probability": self.transfer,
                "residual_phase_rad": self.residual_phase, "seed_xi0_rad_per_s": self.seed_xi0,
                "selectivity_per_tau_s": self.selectivity, "evaluations": self.evaluations}


def asymptote(level: DressedLevel, delta: float) -> tuple[int, AtomLevel]:
    """Bare state the level connects to adiabatically once the atom has left."""
    if level.branch == "bare":
        return level.components[0][0]
    upper_is_e = delta >= 0
    if (level.branch == "+") == upper_is_e:
        return level.n, AtomLevel.E
    return level.n + 1, AtomLevel.G


def _pair_layout(device: Device) -> SystemLayout:
    return SystemLayout((CavitySpec("c", device.fock_cutoff, device.omega_cavity),), ("a",))


def drive_for(device: Device, lower: DressedLevel, upper: DressedLevel, tau_s: float,
              xi0: float, phi_s: float = 0.0) -> DriveSpec:
    omega_s = device.omega_cavity + frame_offset(lower, upper)
    return DriveSpec(xi0, omega_s, phi_s, tau_s, 0.0, device.rwa)


def transfer_amplitude(device: Device, lower: DressedLevel, upper: DressedLevel,
                       drive: DriveSpec) -> complex:
    lay = _pair_layout(device)
    h = PairHamiltonian(lay, "a", "c", device.coupling(), DetuningSpec(device.delta), (drive,))
    u = pair_propagator(h, device.window())
    i0 = pair_index(*asymptote(lower, device.delta))
    i1 = pair_index(*asymptote(upper, device.delta))
    return complex(u[i1, i0])


def gaussian_area_seed(matrix_element: float, tau_s: float, area: float) -> float:
    """Peak drive giving rotation angle ``area`` for effective coupling ``xi0*|m|/2``."""
    return area / (abs(matrix_element) * np.sqrt(np.pi) * tau_s)


@lru_cache(maxsize=128)
def calibrate_pulse(device: Device, lower: str, upper: str, tau_s: float,
                    area: str = "pi", min_transfer: float = MIN_PI_TRANSFER) -> CalibrationResult:
    """Solve the drive amplitude for a pi or pi/2 pulse between two dressed levels.

    The Gaussian-area formula seeds a bounded search that maximizes the
    simulated transfer (pi) or a root-find of transfer = 1/2 (pi/2).
    """
    if area not in AREAS:
        raise CalibrationError(f"unknown area {area!r}; expected one of {sorted(AREAS)}")
    coupling = device.coupling()
    lo = parse_level(lower, coupling, device.delta)
    hi = parse_level(upper, coupling, device.delta)
    intent = f"{lo.name}<->{hi.name}"
    m = sigma_x_element(lo, hi)
    if abs(m) < 1e-9:
        raise CalibrationError(f"{intent} has no dipole matrix element; it cannot be driven")
    sel = check_selectivity(lo, hi, coupling, device.delta, device.fock_cutoff,
                            device.omega_cavity, tau_s, device.selectivity_factor)
    seed_pi = gaussian_area_seed(m, tau_s, np.pi)
    count = [0]

    def prob(xi0):
        count[0] += 1
        return abs(transfer_amplitude(device, lo, hi, drive_for(device, lo, hi, tau_s, xi0))) ** 2

    res = minimize_scalar(lambda x: -prob(x), bounds=(0.7 * seed_pi, 1.4 * seed_pi),
                          method="bounded", options={"xatol": 1e-6 * seed_pi})
    xi_pi, p_pi = float(res.x), float(-res.fun)
    if p_pi < min_transfer:
        raise CalibrationError(f"{intent}: best pi transfer {p_pi:.6f} below {min_transfer}")
    if area == "pi":
        xi, p = xi_pi, p_pi
    else:
        if p_pi < 0.5:
            raise CalibrationError(f"{intent}: transfer never reaches 1/2")
        lo_x = 0.2 * xi_pi
        if prob(lo_x) >= 0.5:
            raise CalibrationError(f"{intent}: no pi/2 root in bracket")
        xi = float(brentq(lambda x: prob(x) - 0.5, lo_x, xi_pi, xtol=1e-9 * xi_pi))
        p = prob(xi)
        if abs(p - 0.5) > HALF_TRANSFER_TOL:
            raise CalibrationError(f"{intent}: pi/2 transfer {p:.6f} outside 0.5 +/- 1e-3")
    drive = drive_for(device, lo, hi, tau_s, xi)
    amp = transfer_amplitude(device, lo, hi, drive)
    return CalibrationResult(intent, area, drive, float(p), float(np.angle(amp)),
                             float(gaussian_area_seed(m, tau_s, AREAS[area])),
                             float(sel), count[0] + 1)


def calibrated_drive(device: Device, lower: str, upper: str, tau_s: float, area: str = "pi",
                     phi_s: float = 0.0) -> DriveSpec:
    return replace(calibrate_pulse(device, lower, upper, tau_s, area).drive, phi_s=phi_s)


def resonant_area_omega0(tau: float, area: float, half_width: float) -> float:
    """Peak coupling whose resonant ``|g,1> <-> |e,0>`` rotation inside the window is ``area``."""
    return area / (2.0 * np.sqrt(np.pi) * tau * erf(half_width))


def resonant_area_tau(omega0: float, area: float, half_width: float) -> float:
    """Transit width whose resonant rotation at fixed ``omega0`` is ``area``."""
    return area / (2.0 * np.sqrt(np.pi) * omega0 * erf(half_width))


def resonant_transfer(device: Device, coupling: CouplingProfile, window: EvolutionWindow) -> float:
    """Simulated ``|e,0> -> |g,1>`` probability for a resonant crossing."""
    lay = _pair_layout(device)
    h = PairHamiltonian(lay, "a", "c", coupling, DetuningSpec(0.0))
    u = pair_propagator(h, window)
    return float(abs(u[pair_index(1, "g"), pair_index(0, "e")]) ** 2)


def pulse_frequency(device: Device, lower: str, upper: str) -> float:
    c = device.coupling()
    return transition_frequency(parse_level(lower, c, device.delta),
                                parse_level(upper, c, device.delta), device.omega_cavity)
