import numpy as np
import pytest

from cavityqc.errors import CalibrationError, SelectivityError
from cavityqc.protocol import Device, calibrate_pulse, resonant_area_omega0, resonant_area_tau
from cavityqc.protocol.calibration import (gaussian_area_seed, pulse_frequency,
                                           resonant_transfer)


class TestDressedPulses:
    def test_atom_to_cavity_amplitude(self, device):
        # published value: 141.5 kHz at tau_S = 19 us
        res = calibrate_pulse(device, "g,0", "V-0", 19e-6)
        assert res.drive.xi0 == pytest.approx(141.5e3, rel=0.01)
        assert res.transfer >= 0.99
        assert res.intent == "g,0<->V-(0)"

    def test_cavity_to_atom_amplitude(self, device):
        # published value: 240 kHz at tau_S = 14 us
        res = calibrate_pulse(device, "V-0", "V+1", 14e-6)
        assert res.drive.xi0 == pytest.approx(240e3, rel=0.01)
        assert res.transfer >= 0.99

    def test_seed_is_gaussian_area(self):
        # pi = (xi0 |m| / 2) * sqrt(pi) tau_s * 2
        assert gaussian_area_seed(0.5, 1e-5, np.pi) * 0.5 * np.sqrt(np.pi) * 1e-5 == \
            pytest.approx(np.pi)

    def test_half_pulse(self, device):
        res = calibrate_pulse(device, "g,0", "V-0", 19e-6, "pi/2")
        assert res.transfer == pytest.approx(0.5, abs=1e-3)
        full = calibrate_pulse(device, "g,0", "V-0", 19e-6)
        assert 0.3 < res.drive.xi0 / full.drive.xi0 < 0.7

    def test_forbidden_transition(self, device):
        with pytest.raises(CalibrationError):
            calibrate_pulse(device, "g,0", "V+2", 19e-6)

    def test_selectivity_factor_four_rejects(self, device):
        with pytest.raises(SelectivityError):
            calibrate_pulse(device.with_(selectivity_factor=4.0), "g,0", "V-0", 19e-6)

    def test_unknown_area(self, device):
        with pytest.raises(CalibrationError):
            calibrate_pulse(device, "g,0", "V-0", 19e-6, "2pi")

    def test_frequency_near_cavity(self, device):
        f = pulse_frequency(device, "g,0", "V-0")
        assert abs(f - device.omega_cavity) < device.omega0


class TestResonant:
    def test_area_inverse_pair(self):
        om = resonant_area_omega0(1e-4, np.pi, 4.0)
        assert resonant_area_tau(om, np.pi, 4.0) == pytest.approx(1e-4)

    def test_memory_swap_complete(self, device):
        om = resonant_area_omega0(device.tau, np.pi, device.window_half_width)
        p = resonant_transfer(device, device.coupling(omega0=om), device.window())
        assert p == pytest.approx(1.0, abs=1e-9)
