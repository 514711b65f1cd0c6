import numpy as np
import pytest
from scipy.integrate import quad

from cavityqc.hamiltonian import (NOMINAL_DELTA, NOMINAL_OMEGA0, CouplingProfile, DetuningSpec,
                                  DriveSpec, PairHamiltonian, drive_term, pair_index, pair_matrix)
from cavityqc.statespace import SystemLayout


@pytest.fixture
def ham():
    lay = SystemLayout.build(["A", "B"], ["a1"], cutoff=4)
    drive = DriveSpec(1.4e5, 2 * np.pi * 51e9 + 3e4, 0.3, 19e-6)
    return PairHamiltonian(lay, "a1", "B", CouplingProfile(), DetuningSpec(), (drive,))


class TestOperatingPoint:
    def test_detuning_ratio(self):
        assert NOMINAL_DELTA / NOMINAL_OMEGA0 == pytest.approx(0.18)


class TestCoupling:
    def test_area_closed_form(self):
        c = CouplingProfile(3.0e5, 80e-6)
        num, _ = quad(c, -1e-3, 1e-3, points=[0.0], limit=200)
        assert c.area == pytest.approx(num, rel=1e-10)

    def test_derivative(self):
        c = CouplingProfile()
        t, h = 37e-6, 1e-10
        assert c.derivative(t) == pytest.approx((c(t + h) - c(t - h)) / (2 * h), rel=1e-6)

    def test_rejects_bad_tau(self):
        with pytest.raises(ValueError):
            CouplingProfile(1.0, 0.0)


class TestDetuning:
    def test_stark_window(self):
        d = DetuningSpec(1.0, 5.0, (-1.0, 1.0))
        assert d(0.0) == 6.0 and d(2.0) == 1.0
        assert d.breakpoints() == [-1.0, 1.0]

    def test_always_on(self):
        d = DetuningSpec(1.0, -1.0)
        assert d(123.0) == 0.0 and d.breakpoints() == []


class TestPairBlock:
    def test_hermitian(self, ham):
        for t in (-2e-4, 0.0, 5e-5):
            h = ham.pair_block(t)
            np.testing.assert_allclose(h, h.conj().T, atol=1e-12)

    def test_bare_energies_without_coupling(self):
        h = pair_matrix(3, 0.0, 2.0, np.zeros((3, 3)))
        for n in range(3):
            assert h[pair_index(n, "i"), pair_index(n, "i")] == 0
            assert h[pair_index(n, "g"), pair_index(n, "g")] == -1.0
            assert h[pair_index(n, "e"), pair_index(n, "e")] == 1.0

    def test_jc_matrix_element(self):
        h = pair_matrix(4, 2.0, 0.0, np.zeros((3, 3)))
        for n in range(3):
            assert h[pair_index(n, "e"), pair_index(n + 1, "g")] == pytest.approx(2 * np.sqrt(n + 1))
        # level i never couples
        assert not np.any(h[pair_index(1, "i"), :])

    def test_composite_embedding(self, ham):
        lay = ham.layout
        h = ham.evaluate(1e-5)
        np.testing.assert_allclose(h, h.conj().T, atol=1e-12)
        # identity on cavity A: blocks for different A occupation do not mix
        d = lay.dimension // 4
        assert np.allclose(h[:d, d:], 0)
        np.testing.assert_allclose(h[:d, :d], h[d:2 * d, d:2 * d])


class TestDrive:
    def test_rwa_is_cycle_average_of_full(self):
        """Averaged over a carrier period the full term reduces to the co-rotating half."""
        d = DriveSpec(1.0, 1e6, 0.4, 1.0)
        d_full = DriveSpec(1.0, 1e6, 0.4, 1.0, rwa=False)
        omega_c = 1e6 - 10.0
        period = 2 * np.pi / 1e6
        ts = np.linspace(0, period, 4001)[:-1]
        full = np.mean([drive_term(d_full, t, omega_c)[2, 1] for t in ts])
        rwa = np.mean([drive_term(d, t, omega_c)[2, 1] for t in ts])
        assert full == pytest.approx(rwa, abs=1e-4)

    def test_envelope_peak(self):
        d = DriveSpec(2.0, 1.0, 0.0, 1e-5, t_center=3e-6)
        assert d.envelope(3e-6) == 2.0

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            DriveSpec(-1.0, 1.0)
