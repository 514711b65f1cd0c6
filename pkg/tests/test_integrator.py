import os
import subprocess
import sys

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.special import erf

from cavityqc import integrator
from cavityqc.errors import NumericalFailure
from cavityqc.hamiltonian import CouplingProfile, DetuningSpec, DriveSpec, PairHamiltonian
from cavityqc.integrator import (EvolutionWindow, TraceRequest, evolve, pair_propagator,
                                 propagator, unitarity_defect)
from cavityqc.statespace import BasisLabel, StateVector, SystemLayout, basis_state

OMEGA_CAV = 2 * np.pi * 51e9


@pytest.fixture
def layout():
    return SystemLayout.build(["A"], ["a1"], cutoff=4, omega=OMEGA_CAV)


@pytest.fixture
def driven(layout):
    drive = DriveSpec(1.4e5, OMEGA_CAV - 4.2e4, 0.7, 19e-6)
    return PairHamiltonian(layout, "a1", "A", CouplingProfile(), DetuningSpec(), (drive,))


def random_state(layout, seed):
    r = np.random.default_rng(seed)
    v = r.normal(size=layout.dimension) + 1j * r.normal(size=layout.dimension)
    return StateVector.from_array(layout, v, normalize=True)


@pytest.fixture(params=integrator.available_backends())
def backend(request):
    before = integrator.get_backend()
    integrator.set_backend(request.param)
    yield request.param
    integrator.set_backend(before)


class TestOracles:
    def test_solve_ivp_oracle(self, layout, driven):
        """An independent high-order integrator on the same matrix function."""
        psi0 = random_state(layout, 0)
        w = EvolutionWindow(-4e-4, 4e-4)
        out, _ = evolve(psi0, driven, w)
        sol = solve_ivp(lambda t, y: -1j * (driven.evaluate(t) @ y), (w.t_start, w.t_end),
                        psi0.amplitudes, method="DOP853", rtol=1e-12, atol=1e-13,
                        max_step=19e-6 / 50)
        np.testing.assert_allclose(out.amplitudes, sol.y[:, -1], atol=2e-8)

    def test_resonant_rabi_area(self, layout):
        """At zero detuning |e,0> <-> |g,1> rotates by the windowed coupling area."""
        c = CouplingProfile(2.0e4, 1e-4)
        h = PairHamiltonian(layout, "a1", "A", c, DetuningSpec(0.0))
        w = EvolutionWindow.centered(4e-4)
        out, _ = evolve(basis_state(layout, BasisLabel((0,), ("e",))), h, w)
        area = c.omega0 * np.sqrt(np.pi) * c.tau * erf(4.0)
        amp = out.amplitudes[layout.index(BasisLabel((1,), ("g",)))]
        assert abs(amp) ** 2 == pytest.approx(np.sin(area) ** 2, abs=1e-9)
        assert amp == pytest.approx(-1j * np.sin(area), abs=1e-8)

    def test_stark_window_phase(self, layout):
        """Without coupling the g/e phases integrate the piecewise detuning exactly."""
        det = DetuningSpec(1e5, 3e5, (-1e-4, 5e-5))
        h = PairHamiltonian(layout, "a1", "A", CouplingProfile(0.0), det)
        w = EvolutionWindow(-2e-4, 2e-4)
        u = propagator(h, w, [BasisLabel((0,), ("g",)), BasisLabel((0,), ("e",))])
        integral = 1e5 * 4e-4 + 3e5 * 1.5e-4
        assert u[0, 0] == pytest.approx(np.exp(0.5j * integral), abs=1e-9)
        assert u[1, 1] == pytest.approx(np.exp(-0.5j * integral), abs=1e-9)

    def test_level_i_untouched(self, layout, driven):
        psi = basis_state(layout, BasisLabel((2,), ("i",)))
        out, _ = evolve(psi, driven, EvolutionWindow(-4e-4, 4e-4))
        assert abs(out.amplitudes[layout.index(BasisLabel((2,), ("i",)))]) == pytest.approx(1.0)


class TestProperties:
    def test_norm_and_unitarity(self, driven):
        w = EvolutionWindow(-4e-4, 4e-4)
        u = pair_propagator(driven, w)
        assert unitarity_defect(u) < 1e-6

    def test_norm_drift_in_trace(self, layout, driven):
        w = EvolutionWindow(-4e-4, 4e-4, record=TraceRequest({}, 50))
        _, trace = evolve(random_state(layout, 3), driven, w)
        assert np.max(np.abs(trace.norm_drift)) < 1e-8

    def test_time_reversal(self, layout):
        """Real Hamiltonian even in t: conj(psi(T)) evolves back to conj(psi(-T))."""
        h = PairHamiltonian(layout, "a1", "A", CouplingProfile(), DetuningSpec())
        w = EvolutionWindow.centered(4e-4)
        psi0 = random_state(layout, 7)
        mid, _ = evolve(psi0, h, w)
        back, _ = evolve(StateVector(layout, mid.amplitudes.conj()), h, w)
        np.testing.assert_allclose(back.amplitudes.conj(), psi0.amplitudes, atol=1e-7)

    def test_budget_exhaustion(self, layout, driven):
        w = EvolutionWindow(-4e-4, 4e-4, max_steps=10)
        with pytest.raises(NumericalFailure) as exc:
            evolve(random_state(layout, 1), driven, w)
        assert exc.value.to_dict()["error"] == "numerical_failure"

    def test_spectator_passthrough(self, driven):
        """A spectator cavity factors out of the pair evolution."""
        lay2 = SystemLayout.build(["A", "B"], ["a1"], cutoff=4, omega=OMEGA_CAV)
        h2 = PairHamiltonian(lay2, "a1", "A", driven.coupling, driven.detuning, driven.drives)
        w = EvolutionWindow(-4e-4, 4e-4)
        u1 = propagator(driven, w)
        u2 = propagator(h2, w)
        # B index is the middle axis; fix B=1
        idx = [lay2.index(BasisLabel((a, 1), (lv,))) for a in range(4) for lv in "ige"]
        np.testing.assert_allclose(u2[np.ix_(idx, idx)], u1, atol=1e-12)


class TestTrace:
    def test_trace_grid_and_csv(self, layout):
        h = PairHamiltonian(layout, "a1", "A", CouplingProfile(), DetuningSpec())
        g1 = np.zeros(layout.dimension)
        g1[layout.index(BasisLabel((1,), ("g",)))] = 1.0
        req = TraceRequest({"g,1": lambda t: g1}, 11)
        _, trace = evolve(basis_state(layout, BasisLabel((1,), ("g",))), h,
                          EvolutionWindow.centered(4e-4, record=req))
        assert len(trace.times) == 11
        assert trace.populations["g,1"][0] == 1.0
        text = trace.to_csv()
        assert text.splitlines()[0] == 't,"g,1",norm'
        assert text == trace.to_csv()


class TestBackends:
    def test_agreement(self, layout, driven):
        if len(integrator.available_backends()) < 2:
            pytest.skip("compiled kernel not built")
        w = EvolutionWindow(-1.5e-4, 1.5e-4)
        before = integrator.get_backend()
        res = {}
        try:
            for name in ("python", "compiled"):
                integrator.set_backend(name)
                res[name] = pair_propagator(driven, w)
        finally:
            integrator.set_backend(before)
        np.testing.assert_allclose(res["python"], res["compiled"], atol=1e-12)

    def test_each_backend_unitary(self, backend, driven):
        u = pair_propagator(driven, EvolutionWindow(-1e-4, 1e-4))
        assert unitarity_defect(u) < 1e-6

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            integrator.set_backend("fortran")

    def test_env_forces_fallback(self):
        env = dict(os.environ, CAVITYQC_PURE_PYTHON="1")
        out = subprocess.run([sys.executable, "-c",
                              "from cavityqc import integrator; print(integrator.get_backend())"],
                             env=env, capture_output=True, text=True, check=True)
        assert out.stdout.strip() == "python"
