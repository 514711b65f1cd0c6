import numpy as np
import pytest

from cavityqc import tomography as tomo
from cavityqc.protocol import (AtomPulse, Device, PhaseCorrection, PulseEvent, atom_source_statistics,
                               cnot_inv, cnot_inv_measured, deutsch_ideal, deutsch_schedule,
                               dressed_trace, execute, ghz_decode, ghz_encode, ideal_pair_unitary,
                               logical_occupations, not_phase_matrix, one_qubit_hadamard,
                               one_qubit_not, product_inputs, qpg, qpg_checkpoint_fidelities,
                               toffoli, toffoli_n)
from cavityqc.protocol.gates import F_GATES, hadamard_phase_matrix, not_phase_theta


def full_operator(layout, op, labels):
    """Brute-force embedding of ``op`` on ``labels`` by comparing basis multi-indices."""
    dim = layout.dimension
    multi = np.array(np.unravel_index(np.arange(dim), layout.shape))
    axes = [layout.axis(lb) for lb in labels]
    dims = [layout.shape[a] for a in axes]
    rest = [a for a in range(len(layout.shape)) if a not in axes]
    local = np.ravel_multi_index(tuple(multi[a] for a in axes), dims)
    same = np.all(multi[rest][:, :, None] == multi[rest][:, None, :], axis=0)
    return np.where(same, op[local[:, None], local[None, :]], 0.0)


def brute_force_gate(schedule, logical):
    """Ideal product of full-space matrices, projected on the logical inputs and outputs."""
    lay = schedule.layout
    total = np.eye(lay.dimension, dtype=complex)
    for st in schedule.stages:
        if isinstance(st, PhaseCorrection):
            ph = np.zeros(lay.shape[lay.axis(st.subsystem)])
            ph[:len(st.phases)] = st.phases
            total = full_operator(lay, np.diag(np.exp(1j * ph)), [st.subsystem]) @ total
            continue
        for step in st.steps:
            if isinstance(step, PulseEvent):
                u = ideal_pair_unitary(step, lay.cavity(step.cavity).fock_cutoff)
                total = full_operator(lay, u, [step.cavity, step.atom]) @ total
            else:
                total = full_operator(lay, step.matrix, [step.atom]) @ total
    return tomo.extract_gate(schedule, logical, run=lambda inp: total @ inp)


def ideal_gate(schedule, logical):
    return tomo.extract_gate(schedule, logical,
                             run=lambda inp: execute(schedule, inp, ideal=True)[0])


@pytest.fixture(scope="module")
def small():
    return Device(fock_cutoff=3)


class TestIdealOracles:
    def test_cnot_inv(self, small):
        s = cnot_inv(small)
        g = brute_force_gate(s, ["A", "B"])
        np.testing.assert_allclose(g.raw, ideal_gate(s, ["A", "B"]).raw, atol=1e-12)
        gc = tomo.phase_cleanup(g, tomo.EQ_CNOT_INV, sides="output")
        assert tomo.fidelity(gc, tomo.target_matrix(gc, tomo.EQ_CNOT_INV)).process_fidelity \
            == pytest.approx(1.0, abs=1e-10)

    def test_cnot_variant(self, small):
        s = cnot_inv(small, first_level="e", lambda_target=None)
        gc = tomo.phase_cleanup(brute_force_gate(s, ["A", "B"]), tomo.CNOT)
        assert tomo.fidelity(gc, tomo.CNOT).process_fidelity == pytest.approx(1.0, abs=1e-10)

    def test_qpg_exact(self, small):
        g = brute_force_gate(qpg(small), ["A", "B"])
        np.testing.assert_allclose(g.raw, tomo.QPG, atol=1e-12)

    def test_qpg_checkpoints(self, device):
        fids = qpg_checkpoint_fidelities(device, [0.5, 0.5j, -0.5, 0.5], ideal=True)
        assert set(fids) == {"after-first-2pi", "after-second-hadamard", "after-target-2pi",
                             "after-return-hadamard"}
        assert min(fids.values()) == pytest.approx(1.0, abs=1e-12)

    def test_toffoli(self, small):
        s = toffoli(small)
        g = brute_force_gate(s, ["A", "B", "C"])
        np.testing.assert_allclose(g.raw, ideal_gate(s, ["A", "B", "C"]).raw, atol=1e-12)
        np.testing.assert_allclose(np.abs(g.raw), tomo.toffoli_matrix(3), atol=1e-12)
        gc = tomo.phase_cleanup(g, tomo.toffoli_matrix(3))
        assert tomo.fidelity(gc, tomo.toffoli_matrix(3)).process_fidelity == \
            pytest.approx(1.0, abs=1e-10)

    def test_toffoli_four_qubits(self, small):
        s = toffoli_n(small, ("A", "B", "C", "D"))
        g = ideal_gate(s, ["A", "B", "C", "D"])
        np.testing.assert_allclose(np.abs(g.raw), tomo.toffoli_matrix(4), atol=1e-12)
        assert s.atom_count == 2

    def test_toffoli_needs_photon_pairs(self):
        from cavityqc.errors import ConfigError
        with pytest.raises(ConfigError):
            toffoli(Device(fock_cutoff=2))

    def test_ghz(self, small):
        enc, dec = ghz_encode(small, ideal=True), ghz_decode(small, ideal=True)
        ge = ideal_gate(enc, ["A", "B", "C"])
        gd = ideal_gate(dec, ["A", "B", "C"])
        a, b = 0.6, 0.8j
        v = np.zeros(8, complex)
        v[0], v[4] = a, b
        t = np.zeros(8, complex)
        t[0], t[7] = a, b
        assert tomo.state_fidelity(ge.raw @ v, t) == pytest.approx(1.0, abs=1e-12)
        assert tomo.state_fidelity(gd.raw @ (ge.raw @ v), v) == pytest.approx(1.0, abs=1e-12)


class TestSingleQubit:
    def test_not_phase(self, device):
        for theta in (0.0, 1.0, -2.0):
            g = tomo.extract_gate(one_qubit_not(device, "A", theta), ["A"], purity_floor=0.0)
            u = g.raw
            # theta is fixed modulo pi by the global-phase-free ratio u10/u01
            ratio = u[1, 0] / u[0, 1]
            assert ratio / abs(ratio) == pytest.approx(np.exp(2j * theta), abs=1e-6)
            assert abs(u[1, 0]) ** 2 > 0.99

    def test_theta_shift_law(self, device):
        assert not_phase_theta(device, 0.4) == pytest.approx(not_phase_theta(device) - 0.4)

    def test_hadamard_phase(self, device):
        for tp in (0.0, np.pi, 0.8):
            g = tomo.extract_gate(one_qubit_hadamard(device, "A", tp), ["A"], purity_floor=0.0)
            t = hadamard_phase_matrix(tp)
            assert abs(np.trace(t.conj().T @ g.raw)) ** 2 / 4 > 0.999

    def test_matrices(self):
        np.testing.assert_allclose(not_phase_matrix(0.0), [[0, 1], [1, 0]])
        h = hadamard_phase_matrix(0.3)
        np.testing.assert_allclose(h @ h.conj().T, np.eye(2), atol=1e-15)


class TestMeasuredVariant:
    def test_branches(self, device):
        proto = cnot_inv_measured(device)
        inp = product_inputs(proto.schedule, [(0, 0), (1, 1)])
        res = proto.run(inp)
        assert res["g"][0] + res["e"][0] == pytest.approx(1.0, abs=0.02)
        for outcome in "ge":
            g = tomo.extract_gate(proto.schedule, ["A", "B"], run=proto.branch_runner(outcome),
                                  purity_floor=0.0)
            gc = tomo.phase_cleanup(g, tomo.EQ_CNOT_INV, sides="output")
            assert tomo.fidelity(gc, tomo.target_matrix(gc, tomo.EQ_CNOT_INV)).process_fidelity > 0.98


class TestDeutsch:
    @pytest.mark.parametrize("i", [1, 2, 3, 4])
    def test_ideal_verdicts(self, i):
        p0, p1 = deutsch_ideal(i)
        assert (p0 if i in (1, 2) else p1) == pytest.approx(1.0)

    def test_f_gates_are_permutations(self):
        for m in F_GATES.values():
            np.testing.assert_allclose(m @ m.T, np.eye(4))

    @pytest.mark.parametrize("i,atoms", [(1, 2), (2, 2), (3, 4), (4, 4)])
    def test_atom_counts(self, device, i, atoms):
        assert deutsch_schedule(device, i).atom_count == atoms


class TestMisc:
    def test_atom_source(self):
        p, delay = atom_source_statistics(1.0)
        assert p == pytest.approx(np.exp(-1))
        assert delay == pytest.approx(np.e - 1)
        assert atom_source_statistics(0.0)[1] == float("inf")
        assert atom_source_statistics(0.5)[0] < p

    def test_atom_source_optimum_by_scan(self):
        grid = np.linspace(1e-3, 5.0, 5000)
        best = grid[np.argmax([atom_source_statistics(m)[0] for m in grid])]
        assert best == pytest.approx(1.0, abs=grid[1] - grid[0])

    def test_dressed_trace_endpoints(self, device):
        tr = dressed_trace(device, n_points=201)
        assert tr.populations["g,0"][0] == pytest.approx(1.0)
        assert tr.populations["V-0"][-1] > 0.99
        assert np.max(np.abs(tr.norm_drift)) < 1e-8
