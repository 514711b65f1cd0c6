import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cavityqc import tomography as tomo
from cavityqc.errors import EntanglementResidue, LayoutMismatch
from cavityqc.statespace import SystemLayout


def gauge(n, out, inp=None, gamma=0.0):
    bits = np.array([[(k >> (n - 1 - q)) & 1 for q in range(n)] for k in range(2 ** n)])
    ro = bits @ np.asarray(out)
    ci = bits @ np.asarray(inp if inp is not None else np.zeros(n))
    return np.exp(1j * (gamma + ro[:, None] + ci[None, :]))


def gate(raw):
    n = int(np.log2(raw.shape[0]))
    return tomo.GateMatrix(raw.shape[0], tomo.basis_labels(n), raw)


class TestPhaseCleanup:
    @given(st.lists(st.floats(-3, 3), min_size=5, max_size=5))
    def test_recovers_both_side_gauge(self, ph):
        raw = gauge(2, ph[:2], ph[2:4], ph[4]) * tomo.CNOT_INV
        g = tomo.phase_cleanup(gate(raw), tomo.CNOT_INV, restarts=4)
        assert tomo.fidelity(g, tomo.CNOT_INV).process_fidelity == pytest.approx(1.0, abs=1e-10)

    @given(st.floats(-0.7, 0.7), st.lists(st.floats(-3, 3), min_size=3, max_size=3))
    def test_identifies_lambda_output_side(self, lam, ph):
        raw = gauge(2, ph[:2], gamma=ph[2]) * tomo.cnot_inv_lambda(lam)
        g = tomo.phase_cleanup(gate(raw), tomo.EQ_CNOT_INV, sides="output", restarts=4)
        expected = float(tomo.fold_quarter(lam))
        got = g.residual_params["lambda"]
        assert abs(float(tomo.fold_quarter(got - expected))) < 1e-7
        np.testing.assert_allclose(g.cleaned, tomo.cnot_inv_lambda(got), atol=1e-7)

    def test_lambda_folded_into_quarter_period(self):
        raw = tomo.cnot_inv_lambda(0.1 + np.pi / 2)
        g = tomo.phase_cleanup(gate(raw), tomo.EQ_CNOT_INV, sides="output")
        assert g.residual_params["lambda"] == pytest.approx(0.1, abs=1e-8)

    def test_lambda_removable_with_input_phases(self):
        raw = tomo.cnot_inv_lambda(0.3)
        g = tomo.phase_cleanup(gate(raw), tomo.CNOT_INV)
        assert tomo.fidelity(g, tomo.CNOT_INV).process_fidelity == pytest.approx(1.0, abs=1e-10)

    def test_controlled_phase_not_local(self):
        # local phases reach at most 1/2 overlap with a controlled-Z
        g = tomo.phase_cleanup(gate(np.eye(4, dtype=complex)), tomo.QPG)
        assert tomo.fidelity(g, tomo.QPG).process_fidelity == pytest.approx(0.5, abs=1e-9)

    def test_bad_sides(self):
        with pytest.raises(ValueError):
            tomo.phase_cleanup(gate(np.eye(2, dtype=complex)), np.eye(2), sides="input")


class TestFidelity:
    def test_known_values(self):
        rep = tomo.fidelity(tomo.CNOT, tomo.CNOT_INV)
        assert rep.process_fidelity == 0.0
        assert rep.min_truth_table == 0.0
        rep = tomo.fidelity(np.eye(4), np.eye(4))
        assert rep.process_fidelity == 1.0 and rep.max_element_deviation == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(LayoutMismatch):
            tomo.fidelity(np.eye(2), np.eye(4))

    def test_toffoli_target(self):
        t = tomo.toffoli_matrix(3)
        assert t[6, 7] == 1 and t[7, 6] == 1 and t[5, 5] == 1
        assert tomo.toffoli_matrix(4)[15, 14] == 1

    def test_state_fidelity(self):
        assert tomo.state_fidelity(np.array([1, 1j]), np.array([1j, -1])) == pytest.approx(1.0)


class TestExtractionHelpers:
    def test_entangled_atom_rejected(self):
        lay = SystemLayout.build(["A"], ["a1"], cutoff=2)
        bell = np.zeros((6, 1), dtype=complex)
        bell[1] = bell[3 + 2] = 1 / np.sqrt(2)  # |0,g> + |1,e>
        with pytest.raises(EntanglementResidue):
            tomo.atom_reference_states(lay, bell)
        refs, purity = tomo.atom_reference_states(lay, bell, floor=0.0)
        assert purity["a1"] == pytest.approx(0.5)

    def test_project_logical(self):
        lay = SystemLayout.build(["A", "B"], ["a1"], cutoff=3)
        cols = np.zeros((lay.dimension, 2), dtype=complex)
        cols[lay.index(tomo_label((1, 0), "g")), 0] = 1.0
        cols[lay.index(tomo_label((0, 0), "g")), 1] = 1j
        refs, _ = tomo.atom_reference_states(lay, cols)
        amps = tomo.project_logical(lay, cols, ["A"], refs)
        np.testing.assert_allclose(np.abs(amps), [[0, 1], [1, 0]])


def tomo_label(occ, lev):
    from cavityqc.statespace import BasisLabel
    return BasisLabel(occ, (lev,))


class TestOutput:
    def test_json_rounded_and_stable(self):
        g = tomo.phase_cleanup(gate(tomo.cnot_inv_lambda(0.123456789012345)), tomo.EQ_CNOT_INV,
                               sides="output")
        text = g.to_json()
        assert text == g.to_json()
        d = json.loads(text)
        assert d["residual_params"]["lambda"] == pytest.approx(0.123456789012, abs=1e-12)

    def test_round_sig_numpy(self):
        out = tomo.round_sig({"a": np.float64(1 / 3), "b": np.int64(2), "c": np.array([0.5])})
        assert out == {"a": 0.333333333333, "b": 2, "c": [0.5]}
        json.dumps(out)

    def test_matrix_csv(self):
        text = tomo.matrix_csv(np.array([[1, 1j], [0, -1]]))
        assert text.splitlines() == ["1,0,0,1", "0,0,-1,0"]
