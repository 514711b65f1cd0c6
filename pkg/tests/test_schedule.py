import numpy as np
import pytest

from cavityqc.errors import LayoutMismatch
from cavityqc.protocol import (Itinerary, PhaseCorrection, Schedule, chain_layout,
                               cnot_atom_to_cavity, execute, flip_ge, hadamard_ig,
                               ideal_pair_unitary, idle_crossing, logical_occupations,
                               memory_swap, product_inputs, qpg)
from cavityqc.statespace import AtomLevel, BasisLabel


@pytest.fixture(scope="module")
def two_cavity(device):
    return chain_layout(device, ["A", "B"], ["a1", "a2"], "M")


class TestStructure:
    def test_atom_flies_once(self, device, two_cavity):
        it = Itinerary("a1", "forward", "g", (idle_crossing(device, "a1", "A"),))
        with pytest.raises(LayoutMismatch):
            Schedule(two_cavity, (it, it))

    def test_visit_order(self, device, two_cavity):
        bad = Itinerary("a1", "forward", "g", (idle_crossing(device, "a1", "B"),
                                                idle_crossing(device, "a1", "A")))
        with pytest.raises(LayoutMismatch):
            Schedule(two_cavity, (bad,), ("A", "B", "M"))
        back = Itinerary("a1", "backward", "g", (idle_crossing(device, "a1", "B"),
                                                  idle_crossing(device, "a1", "A")))
        Schedule(two_cavity, (back,), ("A", "B", "M"))

    def test_foreign_step(self, device):
        with pytest.raises(LayoutMismatch):
            Itinerary("a1", "forward", "g", (flip_ge("a2"),))

    def test_entry_levels_and_count(self, device):
        s = qpg(device)
        assert s.atom_count == 2
        assert s.entry_levels() == {"a1": AtomLevel.I, "a2": AtomLevel.G}

    def test_logical_order(self):
        assert logical_occupations(2) == [(0, 0), (0, 1), (1, 0), (1, 1)]


class TestSerialization:
    def test_roundtrip(self, device):
        s = qpg(device).with_stages(PhaseCorrection("A", (0.0, 0.25)))
        text = s.to_json()
        back = Schedule.from_json(text)
        assert back.to_json() == text
        inp = product_inputs(s, [(1, 1, 0)])
        np.testing.assert_allclose(execute(back, inp)[0], execute(s, inp)[0], atol=1e-12)

    def test_format_tag(self, device):
        d = qpg(device).to_dict()
        assert d["format"] == "cavityqc-pulse-program/1"


class TestExecution:
    def test_ideal_memory_swap(self, device):
        ev = memory_swap(device, "a1", "M")
        u = ideal_pair_unitary(ev, 4)
        e0, g1 = 2, 4
        assert u[g1, e0] == -1j and u[e0, g1] == -1j
        np.testing.assert_allclose(u.conj().T @ u, np.eye(12))

    def test_ideal_cnot_pulse(self, device):
        u = ideal_pair_unitary(cnot_atom_to_cavity(device, "a1", "A"), 4)
        g0, g1, e0 = 1, 4, 2
        assert u[g1, g0] == 1 and u[g0, g1] == 1 and u[e0, e0] == 1

    def test_checkpoints(self, device, two_cavity):
        it = Itinerary("a1", "forward", "i", (hadamard_ig("a1"), hadamard_ig("a1")))
        s = Schedule(two_cavity, (it, PhaseCorrection("A", (0.0, np.pi))))
        inp = product_inputs(s, [(1, 0, 0)])
        out, marks = execute(s, inp, checkpoints=True)
        assert [m.label for m in marks] == ["a1:0:pi/2(i,g)", "a1:1:pi/2(i,g)", "phase:A"]
        idx = two_cavity.index(BasisLabel((1, 0, 0), ("i", "g")))
        assert out[idx, 0] == pytest.approx(-1.0)

    def test_batch_matches_single(self, device):
        s = qpg(device)
        inp = product_inputs(s, [(0, 1, 0), (1, 1, 0)])
        both, _ = execute(s, inp, ideal=True)
        one, _ = execute(s, inp[:, 1], ideal=True)
        np.testing.assert_allclose(both[:, 1], one[:, 0])
