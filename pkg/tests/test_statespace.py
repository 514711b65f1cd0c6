import numpy as np
import pytest
from hypothesis import given, strategies as st

from cavityqc.errors import LayoutMismatch, OutOfTruncation
from cavityqc.statespace import (AtomLevel, BasisLabel, StateVector, SystemLayout, apply_local,
                                 basis_state, overlap, reduced_density_matrix,
                                 reduced_populations, subsystem_purity, superpose)


@pytest.fixture
def layout():
    return SystemLayout.build(["A", "B"], ["a1"], cutoff=3)


def random_state(layout, seed):
    r = np.random.default_rng(seed)
    v = r.normal(size=layout.dimension) + 1j * r.normal(size=layout.dimension)
    return StateVector.from_array(layout, v, normalize=True)


class TestLayout:
    def test_shape_and_dimension(self, layout):
        assert layout.shape == (3, 3, 3)
        assert layout.dimension == 27

    def test_index_roundtrip(self, layout):
        for k in range(layout.dimension):
            assert layout.index(layout.label_of(k)) == k

    def test_index_order_is_cavities_then_atoms(self, layout):
        assert layout.index(BasisLabel((1, 2), ("e",))) == 1 * 9 + 2 * 3 + 2

    def test_out_of_truncation(self, layout):
        with pytest.raises(OutOfTruncation):
            layout.index(BasisLabel((3, 0), ("g",)))

    def test_label_mismatch(self, layout):
        with pytest.raises(LayoutMismatch):
            layout.index(BasisLabel((0,), ("g",)))
        with pytest.raises(LayoutMismatch):
            layout.axis("Z")

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValueError):
            SystemLayout.build(["A", "A"])

    def test_level_parse(self):
        assert AtomLevel.parse("e") is AtomLevel.E
        assert AtomLevel.parse(0) is AtomLevel.I
        with pytest.raises(ValueError):
            AtomLevel.parse("x")


class TestStateVector:
    def test_unnormalized_rejected(self, layout):
        with pytest.raises(ValueError):
            StateVector(layout, np.ones(layout.dimension))

    def test_read_only(self, layout):
        s = basis_state(layout, BasisLabel((0, 0), ("g",)))
        with pytest.raises(ValueError):
            s.amplitudes[0] = 1.0

    def test_superpose_and_overlap(self, layout):
        a = basis_state(layout, BasisLabel((0, 1), ("g",)))
        b = basis_state(layout, BasisLabel((1, 0), ("e",)))
        s = superpose([(1.0, a), (1j, b)])
        assert overlap(a, s) == pytest.approx(1 / np.sqrt(2))
        assert overlap(b, s) == pytest.approx(1j / np.sqrt(2))

    def test_product_state_is_pure(self, layout):
        s = basis_state(layout, BasisLabel((2, 1), ("i",)))
        for lb in layout.labels:
            assert subsystem_purity(s, lb) == pytest.approx(1.0)

    def test_bell_pair_purity_half(self, layout):
        a = basis_state(layout, BasisLabel((0, 1), ("g",)))
        b = basis_state(layout, BasisLabel((1, 0), ("g",)))
        s = superpose([(1.0, a), (1.0, b)])
        assert subsystem_purity(s, "A") == pytest.approx(0.5)
        assert subsystem_purity(s, "a1") == pytest.approx(1.0)
        np.testing.assert_allclose(reduced_populations(s, "B"), [0.5, 0.5, 0.0])

    @given(st.integers(0, 10_000))
    def test_purity_bounds(self, seed):
        lay = SystemLayout.build(["A", "B"], ["a1"], cutoff=3)
        s = random_state(lay, seed)
        for lb in lay.labels:
            p = subsystem_purity(s, lb)
            assert 1 / 3 - 1e-12 <= p <= 1 + 1e-12
            rho = reduced_density_matrix(s, lb)
            assert np.trace(rho).real == pytest.approx(1.0)
            np.testing.assert_allclose(rho, rho.conj().T, atol=1e-14)


class TestApplyLocal:
    def test_matches_kron(self, layout):
        s = random_state(layout, 1)
        r = np.random.default_rng(2)
        op = r.normal(size=(9, 9)) + 1j * r.normal(size=(9, 9))
        out = apply_local(s.tensor(), layout, op, ["B", "a1"])
        full = np.kron(np.eye(3), op)
        np.testing.assert_allclose(out.reshape(-1), full @ s.amplitudes, atol=1e-12)

    def test_reversed_order(self, layout):
        s = random_state(layout, 3)
        x = np.zeros((3, 3))
        x[0, 1] = x[1, 0] = x[2, 2] = 1
        op = np.kron(x, np.eye(3))
        a = apply_local(s.tensor(), layout, op, ["a1", "A"])
        b = apply_local(s.tensor(), layout, np.kron(np.eye(3), x), ["A", "a1"])
        np.testing.assert_allclose(a, b)

    def test_batch_axes(self, layout):
        cols = np.stack([random_state(layout, k).amplitudes for k in range(4)], axis=1)
        op = np.diag(np.exp(1j * np.arange(3)))
        out = apply_local(cols.reshape(layout.shape + (4,)), layout, op, ["A"])
        for k in range(4):
            single = apply_local(cols[:, k].reshape(layout.shape), layout, op, ["A"])
            np.testing.assert_allclose(out[..., k], single)

    def test_shape_mismatch(self, layout):
        with pytest.raises(LayoutMismatch):
            apply_local(np.zeros(layout.shape), layout, np.eye(4), ["A"])
